#include <iostream>

#include "act2vec/cli.hpp"

int main(int argc, char** argv) { return act2vec::cli::run(argc, argv, std::cout, std::cerr); }
