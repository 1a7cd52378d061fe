#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "act2vec/corpus.hpp"
#include "act2vec/matrix.hpp"

namespace act2vec {

enum class LrDecay { Linear, Constant };

struct SgnsConfig {
    std::size_t dim = 5;
    std::size_t window = 2;
    std::size_t negatives = 5;
    std::size_t epochs = 5;
    double learning_rate = 0.025;
    LrDecay lr_decay = LrDecay::Linear;
    std::uint64_t seed = 1;
    double smoothing_exponent = 0.75;
    int workers = 1;

    // Throws Error naming the first violated constraint.
    void validate() const;
};

// Action (target) vectors and context vectors over one vocabulary.
struct EmbeddingTable {
    ActionVocabulary vocab;
    Matrix action_vectors;
    Matrix context_vectors;

    std::size_t size() const noexcept { return action_vectors.rows(); }
    std::size_t dim() const noexcept { return action_vectors.cols(); }

    std::span<const double> action(std::size_t id) const { return action_vectors.row(id); }
    std::span<const double> context(std::size_t id) const { return context_vectors.row(id); }
    std::span<const double> action(const std::string& token) const {
        return action_vectors.row(vocab.id_of(token));
    }
};

// Action vectors uniform in [-0.5/d, 0.5/d], context vectors zero.
EmbeddingTable init_embeddings(const ActionVocabulary& vocab, const SgnsConfig& config);

double sigmoid(double x);
// log(sigmoid(x)) without overflow for large |x|.
double log_sigmoid(double x);

// sigma(a . c): modelled probability that (a, c) is an observed pair.
double pair_probability(const EmbeddingTable& table, std::size_t action, std::size_t context);

// l(a, c) = log s(a.c) + sum_n log s(-a.c_n), the Monte Carlo form of the local objective.
double sgns_objective(std::span<const double> a, std::span<const double> c,
                      std::span<const std::span<const double>> negatives);

struct SgnsGradient {
    std::vector<double> d_action;
    std::vector<double> d_context;
    std::vector<std::vector<double>> d_negatives;
};

// Analytic gradient of sgns_objective (ascent direction).
SgnsGradient sgns_gradient(std::span<const double> a, std::span<const double> c,
                           std::span<const std::span<const double>> negatives);

// One simultaneous gradient-ascent step on l(a, c); all gradients are taken at the
// pre-update point. Returns -l before the update. Throws DivergenceError when any
// updated entry is non-finite.
double sgns_step(EmbeddingTable& table, ContextPair pair, std::span<const std::uint32_t> negatives,
                 double lr);

struct TrainResult {
    EmbeddingTable table;
    std::vector<double> epoch_losses;  // mean -l per pair
    std::uint64_t pairs_per_epoch = 0;
};

TrainResult train(const Corpus& corpus, const ActionVocabulary& vocab, const SgnsConfig& config);

// Text format: "<vocab_size> <dim>" then "<token> <f1> ... <fd>" with 9 significant digits.
void save_embeddings(const EmbeddingTable& table, const std::string& path);
// Context vectors in the same format at `path + ".ctx"`.
void save_context_vectors(const EmbeddingTable& table, const std::string& path);

// Rows are matched by token; every vocabulary token must appear exactly once. A sibling
// `.ctx` file, when present, fills the context vectors (otherwise they are zero).
EmbeddingTable load_embeddings(const std::string& path, const ActionVocabulary& vocab);
// Builds the vocabulary from the file itself (file order, counts unknown and set to 0).
EmbeddingTable load_embeddings(const std::string& path);

}  // namespace act2vec
