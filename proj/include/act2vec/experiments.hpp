#pragma once

// End-to-end experiment protocols shared by the CLI (`compare`) and the acceptance suite.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "act2vec/agent.hpp"
#include "act2vec/corpus.hpp"
#include "act2vec/envs.hpp"
#include "act2vec/sgns.hpp"

namespace act2vec::experiments {

// Block-structured synthetic corpus: `blocks` groups of `per_block` tokens "t<i>"; each
// next token stays in the current block with probability `stay`.
Corpus block_corpus(std::size_t blocks, std::size_t per_block, double stay, std::size_t trajectories,
                    std::size_t length, std::uint64_t seed);

Corpus nav_corpus(std::size_t n_actions, double noise, std::uint64_t seed);
Corpus square_corpus(std::size_t side, std::size_t n_actions, std::uint64_t seed);

// Replaces every base token by one of its copies "<token>#<i>", uniformly at random.
Corpus relabel_duplicates(const Corpus& corpus, const std::vector<std::string>& base_tokens,
                          const std::vector<std::size_t>& multiplicity, std::uint64_t seed);

// Embedding rows reordered to the environment's action ids (matched by name).
Matrix rows_for_actions(const EmbeddingTable& table, const Environment& env);

// ---- navigation geometry ---------------------------------------------------------------

struct NavGeometryOptions {
    std::size_t corpus_actions = 3000;
    double noise = 0.1;
    std::size_t ngram = 2;
    std::size_t stride = 1;
    SgnsConfig sgns{.dim = 5, .window = 2, .negatives = 5, .epochs = 50};
};

struct NavGeometry {
    double reversal_pair = 0.0;   // cos(L+R, R+L)
    double left_forward = 0.0;    // cos(L+R, F+F)
    double right_forward = 0.0;   // cos(R+L, F+F)
    std::size_t vocabulary = 0;

    bool holds() const { return reversal_pair > left_forward && reversal_pair > right_forward; }
};

NavGeometry nav_geometry(const NavGeometryOptions& options, std::uint64_t seed);

// ---- drawing ---------------------------------------------------------------------------

struct DrawingOptions {
    std::size_t side = 8;
    std::size_t max_steps = 40;
    std::size_t corpus_actions = 20000;
    SgnsConfig sgns{.dim = 5, .window = 2, .negatives = 5, .epochs = 50};
    AgentConfig agent;
    QMode mode = QMode::Baseline;
    double state_scale = 0.125;  // keeps summed embeddings O(1) over an episode
    std::size_t final_window = 1000;
    double target = 0.9;

    DrawingOptions();
};

struct DrawingRun {
    EmbeddingSource source = EmbeddingSource::Act2Vec;
    std::uint64_t seed = 0;
    std::vector<EpisodeRecord> curve;
    std::vector<Evaluation> evaluations;
    double final_mean = 0.0;                   // mean return of the last final_window episodes
    std::optional<std::size_t> steps_to_target;  // first greedy evaluation >= target
};

// Act2Vec table trained on a demonstrator square corpus, rows in SquareEnv action order.
Matrix drawing_embeddings(const DrawingOptions& options, std::uint64_t seed);

DrawingRun run_drawing_arm(EmbeddingSource source, const Matrix& act2vec, const DrawingOptions& options,
                           std::uint64_t seed);

// ---- exploration -----------------------------------------------------------------------

struct ExplorationOptions {
    std::vector<std::size_t> multiplicity{3, 12, 12};  // F, L, R copies
    std::size_t corpus_actions = 10000;
    double noise = 0.1;
    SgnsConfig sgns{.dim = 5, .window = 2, .negatives = 5, .epochs = 20};
    std::size_t k = 3;
    std::size_t restarts = 10;
    SeekAvoidConfig env;
    AgentConfig agent;
    QMode mode = QMode::Embedding;
    double threshold = 2.0;
    std::size_t window = 20;

    ExplorationOptions();
};

struct ExplorationSeed {
    std::uint64_t seed = 0;
    double ari = 0.0;
    std::size_t episodes_kexp = 0;
    std::size_t episodes_uniform = 0;
    bool censored_kexp = false;
    bool censored_uniform = false;
    std::vector<EpisodeRecord> curve_kexp;
    std::vector<EpisodeRecord> curve_uniform;
};

// First episode count at which the trailing mean of `window` returns reaches `threshold`;
// nullopt when it never does.
std::optional<std::size_t> episodes_to_threshold(const std::vector<EpisodeRecord>& curve, double threshold,
                                                 std::size_t window);

ExplorationSeed run_exploration_seed(const ExplorationOptions& options, std::uint64_t seed);

double median(std::vector<double> values);

}  // namespace act2vec::experiments
