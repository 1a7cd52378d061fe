#pragma once

// Data-parallel inner loops. Each kernel has a serial reference implementation and an
// OpenMP variant; tests check them against each other and bench/ times them.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "act2vec/corpus.hpp"
#include "act2vec/matrix.hpp"
#include "act2vec/random.hpp"

namespace act2vec::kernels {

// One SGNS update on raw rows; see sgns_step. `scratch` needs dim + negatives + 1 slots.
// Returns -l(a, c) before the update, or NaN if the update produced a non-finite value.
double sgns_update(Matrix& actions, Matrix& contexts, std::uint32_t a, std::uint32_t c,
                   std::span<const std::uint32_t> negatives, double lr, std::span<double> scratch);

struct SgnsEpoch {
    const EncodedCorpus* corpus = nullptr;
    std::size_t window = 2;
    std::size_t negatives = 5;
    const ContextDistribution* noise = nullptr;
    double lr_start = 0.025;
    double lr_end = 0.025;            // lr at the end of the whole run
    std::uint64_t total_pairs = 1;    // over the whole run
    std::uint64_t pairs_before = 0;   // processed in earlier epochs
};

struct EpochStats {
    double loss_sum = 0.0;
    std::uint64_t pairs = 0;
    bool diverged = false;
};

// Draws up to `count` negatives, resampling up to 8 times when a draw equals `positive`.
void draw_negatives(const ContextDistribution& noise, std::uint32_t positive, std::size_t count,
                    Rng& rng, std::vector<std::uint32_t>& out);

EpochStats sgns_epoch_serial(Matrix& actions, Matrix& contexts, const SgnsEpoch& job, Rng& rng);

// Hogwild: trajectories are sharded across `workers` threads that update the shared
// matrices without locking. Not bit-reproducible for workers > 1.
EpochStats sgns_epoch_hogwild(Matrix& actions, Matrix& contexts, const SgnsEpoch& job,
                              std::uint64_t seed, int workers);

// Dense |V| x |V| pair counts.
std::vector<std::uint64_t> count_pairs_serial(const EncodedCorpus& corpus, std::size_t vocab_size,
                                              std::size_t window);
std::vector<std::uint64_t> count_pairs_omp(const EncodedCorpus& corpus, std::size_t vocab_size,
                                           std::size_t window);

// Nearest-centroid assignment; returns the summed squared distance.
// Ties go to the lowest centroid index.
double assign_clusters_serial(const Matrix& points, const Matrix& centroids,
                              std::span<std::size_t> assignment, std::span<double> distances);
double assign_clusters_omp(const Matrix& points, const Matrix& centroids,
                           std::span<std::size_t> assignment, std::span<double> distances);

}  // namespace act2vec::kernels
