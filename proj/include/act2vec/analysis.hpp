#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "act2vec/corpus.hpp"
#include "act2vec/matrix.hpp"
#include "act2vec/sgns.hpp"

namespace act2vec {

// Co-occurrence counts #(a, c) with their marginals.
class CountTable {
public:
    CountTable() = default;
    // `pair_counts` is row-major size x size (row = action, column = context).
    CountTable(std::size_t size, std::vector<std::uint64_t> pair_counts);

    std::size_t size() const noexcept { return size_; }
    std::uint64_t count(std::size_t a, std::size_t c) const { return pair_counts_.at(a * size_ + c); }
    std::uint64_t action_total(std::size_t a) const { return action_totals_.at(a); }
    std::uint64_t context_total(std::size_t c) const { return context_totals_.at(c); }
    std::uint64_t grand_total() const noexcept { return grand_total_; }

    CountTable transposed() const;

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> pair_counts_;
    std::vector<std::uint64_t> action_totals_;
    std::vector<std::uint64_t> context_totals_;
    std::uint64_t grand_total_ = 0;
};

// Counts action-only context pairs of `corpus` with symmetric window `window`.
CountTable count_table(const Corpus& corpus, const ActionVocabulary& vocab, std::size_t window,
                       bool parallel = false);

// log(#(a,c) * total / (#a * #c)). Returns -infinity when #(a,c) == 0.
// Throws Error("unseen symbol") when either marginal is zero.
double pmi(const CountTable& counts, std::size_t a, std::size_t c);

// Pearson correlation between a.c and PMI(a,c) - log(k_neg) over pairs with #(a,c) > 0.
double shifted_pmi_correlation(const EmbeddingTable& table, const CountTable& counts,
                               std::size_t negatives);

double pearson_correlation(std::span<const double> x, std::span<const double> y);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

struct Neighbor {
    std::size_t id;
    double similarity;
};

// Top-n actions by cosine similarity to `action` (itself excluded), ties by ascending id.
std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, std::size_t action, std::size_t n);

struct Projection2D {
    std::vector<std::pair<double, double>> points;   // indexed by action id
    std::pair<double, double> explained_variance;    // fractions of total variance
};

// Centred projection on the top two principal components. The first nonzero loading of
// each component is made positive.
Projection2D pca_project(const Matrix& rows);
inline Projection2D pca_project(const EmbeddingTable& table) { return pca_project(table.action_vectors); }

struct ClusterAssignment {
    std::vector<std::size_t> assignment;  // action id -> cluster id
    Matrix centroids;
    double inertia = 0.0;
    std::size_t iterations = 0;
    std::vector<double> inertia_trace;    // after each assignment step of the winning restart
};

struct KmeansOptions {
    std::size_t k = 3;
    std::uint64_t seed = 1;
    std::size_t restarts = 10;
    std::size_t max_iterations = 300;
    bool parallel = false;  // restarts and assignment via OpenMP; same result either way
};

// k-means++ seeding plus Lloyd iterations, best inertia over restarts (ties by restart
// index). Clusters are relabelled by their smallest member id.
ClusterAssignment kmeans(const Matrix& points, const KmeansOptions& options);
inline ClusterAssignment kmeans(const EmbeddingTable& table, const KmeansOptions& options) {
    return kmeans(table.action_vectors, options);
}

// Adjusted Rand index between two labelings of the same items.
double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

// 1000x1000 standalone SVG, one labelled circle per point, coloured by cluster if given.
std::string scatter_svg(const Projection2D& projection, std::span<const std::string> labels,
                        std::optional<std::span<const std::size_t>> clusters = std::nullopt);
void emit_scatter_svg(const Projection2D& projection, std::span<const std::string> labels,
                      std::optional<std::span<const std::size_t>> clusters, const std::string& path);

// CSV `token,cluster_id`.
void write_cluster_csv(const ActionVocabulary& vocab, const ClusterAssignment& clusters,
                       const std::string& path);
// CSV `token,x,y`.
void write_projection_csv(const ActionVocabulary& vocab, const Projection2D& projection,
                          const std::string& path);

}  // namespace act2vec
