#include "act2vec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "act2vec/error.hpp"
#include "act2vec/kernels.hpp"
#include "act2vec/random.hpp"

namespace act2vec {

CountTable::CountTable(std::size_t size, std::vector<std::uint64_t> pair_counts)
    : size_(size), pair_counts_(std::move(pair_counts)), action_totals_(size, 0), context_totals_(size, 0) {
    if (pair_counts_.size() != size * size) throw Error("count table: expected size*size cells");
    for (std::size_t a = 0; a < size; ++a) {
        for (std::size_t c = 0; c < size; ++c) {
            const std::uint64_t n = pair_counts_[a * size + c];
            action_totals_[a] += n;
            context_totals_[c] += n;
            grand_total_ += n;
        }
    }
}

CountTable CountTable::transposed() const {
    std::vector<std::uint64_t> t(pair_counts_.size());
    for (std::size_t a = 0; a < size_; ++a)
        for (std::size_t c = 0; c < size_; ++c) t[c * size_ + a] = pair_counts_[a * size_ + c];
    return CountTable(size_, std::move(t));
}

CountTable count_table(const Corpus& corpus, const ActionVocabulary& vocab, std::size_t window, bool parallel) {
    if (window < 1) throw Error("context window must be >= 1");
    const EncodedCorpus encoded = encode_corpus(corpus, vocab);
    auto counts = parallel ? kernels::count_pairs_omp(encoded, vocab.size(), window)
                           : kernels::count_pairs_serial(encoded, vocab.size(), window);
    return CountTable(vocab.size(), std::move(counts));
}

double pmi(const CountTable& counts, std::size_t a, std::size_t c) {
    if (counts.grand_total() == 0) throw Error("pmi: empty count table");
    if (counts.action_total(a) == 0 || counts.context_total(c) == 0) throw Error("unseen symbol");
    const std::uint64_t n = counts.count(a, c);
    if (n == 0) return -std::numeric_limits<double>::infinity();
    return std::log(static_cast<double>(n)) + std::log(static_cast<double>(counts.grand_total())) -
           std::log(static_cast<double>(counts.action_total(a))) -
           std::log(static_cast<double>(counts.context_total(c)));
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error("pearson: length mismatch");
    if (x.size() < 3) throw Error("insufficient data");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) throw Error("zero variance");
    return sxy / std::sqrt(sxx * syy);
}

double shifted_pmi_correlation(const EmbeddingTable& table, const CountTable& counts, std::size_t negatives) {
    if (table.size() != counts.size()) throw Error("shifted_pmi_correlation: table and counts differ in size");
    if (negatives < 1) throw Error("shifted_pmi_correlation: negatives must be >= 1");
    const double shift = std::log(static_cast<double>(negatives));
    std::vector<double> dots, shifted;
    for (std::size_t a = 0; a < counts.size(); ++a) {
        for (std::size_t c = 0; c < counts.size(); ++c) {
            if (counts.count(a, c) == 0) continue;
            dots.push_back(dot(table.action(a), table.context(c)));
            shifted.push_back(pmi(counts, a, c) - shift);
        }
    }
    return pearson_correlation(dots, shifted);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw Error("cosine: dimension mismatch");
    const double nu = std::sqrt(dot(u, u));
    const double nv = std::sqrt(dot(v, v));
    if (nu == 0.0 || nv == 0.0) throw Error("cosine: zero vector");
    return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, std::size_t action, std::size_t n) {
    if (action >= table.size()) throw Error("nearest_neighbors: action id out of range");
    if (n >= table.size()) throw Error("nearest_neighbors: n must be < vocabulary size");
    std::vector<Neighbor> all;
    for (std::size_t id = 0; id < table.size(); ++id) {
        if (id == action) continue;
        all.push_back({id, cosine_similarity(table.action(action), table.action(id))});
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const Neighbor& a, const Neighbor& b) { return a.similarity > b.similarity; });
    all.resize(n);
    return all;
}

Projection2D pca_project(const Matrix& rows) {
    const std::size_t n = rows.rows();
    const std::size_t d = rows.cols();
    if (n < 3) throw Error("pca: need at least 3 rows");
    if (d < 2) throw Error("pca: need dimension >= 2");

    Eigen::MatrixXd x(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows(i, j);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw Error("pca: eigendecomposition failed");
    const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
    const double top = values(values.size() - 1);
    const double total = std::max(0.0, values.sum());
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (values(i) > 1e-12 * std::max(top, 1e-300) && values(i) > 1e-300) ++rank;
    if (rank < 2) throw Error("degenerate spectrum: covariance rank " + std::to_string(rank) + " < 2");

    Eigen::MatrixXd basis(d, 2);
    for (int k = 0; k < 2; ++k) {
        Eigen::VectorXd v = eig.eigenvectors().col(values.size() - 1 - k);
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            if (std::abs(v(j)) > 1e-12) {
                if (v(j) < 0) v = -v;
                break;
            }
        }
        basis.col(k) = v;
    }
    const Eigen::MatrixXd proj = x * basis;

    Projection2D out;
    out.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.points.emplace_back(proj(static_cast<Eigen::Index>(i), 0), proj(static_cast<Eigen::Index>(i), 1));
    out.explained_variance = {values(values.size() - 1) / total, values(values.size() - 2) / total};
    return out;
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
}

Matrix seed_plus_plus(const Matrix& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows();
    Matrix centroids(k, points.cols());
    std::vector<bool> chosen(n, false);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    auto take = [&](std::size_t idx, std::size_t slot) {
        chosen[idx] = true;
        std::copy(points.row(idx).begin(), points.row(idx).end(), centroids.row(slot).begin());
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points.row(i), points.row(idx)));
    };
    take(rng.uniform_index(n), 0);
    for (std::size_t slot = 1; slot < k; ++slot) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (d2[i] > 0.0 && target < acc) {
                    pick = i;
                    break;
                }
            }
            if (pick == n)
                for (std::size_t i = n; i-- > 0;)
                    if (d2[i] > 0.0) { pick = i; break; }
        } else {
            // Every point coincides with a centre: pick among the unchosen uniformly.
            std::vector<std::size_t> free;
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i]) free.push_back(i);
            pick = free[rng.uniform_index(free.size())];
        }
        take(pick, slot);
    }
    return centroids;
}

ClusterAssignment lloyd(const Matrix& points, Matrix centroids, std::size_t max_iterations, bool parallel) {
    const std::size_t n = points.rows();
    const std::size_t k = centroids.rows();
    const std::size_t d = points.cols();
    ClusterAssignment out;
    out.assignment.assign(n, 0);
    std::vector<std::size_t> previous;
    std::vector<double> dist(n, 0.0);

    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        double inertia = parallel ? kernels::assign_clusters_omp(points, centroids, out.assignment, dist)
                                  : kernels::assign_clusters_serial(points, centroids, out.assignment, dist);

        // Repair empty clusters with the point farthest from its centroid.
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t a : out.assignment) ++sizes[a];
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] != 0) continue;
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[out.assignment[i]] <= 1) continue;
                if (far == n || dist[i] > dist[far]) far = i;
            }
            if (far == n) break;
            --sizes[out.assignment[far]];
            out.assignment[far] = c;
            ++sizes[c];
            inertia -= dist[far];
            dist[far] = 0.0;
            std::copy(points.row(far).begin(), points.row(far).end(), centroids.row(c).begin());
        }
        out.inertia_trace.push_back(inertia);
        out.iterations = iter + 1;
        if (out.assignment == previous) break;
        previous = out.assignment;

        Matrix sums(k, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) sums(out.assignment[i], j) += points(i, j);
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t j = 0; j < d; ++j) centroids(c, j) = sums(c, j) / static_cast<double>(sizes[c]);
    }
    out.centroids = std::move(centroids);
    out.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        out.inertia += squared_distance(points.row(i), out.centroids.row(out.assignment[i]));
    return out;
}

void relabel_by_first_member(ClusterAssignment& ca) {
    const std::size_t k = ca.centroids.rows();
    std::vector<std::size_t> remap(k, k);
    std::size_t next = 0;
    for (std::size_t a : ca.assignment)
        if (remap[a] == k) remap[a] = next++;
    for (std::size_t c = 0; c < k; ++c)
        if (remap[c] == k) remap[c] = next++;
    Matrix centroids(k, ca.centroids.cols());
    for (std::size_t c = 0; c < k; ++c)
        std::copy(ca.centroids.row(c).begin(), ca.centroids.row(c).end(), centroids.row(remap[c]).begin());
    ca.centroids = std::move(centroids);
    for (auto& a : ca.assignment) a = remap[a];
}

}  // namespace

ClusterAssignment kmeans(const Matrix& points, const KmeansOptions& options) {
    if (options.k < 1 || options.k > points.rows()) throw Error("kmeans: need 1 <= k <= number of points");
    if (options.restarts < 1) throw Error("kmeans: restarts must be >= 1");
    std::vector<ClusterAssignment> runs(options.restarts);
    const auto restarts = static_cast<std::ptrdiff_t>(options.restarts);
#pragma omp parallel for schedule(dynamic) if (options.parallel)
    for (std::ptrdiff_t r = 0; r < restarts; ++r) {
        Rng rng(mix_seed(options.seed, static_cast<std::uint64_t>(r)));
        runs[static_cast<std::size_t>(r)] =
            lloyd(points, seed_plus_plus(points, options.k, rng), options.max_iterations,
                  options.parallel && options.restarts == 1);
    }
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].inertia < runs[best].inertia) best = r;
    ClusterAssignment out = std::move(runs[best]);
    relabel_by_first_member(out);
    return out;
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw Error("adjusted_rand_index: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) return 1.0;
    std::map<std::pair<std::size_t, std::size_t>, double> table;
    std::map<std::size_t, double> rows, cols;
    for (std::size_t i = 0; i < n; ++i) {
        table[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [key, v] : table) index += choose2(v);
    for (const auto& [key, v] : rows) sum_rows += choose2(v);
    for (const auto& [key, v] : cols) sum_cols += choose2(v);
    const double expected = sum_rows * sum_cols / choose2(static_cast<double>(n));
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;  // both partitions trivial and identical
    return (index - expected) / (max_index - expected);
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

}  // namespace

std::string scatter_svg(const Projection2D& projection, std::span<const std::string> labels,
                        std::optional<std::span<const std::size_t>> clusters) {
    const auto& pts = projection.points;
    if (pts.empty()) throw Error("scatter_svg: empty projection");
    if (labels.size() != pts.size()) throw Error("scatter_svg: one label per point required");
    if (clusters && clusters->size() != pts.size()) throw Error("scatter_svg: one cluster id per point required");

    double xmin = pts[0].first, xmax = xmin, ymin = pts[0].second, ymax = ymin;
    for (const auto& [x, y] : pts) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    }
    const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
    const double scale = 800.0 / span;
    const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);

    std::string out;
    char buf[256];
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"1000\" viewBox=\"0 0 1000 1000\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"1000\" height=\"1000\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"10\" y=\"20\" font-size=\"10\" font-family=\"sans-serif\">PC1 %.1f%%, PC2 %.1f%%</text>\n",
                  100.0 * projection.explained_variance.first, 100.0 * projection.explained_variance.second);
    out += buf;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double px = 500.0 + (pts[i].first - cx) * scale;
        const double py = 500.0 - (pts[i].second - cy) * scale;  // SVG y grows downwards
        const char* colour = clusters ? kPalette[(*clusters)[i] % 10] : "#1f77b4";
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"5\" fill=\"%s\"/>\n", px, py, colour);
        out += buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" font-size=\"10\" font-family=\"sans-serif\">",
                      px + 7.0, py + 3.0);
        out += buf;
        out += xml_escape(labels[i]);
        out += "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

void emit_scatter_svg(const Projection2D& projection, std::span<const std::string> labels,
                      std::optional<std::span<const std::size_t>> clusters, const std::string& path) {
    const std::string svg = scatter_svg(projection, labels, clusters);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write SVG file: " + path);
    out << svg;
    if (!out) throw Error("error writing SVG file: " + path);
}

void write_cluster_csv(const ActionVocabulary& vocab, const ClusterAssignment& clusters, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write cluster file: " + path);
    out << "token,cluster_id\n";
    for (std::size_t i = 0; i < vocab.size(); ++i) out << vocab.token(i) << ',' << clusters.assignment.at(i) << '\n';
}

void write_projection_csv(const ActionVocabulary& vocab, const Projection2D& projection, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write projection file: " + path);
    out << "token,x,y\n";
    char buf[128];
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        std::snprintf(buf, sizeof buf, ",%.9g,%.9g\n", projection.points.at(i).first, projection.points.at(i).second);
        out << vocab.token(i) << buf;
    }
}

}  // namespace act2vec
