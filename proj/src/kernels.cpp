#include "act2vec/kernels.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include <omp.h>

#include "act2vec/sgns.hpp"

namespace act2vec::kernels {

double sgns_update(Matrix& actions, Matrix& contexts, std::uint32_t a, std::uint32_t c,
                   std::span<const std::uint32_t> negatives, double lr, std::span<double> scratch) {
    const std::size_t d = actions.cols();
    std::span<double> grad_a = scratch.subspan(0, d);
    std::span<double> coef = scratch.subspan(d, negatives.size() + 1);
    std::span<double> av = actions.row(a);

    // Gradients at the pre-update point: read everything before writing anything.
    const double s_pos = dot(av, contexts.row(c));
    double loss = -log_sigmoid(s_pos);
    coef[0] = 1.0 - sigmoid(s_pos);
    for (std::size_t j = 0; j < d; ++j) grad_a[j] = coef[0] * contexts(c, j);
    for (std::size_t n = 0; n < negatives.size(); ++n) {
        const auto cn = contexts.row(negatives[n]);
        const double s_neg = dot(av, cn);
        loss -= log_sigmoid(-s_neg);
        coef[n + 1] = -sigmoid(s_neg);
        for (std::size_t j = 0; j < d; ++j) grad_a[j] += coef[n + 1] * cn[j];
    }

    bool finite = std::isfinite(loss);
    auto apply_context = [&](std::uint32_t id, double g) {
        auto row = contexts.row(id);
        for (std::size_t j = 0; j < d; ++j) {
            row[j] += lr * g * av[j];
            finite = finite && std::isfinite(row[j]);
        }
    };
    apply_context(c, coef[0]);
    for (std::size_t n = 0; n < negatives.size(); ++n) apply_context(negatives[n], coef[n + 1]);
    for (std::size_t j = 0; j < d; ++j) {
        av[j] += lr * grad_a[j];
        finite = finite && std::isfinite(av[j]);
    }
    return finite ? loss : std::numeric_limits<double>::quiet_NaN();
}

void draw_negatives(const ContextDistribution& noise, std::uint32_t positive, std::size_t count,
                    Rng& rng, std::vector<std::uint32_t>& out) {
    out.clear();
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t draw = noise.sample(rng.uniform());
        for (int retry = 0; retry < 8 && draw == positive; ++retry) draw = noise.sample(rng.uniform());
        if (draw != positive) out.push_back(static_cast<std::uint32_t>(draw));
    }
}

namespace {

double scheduled_lr(const SgnsEpoch& job, std::uint64_t done) {
    const double progress =
        std::min(1.0, static_cast<double>(done) / static_cast<double>(std::max<std::uint64_t>(1, job.total_pairs)));
    return job.lr_start + (job.lr_end - job.lr_start) * progress;
}

// Runs one SGNS epoch over trajectories [first, last). `counter` tracks global progress.
template <typename Counter>
EpochStats run_shard(Matrix& actions, Matrix& contexts, const SgnsEpoch& job, std::size_t first,
                     std::size_t last, Rng& rng, Counter&& counter) {
    EpochStats stats;
    std::vector<double> scratch(actions.cols() + job.negatives + 1);
    std::vector<std::uint32_t> negs;
    negs.reserve(job.negatives);
    const auto& corpus = *job.corpus;
    for (std::size_t t = first; t < last && !stats.diverged; ++t) {
        const auto& seq = corpus[t];
        const std::size_t n = seq.size();
        for (std::size_t i = 0; i < n && !stats.diverged; ++i) {
            if (seq[i] < 0) continue;
            const std::size_t lo = i >= job.window ? i - job.window : 0;
            const std::size_t hi = std::min(n - 1, i + job.window);
            for (std::size_t j = lo; j <= hi; ++j) {
                if (j == i || seq[j] < 0) continue;
                const auto a = static_cast<std::uint32_t>(seq[i]);
                const auto c = static_cast<std::uint32_t>(seq[j]);
                draw_negatives(*job.noise, c, job.negatives, rng, negs);
                const double lr = scheduled_lr(job, counter());
                const double loss = sgns_update(actions, contexts, a, c, negs, lr, scratch);
                if (std::isnan(loss)) {
                    stats.diverged = true;
                    break;
                }
                stats.loss_sum += loss;
                ++stats.pairs;
            }
        }
    }
    return stats;
}

}  // namespace

EpochStats sgns_epoch_serial(Matrix& actions, Matrix& contexts, const SgnsEpoch& job, Rng& rng) {
    std::uint64_t done = job.pairs_before;
    return run_shard(actions, contexts, job, 0, job.corpus->size(), rng, [&] { return done++; });
}

EpochStats sgns_epoch_hogwild(Matrix& actions, Matrix& contexts, const SgnsEpoch& job,
                              std::uint64_t seed, int workers) {
    const std::size_t n_traj = job.corpus->size();
    std::atomic<std::uint64_t> done{job.pairs_before};
    std::vector<EpochStats> per_worker(static_cast<std::size_t>(std::max(1, workers)));

#pragma omp parallel for num_threads(workers) schedule(static, 1)
    for (int w = 0; w < workers; ++w) {
        const std::size_t first = n_traj * static_cast<std::size_t>(w) / static_cast<std::size_t>(workers);
        const std::size_t last = n_traj * static_cast<std::size_t>(w + 1) / static_cast<std::size_t>(workers);
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(w)));
        per_worker[static_cast<std::size_t>(w)] = run_shard(
            actions, contexts, job, first, last, rng,
            [&] { return done.fetch_add(1, std::memory_order_relaxed); });
    }

    EpochStats total;
    for (const auto& s : per_worker) {
        total.loss_sum += s.loss_sum;
        total.pairs += s.pairs;
        total.diverged = total.diverged || s.diverged;
    }
    return total;
}

std::vector<std::uint64_t> count_pairs_serial(const EncodedCorpus& corpus, std::size_t vocab_size,
                                              std::size_t window) {
    std::vector<std::uint64_t> counts(vocab_size * vocab_size, 0);
    for_each_context_pair(corpus, window, [&](std::uint32_t a, std::uint32_t c) {
        ++counts[static_cast<std::size_t>(a) * vocab_size + c];
    });
    return counts;
}

std::vector<std::uint64_t> count_pairs_omp(const EncodedCorpus& corpus, std::size_t vocab_size,
                                           std::size_t window) {
    const std::size_t cells = vocab_size * vocab_size;
    std::vector<std::uint64_t> counts(cells, 0);
#pragma omp parallel
    {
        std::vector<std::uint64_t> local(cells, 0);
#pragma omp for schedule(dynamic, 16) nowait
        for (std::size_t t = 0; t < corpus.size(); ++t) {
            const auto& seq = corpus[t];
            const std::size_t n = seq.size();
            for (std::size_t i = 0; i < n; ++i) {
                if (seq[i] < 0) continue;
                const std::size_t lo = i >= window ? i - window : 0;
                const std::size_t hi = std::min(n - 1, i + window);
                for (std::size_t j = lo; j <= hi; ++j) {
                    if (j == i || seq[j] < 0) continue;
                    ++local[static_cast<std::size_t>(seq[i]) * vocab_size + static_cast<std::size_t>(seq[j])];
                }
            }
        }
#pragma omp critical
        for (std::size_t k = 0; k < cells; ++k) counts[k] += local[k];
    }
    return counts;
}

namespace {

inline void nearest_centroid(const Matrix& points, const Matrix& centroids, std::size_t i,
                             std::size_t& best, double& best_d) {
    best = 0;
    best_d = std::numeric_limits<double>::infinity();
    const auto p = points.row(i);
    for (std::size_t k = 0; k < centroids.rows(); ++k) {
        const auto c = centroids.row(k);
        double d = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double diff = p[j] - c[j];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
}

}  // namespace

double assign_clusters_serial(const Matrix& points, const Matrix& centroids,
                              std::span<std::size_t> assignment, std::span<double> distances) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        nearest_centroid(points, centroids, i, assignment[i], distances[i]);
        inertia += distances[i];
    }
    return inertia;
}

double assign_clusters_omp(const Matrix& points, const Matrix& centroids,
                           std::span<std::size_t> assignment, std::span<double> distances) {
    const auto n = static_cast<std::ptrdiff_t>(points.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        nearest_centroid(points, centroids, static_cast<std::size_t>(i), assignment[static_cast<std::size_t>(i)],
                         distances[static_cast<std::size_t>(i)]);
    // Summed in index order so the result matches the serial kernel bit for bit.
    double inertia = 0.0;
    for (double d : distances) inertia += d;
    return inertia;
}

}  // namespace act2vec::kernels
