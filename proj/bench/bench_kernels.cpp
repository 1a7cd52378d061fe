// Serial reference kernels against their OpenMP variants.

#include <benchmark/benchmark.h>

#include "act2vec/corpus.hpp"
#include "act2vec/kernels.hpp"
#include "act2vec/random.hpp"

using namespace act2vec;

namespace {

EncodedCorpus synthetic_corpus(std::size_t vocab, std::size_t trajectories, std::size_t length) {
    Rng rng(1);
    EncodedCorpus out(trajectories, std::vector<std::int32_t>(length));
    for (auto& seq : out)
        for (auto& x : seq) x = static_cast<std::int32_t>(rng.uniform_index(vocab));
    return out;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (double& x : m.data()) x = rng.uniform(-1, 1);
    return m;
}

struct SgnsFixture {
    EncodedCorpus corpus;
    ContextDistribution noise;
    kernels::SgnsEpoch job;

    explicit SgnsFixture(std::size_t trajectories) : corpus(synthetic_corpus(50, trajectories, 100)) {
        const auto counts = kernels::count_pairs_serial(corpus, 50, 2);
        std::vector<std::uint64_t> ctx(50, 0);
        for (std::size_t a = 0; a < 50; ++a)
            for (std::size_t c = 0; c < 50; ++c) ctx[c] += counts[a * 50 + c];
        noise = ContextDistribution(ctx, 0.75);
        job.corpus = &corpus;
        job.noise = &noise;
        job.total_pairs = trajectories * 100 * 4;
    }
};

void BM_CountPairsSerial(benchmark::State& state) {
    const auto corpus = synthetic_corpus(200, static_cast<std::size_t>(state.range(0)), 200);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::count_pairs_serial(corpus, 200, 5));
}

void BM_CountPairsOmp(benchmark::State& state) {
    const auto corpus = synthetic_corpus(200, static_cast<std::size_t>(state.range(0)), 200);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::count_pairs_omp(corpus, 200, 5));
}

void BM_AssignSerial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix pts = random_matrix(n, 16, 1), cents = random_matrix(8, 16, 2);
    std::vector<std::size_t> a(n);
    std::vector<double> d(n);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::assign_clusters_serial(pts, cents, a, d));
}

void BM_AssignOmp(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix pts = random_matrix(n, 16, 1), cents = random_matrix(8, 16, 2);
    std::vector<std::size_t> a(n);
    std::vector<double> d(n);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::assign_clusters_omp(pts, cents, a, d));
}

void BM_SgnsEpochSerial(benchmark::State& state) {
    SgnsFixture f(static_cast<std::size_t>(state.range(0)));
    Matrix acts = random_matrix(50, 16, 3), ctxs(50, 16);
    Rng rng(4);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::sgns_epoch_serial(acts, ctxs, f.job, rng));
}

void BM_SgnsEpochHogwild(benchmark::State& state) {
    SgnsFixture f(static_cast<std::size_t>(state.range(0)));
    Matrix acts = random_matrix(50, 16, 3), ctxs(50, 16);
    const int workers = static_cast<int>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(kernels::sgns_epoch_hogwild(acts, ctxs, f.job, 4, workers));
}

}  // namespace

BENCHMARK(BM_CountPairsSerial)->Arg(1000)->Arg(10000);
BENCHMARK(BM_CountPairsOmp)->Arg(1000)->Arg(10000);
BENCHMARK(BM_AssignSerial)->Arg(10000)->Arg(100000);
BENCHMARK(BM_AssignOmp)->Arg(10000)->Arg(100000);
BENCHMARK(BM_SgnsEpochSerial)->Arg(200);
BENCHMARK(BM_SgnsEpochHogwild)->Args({200, 1})->Args({200, 2})->Args({200, 4});

BENCHMARK_MAIN();
