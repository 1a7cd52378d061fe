#include "act2vec/sgns.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "act2vec/error.hpp"
#include "act2vec/kernels.hpp"
#include "act2vec/random.hpp"

namespace act2vec {

void SgnsConfig::validate() const {
    if (dim < 1) throw Error("sgns: dim must be >= 1");
    if (window < 1) throw Error("sgns: window must be >= 1");
    if (negatives < 1) throw Error("sgns: negatives must be >= 1");
    if (epochs < 1) throw Error("sgns: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("sgns: learning_rate must be > 0");
    if (!(smoothing_exponent >= 0.0)) throw Error("sgns: smoothing_exponent must be >= 0");
    if (workers < 1) throw Error("sgns: workers must be >= 1");
}

EmbeddingTable init_embeddings(const ActionVocabulary& vocab, const SgnsConfig& config) {
    config.validate();
    EmbeddingTable table{vocab, Matrix(vocab.size(), config.dim), Matrix(vocab.size(), config.dim)};
    Rng rng(mix_seed(config.seed, 0));
    const double half = 0.5 / static_cast<double>(config.dim);
    for (double& v : table.action_vectors.data()) v = rng.uniform(-half, half);
    return table;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double pair_probability(const EmbeddingTable& table, std::size_t action, std::size_t context) {
    return sigmoid(dot(table.action(action), table.context(context)));
}

double sgns_objective(std::span<const double> a, std::span<const double> c,
                      std::span<const std::span<const double>> negatives) {
    double l = log_sigmoid(dot(a, c));
    for (const auto& cn : negatives) l += log_sigmoid(-dot(a, cn));
    return l;
}

SgnsGradient sgns_gradient(std::span<const double> a, std::span<const double> c,
                           std::span<const std::span<const double>> negatives) {
    const std::size_t d = a.size();
    SgnsGradient g;
    g.d_action.assign(d, 0.0);
    g.d_context.assign(d, 0.0);
    const double pos = 1.0 - sigmoid(dot(a, c));
    for (std::size_t j = 0; j < d; ++j) {
        g.d_action[j] += pos * c[j];
        g.d_context[j] = pos * a[j];
    }
    for (const auto& cn : negatives) {
        const double s = sigmoid(dot(a, cn));
        std::vector<double> dn(d);
        for (std::size_t j = 0; j < d; ++j) {
            g.d_action[j] -= s * cn[j];
            dn[j] = -s * a[j];
        }
        g.d_negatives.push_back(std::move(dn));
    }
    return g;
}

double sgns_step(EmbeddingTable& table, ContextPair pair, std::span<const std::uint32_t> negatives,
                 double lr) {
    if (!(lr > 0.0)) throw Error("sgns_step: lr must be > 0");
    std::vector<double> scratch(table.dim() + negatives.size() + 1);
    const double loss = kernels::sgns_update(table.action_vectors, table.context_vectors, pair.center,
                                             pair.context, negatives, lr, scratch);
    if (std::isnan(loss)) throw DivergenceError("divergence: non-finite SGNS update (learning rate too large?)");
    return loss;
}

TrainResult train(const Corpus& corpus, const ActionVocabulary& vocab, const SgnsConfig& config) {
    config.validate();
    const EncodedCorpus encoded = encode_corpus(corpus, vocab);

    std::vector<std::uint64_t> context_counts(vocab.size(), 0);
    std::uint64_t pairs_per_epoch = 0;
    for_each_context_pair(encoded, config.window, [&](std::uint32_t, std::uint32_t c) {
        ++context_counts[c];
        ++pairs_per_epoch;
    });
    if (pairs_per_epoch == 0) throw Error("train: corpus yields no context pairs after vocabulary filtering");
    const ContextDistribution noise(context_counts, config.smoothing_exponent);

    TrainResult result{init_embeddings(vocab, config), {}, pairs_per_epoch};
    kernels::SgnsEpoch job;
    job.corpus = &encoded;
    job.window = config.window;
    job.negatives = config.negatives;
    job.noise = &noise;
    job.lr_start = config.learning_rate;
    job.lr_end = config.lr_decay == LrDecay::Linear ? config.learning_rate * 1e-2 : config.learning_rate;
    job.total_pairs = pairs_per_epoch * config.epochs;

    Rng rng(mix_seed(config.seed, 1));
    auto& A = result.table.action_vectors;
    auto& C = result.table.context_vectors;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        job.pairs_before = pairs_per_epoch * epoch;
        const kernels::EpochStats stats =
            config.workers == 1
                ? kernels::sgns_epoch_serial(A, C, job, rng)
                : kernels::sgns_epoch_hogwild(A, C, job, mix_seed(config.seed, 100 + epoch), config.workers);
        if (stats.diverged)
            throw DivergenceError("divergence in epoch " + std::to_string(epoch + 1) +
                                  ": non-finite SGNS update (learning rate too large?)");
        result.epoch_losses.push_back(stats.loss_sum / static_cast<double>(std::max<std::uint64_t>(1, stats.pairs)));
    }
    return result;
}

namespace {

void write_rows(const ActionVocabulary& vocab, const Matrix& m, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write embedding file: " + path);
    std::fprintf(f, "%zu %zu\n", m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        std::fputs(vocab.token(i).c_str(), f);
        for (double v : m.row(i)) std::fprintf(f, " %.9g", v);
        std::fputc('\n', f);
    }
    if (std::fclose(f) != 0) throw Error("error writing embedding file: " + path);
}

struct RawEmbeddings {
    std::vector<std::string> tokens;
    std::vector<std::vector<double>> rows;
    std::size_t dim = 0;
};

RawEmbeddings read_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open embedding file: " + path);
    RawEmbeddings raw;
    std::string text;
    std::size_t line = 1;
    std::size_t n = 0;
    if (!std::getline(in, text)) throw ParseError("missing header '<vocab_size> <dim>'", line);
    {
        std::istringstream ss(text);
        if (!(ss >> n >> raw.dim) || raw.dim == 0) throw ParseError("malformed header '<vocab_size> <dim>'", line);
    }
    for (std::size_t i = 0; i < n; ++i) {
        ++line;
        if (!std::getline(in, text)) throw ParseError("truncated file: expected " + std::to_string(n) + " rows", line);
        std::istringstream ss(text);
        std::string tok;
        if (!(ss >> tok)) throw ParseError("missing token", line);
        std::vector<double> row(raw.dim);
        for (auto& v : row)
            if (!(ss >> v)) throw ParseError("expected " + std::to_string(raw.dim) + " values", line);
        double extra;
        if (ss >> extra) throw ParseError("more than " + std::to_string(raw.dim) + " values", line);
        raw.tokens.push_back(std::move(tok));
        raw.rows.push_back(std::move(row));
    }
    return raw;
}

Matrix rows_for_vocab(const RawEmbeddings& raw, const ActionVocabulary& vocab, const std::string& path) {
    if (raw.tokens.size() != vocab.size())
        throw Error("embedding file " + path + " has " + std::to_string(raw.tokens.size()) +
                    " rows but vocabulary has " + std::to_string(vocab.size()));
    Matrix m(vocab.size(), raw.dim);
    std::vector<bool> seen(vocab.size(), false);
    for (std::size_t i = 0; i < raw.tokens.size(); ++i) {
        auto id = vocab.find(raw.tokens[i]);
        if (!id) throw Error("embedding file " + path + ": token '" + raw.tokens[i] + "' not in vocabulary");
        if (seen[*id]) throw Error("embedding file " + path + ": duplicate token '" + raw.tokens[i] + "'");
        seen[*id] = true;
        std::copy(raw.rows[i].begin(), raw.rows[i].end(), m.row(*id).begin());
    }
    return m;
}

}  // namespace

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
    write_rows(table.vocab, table.action_vectors, path);
}

void save_context_vectors(const EmbeddingTable& table, const std::string& path) {
    write_rows(table.vocab, table.context_vectors, path + ".ctx");
}

EmbeddingTable load_embeddings(const std::string& path, const ActionVocabulary& vocab) {
    const RawEmbeddings raw = read_rows(path);
    EmbeddingTable table{vocab, rows_for_vocab(raw, vocab, path), Matrix(vocab.size(), raw.dim)};
    std::ifstream ctx(path + ".ctx");
    if (ctx.good()) {
        const RawEmbeddings raw_ctx = read_rows(path + ".ctx");
        if (raw_ctx.dim != raw.dim) throw Error("context file dimension differs from " + path);
        table.context_vectors = rows_for_vocab(raw_ctx, vocab, path + ".ctx");
    }
    return table;
}

EmbeddingTable load_embeddings(const std::string& path) {
    const RawEmbeddings raw = read_rows(path);
    ActionVocabulary vocab(raw.tokens, std::vector<std::uint64_t>(raw.tokens.size(), 0));
    return load_embeddings(path, vocab);
}

}  // namespace act2vec
