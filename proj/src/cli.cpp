#include "act2vec/cli.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "act2vec/agent.hpp"
#include "act2vec/analysis.hpp"
#include "act2vec/corpus.hpp"
#include "act2vec/envs.hpp"
#include "act2vec/error.hpp"
#include "act2vec/experiments.hpp"
#include "act2vec/mdp.hpp"
#include "act2vec/sgns.hpp"

#ifndef ACT2VEC_VERSION
#define ACT2VEC_VERSION "0.1.0"
#endif

namespace act2vec::cli {

using nlohmann::json;

std::string toolkit_version() { return ACT2VEC_VERSION; }

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 15];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

namespace {

struct RunContext {
    std::string subcommand;
    std::vector<std::string> argv;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::uint64_t seed = 0;
    std::string manifest;
};

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json option_config(const CLI::App& sub) {
    json config = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "manifest") continue;
        if (opt->count() > 0) {
            const auto& results = opt->results();
            if (opt->get_expected_max() == 0)
                config[name] = true;
            else if (results.size() == 1)
                config[name] = results.front();
            else
                config[name] = results;
        } else {
            config[name] = opt->get_expected_max() == 0 ? json(false) : json(opt->get_default_str());
        }
    }
    return config;
}

void write_manifest(const RunContext& ctx, const CLI::App& sub, const std::string& started, double seconds,
                    int exit_code) {
    json inputs = json::array();
    for (const auto& p : ctx.inputs) inputs.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    json m = {{"subcommand", ctx.subcommand},
              {"argv", ctx.argv},
              {"config", option_config(sub)},
              {"seed", ctx.seed},
              {"inputs", inputs},
              {"outputs", ctx.outputs},
              {"wall_clock", {{"started", started}, {"seconds", seconds}}},
              {"exit_code", exit_code},
              {"version", toolkit_version()}};
    std::ofstream out(ctx.manifest);
    if (!out) throw Error("cannot write manifest: " + ctx.manifest);
    out << m.dump(2) << '\n';
}

std::vector<std::size_t> parse_counts(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        long v = -1;
        try {
            v = std::stol(item, &pos);
        } catch (const std::exception&) {
        }
        if (v < 1 || pos != item.size()) throw Error("expected a comma-separated list of positive integers: '" + text + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw Error("empty list: '" + text + "'");
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("error writing " + path);
}

Corpus load_training_corpus(const std::string& path, std::size_t k, std::size_t stride, std::ostream& err) {
    Corpus corpus = read_corpus_file(path);
    if (k == 1) return corpus;
    NgramCorpus grams = compose_ngrams(corpus, k, stride);
    if (grams.dropped) err << "warning: dropped " << grams.dropped << " trajectories shorter than k=" << k << "\n";
    return std::move(grams.corpus);
}

// ---- subcommands -------------------------------------------------------------------------

struct GenCorpusOpts {
    std::string env = "nav2d";
    std::size_t actions = 3000;
    double noise = 0.1;
    std::size_t side = 8;
    std::string duplicate;
    std::uint64_t seed = 1;
    std::string out;
};

int gen_corpus(const GenCorpusOpts& o, RunContext& ctx, std::ostream& out) {
    Corpus corpus;
    if (o.env == "nav2d") {
        corpus = experiments::nav_corpus(o.actions, o.noise, o.seed);
    } else if (o.env == "square") {
        corpus = experiments::square_corpus(o.side, o.actions, o.seed);
    } else {
        SeekAvoidConfig cfg;
        cfg.seed = mix_seed(o.seed, 0);
        SeekAvoidEnv env(cfg);
        SeekAvoidNavigator navigator(o.noise);
        corpus = gen_demo_corpus(env, navigator, o.actions, mix_seed(o.seed, 1));
    }
    if (!o.duplicate.empty()) {
        if (o.env == "square") throw Error("--duplicate applies to the navigation environments");
        corpus = experiments::relabel_duplicates(corpus, {"F", "L", "R"}, parse_counts(o.duplicate), mix_seed(o.seed, 2));
    }
    write_corpus_file(o.out, corpus);
    ctx.outputs.push_back(o.out);
    out << "wrote " << corpus.trajectories.size() << " trajectories, " << corpus.action_count() << " actions to "
        << o.out << "\n";
    return 0;
}

struct TrainOpts {
    std::string corpus;
    std::string out;
    SgnsConfig sgns;
    std::string lr_decay = "linear";
    std::uint64_t min_count = 1;
    std::size_t ngram_k = 1;
    std::size_t stride = 1;
};

int train_cmd(TrainOpts o, RunContext& ctx, std::ostream& out, std::ostream& err) {
    if (o.lr_decay == "linear")
        o.sgns.lr_decay = LrDecay::Linear;
    else if (o.lr_decay == "constant")
        o.sgns.lr_decay = LrDecay::Constant;
    else
        throw Error("--lr-decay must be linear or constant");
    ctx.inputs.push_back(o.corpus);
    const Corpus corpus = load_training_corpus(o.corpus, o.ngram_k, o.stride, err);
    const ActionVocabulary vocab = build_vocabulary(corpus, o.min_count);
    const TrainResult result = train(corpus, vocab, o.sgns);
    save_embeddings(result.table, o.out);
    save_context_vectors(result.table, o.out);
    std::ofstream vout(o.out + ".vocab");
    write_vocabulary(vout, vocab);
    vout.close();
    ctx.outputs = {o.out, o.out + ".ctx", o.out + ".vocab"};
    out << "vocabulary " << vocab.size() << ", dim " << o.sgns.dim << ", " << result.pairs_per_epoch
        << " pairs per epoch\n";
    for (std::size_t e = 0; e < result.epoch_losses.size(); ++e)
        out << "epoch " << e + 1 << " mean loss " << std::setprecision(6) << result.epoch_losses[e] << "\n";
    return 0;
}

struct AnalyzeOpts {
    std::string embeddings;
    std::string corpus;
    std::size_t window = 2;
    std::size_t negatives = 5;
    std::size_t ngram_k = 1;
    std::size_t stride = 1;
    std::size_t neighbors = 5;
    std::string out;
};

int analyze(const AnalyzeOpts& o, RunContext& ctx, std::ostream& out, std::ostream& err) {
    ctx.inputs.push_back(o.embeddings);
    const EmbeddingTable table = load_embeddings(o.embeddings);
    const std::size_t n = std::min(o.neighbors, table.size() - 1);
    json report = {{"embeddings", o.embeddings}, {"vocabulary", table.size()}, {"dim", table.dim()}};
    json neighbors = json::object();
    for (std::size_t a = 0; a < table.size(); ++a) {
        json row = json::array();
        out << std::left << std::setw(12) << table.vocab.token(a);
        for (const Neighbor& nb : nearest_neighbors(table, a, n)) {
            row.push_back({table.vocab.token(nb.id), nb.similarity});
            out << " " << table.vocab.token(nb.id) << "(" << std::fixed << std::setprecision(3) << nb.similarity << ")";
        }
        out << std::defaultfloat << "\n";
        neighbors[table.vocab.token(a)] = row;
    }
    report["neighbors"] = neighbors;
    if (!o.corpus.empty()) {
        ctx.inputs.push_back(o.corpus);
        const Corpus corpus = load_training_corpus(o.corpus, o.ngram_k, o.stride, err);
        const CountTable counts = count_table(corpus, table.vocab, o.window);
        const double r = shifted_pmi_correlation(table, counts, o.negatives);
        report["shifted_pmi_correlation"] = r;
        report["pairs"] = counts.grand_total();
        out << "shifted-PMI correlation (k_neg=" << o.negatives << "): " << std::setprecision(4) << r << "\n";
    }
    if (!o.out.empty()) {
        write_text(o.out, report.dump(2) + "\n");
        ctx.outputs.push_back(o.out);
    }
    return 0;
}

struct ClusterOpts {
    std::string embeddings;
    KmeansOptions km;
    std::string out;
};

int cluster_cmd(const ClusterOpts& o, RunContext& ctx, std::ostream& out) {
    ctx.inputs.push_back(o.embeddings);
    const EmbeddingTable table = load_embeddings(o.embeddings);
    if (o.km.k < 1 || o.km.k > table.size()) throw Error("--k must lie in [1, vocabulary size]");
    const ClusterAssignment c = kmeans(table, o.km);
    write_cluster_csv(table.vocab, c, o.out);
    ctx.outputs.push_back(o.out);
    out << "k=" << o.km.k << " inertia " << c.inertia << " after " << c.iterations << " iterations\n";
    return 0;
}

struct PlotOpts {
    std::string embeddings;
    std::string svg;
    std::string csv;
    KmeansOptions km{.k = 0};
};

int plot(const PlotOpts& o, RunContext& ctx, std::ostream& out) {
    ctx.inputs.push_back(o.embeddings);
    const EmbeddingTable table = load_embeddings(o.embeddings);
    const Projection2D p = pca_project(table);
    std::optional<ClusterAssignment> c;
    if (o.km.k > 0) c = kmeans(table, o.km);
    std::optional<std::span<const std::size_t>> colours;
    if (c) colours = std::span<const std::size_t>(c->assignment);
    emit_scatter_svg(p, table.vocab.tokens(), colours, o.svg);
    ctx.outputs.push_back(o.svg);
    if (!o.csv.empty()) {
        write_projection_csv(table.vocab, p, o.csv);
        ctx.outputs.push_back(o.csv);
    }
    out << table.size() << " points, explained variance " << p.explained_variance.first << ", "
        << p.explained_variance.second << "\n";
    return 0;
}

struct LemmaOpts {
    mdp::SuiteOptions suite;
    std::string out;
};

int verify_lemma(const LemmaOpts& o, RunContext& ctx, std::ostream& out) {
    const auto reports = mdp::run_lemma_suite(o.suite);
    std::size_t holds = 0, tstep = 0;
    json fixtures = json::array();
    std::map<std::pair<double, double>, std::vector<const mdp::FixtureReport*>> groups;
    for (const auto& r : reports) {
        holds += r.lemma1.holds;
        tstep += r.tstep_holds;
        fixtures.push_back(mdp::to_json(r));
        groups[{r.gamma, r.planted_epsilon}].push_back(&r);
    }
    out << "gamma   eps     n    lemma1  tstep  max_lhs      max_eps_hat  min_slack\n";
    for (const auto& [key, rs] : groups) {
        std::size_t h = 0, t = 0;
        double lhs = 0.0, eps = 0.0, slack = INFINITY;
        for (const auto* r : rs) {
            h += r->lemma1.holds;
            t += r->tstep_holds;
            lhs = std::max(lhs, r->lemma1.lhs);
            eps = std::max(eps, r->lemma1.eps);
            slack = std::min(slack, r->lemma1.slack);
        }
        char line[160];
        std::snprintf(line, sizeof line, "%-7.3g %-7.3g %-4zu %3zu/%-3zu %3zu/%-3zu %-12.4e %-12.4e %.4e\n", key.first,
                      key.second, rs.size(), h, rs.size(), t, rs.size(), lhs, eps, slack);
        out << line;
    }
    // Series checks on the bound's closed form.
    json series = json::array();
    bool series_ok = true;
    for (double g : o.suite.gammas) {
        const double closed = mdp::lemma1_series(g, 1.0);
        const double cubic = mdp::series_partial_sum(g, 2000, 3);
        const double linear = mdp::series_partial_sum(g, 2000, 1);
        const bool bounded = closed <= mdp::lemma1_bound(g, 1.0);
        const bool cubic_ok = std::abs(cubic - closed) <= 1e-9 * std::max(1.0, closed);
        series_ok = series_ok && bounded && cubic_ok;
        series.push_back({{"gamma", g},
                          {"closed_form", closed},
                          {"sum_t3", cubic},
                          {"sum_t", linear},
                          {"closed_form_le_bound", bounded},
                          {"closed_form_equals_sum_t3", cubic_ok}});
    }
    out << "lemma1 " << holds << "/" << reports.size() << ", t-step " << tstep << "/" << reports.size()
        << ", series " << (series_ok ? "ok" : "FAILED") << "\n";
    const bool pass = holds == reports.size() && tstep == reports.size() && series_ok;
    if (!o.out.empty()) {
        json report = {{"fixtures", fixtures}, {"series", series}, {"lemma1_holds", holds},
                       {"tstep_holds", tstep},  {"total", reports.size()}, {"pass", pass}};
        write_text(o.out, report.dump(2) + "\n");
        ctx.outputs.push_back(o.out);
    }
    return pass ? 0 : 1;
}

struct ContextOpts {
    std::size_t grid = 5;
    bool stochastic = false;
    std::string out;
};

int verify_context(const ContextOpts& o, RunContext& ctx, std::ostream& out) {
    const mdp::MonotonicityScan scan = mdp::scan_context_monotonicity(!o.stochastic, o.grid);
    out << (o.stochastic ? "stochastic" : "deterministic") << " demonstrators: " << scan.universes
        << " universes, premises held in " << scan.premises_held << " cases, " << scan.counterexamples
        << " counterexamples, " << scan.undefined << " undefined\n";
    if (!o.out.empty()) {
        json report = {{"family", o.stochastic ? "stochastic" : "deterministic"},
                       {"grid", o.grid},
                       {"universes", scan.universes},
                       {"premises_held", scan.premises_held},
                       {"counterexamples", scan.counterexamples},
                       {"undefined", scan.undefined}};
        write_text(o.out, report.dump(2) + "\n");
        ctx.outputs.push_back(o.out);
    }
    return scan.counterexamples == 0 ? 0 : 1;
}

struct AgentOpts {
    std::string env = "square";
    std::size_t side = 8;
    std::size_t max_steps = 0;
    std::string mode = "baseline";
    std::string embeddings;
    std::string state_source = "none";
    double state_scale = 1.0;
    std::size_t random_dim = 5;
    std::string exploration = "uniform";
    std::size_t k = 3;
    std::size_t restarts = 10;
    std::string duplicate;
    std::size_t ngram_k = 1;
    AgentConfig agent;
    std::string out;
};

std::unique_ptr<Environment> build_env(const AgentOpts& o) {
    std::unique_ptr<Environment> env;
    if (o.env == "square") {
        SquareConfig c;
        c.side = o.side;
        if (o.max_steps) c.max_steps = o.max_steps;
        c.seed = mix_seed(o.agent.seed, 0);
        env = std::make_unique<SquareEnv>(c);
    } else if (o.env == "nav2d") {
        Nav2dConfig c;
        if (o.max_steps) c.max_steps = o.max_steps;
        c.seed = mix_seed(o.agent.seed, 0);
        env = std::make_unique<Nav2dEnv>(c);
    } else {
        SeekAvoidConfig c;
        if (o.max_steps) c.max_steps = o.max_steps;
        c.seed = mix_seed(o.agent.seed, 0);
        env = std::make_unique<SeekAvoidEnv>(c);
    }
    if (!o.duplicate.empty()) env = std::make_unique<DuplicatedActionEnv>(std::move(env), parse_counts(o.duplicate));
    if (o.ngram_k > 1) env = std::make_unique<SequenceWrapper>(std::move(env), o.ngram_k);
    return env;
}

int run_agent(const AgentOpts& o, RunContext& ctx, std::ostream& out) {
    std::unique_ptr<Environment> env = build_env(o);
    std::optional<Matrix> rows;
    if (!o.embeddings.empty()) {
        ctx.inputs.push_back(o.embeddings);
        rows = experiments::rows_for_actions(load_embeddings(o.embeddings), *env);
    }
    if (o.state_source != "none") {
        const EmbeddingSource source = parse_embedding_source(o.state_source);
        const Matrix vectors = embedding_vectors(source, env->num_actions(), rows ? &*rows : nullptr,
                                                 rows ? rows->cols() : o.random_dim, mix_seed(o.agent.seed, 3));
        env = std::make_unique<SumEmbeddingEnv>(std::move(env), vectors, o.state_scale);
    }
    Exploration exploration;
    if (o.exploration == "kexp") {
        if (!rows) throw Error("k-exp exploration requires --embeddings");
        KmeansOptions km;
        km.k = o.k;
        km.restarts = o.restarts;
        km.seed = mix_seed(o.agent.seed, 4);
        exploration = Exploration::kexp(kmeans(*rows, km).assignment, o.k);
    } else if (o.exploration != "uniform") {
        throw Error("--exploration must be uniform or kexp");
    }
    const QMode mode = parse_q_mode(o.mode);
    const LearningResult result = run_q_learning(*env, o.agent, mode, rows, exploration);
    write_learning_curve(result.curve, o.out);
    ctx.outputs.push_back(o.out);
    const std::size_t n = std::min<std::size_t>(100, result.curve.size());
    double tail = 0.0;
    for (std::size_t i = result.curve.size() - n; i < result.curve.size(); ++i) tail += result.curve[i].ret;
    out << result.curve.size() << " episodes; mean return of the last " << n << ": "
        << (n ? tail / static_cast<double>(n) : 0.0) << "\n";
    return 0;
}

struct CompareOpts {
    std::string experiment = "drawing";
    std::size_t seeds = 5;
    std::uint64_t seed = 1;
    std::size_t steps = 0;
    std::string arms = "act2vec,act2vec-norm,one-hot,random";
    std::string out;
};

int compare(const CompareOpts& o, RunContext& ctx, std::ostream& out) {
    std::ostringstream csv;
    if (o.experiment == "drawing") {
        experiments::DrawingOptions d;
        if (o.steps) d.agent.total_steps = o.steps;
        std::vector<EmbeddingSource> arms;
        std::stringstream ss(o.arms);
        for (std::string a; std::getline(ss, a, ',');) arms.push_back(parse_embedding_source(a));
        csv << "arm,seed,final_mean,steps_to_target,episodes\n";
        std::map<std::string, std::vector<double>> finals;
        for (std::size_t i = 0; i < o.seeds; ++i) {
            const std::uint64_t seed = o.seed + i;
            const Matrix e = experiments::drawing_embeddings(d, seed);
            for (EmbeddingSource arm : arms) {
                const auto run = experiments::run_drawing_arm(arm, e, d, seed);
                csv << to_string(arm) << "," << seed << "," << run.final_mean << ","
                    << (run.steps_to_target ? std::to_string(*run.steps_to_target) : "") << "," << run.curve.size()
                    << "\n";
                finals[to_string(arm)].push_back(run.final_mean);
            }
        }
        for (const auto& [arm, v] : finals)
            out << std::left << std::setw(14) << arm << " median final mean " << experiments::median(v) << "\n";
    } else if (o.experiment == "exploration") {
        experiments::ExplorationOptions x;
        if (o.steps) x.agent.total_steps = o.steps;
        csv << "seed,ari,episodes_kexp,episodes_uniform,censored_kexp,censored_uniform\n";
        std::vector<double> kexp, uniform;
        for (std::size_t i = 0; i < o.seeds; ++i) {
            const auto r = experiments::run_exploration_seed(x, o.seed + i);
            csv << r.seed << "," << r.ari << "," << r.episodes_kexp << "," << r.episodes_uniform << ","
                << r.censored_kexp << "," << r.censored_uniform << "\n";
            kexp.push_back(static_cast<double>(r.episodes_kexp));
            uniform.push_back(static_cast<double>(r.episodes_uniform));
        }
        out << "median episodes to threshold: k-exp " << experiments::median(kexp) << ", uniform "
            << experiments::median(uniform) << "\n";
    } else {
        throw Error("--experiment must be drawing or exploration");
    }
    write_text(o.out, csv.str());
    ctx.outputs.push_back(o.out);
    return 0;
}

std::string default_manifest(const RunContext& ctx, const std::string& primary) {
    return primary.empty() ? "act2vec-" + ctx.subcommand + ".manifest.json" : primary + ".manifest.json";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"act2vec: action embeddings from demonstrations, analysis, theory checks and RL experiments",
                 "act2vec"};
    app.require_subcommand(1);
    app.set_version_flag("--version", toolkit_version());
    std::string manifest;

    auto add_manifest = [&](CLI::App* sub) {
        sub->add_option("--manifest", manifest, "Run manifest path (default: <output>.manifest.json)");
    };

    GenCorpusOpts gen;
    auto* s_gen = app.add_subcommand("gen-corpus", "Generate a demonstration corpus (JSONL)");
    s_gen->add_option("--env", gen.env, "nav2d, square or seek-avoid")
        ->check(CLI::IsMember({"nav2d", "square", "seek-avoid"}))
        ->capture_default_str();
    s_gen->add_option("--actions", gen.actions, "Minimum number of logged actions")->capture_default_str();
    s_gen->add_option("--noise", gen.noise, "Demonstrator random-action probability")->capture_default_str();
    s_gen->add_option("--side", gen.side, "Square side W in stroke units")->capture_default_str();
    s_gen->add_option("--duplicate", gen.duplicate, "Relabel F,L,R into this many copies each, e.g. 3,12,12");
    s_gen->add_option("--seed", gen.seed)->capture_default_str();
    s_gen->add_option("--out", gen.out, "Output JSONL")->required();
    add_manifest(s_gen);

    TrainOpts tr;
    auto* s_train = app.add_subcommand("train", "Train SGNS action embeddings");
    s_train->add_option("--corpus", tr.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    s_train->add_option("--out", tr.out, "Embedding file")->required();
    s_train->add_option("--dim,-d", tr.sgns.dim, "Embedding dimension d")->capture_default_str();
    s_train->add_option("--window,-w", tr.sgns.window, "Context width w")->capture_default_str();
    s_train->add_option("--negatives,-k", tr.sgns.negatives, "Negative samples per pair")->capture_default_str();
    s_train->add_option("--epochs", tr.sgns.epochs)->capture_default_str();
    s_train->add_option("--lr", tr.sgns.learning_rate, "Initial learning rate")->capture_default_str();
    s_train->add_option("--lr-decay", tr.lr_decay, "linear or constant")->capture_default_str();
    s_train->add_option("--smoothing", tr.sgns.smoothing_exponent, "Noise distribution exponent")->capture_default_str();
    s_train->add_option("--workers", tr.sgns.workers, "Threads (>1 is not bit-reproducible)")->capture_default_str();
    s_train->add_option("--seed", tr.sgns.seed)->capture_default_str();
    s_train->add_option("--min-count", tr.min_count)->capture_default_str();
    s_train->add_option("--ngram-k", tr.ngram_k, "Compose k-gram action tokens first")->capture_default_str();
    s_train->add_option("--stride", tr.stride, "n-gram stride, 1 or k")->capture_default_str();
    add_manifest(s_train);

    AnalyzeOpts an;
    auto* s_an = app.add_subcommand("analyze", "Neighbour tables and the shifted-PMI correlation");
    s_an->add_option("--embeddings", an.embeddings)->required()->check(CLI::ExistingFile);
    s_an->add_option("--corpus", an.corpus, "Corpus for PMI counts")->check(CLI::ExistingFile);
    s_an->add_option("--window,-w", an.window)->capture_default_str();
    s_an->add_option("--negatives,-k", an.negatives)->capture_default_str();
    s_an->add_option("--ngram-k", an.ngram_k)->capture_default_str();
    s_an->add_option("--stride", an.stride)->capture_default_str();
    s_an->add_option("--neighbors", an.neighbors)->capture_default_str();
    s_an->add_option("--out", an.out, "JSON report");
    add_manifest(s_an);

    ClusterOpts cl;
    auto* s_cl = app.add_subcommand("cluster", "k-means over embeddings to CSV");
    s_cl->add_option("--embeddings", cl.embeddings)->required()->check(CLI::ExistingFile);
    s_cl->add_option("--k", cl.km.k)->capture_default_str();
    s_cl->add_option("--restarts", cl.km.restarts)->capture_default_str();
    s_cl->add_option("--seed", cl.km.seed)->capture_default_str();
    s_cl->add_option("--out", cl.out, "CSV token,cluster_id")->required();
    add_manifest(s_cl);

    PlotOpts pl;
    auto* s_pl = app.add_subcommand("plot", "PCA projection to SVG and CSV");
    s_pl->add_option("--embeddings", pl.embeddings)->required()->check(CLI::ExistingFile);
    s_pl->add_option("--svg", pl.svg, "SVG output")->required();
    s_pl->add_option("--csv", pl.csv, "CSV token,x,y");
    s_pl->add_option("--k", pl.km.k, "Colour by k-means clusters (0 = off)")->capture_default_str();
    s_pl->add_option("--seed", pl.km.seed)->capture_default_str();
    add_manifest(s_pl);

    LemmaOpts lm;
    auto* s_lm = app.add_subcommand("verify-lemma", "Random-MDP suite for the action-grouping value bound");
    s_lm->add_option("--fixtures", lm.suite.fixtures)->capture_default_str();
    s_lm->add_option("--states", lm.suite.max_states, "Maximum |S|")->capture_default_str();
    s_lm->add_option("--actions", lm.suite.max_actions, "Maximum |A|")->capture_default_str();
    s_lm->add_option("--gamma", lm.suite.gammas, "Discounts, cycled over fixtures")->delimiter(',')->capture_default_str();
    s_lm->add_option("--epsilon", lm.suite.epsilons, "Planted gaps")->delimiter(',')->capture_default_str();
    s_lm->add_option("--t-max", lm.suite.t_max)->capture_default_str();
    s_lm->add_option("--tol", lm.suite.tol, "Policy-evaluation tolerance")->capture_default_str();
    s_lm->add_option("--seed", lm.suite.seed)->capture_default_str();
    s_lm->add_option("--out", lm.out, "JSON report");
    add_manifest(s_lm);

    ContextOpts cx;
    auto* s_cx = app.add_subcommand("verify-context", "Exhaustive action-context monotonicity scan");
    s_cx->add_option("--grid", cx.grid, "Levels per parameter")->capture_default_str();
    s_cx->add_flag("--stochastic", cx.stochastic, "Allow stochastic demonstrator policies");
    s_cx->add_option("--out", cx.out, "JSON report");
    add_manifest(s_cx);

    AgentOpts ag;
    auto* s_ag = app.add_subcommand("run-agent", "Q-learning run to a learning-curve CSV");
    s_ag->add_option("--env", ag.env)->check(CLI::IsMember({"square", "nav2d", "seek-avoid"}))->capture_default_str();
    s_ag->add_option("--side", ag.side)->capture_default_str();
    s_ag->add_option("--max-steps", ag.max_steps, "Episode cap (0 = environment default)")->capture_default_str();
    s_ag->add_option("--mode", ag.mode, "baseline or embedding")->capture_default_str();
    s_ag->add_option("--embeddings", ag.embeddings, "Embedding file, rows matched by action name")
        ->check(CLI::ExistingFile);
    s_ag->add_option("--state-source", ag.state_source, "none, act2vec, act2vec-norm, one-hot, random")
        ->capture_default_str();
    s_ag->add_option("--state-scale", ag.state_scale)->capture_default_str();
    s_ag->add_option("--random-dim", ag.random_dim)->capture_default_str();
    s_ag->add_option("--exploration", ag.exploration, "uniform or kexp")->capture_default_str();
    s_ag->add_option("--k", ag.k, "Clusters for k-exp")->capture_default_str();
    s_ag->add_option("--restarts", ag.restarts)->capture_default_str();
    s_ag->add_option("--duplicate", ag.duplicate, "Action copies per base action, e.g. 3,12,12");
    s_ag->add_option("--ngram-k", ag.ngram_k, "Act in A^k")->capture_default_str();
    s_ag->add_option("--steps", ag.agent.total_steps)->capture_default_str();
    s_ag->add_option("--lr", ag.agent.learning_rate)->capture_default_str();
    s_ag->add_option("--gamma", ag.agent.gamma)->capture_default_str();
    s_ag->add_option("--batch", ag.agent.batch)->capture_default_str();
    s_ag->add_option("--capacity", ag.agent.capacity)->capture_default_str();
    s_ag->add_option("--anneal", ag.agent.anneal_steps)->capture_default_str();
    s_ag->add_option("--eps-start", ag.agent.epsilon_start)->capture_default_str();
    s_ag->add_option("--eps-end", ag.agent.epsilon_end)->capture_default_str();
    s_ag->add_option("--features", ag.agent.shape.features)->capture_default_str();
    s_ag->add_option("--phi-hidden", ag.agent.shape.phi_hidden)->capture_default_str();
    s_ag->add_option("--psi-hidden", ag.agent.shape.psi_hidden)->capture_default_str();
    s_ag->add_option("--seed", ag.agent.seed)->capture_default_str();
    s_ag->add_option("--out", ag.out, "CSV episode,return,epsilon,steps")->required();
    add_manifest(s_ag);

    CompareOpts cp;
    auto* s_cp = app.add_subcommand("compare", "Multi-seed agent sweep to an aggregated CSV");
    s_cp->add_option("--experiment", cp.experiment, "drawing or exploration")->capture_default_str();
    s_cp->add_option("--seeds", cp.seeds)->capture_default_str();
    s_cp->add_option("--seed", cp.seed, "First seed")->capture_default_str();
    s_cp->add_option("--steps", cp.steps, "Agent step budget (0 = experiment default)")->capture_default_str();
    s_cp->add_option("--arms", cp.arms, "State sources for the drawing experiment")->capture_default_str();
    s_cp->add_option("--out", cp.out)->required();
    add_manifest(s_cp);

    std::string replay_path;
    auto* s_rp = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    s_rp->add_option("manifest", replay_path)->required()->check(CLI::ExistingFile);

    std::vector<const char*> argv{"act2vec"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        if (s_rp->parsed()) {
            std::ifstream in(replay_path);
            const json m = json::parse(in);
            return run(m.at("argv").get<std::vector<std::string>>(), out, err);
        }
        CLI::App* sub = app.get_subcommands().front();
        RunContext ctx;
        ctx.subcommand = sub->get_name();
        ctx.argv = args;
        const std::string started = utc_now();
        const auto t0 = std::chrono::steady_clock::now();
        int code = 0;
        if (sub == s_gen) {
            ctx.seed = gen.seed;
            ctx.manifest = default_manifest(ctx, gen.out);
            code = gen_corpus(gen, ctx, out);
        } else if (sub == s_train) {
            ctx.seed = tr.sgns.seed;
            ctx.manifest = default_manifest(ctx, tr.out);
            code = train_cmd(tr, ctx, out, err);
        } else if (sub == s_an) {
            ctx.manifest = default_manifest(ctx, an.out);
            code = analyze(an, ctx, out, err);
        } else if (sub == s_cl) {
            ctx.seed = cl.km.seed;
            ctx.manifest = default_manifest(ctx, cl.out);
            code = cluster_cmd(cl, ctx, out);
        } else if (sub == s_pl) {
            ctx.seed = pl.km.seed;
            ctx.manifest = default_manifest(ctx, pl.svg);
            code = plot(pl, ctx, out);
        } else if (sub == s_lm) {
            ctx.seed = lm.suite.seed;
            ctx.manifest = default_manifest(ctx, lm.out);
            code = verify_lemma(lm, ctx, out);
        } else if (sub == s_cx) {
            ctx.manifest = default_manifest(ctx, cx.out);
            code = verify_context(cx, ctx, out);
        } else if (sub == s_ag) {
            ctx.seed = ag.agent.seed;
            ctx.manifest = default_manifest(ctx, ag.out);
            code = run_agent(ag, ctx, out);
        } else if (sub == s_cp) {
            ctx.seed = cp.seed;
            ctx.manifest = default_manifest(ctx, cp.out);
            code = compare(cp, ctx, out);
        }
        if (!manifest.empty()) ctx.manifest = manifest;
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_manifest(ctx, *sub, started, seconds, code);
        return code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace act2vec::cli
