#include "act2vec/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <unordered_map>

#include "act2vec/analysis.hpp"
#include "act2vec/error.hpp"

namespace act2vec::experiments {

Corpus block_corpus(std::size_t blocks, std::size_t per_block, double stay, std::size_t trajectories,
                    std::size_t length, std::uint64_t seed) {
    if (blocks < 2 || per_block < 1 || length < 2) throw Error("block corpus: degenerate shape");
    const std::size_t n = blocks * per_block;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "t%02zu", i);
        names.emplace_back(buf);
    }
    Rng rng(seed);
    Corpus corpus;
    for (std::size_t t = 0; t < trajectories; ++t) {
        Trajectory traj;
        traj.id = std::to_string(t);
        std::size_t cur = rng.uniform_index(n);
        for (std::size_t i = 0; i < length; ++i) {
            traj.actions.push_back(names[cur]);
            const std::size_t block = cur / per_block;
            if (rng.bernoulli(stay)) {
                cur = block * per_block + rng.uniform_index(per_block);
            } else {
                std::size_t other = rng.uniform_index(n - per_block);
                if (other >= block * per_block) other += per_block;
                cur = other;
            }
        }
        corpus.trajectories.push_back(std::move(traj));
    }
    return corpus;
}

Corpus nav_corpus(std::size_t n_actions, double noise, std::uint64_t seed) {
    Nav2dConfig cfg;
    cfg.seed = mix_seed(seed, 0);
    Nav2dEnv env(cfg);
    ScriptedNavigator navigator(noise);
    return gen_demo_corpus(env, navigator, n_actions, mix_seed(seed, 1));
}

Corpus square_corpus(std::size_t side, std::size_t n_actions, std::uint64_t seed) {
    SquareConfig cfg;
    cfg.side = side;
    cfg.max_steps = 8 * side;
    cfg.seed = seed;
    SquareEnv env(cfg);
    SquareDemonstrator demo(side);
    return gen_demo_corpus(env, demo, n_actions, mix_seed(seed, 1));
}

Corpus relabel_duplicates(const Corpus& corpus, const std::vector<std::string>& base_tokens,
                          const std::vector<std::size_t>& multiplicity, std::uint64_t seed) {
    if (base_tokens.size() != multiplicity.size()) throw Error("relabel: one multiplicity per base token");
    std::unordered_map<std::string, std::size_t> copies;
    for (std::size_t i = 0; i < base_tokens.size(); ++i) {
        if (multiplicity[i] < 1) throw Error("relabel: multiplicity must be >= 1");
        copies[base_tokens[i]] = multiplicity[i];
    }
    Rng rng(seed);
    Corpus out = corpus;
    for (auto& t : out.trajectories) {
        t.states.reset();
        for (auto& a : t.actions) {
            auto it = copies.find(a);
            if (it != copies.end()) a += "#" + std::to_string(rng.uniform_index(it->second));
        }
    }
    return out;
}

Matrix rows_for_actions(const EmbeddingTable& table, const Environment& env) {
    Matrix m(env.num_actions(), table.dim());
    for (std::size_t a = 0; a < env.num_actions(); ++a) {
        const std::string name = env.action_name(a);
        const auto id = table.vocab.find(name);
        if (!id) throw Error("embedding table has no vector for action '" + name + "'");
        std::copy(table.action(*id).begin(), table.action(*id).end(), m.row(a).begin());
    }
    return m;
}

// ---- navigation geometry ---------------------------------------------------------------

NavGeometry nav_geometry(const NavGeometryOptions& options, std::uint64_t seed) {
    const Corpus corpus = nav_corpus(options.corpus_actions, options.noise, mix_seed(seed, 40));
    const NgramCorpus grams = compose_ngrams(corpus, options.ngram, options.stride);
    const ActionVocabulary vocab = build_vocabulary(grams.corpus, 1);
    SgnsConfig cfg = options.sgns;
    cfg.seed = mix_seed(seed, 41);
    const TrainResult trained = train(grams.corpus, vocab, cfg);
    const auto& t = trained.table;
    NavGeometry g;
    g.vocabulary = vocab.size();
    g.reversal_pair = cosine_similarity(t.action("L+R"), t.action("R+L"));
    g.left_forward = cosine_similarity(t.action("L+R"), t.action("F+F"));
    g.right_forward = cosine_similarity(t.action("R+L"), t.action("F+F"));
    return g;
}

// ---- drawing ---------------------------------------------------------------------------

DrawingOptions::DrawingOptions() {
    agent.learning_rate = 3e-3;
    agent.total_steps = 50000;
    agent.anneal_steps = 20000;
    agent.capacity = 50000;
    agent.eval_every = 1000;
    agent.eval_episodes = 1;
}

Matrix drawing_embeddings(const DrawingOptions& options, std::uint64_t seed) {
    const Corpus corpus = square_corpus(options.side, options.corpus_actions, mix_seed(seed, 10));
    const ActionVocabulary vocab = build_vocabulary(corpus, 1);
    SgnsConfig cfg = options.sgns;
    cfg.seed = mix_seed(seed, 11);
    const TrainResult trained = train(corpus, vocab, cfg);
    SquareEnv env;
    return rows_for_actions(trained.table, env);
}

DrawingRun run_drawing_arm(EmbeddingSource source, const Matrix& act2vec, const DrawingOptions& options,
                           std::uint64_t seed) {
    SquareConfig cfg;
    cfg.side = options.side;
    cfg.max_steps = options.max_steps;
    const Matrix vectors = embedding_vectors(source, 12, &act2vec, act2vec.cols(), mix_seed(seed, 20));
    SumEmbeddingEnv env(std::make_unique<SquareEnv>(cfg), vectors, options.state_scale);
    SumEmbeddingEnv eval_env(std::make_unique<SquareEnv>(cfg), vectors, options.state_scale);
    AgentConfig agent = options.agent;
    agent.seed = mix_seed(seed, 21);
    std::optional<Matrix> q_embeddings;
    if (options.mode == QMode::Embedding) q_embeddings = act2vec;
    LearningResult learned = run_q_learning(env, agent, options.mode, q_embeddings, Exploration::uniform(), &eval_env);

    DrawingRun run;
    run.source = source;
    run.seed = seed;
    const std::size_t n = std::min(options.final_window, learned.curve.size());
    double total = 0.0;
    for (std::size_t i = learned.curve.size() - n; i < learned.curve.size(); ++i) total += learned.curve[i].ret;
    run.final_mean = n ? total / static_cast<double>(n) : 0.0;
    for (const auto& e : learned.evaluations)
        if (e.mean_return >= options.target) {
            run.steps_to_target = e.step;
            break;
        }
    run.curve = std::move(learned.curve);
    run.evaluations = std::move(learned.evaluations);
    return run;
}

// ---- exploration -----------------------------------------------------------------------

ExplorationOptions::ExplorationOptions() {
    agent.gamma = 0.95;
    agent.learning_rate = 3e-3;
    agent.total_steps = 30000;
    agent.anneal_steps = 10000;
    agent.capacity = 30000;
}

std::optional<std::size_t> episodes_to_threshold(const std::vector<EpisodeRecord>& curve, double threshold,
                                                 std::size_t window) {
    if (window == 0) throw Error("episodes_to_threshold: window must be >= 1");
    double sum = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        sum += curve[i].ret;
        if (i >= window) sum -= curve[i - window].ret;
        if (i + 1 >= window && sum / static_cast<double>(window) >= threshold) return i + 1;
    }
    return std::nullopt;
}

ExplorationSeed run_exploration_seed(const ExplorationOptions& options, std::uint64_t seed) {
    const std::vector<std::string> base{"F", "L", "R"};
    const Corpus corpus = relabel_duplicates(nav_corpus(options.corpus_actions, options.noise, mix_seed(seed, 30)),
                                             base, options.multiplicity, mix_seed(seed, 31));
    const ActionVocabulary vocab = build_vocabulary(corpus, 1);
    SgnsConfig cfg = options.sgns;
    cfg.seed = mix_seed(seed, 32);
    const TrainResult trained = train(corpus, vocab, cfg);

    SeekAvoidConfig env_cfg = options.env;
    env_cfg.seed = mix_seed(seed, 33);
    auto make_env = [&]() {
        return DuplicatedActionEnv(std::make_unique<SeekAvoidEnv>(env_cfg), options.multiplicity);
    };
    DuplicatedActionEnv probe = make_env();
    const Matrix e = rows_for_actions(trained.table, probe);

    KmeansOptions km;
    km.k = options.k;
    km.seed = mix_seed(seed, 34);
    km.restarts = options.restarts;
    const ClusterAssignment clusters = kmeans(e, km);

    ExplorationSeed out;
    out.seed = seed;
    out.ari = adjusted_rand_index(clusters.assignment, probe.mapping());

    AgentConfig agent = options.agent;
    agent.seed = mix_seed(seed, 35);
    const std::size_t censored = agent.total_steps;
    {
        DuplicatedActionEnv env = make_env();
        out.curve_kexp = run_q_learning(env, agent, options.mode, e, Exploration::kexp(clusters.assignment, options.k)).curve;
        const auto n = episodes_to_threshold(out.curve_kexp, options.threshold, options.window);
        out.censored_kexp = !n;
        out.episodes_kexp = n.value_or(censored);
    }
    {
        DuplicatedActionEnv env = make_env();
        out.curve_uniform = run_q_learning(env, agent, options.mode, e, Exploration::uniform()).curve;
        const auto n = episodes_to_threshold(out.curve_uniform, options.threshold, options.window);
        out.censored_uniform = !n;
        out.episodes_uniform = n.value_or(censored);
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw Error("median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace act2vec::experiments
