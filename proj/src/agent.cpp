#include "act2vec/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "act2vec/error.hpp"

namespace act2vec {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw Error("replay buffer: capacity must be >= 1");
    items_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
        return;
    }
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= items_.size()) throw Error("replay buffer: index out of range");
    return items_[(head_ + i) % items_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
    if (batch == 0) throw Error("replay buffer: batch must be >= 1");
    if (items_.size() < batch) throw Error("replay buffer: fewer transitions than the batch size");
    std::vector<const Transition*> out(batch);
    for (auto& p : out) p = &items_[rng.uniform_index(items_.size())];
    return out;
}

QMode parse_q_mode(const std::string& name) {
    if (name == "baseline") return QMode::Baseline;
    if (name == "embedding") return QMode::Embedding;
    throw Error("unknown Q mode '" + name + "' (baseline, embedding)");
}

std::string to_string(QMode mode) { return mode == QMode::Baseline ? "baseline" : "embedding"; }

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, std::size_t hidden, std::size_t out) {
    if (hidden == 0) return {in, out};
    return {in, hidden, out};
}

}  // namespace

QNetwork::QNetwork(const QNetworkShape& shape, QMode mode, std::optional<Matrix> embeddings, std::uint64_t seed)
    : mode_(mode), n_actions_(shape.actions) {
    if (shape.actions == 0 || shape.observation == 0 || shape.features == 0)
        throw Error("q-network: sizes must be >= 1");
    Rng rng(seed);
    phi_ = Mlp(layer_sizes(shape.observation, shape.phi_hidden, shape.features), rng);
    if (mode_ == QMode::Baseline) {
        const double limit = 1.0 / std::sqrt(static_cast<double>(shape.features));
        w_ = Matrix(shape.actions, shape.features);
        for (double& v : w_.data()) v = rng.uniform(-limit, limit);
    } else {
        if (!embeddings) throw Error("q-network: embedding mode requires an embedding table");
        if (embeddings->rows() != shape.actions)
            throw Error("q-network: embedding table has " + std::to_string(embeddings->rows()) + " rows for " +
                        std::to_string(shape.actions) + " actions");
        embeddings_ = std::move(*embeddings);
        psi_ = Mlp(layer_sizes(embeddings_.cols(), shape.psi_hidden, shape.features), rng);
    }
}

Matrix QNetwork::action_features() const {
    if (mode_ == QMode::Baseline) return w_;
    Matrix f(n_actions_, phi_.output_size());
    for (std::size_t a = 0; a < n_actions_; ++a) {
        const auto out = psi_.forward(embeddings_.row(a));
        std::copy(out.begin(), out.end(), f.row(a).begin());
    }
    return f;
}

std::vector<double> QNetwork::q_values(std::span<const double> state) const {
    const std::vector<double> features = phi_.forward(state);
    const Matrix f = action_features();
    std::vector<double> q(n_actions_);
    for (std::size_t a = 0; a < n_actions_; ++a) q[a] = dot(f.row(a), features);
    return q;
}

Exploration Exploration::kexp(std::span<const std::size_t> assignment, std::size_t k) {
    if (k == 0) throw Error("k-exp: k must be >= 1");
    Exploration e;
    e.mode = ExplorationMode::KExp;
    e.clusters.resize(k);
    for (std::size_t a = 0; a < assignment.size(); ++a) {
        if (assignment[a] >= k) throw Error("k-exp: cluster id out of range");
        e.clusters[assignment[a]].push_back(a);
    }
    return e;
}

std::size_t argmax(std::span<const double> q) {
    if (q.empty()) throw Error("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t a = 1; a < q.size(); ++a)
        if (q[a] > q[best]) best = a;
    return best;
}

std::size_t select_action(std::span<const double> q, double epsilon, const Exploration& exploration, Rng& rng) {
    if (rng.uniform() >= epsilon) return argmax(q);
    if (exploration.mode == ExplorationMode::Uniform) return rng.uniform_index(q.size());
    const auto& cluster = exploration.clusters.at(rng.uniform_index(exploration.clusters.size()));
    if (cluster.empty()) throw Error("k-exp: empty cluster");
    return cluster[rng.uniform_index(cluster.size())];
}

double td_update(QNetwork& net, std::span<const Transition* const> batch, double gamma, double lr) {
    if (batch.empty()) throw Error("td_update: empty batch");
    const std::size_t A = net.num_actions();
    const std::size_t m = net.feature_width();
    const Mlp& phi = net.phi();
    const Mlp& psi = net.psi();
    const bool embedding = net.mode() == QMode::Embedding;

    Matrix f(A, m);
    std::vector<Mlp::Cache> psi_cache(embedding ? A : 0);
    if (embedding) {
        for (std::size_t a = 0; a < A; ++a) {
            const auto& out = psi.forward(net.embeddings().row(a), psi_cache[a]);
            std::copy(out.begin(), out.end(), f.row(a).begin());
        }
    } else {
        f = net.action_weights();
    }

    const double n = static_cast<double>(batch.size());
    std::vector<Mlp::Cache> phi_cache(batch.size());
    std::vector<double> d_q(batch.size());
    double loss = 0.0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const Transition& t = *batch[j];
        if (t.action >= A) throw Error("td_update: action out of range");
        double y = t.reward;
        if (!t.done) {
            const std::vector<double> next = phi.forward(t.next_state);
            double best = -INFINITY;
            for (std::size_t a = 0; a < A; ++a) best = std::max(best, dot(f.row(a), next));
            y += gamma * best;
        }
        const auto& features = phi.forward(t.state, phi_cache[j]);
        const double err = dot(f.row(t.action), features) - y;
        loss += err * err;
        d_q[j] = 2.0 * err / n;
    }
    loss /= n;
    if (!std::isfinite(loss)) throw DivergenceError("divergence: non-finite TD loss (learning rate too large?)");

    MlpGradient g_phi = phi.zero_gradient();
    Matrix d_f(A, m);
    std::vector<double> d_features(m);
    for (std::size_t j = 0; j < batch.size(); ++j) {
        if (d_q[j] == 0.0) continue;
        const std::size_t a = batch[j]->action;
        const auto& features = phi_cache[j].back();
        const auto fa = f.row(a);
        auto dfa = d_f.row(a);
        for (std::size_t i = 0; i < m; ++i) {
            d_features[i] = d_q[j] * fa[i];
            dfa[i] += d_q[j] * features[i];
        }
        phi.backward(phi_cache[j], d_features, g_phi);
    }
    net.phi().apply(g_phi, lr);
    if (embedding) {
        MlpGradient g_psi = psi.zero_gradient();
        for (std::size_t a = 0; a < A; ++a) {
            const auto row = d_f.row(a);
            if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) continue;
            psi.backward(psi_cache[a], row, g_psi);
        }
        net.psi().apply(g_psi, lr);
    } else {
        auto w = net.action_weights().data();
        const auto dw = d_f.data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * dw[i];
    }
    if (!net.phi().finite() || (embedding && !net.psi().finite()))
        throw DivergenceError("divergence: non-finite network parameters (learning rate too large?)");
    return loss;
}

void AgentConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error("agent: gamma must lie in (0, 1)");
    if (!(learning_rate > 0.0)) throw Error("agent: learning rate must be > 0");
    if (batch == 0) throw Error("agent: batch must be >= 1");
    if (capacity < batch) throw Error("agent: capacity must be >= batch");
    if (total_steps == 0) throw Error("agent: total_steps must be >= 1");
    if (!(epsilon_end <= epsilon_start)) throw Error("agent: epsilon end must be <= start");
    if (epsilon_end < 0.0 || epsilon_start > 1.0) throw Error("agent: epsilon must lie in [0, 1]");
}

double AgentConfig::epsilon_at(std::size_t step) const {
    if (anneal_steps == 0) return epsilon_end;
    const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(anneal_steps));
    return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

double evaluate_greedy(Environment& env, const QNetwork& net, std::size_t episodes) {
    if (episodes == 0) throw Error("evaluate_greedy: episodes must be >= 1");
    double total = 0.0;
    for (std::size_t e = 0; e < episodes; ++e) {
        Observation obs = env.reset();
        while (true) {
            const StepResult r = env.step(argmax(net.q_values(obs.features)));
            total += r.reward;
            obs = r.observation;
            if (r.done) break;
        }
    }
    return total / static_cast<double>(episodes);
}

LearningResult run_q_learning(Environment& env, const AgentConfig& config, QMode mode,
                              const std::optional<Matrix>& embeddings, const Exploration& exploration,
                              Environment* eval_env) {
    config.validate();
    if (exploration.mode == ExplorationMode::KExp) {
        std::vector<bool> covered(env.num_actions(), false);
        for (const auto& c : exploration.clusters) {
            if (c.empty()) throw Error("k-exp: empty cluster");
            for (std::size_t a : c) covered.at(a) = true;
        }
        if (std::find(covered.begin(), covered.end(), false) != covered.end())
            throw Error("k-exp: every action must belong to a cluster");
    }
    QNetworkShape shape = config.shape;
    shape.observation = env.observation_size();
    shape.actions = env.num_actions();
    LearningResult result{{}, {}, QNetwork(shape, mode, embeddings, mix_seed(config.seed, 1))};
    QNetwork& net = result.network;
    ReplayBuffer replay(config.capacity);
    Rng rng(mix_seed(config.seed, 2));
    const std::size_t learn_start = std::max(config.batch, config.learn_start);

    std::size_t step = 0;
    while (step < config.total_steps) {
        Observation obs = env.reset();
        double ret = 0.0;
        while (true) {
            const double eps = config.epsilon_at(step);
            const std::size_t a = select_action(net.q_values(obs.features), eps, exploration, rng);
            StepResult r = env.step(a);
            ++step;
            ret += r.reward;
            replay.push({obs.features, a, r.reward, r.observation.features, r.done});
            if (replay.size() >= learn_start) {
                const auto batch = replay.sample(config.batch, rng);
                td_update(net, batch, config.gamma, config.learning_rate);
            }
            if (eval_env && config.eval_every > 0 && step % config.eval_every == 0)
                result.evaluations.push_back({step, evaluate_greedy(*eval_env, net, config.eval_episodes)});
            obs = std::move(r.observation);
            if (r.done) {
                result.curve.push_back({result.curve.size(), ret, eps, step});
                break;
            }
            if (step >= config.total_steps) break;
        }
    }
    return result;
}

void write_learning_curve(const std::vector<EpisodeRecord>& curve, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write learning curve: " + path);
    std::fputs("episode,return,epsilon,steps\n", f);
    for (const auto& e : curve) std::fprintf(f, "%zu,%.9g,%.9g,%zu\n", e.episode, e.ret, e.epsilon, e.steps);
    if (std::fclose(f) != 0) throw Error("error writing learning curve: " + path);
}

nlohmann::json to_json(const AgentConfig& c) {
    return {{"gamma", c.gamma},
            {"learning_rate", c.learning_rate},
            {"batch", c.batch},
            {"capacity", c.capacity},
            {"total_steps", c.total_steps},
            {"epsilon_start", c.epsilon_start},
            {"epsilon_end", c.epsilon_end},
            {"anneal_steps", c.anneal_steps},
            {"learn_start", c.learn_start},
            {"eval_every", c.eval_every},
            {"eval_episodes", c.eval_episodes},
            {"phi_hidden", c.shape.phi_hidden},
            {"features", c.shape.features},
            {"psi_hidden", c.shape.psi_hidden},
            {"seed", c.seed}};
}

}  // namespace act2vec
