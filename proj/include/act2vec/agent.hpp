#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "act2vec/envs.hpp"
#include "act2vec/matrix.hpp"
#include "act2vec/mlp.hpp"
#include "act2vec/random.hpp"

namespace act2vec {

struct Transition {
    std::vector<double> state;
    std::size_t action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = false;
};

// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const noexcept { return items_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    // i-th oldest stored transition.
    const Transition& at(std::size_t i) const;
    // Uniform draws with replacement; throws when fewer than `batch` transitions are stored.
    std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // slot of the oldest item once full
    std::vector<Transition> items_;
};

enum class QMode { Baseline, Embedding };

QMode parse_q_mode(const std::string& name);
std::string to_string(QMode mode);

struct QNetworkShape {
    std::size_t observation = 1;
    std::size_t actions = 1;
    std::size_t phi_hidden = 64;
    std::size_t features = 32;   // m
    std::size_t psi_hidden = 64;
};

// Baseline: Q(s, a) = w_a . phi(s). Embedding: Q(s, a) = psi(E(a)) . phi(s) with E frozen.
class QNetwork {
public:
    QNetwork(const QNetworkShape& shape, QMode mode, std::optional<Matrix> embeddings, std::uint64_t seed);

    QMode mode() const noexcept { return mode_; }
    std::size_t num_actions() const noexcept { return n_actions_; }
    std::size_t feature_width() const { return phi_.output_size(); }

    Mlp& phi() { return phi_; }
    const Mlp& phi() const { return phi_; }
    Mlp& psi() { return psi_; }
    const Mlp& psi() const { return psi_; }
    Matrix& action_weights() { return w_; }
    const Matrix& action_weights() const { return w_; }
    const Matrix& embeddings() const { return embeddings_; }

    std::vector<double> q_values(std::span<const double> state) const;

    // Rows psi(E(a)) for every action in embedding mode, rows w_a in baseline mode.
    Matrix action_features() const;

private:
    QMode mode_;
    std::size_t n_actions_;
    Mlp phi_;
    Mlp psi_;
    Matrix w_;
    Matrix embeddings_;
};

enum class ExplorationMode { Uniform, KExp };

struct Exploration {
    ExplorationMode mode = ExplorationMode::Uniform;
    std::vector<std::vector<std::size_t>> clusters;  // members per cluster (k-Exp)

    static Exploration uniform() { return {}; }
    static Exploration kexp(std::span<const std::size_t> assignment, std::size_t k);
};

// Lowest id among the maxima.
std::size_t argmax(std::span<const double> q);

// One uniform draw decides explore vs exploit, so streams stay aligned across modes.
std::size_t select_action(std::span<const double> q, double epsilon, const Exploration& exploration, Rng& rng);

// One SGD step on the mean of (y_j - Q(s_j, a_j))^2 with y_j from the same network and
// held constant. Returns the loss before the step; throws DivergenceError if non-finite.
double td_update(QNetwork& net, std::span<const Transition* const> batch, double gamma, double lr);

struct AgentConfig {
    double gamma = 0.99;
    double learning_rate = 1e-3;
    std::size_t batch = 32;
    std::size_t capacity = 50000;
    std::size_t total_steps = 50000;
    double epsilon_start = 1.0;
    double epsilon_end = 0.1;
    std::size_t anneal_steps = 20000;
    std::size_t learn_start = 0;     // steps before updates begin (at least `batch`)
    std::size_t eval_every = 0;      // greedy evaluation period in steps, 0 = off
    std::size_t eval_episodes = 1;
    QNetworkShape shape;
    std::uint64_t seed = 1;

    void validate() const;
    double epsilon_at(std::size_t step) const;
};

struct EpisodeRecord {
    std::size_t episode = 0;
    double ret = 0.0;
    double epsilon = 0.0;
    std::size_t steps = 0;  // environment steps taken so far, this episode included
};

struct Evaluation {
    std::size_t step = 0;
    double mean_return = 0.0;
};

struct LearningResult {
    std::vector<EpisodeRecord> curve;
    std::vector<Evaluation> evaluations;
    QNetwork network;
};

// Mean return of `episodes` greedy (epsilon = 0) episodes.
double evaluate_greedy(Environment& env, const QNetwork& net, std::size_t episodes);

// Q-learning with replay as in the Q-Embedding / k-Exp algorithm. `embeddings` rows are
// indexed by action id (required in embedding mode); `eval_env`, when given, is used for
// the periodic greedy evaluations.
LearningResult run_q_learning(Environment& env, const AgentConfig& config, QMode mode,
                              const std::optional<Matrix>& embeddings, const Exploration& exploration,
                              Environment* eval_env = nullptr);

// CSV `episode,return,epsilon,steps`.
void write_learning_curve(const std::vector<EpisodeRecord>& curve, const std::string& path);

nlohmann::json to_json(const AgentConfig& config);

}  // namespace act2vec
