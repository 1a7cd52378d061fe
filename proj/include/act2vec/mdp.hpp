#pragma once

// Exact tabular-MDP machinery for checking the action-grouping value bound: policy
// evaluation, categorization policies, merged-transition MDPs, t-step distribution gaps
// and the geometric-series bound, all by brute force.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace act2vec::mdp {

// State-reward MDP (S, A, P, R, gamma) with R: S -> [0, 1].
class TabularMdp {
public:
    TabularMdp(std::size_t n_states, std::size_t n_actions, double gamma);

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    double gamma() const noexcept { return gamma_; }

    double p(std::size_t s, std::size_t a, std::size_t s2) const {
        return transitions_[(s * n_actions_ + a) * n_states_ + s2];
    }
    double& p(std::size_t s, std::size_t a, std::size_t s2) {
        return transitions_[(s * n_actions_ + a) * n_states_ + s2];
    }
    double reward(std::size_t s) const { return rewards_.at(s); }
    double& reward(std::size_t s) { return rewards_.at(s); }

    // Throws Error when a row is not a distribution (tolerance 1e-9) or R leaves [0, 1].
    void validate() const;

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    double gamma_;
    std::vector<double> transitions_;
    std::vector<double> rewards_;
};

class TabularPolicy {
public:
    TabularPolicy(std::size_t n_states, std::size_t n_actions);
    static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions);

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    double prob(std::size_t s, std::size_t a) const { return probs_[s * n_actions_ + a]; }
    double& prob(std::size_t s, std::size_t a) { return probs_[s * n_actions_ + a]; }

    void validate() const;

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    std::vector<double> probs_;
};

// A subset K of actions with a per-state mixing distribution mu over its members.
struct ActionGroup {
    std::vector<std::size_t> members;
    std::vector<std::vector<double>> mixing;  // [state][member index]

    static ActionGroup uniform(std::size_t n_states, std::vector<std::size_t> members);
    bool contains(std::size_t a) const;
    // Index of `a` within members, or nullopt.
    std::optional<std::size_t> slot(std::size_t a) const;
    void validate(std::size_t n_states, std::size_t n_actions) const;
};

// Bellman-expectation fixed point, stopping when the sup-norm change drops below
// tol * (1 - gamma); then ||V - V^pi||_inf < tol.
std::vector<double> policy_evaluation(const TabularMdp& mdp, const TabularPolicy& policy, double tol);

// State-to-state kernel P^pi(s'|s).
std::vector<double> policy_transition(const TabularMdp& mdp, const TabularPolicy& policy);

// log[ P(s'|s,a) / sum_b demo(b|s) P(s'|s,b) ]. Throws Error when demo(a|s) == 0 or the
// marginal is zero. Returns -infinity when P(s'|s,a) == 0.
double pmi_next_state(const TabularMdp& mdp, const TabularPolicy& demo, std::size_t s, std::size_t a,
                      std::size_t s_next);

// pi_K(a|s) = mu(a|s) * sum_{K} pi / sum_{K} mu for a in K, pi(a|s) otherwise.
TabularPolicy categorize_policy(const TabularPolicy& policy, const ActionGroup& group);

// P_hat(.|s,a) = sum_{a' in K} mu(a'|s) P(.|s,a') for a in K, unchanged otherwise.
TabularMdp merged_mdp(const TabularMdp& mdp, const ActionGroup& group);

struct TransitionGap {
    double pointwise = 0.0;  // max_{s,s',a1,a2 in K} |P(s'|s,a1) - P(s'|s,a2)|
    double merged = 0.0;     // max_{s,a} sum_{s'} |P(s'|s,a) - P_hat(s'|s,a)|
};

TransitionGap one_step_tv_gap(const TabularMdp& mdp, const ActionGroup& group);

// L1 distance between the t-step state distributions from s0 under `policy` in both
// MDPs, for t = 1..t_max (exact forward propagation).
std::vector<std::pair<std::size_t, double>> tstep_tv_check(const TabularMdp& mdp, const TabularMdp& merged,
                                                           const TabularPolicy& policy, std::size_t s0,
                                                           std::size_t t_max);

// 6 gamma / (1 - gamma)^4 * eps.
double lemma1_bound(double gamma, double eps);
// gamma (1 + 4 gamma + gamma^2) / (1 - gamma)^4 * eps, the closed form used by the proof.
// Note this equals sum_t gamma^t t^3, not sum_t gamma^t t (= gamma / (1 - gamma)^2).
double lemma1_series(double gamma, double eps);
// sum_{t=0}^{t_max} gamma^t t^power, summed term by term.
double series_partial_sum(double gamma, std::size_t t_max, int power = 1);

struct Lemma1Report {
    double eps_pointwise = 0.0;
    double eps = 0.0;      // merged gap, the quantity the bound consumes
    double lhs = 0.0;      // ||V^pi - V^{pi_K}||_inf
    double bound = 0.0;
    double slack = 0.0;    // bound - lhs
    bool holds = false;
};

Lemma1Report verify_lemma1(const TabularMdp& mdp, const TabularPolicy& policy, const ActionGroup& group,
                           double tol);

struct DuplicateGroupSpec {
    std::size_t size = 2;
    double epsilon = 0.0;
};

struct RandomMdp {
    TabularMdp mdp;
    std::optional<ActionGroup> group;
};

// Flat-Dirichlet transition rows and uniform rewards. With `duplicates`, actions
// 0..size-1 share a base row per state, each mixed with its own random row so that the
// merged gap under any mixing is at most epsilon.
RandomMdp random_mdp(std::size_t n_states, std::size_t n_actions, double gamma, std::uint64_t seed,
                     std::optional<DuplicateGroupSpec> duplicates = std::nullopt);

TabularPolicy random_policy(std::size_t n_states, std::size_t n_actions, std::uint64_t seed);

// ---- action-only context monotonicity ------------------------------------------------

// Explicit finite universe: a distribution over demonstrator policies, each of which
// induces a distribution over short trajectories of (state, action) steps.
struct UniverseStep {
    std::size_t state;
    std::size_t action;
};

struct UniverseAtom {
    double probability;      // joint probability of (policy, trajectory)
    std::size_t policy;      // index into Universe::policies
    std::vector<UniverseStep> trajectory;
};

struct Universe {
    // policies[i][state][action]: the demonstrator's action distribution.
    std::vector<std::vector<std::vector<double>>> policies;
    std::vector<UniverseAtom> atoms;
};

struct MonotonicityResult {
    double p_policy_prefers_a1 = 0.0;  // P(pi(a1|s) >= pi(a2|s))
    double pmi_a1 = 0.0;               // PMI(a1, c | s)
    double pmi_a2 = 0.0;
    double p_triple_a1 = 0.0;          // P((s, a1, c) in tau)
    double p_triple_a2 = 0.0;
    bool premises_hold = false;
    bool conclusion_holds = false;
};

// The context of an occurrence of (s, a) is the action at the following step. All
// probabilities are computed by enumerating the universe. Throws Error("undefined PMI")
// when a conditioning event has zero probability.
MonotonicityResult verify_context_monotonicity(const Universe& universe, std::size_t s, std::size_t a1,
                                               std::size_t a2, std::size_t c);

struct MonotonicityScan {
    std::size_t universes = 0;
    std::size_t premises_held = 0;
    std::size_t counterexamples = 0;
    std::size_t undefined = 0;
};

// Exhaustive scan over a grid-parameterized family of 2-action, 2-context universes.
// Each universe mixes up to two demonstrator policies; `deterministic_policies` restricts
// them to choose a single action at the decision state.
MonotonicityScan scan_context_monotonicity(bool deterministic_policies, std::size_t grid);

// ---- suite -----------------------------------------------------------------------------

struct FixtureReport {
    std::uint64_t seed = 0;
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    double gamma = 0.0;
    double planted_epsilon = 0.0;
    Lemma1Report lemma1;
    double max_tv_ratio_violation = 0.0;  // max_t (tv_t - t*eps), <= 0 when the t-step bound holds
    bool tstep_holds = false;
};

struct SuiteOptions {
    std::size_t fixtures = 100;
    std::size_t max_states = 6;
    std::size_t max_actions = 6;
    std::vector<double> gammas{0.5, 0.8, 0.9};
    std::vector<double> epsilons{0.0, 0.01, 0.05};
    std::uint64_t seed = 1;
    std::size_t t_max = 20;
    double tol = 1e-9;
    bool parallel = true;
};

std::vector<FixtureReport> run_lemma_suite(const SuiteOptions& options);

nlohmann::json to_json(const FixtureReport& report);

}  // namespace act2vec::mdp
