#include "act2vec/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>

#include "act2vec/error.hpp"
#include "act2vec/random.hpp"

namespace act2vec::mdp {

namespace {

constexpr double kRowTolerance = 1e-9;

void check_row(std::span<const double> row, const std::string& what) {
    double total = 0.0;
    for (double v : row) {
        if (!(v >= 0.0)) throw Error(what + ": negative or non-finite entry");
        total += v;
    }
    if (std::abs(total - 1.0) > kRowTolerance) throw Error(what + ": row does not sum to 1");
}

}  // namespace

TabularMdp::TabularMdp(std::size_t n_states, std::size_t n_actions, double gamma)
    : n_states_(n_states),
      n_actions_(n_actions),
      gamma_(gamma),
      transitions_(n_states * n_actions * n_states, 0.0),
      rewards_(n_states, 0.0) {
    if (n_states == 0 || n_actions == 0) throw Error("mdp: sizes must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error("mdp: gamma must lie in (0, 1)");
}

void TabularMdp::validate() const {
    for (std::size_t s = 0; s < n_states_; ++s) {
        for (std::size_t a = 0; a < n_actions_; ++a)
            check_row({transitions_.data() + (s * n_actions_ + a) * n_states_, n_states_},
                      "mdp: P[" + std::to_string(s) + "," + std::to_string(a) + "]");
        if (!(rewards_[s] >= 0.0 && rewards_[s] <= 1.0)) throw Error("mdp: reward outside [0, 1]");
    }
}

TabularPolicy::TabularPolicy(std::size_t n_states, std::size_t n_actions)
    : n_states_(n_states), n_actions_(n_actions), probs_(n_states * n_actions, 0.0) {}

TabularPolicy TabularPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
    TabularPolicy p(n_states, n_actions);
    std::fill(p.probs_.begin(), p.probs_.end(), 1.0 / static_cast<double>(n_actions));
    return p;
}

void TabularPolicy::validate() const {
    for (std::size_t s = 0; s < n_states_; ++s)
        check_row({probs_.data() + s * n_actions_, n_actions_}, "policy: state " + std::to_string(s));
}

ActionGroup ActionGroup::uniform(std::size_t n_states, std::vector<std::size_t> members) {
    ActionGroup g;
    const double w = 1.0 / static_cast<double>(members.size());
    g.mixing.assign(n_states, std::vector<double>(members.size(), w));
    g.members = std::move(members);
    return g;
}

bool ActionGroup::contains(std::size_t a) const { return slot(a).has_value(); }

std::optional<std::size_t> ActionGroup::slot(std::size_t a) const {
    auto it = std::find(members.begin(), members.end(), a);
    if (it == members.end()) return std::nullopt;
    return static_cast<std::size_t>(it - members.begin());
}

void ActionGroup::validate(std::size_t n_states, std::size_t n_actions) const {
    if (members.size() < 2) throw Error("group: |K| must be >= 2");
    std::vector<bool> seen(n_actions, false);
    for (std::size_t a : members) {
        if (a >= n_actions) throw Error("group: member out of range");
        if (seen[a]) throw Error("group: duplicate member");
        seen[a] = true;
    }
    if (mixing.size() != n_states) throw Error("group: mixing needs one row per state");
    for (std::size_t s = 0; s < n_states; ++s) {
        if (mixing[s].size() != members.size()) throw Error("group: mixing row size differs from |K|");
        check_row(mixing[s], "group: mixing at state " + std::to_string(s));
    }
}

std::vector<double> policy_transition(const TabularMdp& mdp, const TabularPolicy& policy) {
    const std::size_t S = mdp.n_states();
    std::vector<double> k(S * S, 0.0);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const double pa = policy.prob(s, a);
            if (pa == 0.0) continue;
            for (std::size_t s2 = 0; s2 < S; ++s2) k[s * S + s2] += pa * mdp.p(s, a, s2);
        }
    return k;
}

std::vector<double> policy_evaluation(const TabularMdp& mdp, const TabularPolicy& policy, double tol) {
    if (!(tol > 0.0)) throw Error("policy_evaluation: tol must be > 0");
    const std::size_t S = mdp.n_states();
    const std::vector<double> k = policy_transition(mdp, policy);
    const double gamma = mdp.gamma();
    const double stop = tol * (1.0 - gamma);
    std::vector<double> v(S, 0.0), next(S);
    while (true) {
        double change = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            double acc = 0.0;
            for (std::size_t s2 = 0; s2 < S; ++s2) acc += k[s * S + s2] * v[s2];
            next[s] = mdp.reward(s) + gamma * acc;
            change = std::max(change, std::abs(next[s] - v[s]));
        }
        v.swap(next);
        if (change < stop) break;
    }
    return v;
}

double pmi_next_state(const TabularMdp& mdp, const TabularPolicy& demo, std::size_t s, std::size_t a,
                      std::size_t s_next) {
    if (demo.prob(s, a) <= 0.0) throw Error("pmi_next_state: demonstrator never plays the action");
    double marginal = 0.0;
    for (std::size_t b = 0; b < mdp.n_actions(); ++b) marginal += demo.prob(s, b) * mdp.p(s, b, s_next);
    if (marginal <= 0.0) throw Error("pmi_next_state: zero marginal P(s'|s)");
    const double cond = mdp.p(s, a, s_next);
    if (cond == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(cond / marginal);
}

TabularPolicy categorize_policy(const TabularPolicy& policy, const ActionGroup& group) {
    group.validate(policy.n_states(), policy.n_actions());
    TabularPolicy out = policy;
    for (std::size_t s = 0; s < policy.n_states(); ++s) {
        double mass = 0.0, mu_total = 0.0;
        for (std::size_t j = 0; j < group.members.size(); ++j) {
            mass += policy.prob(s, group.members[j]);
            mu_total += group.mixing[s][j];
        }
        if (mu_total <= 0.0) throw Error("categorize_policy: mixing has zero mass on K");
        for (std::size_t j = 0; j < group.members.size(); ++j)
            out.prob(s, group.members[j]) = group.mixing[s][j] * mass / mu_total;
    }
    return out;
}

TabularMdp merged_mdp(const TabularMdp& mdp, const ActionGroup& group) {
    group.validate(mdp.n_states(), mdp.n_actions());
    TabularMdp out = mdp;
    const std::size_t S = mdp.n_states();
    std::vector<double> mix(S);
    for (std::size_t s = 0; s < S; ++s) {
        std::fill(mix.begin(), mix.end(), 0.0);
        for (std::size_t j = 0; j < group.members.size(); ++j)
            for (std::size_t s2 = 0; s2 < S; ++s2) mix[s2] += group.mixing[s][j] * mdp.p(s, group.members[j], s2);
        for (std::size_t a : group.members)
            for (std::size_t s2 = 0; s2 < S; ++s2) out.p(s, a, s2) = mix[s2];
    }
    return out;
}

TransitionGap one_step_tv_gap(const TabularMdp& mdp, const ActionGroup& group) {
    const TabularMdp merged = merged_mdp(mdp, group);
    TransitionGap gap;
    const std::size_t S = mdp.n_states();
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a1 : group.members)
            for (std::size_t a2 : group.members)
                for (std::size_t s2 = 0; s2 < S; ++s2)
                    gap.pointwise = std::max(gap.pointwise, std::abs(mdp.p(s, a1, s2) - mdp.p(s, a2, s2)));
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            double l1 = 0.0;
            for (std::size_t s2 = 0; s2 < S; ++s2) l1 += std::abs(mdp.p(s, a, s2) - merged.p(s, a, s2));
            gap.merged = std::max(gap.merged, l1);
        }
    }
    return gap;
}

std::vector<std::pair<std::size_t, double>> tstep_tv_check(const TabularMdp& mdp, const TabularMdp& merged,
                                                           const TabularPolicy& policy, std::size_t s0,
                                                           std::size_t t_max) {
    if (t_max < 1) throw Error("tstep_tv_check: t_max must be >= 1");
    const std::size_t S = mdp.n_states();
    if (s0 >= S) throw Error("tstep_tv_check: start state out of range");
    const std::vector<double> k = policy_transition(mdp, policy);
    const std::vector<double> k_hat = policy_transition(merged, policy);
    std::vector<double> d(S, 0.0), d_hat(S, 0.0), nd(S), nd_hat(S);
    d[s0] = d_hat[s0] = 1.0;
    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t t = 1; t <= t_max; ++t) {
        std::fill(nd.begin(), nd.end(), 0.0);
        std::fill(nd_hat.begin(), nd_hat.end(), 0.0);
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t s2 = 0; s2 < S; ++s2) {
                nd[s2] += d[s] * k[s * S + s2];
                nd_hat[s2] += d_hat[s] * k_hat[s * S + s2];
            }
        d.swap(nd);
        d_hat.swap(nd_hat);
        double tv = 0.0;
        for (std::size_t s = 0; s < S; ++s) tv += std::abs(d[s] - d_hat[s]);
        out.emplace_back(t, tv);
    }
    return out;
}

double lemma1_bound(double gamma, double eps) {
    return 6.0 * gamma / std::pow(1.0 - gamma, 4) * eps;
}

double lemma1_series(double gamma, double eps) {
    return gamma * (1.0 + 4.0 * gamma + gamma * gamma) / std::pow(1.0 - gamma, 4) * eps;
}

double series_partial_sum(double gamma, std::size_t t_max, int power) {
    double total = 0.0;
    double g = 1.0;
    for (std::size_t t = 0; t <= t_max; ++t) {
        total += g * std::pow(static_cast<double>(t), power);
        g *= gamma;
    }
    return total;
}

Lemma1Report verify_lemma1(const TabularMdp& mdp, const TabularPolicy& policy, const ActionGroup& group,
                           double tol) {
    const TransitionGap gap = one_step_tv_gap(mdp, group);
    const TabularPolicy pi_k = categorize_policy(policy, group);
    const std::vector<double> v = policy_evaluation(mdp, policy, tol);
    const std::vector<double> v_k = policy_evaluation(mdp, pi_k, tol);
    Lemma1Report r;
    r.eps_pointwise = gap.pointwise;
    r.eps = gap.merged;
    for (std::size_t s = 0; s < v.size(); ++s) r.lhs = std::max(r.lhs, std::abs(v[s] - v_k[s]));
    r.bound = lemma1_bound(mdp.gamma(), r.eps);
    r.slack = r.bound - r.lhs;
    r.holds = r.lhs <= r.bound + tol;
    return r;
}

RandomMdp random_mdp(std::size_t n_states, std::size_t n_actions, double gamma, std::uint64_t seed,
                     std::optional<DuplicateGroupSpec> duplicates) {
    RandomMdp out{TabularMdp(n_states, n_actions, gamma), std::nullopt};
    Rng rng(seed);
    std::vector<double> row(n_states);
    for (std::size_t s = 0; s < n_states; ++s) {
        out.mdp.reward(s) = rng.uniform();
        for (std::size_t a = 0; a < n_actions; ++a) {
            rng.dirichlet_flat(row);
            for (std::size_t s2 = 0; s2 < n_states; ++s2) out.mdp.p(s, a, s2) = row[s2];
        }
    }
    if (!duplicates) return out;

    const DuplicateGroupSpec spec = *duplicates;
    if (spec.size < 2 || spec.size > n_actions) throw Error("random_mdp: duplicate group size must be in [2, |A|]");
    if (!(spec.epsilon >= 0.0)) throw Error("random_mdp: epsilon must be >= 0");
    // Each member is (1 - l) * base + l * q_a with its own random row q_a. Member rows then
    // differ from any mu-mixture by at most 2l in L1, so l = eps / 4 keeps the gap below eps.
    const double lambda = spec.epsilon / 4.0;
    std::vector<std::size_t> members(spec.size);
    std::iota(members.begin(), members.end(), std::size_t{0});
    ActionGroup group;
    group.members = members;
    std::vector<double> base(n_states), q(n_states);
    for (std::size_t s = 0; s < n_states; ++s) {
        rng.dirichlet_flat(base);
        for (std::size_t a : members) {
            rng.dirichlet_flat(q);
            for (std::size_t s2 = 0; s2 < n_states; ++s2)
                out.mdp.p(s, a, s2) = lambda == 0.0 ? base[s2] : (1.0 - lambda) * base[s2] + lambda * q[s2];
        }
        std::vector<double> mu(spec.size);
        rng.dirichlet_flat(mu);
        group.mixing.push_back(std::move(mu));
    }
    out.group = std::move(group);
    return out;
}

TabularPolicy random_policy(std::size_t n_states, std::size_t n_actions, std::uint64_t seed) {
    TabularPolicy p(n_states, n_actions);
    Rng rng(seed);
    std::vector<double> row(n_actions);
    for (std::size_t s = 0; s < n_states; ++s) {
        rng.dirichlet_flat(row);
        for (std::size_t a = 0; a < n_actions; ++a) p.prob(s, a) = row[a];
    }
    return p;
}

// ---- action-only context monotonicity ------------------------------------------------

namespace {

constexpr double kCompareSlack = 1e-12;

bool at_least(double x, double y) { return x >= y - kCompareSlack * std::max(1.0, std::abs(y)); }

}  // namespace

MonotonicityResult verify_context_monotonicity(const Universe& universe, std::size_t s, std::size_t a1,
                                               std::size_t a2, std::size_t c) {
    // Occurrence-weighted joint over (a, c) at visits of s that have a following step.
    double visits = 0.0, n_a1 = 0.0, n_a2 = 0.0, n_c = 0.0, n_a1c = 0.0, n_a2c = 0.0;
    MonotonicityResult r;
    std::vector<double> policy_weight(universe.policies.size(), 0.0);
    for (const UniverseAtom& atom : universe.atoms) {
        if (atom.policy >= universe.policies.size()) throw Error("universe: atom references unknown policy");
        policy_weight[atom.policy] += atom.probability;
        bool has1 = false, has2 = false;
        const auto& tr = atom.trajectory;
        for (std::size_t t = 0; t + 1 < tr.size(); ++t) {
            if (tr[t].state != s) continue;
            const double p = atom.probability;
            const bool next_c = tr[t + 1].action == c;
            visits += p;
            if (next_c) n_c += p;
            if (tr[t].action == a1) {
                n_a1 += p;
                if (next_c) {
                    n_a1c += p;
                    has1 = true;
                }
            }
            if (tr[t].action == a2) {
                n_a2 += p;
                if (next_c) {
                    n_a2c += p;
                    has2 = true;
                }
            }
        }
        if (has1) r.p_triple_a1 += atom.probability;
        if (has2) r.p_triple_a2 += atom.probability;
    }
    if (visits <= 0.0 || n_a1 <= 0.0 || n_a2 <= 0.0 || n_c <= 0.0) throw Error("undefined PMI");

    for (std::size_t i = 0; i < universe.policies.size(); ++i) {
        const auto& row = universe.policies[i].at(s);
        if (row.at(a1) >= row.at(a2)) r.p_policy_prefers_a1 += policy_weight[i];
    }
    auto pmi_of = [&](double joint, double marg) {
        if (joint == 0.0) return -std::numeric_limits<double>::infinity();
        return std::log(joint * visits / (marg * n_c));
    };
    r.pmi_a1 = pmi_of(n_a1c, n_a1);
    r.pmi_a2 = pmi_of(n_a2c, n_a2);

    double total_weight = std::accumulate(policy_weight.begin(), policy_weight.end(), 0.0);
    const bool eq1 = at_least(r.p_policy_prefers_a1, 0.5 * total_weight);
    const bool eq2 = std::isinf(r.pmi_a2) ? true : at_least(r.pmi_a1, r.pmi_a2);
    r.premises_hold = eq1 && eq2;
    r.conclusion_holds = at_least(r.p_triple_a1, r.p_triple_a2);
    return r;
}

namespace {

// Decision state 0 followed by one context step in state 1. Policy i has weight w_i, picks
// a1 with probability p_i, and follows action a with context c1 with probability q[i][a].
Universe toy_universe(const double w[2], const double p[2], const double q[2][2]) {
    Universe u;
    for (int i = 0; i < 2; ++i) u.policies.push_back({{p[i], 1.0 - p[i]}, {0.5, 0.5}});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t c = 0; c < 2; ++c) {
                const double pa = a == 0 ? p[i] : 1.0 - p[i];
                const double pc = c == 0 ? q[i][a] : 1.0 - q[i][a];
                const double prob = w[i] * pa * pc;
                if (prob > 0.0) u.atoms.push_back({prob, i, {{0, a}, {1, c}}});
            }
    return u;
}

}  // namespace

MonotonicityScan scan_context_monotonicity(bool deterministic_policies, std::size_t grid) {
    if (grid < 2) throw Error("scan: grid must be >= 2");
    std::vector<double> levels(grid);
    for (std::size_t i = 0; i < grid; ++i) levels[i] = static_cast<double>(i) / static_cast<double>(grid - 1);
    const std::vector<double> choice = deterministic_policies ? std::vector<double>{0.0, 1.0} : levels;

    MonotonicityScan scan;
    for (double w0 : levels) {
        const double w[2] = {w0, 1.0 - w0};
        for (double p0 : choice)
            for (double p1 : choice)
                for (double q00 : levels)
                    for (double q01 : levels)
                        for (double q10 : levels)
                            for (double q11 : levels) {
                                const double p[2] = {p0, p1};
                                const double q[2][2] = {{q00, q01}, {q10, q11}};
                                const Universe u = toy_universe(w, p, q);
                                ++scan.universes;
                                for (std::size_t c = 0; c < 2; ++c)
                                    for (std::size_t a1 = 0; a1 < 2; ++a1) {
                                        try {
                                            const auto r = verify_context_monotonicity(u, 0, a1, 1 - a1, c);
                                            if (!r.premises_hold) continue;
                                            ++scan.premises_held;
                                            if (!r.conclusion_holds) ++scan.counterexamples;
                                        } catch (const Error&) {
                                            ++scan.undefined;
                                        }
                                    }
                            }
    }
    return scan;
}

// ---- suite -----------------------------------------------------------------------------

namespace {

constexpr double kTvSlack = 1e-12;

FixtureReport run_fixture(const SuiteOptions& options, std::size_t index) {
    Rng rng(mix_seed(options.seed, index));
    FixtureReport f;
    f.seed = rng.next();
    f.n_states = 2 + rng.uniform_index(options.max_states - 1);
    f.n_actions = 2 + rng.uniform_index(options.max_actions - 1);
    f.gamma = options.gammas[index % options.gammas.size()];
    f.planted_epsilon = options.epsilons[(index / options.gammas.size()) % options.epsilons.size()];
    const std::size_t group_size = 2 + rng.uniform_index(f.n_actions - 1);

    const RandomMdp m = random_mdp(f.n_states, f.n_actions, f.gamma, mix_seed(f.seed, 0),
                                   DuplicateGroupSpec{group_size, f.planted_epsilon});
    const TabularPolicy policy = random_policy(f.n_states, f.n_actions, mix_seed(f.seed, 1));
    f.lemma1 = verify_lemma1(m.mdp, policy, *m.group, options.tol);

    const TabularMdp merged = merged_mdp(m.mdp, *m.group);
    f.max_tv_ratio_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t s0 = 0; s0 < f.n_states; ++s0)
        for (const auto& [t, tv] : tstep_tv_check(m.mdp, merged, policy, s0, options.t_max))
            f.max_tv_ratio_violation =
                std::max(f.max_tv_ratio_violation, tv - static_cast<double>(t) * f.lemma1.eps);
    f.tstep_holds = f.max_tv_ratio_violation <= kTvSlack;
    return f;
}

}  // namespace

std::vector<FixtureReport> run_lemma_suite(const SuiteOptions& options) {
    if (options.max_states < 2 || options.max_actions < 2) throw Error("suite: max states/actions must be >= 2");
    if (options.gammas.empty() || options.epsilons.empty()) throw Error("suite: gamma and epsilon lists must be non-empty");
    for (double g : options.gammas)
        if (!(g > 0.0 && g < 1.0)) throw Error("suite: gamma must lie in (0, 1)");
    for (double e : options.epsilons)
        if (!(e >= 0.0)) throw Error("suite: epsilon must be >= 0");
    std::vector<FixtureReport> reports(options.fixtures);
    const auto n = static_cast<std::int64_t>(options.fixtures);
#pragma omp parallel for schedule(dynamic) if (options.parallel)
    for (std::int64_t i = 0; i < n; ++i)
        reports[static_cast<std::size_t>(i)] = run_fixture(options, static_cast<std::size_t>(i));
    return reports;
}

nlohmann::json to_json(const FixtureReport& f) {
    return {
        {"seed", f.seed},
        {"states", f.n_states},
        {"actions", f.n_actions},
        {"gamma", f.gamma},
        {"planted_epsilon", f.planted_epsilon},
        {"eps_hat", f.lemma1.eps},
        {"eps_pointwise", f.lemma1.eps_pointwise},
        {"lhs", f.lemma1.lhs},
        {"bound", f.lemma1.bound},
        {"slack", f.lemma1.slack},
        {"holds", f.lemma1.holds},
        {"tstep_max_violation", f.max_tv_ratio_violation},
        {"tstep_holds", f.tstep_holds},
    };
}

}  // namespace act2vec::mdp
