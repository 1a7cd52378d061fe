#include <algorithm>
#include <cmath>
#include <numbers>

#include "act2vec/envs.hpp"
#include "act2vec/error.hpp"

namespace act2vec {

double angle_difference(double a, double b) {
    double d = std::fmod(a - b, 360.0);
    if (d <= -180.0) d += 360.0;
    if (d > 180.0) d -= 360.0;
    return d;
}

std::size_t rotate_toward(int heading, double target_heading) {
    return angle_difference(target_heading, heading) > 0.0 ? kRotateLeft : kRotateRight;
}

namespace {

double bearing(double x, double y, double tx, double ty) {
    return std::atan2(ty - y, tx - x) * 180.0 / std::numbers::pi;
}

bool forward_free(const Pose& pose, const Grid& grid, int rotation) {
    const Pose next = apply_motion(pose, kForward, grid, rotation);
    return next.x != pose.x || next.y != pose.y;
}

// Aligned means within half a rotation step; the boundary case counts as aligned so the
// controller cannot flip between two headings at exactly +-half a step.
bool aligned(double error, int rotation) { return std::abs(error) <= rotation / 2.0; }

// Straight corridor of half-width 0.25 from (x, y) to (tx, ty) touches no wall.
bool line_of_sight(const Grid& grid, double x, double y, double tx, double ty) {
    const double len = std::hypot(tx - x, ty - y);
    if (len == 0.0) return true;
    const double nx = -(ty - y) / len * 0.25, ny = (tx - x) / len * 0.25;
    const int samples = static_cast<int>(len / 0.05) + 1;
    for (int i = 0; i <= samples; ++i) {
        const double t = static_cast<double>(i) / samples;
        const double px = x + t * (tx - x), py = y + t * (ty - y);
        if (grid.blocked(px, py) || grid.blocked(px + nx, py + ny) || grid.blocked(px - nx, py - ny)) return false;
    }
    return true;
}

constexpr std::size_t kLookahead = 5;

}  // namespace

// ---- navigation --------------------------------------------------------------------------

void ScriptedNavigator::begin_episode(const Environment&, Rng&) { detour_heading_.reset(); }

std::size_t ScriptedNavigator::steer(const Pose& pose, double tx, double ty, const Grid& grid, int rotation) {
    if (detour_heading_) {
        if (pose.heading != *detour_heading_) return rotate_toward(pose.heading, *detour_heading_);
        detour_heading_.reset();
        if (forward_free(pose, grid, rotation)) return kForward;
    }
    const double error = angle_difference(bearing(pose.x, pose.y, tx, ty), pose.heading);
    if (!aligned(error, rotation)) return rotate_toward(pose.heading, pose.heading + error);
    if (forward_free(pose, grid, rotation)) return kForward;
    // Blocked while aimed at the waypoint: sidestep along the nearest free heading.
    for (int k = 1; k * rotation <= 180; ++k)
        for (int sign : {1, -1}) {
            Pose probe = pose;
            probe.heading = ((pose.heading + sign * k * rotation) % 360 + 360) % 360;
            if (forward_free(probe, grid, rotation)) {
                detour_heading_ = probe.heading;
                return sign > 0 ? kRotateLeft : kRotateRight;
            }
        }
    return kRotateLeft;
}

std::optional<std::size_t> ScriptedNavigator::act(const Environment& env, Rng& rng) {
    const auto* nav = dynamic_cast<const Nav2dEnv*>(&env);
    if (!nav) throw Error("scripted navigator requires a nav2d environment");
    if (nav->next_goal() >= nav->goals().size()) return std::nullopt;
    if (rng.bernoulli(noise_)) return rng.uniform_index(3);

    const Pose& pose = nav->pose();
    const auto goal = nav->goals()[nav->next_goal()];
    const auto path = nav->grid().shortest_path(cell_of(pose.x, pose.y), goal);
    // Aim at the furthest path cell within the lookahead that is in plain view.
    auto target = path.size() >= 2 ? path[1] : goal;
    for (std::size_t j = std::min(kLookahead + 1, path.size()); j-- > 2;)
        if (line_of_sight(nav->grid(), pose.x, pose.y, path[j].first + 0.5, path[j].second + 0.5)) {
            target = path[j];
            break;
        }
    return steer(pose, target.first + 0.5, target.second + 0.5, nav->grid(), nav->rotation());
}

std::optional<std::size_t> SeekAvoidNavigator::act(const Environment& env, Rng& rng) {
    const auto* arena = dynamic_cast<const SeekAvoidEnv*>(&env);
    if (!arena) throw Error("seek-avoid navigator requires a seek-avoid environment");
    const Pose& pose = arena->pose();
    const Apple* target = nullptr;
    double best = 0.0;
    for (const Apple& a : arena->apples()) {
        if (!a.good || a.eaten) continue;
        const double d = std::hypot(a.x - pose.x, a.y - pose.y);
        if (!target || d < best) {
            target = &a;
            best = d;
        }
    }
    if (!target) return std::nullopt;
    if (rng.bernoulli(noise_)) return rng.uniform_index(3);
    const double error = angle_difference(bearing(pose.x, pose.y, target->x, target->y), pose.heading);
    if (!aligned(error, arena->rotation())) return rotate_toward(pose.heading, pose.heading + error);
    return kForward;
}

// ---- drawing -----------------------------------------------------------------------------

namespace {

enum Stroke : std::size_t { L, R, U, D, LU, UR, RD, DL, RU, UL, LD, DR };

struct Side {
    Stroke straight;
    Stroke corner;  // turn into the following side
    bool vertical;
};

const Side kClockwise[4] = {{U, UR, true}, {R, RD, false}, {D, DL, true}, {L, LU, false}};
const Side kCounterClockwise[4] = {{U, UL, true}, {L, LD, false}, {D, DR, true}, {R, RU, false}};

}  // namespace

std::vector<std::size_t> SquareDemonstrator::perfect_square(std::size_t side) {
    std::vector<std::size_t> plan;
    for (const Side& s : kClockwise) {
        plan.insert(plan.end(), side - 1, s.straight);
        plan.push_back(s.corner);
    }
    return plan;
}

void SquareDemonstrator::begin_episode(const Environment&, Rng& rng) {
    const Side* sides = rng.bernoulli(0.5) ? kClockwise : kCounterClockwise;
    const std::size_t first = rng.uniform_index(4);
    auto length = [&]() {
        const long l = static_cast<long>(side_) + static_cast<long>(rng.uniform_index(2 * jitter_ + 1)) -
                       static_cast<long>(jitter_);
        return static_cast<std::size_t>(std::max(2L, l));
    };
    const std::size_t vertical = length(), horizontal = length();
    plan_.clear();
    for (std::size_t i = 0; i < 4; ++i) {
        const Side& s = sides[(first + i) % 4];
        plan_.insert(plan_.end(), (s.vertical ? vertical : horizontal) - 1, s.straight);
        plan_.push_back(s.corner);
    }
    for (auto& stroke : plan_)
        if (rng.bernoulli(imperfection_)) stroke = rng.uniform_index(12);
    cursor_ = 0;
}

std::optional<std::size_t> SquareDemonstrator::act(const Environment&, Rng&) {
    if (cursor_ >= plan_.size()) return std::nullopt;
    return plan_[cursor_++];
}

// ---- corpus generation -------------------------------------------------------------------

Corpus gen_demo_corpus(Environment& env, Demonstrator& demo, std::size_t n_actions, std::uint64_t seed) {
    if (n_actions == 0) throw Error("gen_demo_corpus: n_actions must be >= 1");
    Rng rng(seed);
    Corpus corpus;
    std::size_t logged = 0;
    std::size_t empty_streak = 0;
    while (logged < n_actions) {
        env.reset();
        demo.begin_episode(env, rng);
        Trajectory t;
        t.id = std::to_string(corpus.trajectories.size());
        while (true) {
            const auto a = demo.act(env, rng);
            if (!a) break;
            t.actions.push_back(env.action_name(*a));
            if (env.step(*a).done) break;
        }
        if (t.actions.empty()) {
            if (++empty_streak == 100) throw Error("gen_demo_corpus: demonstrator produced 100 empty episodes");
            continue;
        }
        empty_streak = 0;
        logged += t.actions.size();
        corpus.trajectories.push_back(std::move(t));
    }
    return corpus;
}

}  // namespace act2vec
