#include <doctest.h>

#include <cmath>
#include <memory>

#include "act2vec/envs.hpp"
#include "act2vec/error.hpp"

using namespace act2vec;

namespace {

using enum Dir;

std::vector<Dir> rectangle(std::size_t up, std::size_t right) {
    std::vector<Dir> path;
    path.insert(path.end(), up, Up);
    path.insert(path.end(), right, Right);
    path.insert(path.end(), up, Down);
    path.insert(path.end(), right, Left);
    return path;
}

Dir opposite(Dir d) {
    switch (d) {
        case Left: return Right;
        case Right: return Left;
        case Up: return Down;
        case Down: return Up;
    }
    return d;
}

// Straight-line sum of min(W, l_i) / 4W over four side lengths given in half units.
double four_side_reward(std::vector<std::size_t> halves, double w) {
    double r = 0.0;
    for (auto h : halves) r += std::min(w, static_cast<double>(h) / 2.0);
    return r / (4.0 * w);
}

Grid open_grid(std::size_t n = 25) { return Grid(n, n); }

std::vector<std::size_t> run_navigator(Nav2dEnv& env, std::size_t limit = 2000) {
    ScriptedNavigator nav;
    Rng rng(1);
    nav.begin_episode(env, rng);
    std::vector<std::size_t> actions;
    for (std::size_t i = 0; i < limit; ++i) {
        const auto a = nav.act(env, rng);
        if (!a) break;
        actions.push_back(*a);
        if (env.step(*a).done) break;
    }
    return actions;
}

}  // namespace

TEST_CASE("square reward examples") {
    const double w = 8;
    CHECK(square_reward(rectangle(16, 16), w) == doctest::Approx(1.0));
    CHECK(square_reward(rectangle(8, 16), w) == doctest::Approx(0.75));
    CHECK(square_reward(rectangle(8, 16), w) == doctest::Approx(four_side_reward({8, 16, 8, 16}, w)));
    // Sides longer than W are capped.
    CHECK(square_reward(rectangle(24, 16), w) == doctest::Approx(1.0));
    // An L-shaped hexagon has six sides.
    std::vector<Dir> hex{Up, Up, Up, Up, Right, Right, Down, Down, Right, Right, Down, Down, Left, Left, Left, Left};
    CHECK(square_reward(hex, w) == doctest::Approx(-0.1));
    // Open path.
    CHECK(square_reward({Up, Up, Right, Right, Down}, w) == doctest::Approx(-0.1));
    CHECK(square_reward({}, w) == doctest::Approx(-0.1));
}

TEST_CASE("square reward merges the run that wraps the start") {
    auto path = rectangle(16, 16);
    std::rotate(path.begin(), path.begin() + 5, path.end());
    CHECK(square_reward(path, 8) == doctest::Approx(1.0));
}

TEST_CASE("property: square reward is invariant to rotation and reflection of a closed path") {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t up = 2 + rng.uniform_index(20), right = 2 + rng.uniform_index(20);
        const auto base = rectangle(up, right);
        const double w = static_cast<double>(2 + rng.uniform_index(10));
        const double r = square_reward(base, w);
        CHECK(r == doctest::Approx(four_side_reward({up, right, up, right}, w)));
        auto rotated = base;
        std::rotate(rotated.begin(), rotated.begin() + static_cast<long>(rng.uniform_index(base.size())), rotated.end());
        CHECK(square_reward(rotated, w) == doctest::Approx(r));
        std::vector<Dir> reversed;
        for (auto it = base.rbegin(); it != base.rend(); ++it) reversed.push_back(opposite(*it));
        CHECK(square_reward(reversed, w) == doctest::Approx(r));
    }
}

TEST_CASE("square env: twelve strokes and the perfect square") {
    SquareEnv env({.side = 8, .max_steps = 64});
    CHECK(env.num_actions() == 12);
    CHECK(SquareEnv::stroke_names().size() == 12);
    for (std::size_t a = 0; a < 12; ++a) {
        const auto moves = SquareEnv::stroke_moves(a);
        CHECK(moves.size() == 2);
        const bool straight = a < 4;
        CHECK((moves[0] == moves[1]) == straight);
    }
    env.reset();
    const auto plan = SquareDemonstrator::perfect_square(8);
    StepResult last;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        last = env.step(plan[i]);
        if (i + 1 < plan.size()) {
            CHECK_FALSE(last.done);
            CHECK(last.reward == 0.0);
        }
    }
    CHECK(last.done);
    CHECK(last.observation.terminal);
    CHECK(last.reward == doctest::Approx(1.0));
    CHECK_THROWS_AS(env.step(0), Error);
}

TEST_CASE("square env: open path at max_steps scores -0.1") {
    SquareEnv env({.side = 4, .max_steps = 5});
    env.reset();
    StepResult r;
    for (int i = 0; i < 5; ++i) r = env.step(2);  // Up
    CHECK(r.done);
    CHECK(r.reward == doctest::Approx(-0.1));
}

TEST_CASE("navigation kinematics") {
    Grid g = open_grid(10);
    g.set_wall(5, 2, true);
    const Pose start{2.5, 2.5, 0};
    const Pose l = apply_motion(start, kRotateLeft, g, 25);
    CHECK(l.heading == 25);
    CHECK(apply_motion(l, kRotateRight, g, 25).heading == 0);
    Pose p = start;
    for (int i = 0; i < 14; ++i) p = apply_motion(p, kRotateLeft, g, 25);
    CHECK(p.heading == 350);
    CHECK(std::abs(angle_difference(p.heading, 0)) <= 10.0);

    const Pose f = apply_motion(start, kForward, g, 25);
    CHECK(f.x == doctest::Approx(3.5));
    CHECK(f.y == doctest::Approx(2.5));
    const Pose blocked{4.5, 2.5, 0};
    const Pose after = apply_motion(blocked, kForward, g, 25);
    CHECK(after.x == blocked.x);
    CHECK(after.y == blocked.y);
    // The arena boundary blocks too.
    const Pose edge{0.5, 0.5, 180};
    CHECK(apply_motion(edge, kForward, g, 25).x == 0.5);
}

TEST_CASE("nav2d: collision consumes the step") {
    Nav2dEnv env;
    env.reset();
    Grid g = open_grid();
    g.set_wall(3, 2, true);
    env.set_layout(g, {{20, 20}}, {2.5, 2.5, 0});
    const StepResult r = env.step(kForward);
    CHECK(env.pose().x == 2.5);
    CHECK_FALSE(r.done);
    CHECK(r.observation.features.size() == env.observation_size());
}

TEST_CASE("nav2d: layouts keep every goal reachable and poses in bounds") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Nav2dEnv env({.seed = seed});
        env.reset();
        const Grid& g = env.grid();
        const auto start = cell_of(env.pose().x, env.pose().y);
        for (auto goal : env.goals()) CHECK_FALSE(g.shortest_path(start, goal).empty());
        Rng rng(seed);
        for (int i = 0; i < 300; ++i) {
            const auto r = env.step(rng.uniform_index(3));
            CHECK(env.pose().x >= 0.0);
            CHECK(env.pose().y >= 0.0);
            CHECK(env.pose().x <= 25.0);
            CHECK(env.pose().y <= 25.0);
            CHECK_FALSE(g.blocked(env.pose().x, env.pose().y));
            for (double v : r.observation.features) CHECK(std::isfinite(v));
            if (r.done) break;
        }
    }
}

TEST_CASE("scripted navigator: goal straight ahead") {
    Nav2dEnv env;
    env.reset();
    env.set_layout(open_grid(), {{10, 2}}, {2.5, 2.5, 0});
    const auto actions = run_navigator(env);
    REQUIRE_FALSE(actions.empty());
    for (auto a : actions) CHECK(a == kForward);
}

TEST_CASE("scripted navigator: goal behind turns one way at least seven times") {
    Nav2dEnv env;
    env.reset();
    env.set_layout(open_grid(), {{3, 12}}, {15.5, 12.5, 0});
    const auto actions = run_navigator(env);
    std::size_t turns = 0;
    while (turns < actions.size() && actions[turns] == actions[0] && actions[0] != kForward) ++turns;
    CHECK(turns >= 7);
    REQUIRE(turns < actions.size());
    CHECK(actions[turns] == kForward);
}

TEST_CASE("scripted navigator finishes full episodes") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Nav2dEnv env({.seed = seed});
        env.reset();
        run_navigator(env, 1500);
        CHECK(env.next_goal() == env.goals().size());
    }
}

TEST_CASE("rotate_toward picks the shorter turn") {
    CHECK(rotate_toward(0, 90) == kRotateLeft);
    CHECK(rotate_toward(0, -90) == kRotateRight);
    CHECK(rotate_toward(0, 180) == kRotateLeft);
    CHECK(rotate_toward(350, 10) == kRotateLeft);
    CHECK(angle_difference(10, 350) == doctest::Approx(20));
    CHECK(angle_difference(0, 180) == doctest::Approx(180));
}

TEST_CASE("seek-avoid accounting") {
    SeekAvoidEnv env({.size = 10, .n_good = 2, .n_bad = 1, .max_steps = 50});
    env.reset();
    env.set_layout({{3.5, 2.5, true}, {5.5, 2.5, false}, {7.5, 2.5, true}}, {2.5, 2.5, 0});
    double ret = 0.0;
    bool done = false;
    for (int i = 0; i < 10 && !done; ++i) {
        const auto r = env.step(kForward);
        ret += r.reward;
        done = r.done;
    }
    CHECK(done);
    CHECK(ret == doctest::Approx(2.0 - 1.0));

    env.reset();
    double idle = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto r = env.step(kRotateLeft);
        idle += r.reward;
        if (r.done) break;
    }
    CHECK(idle == 0.0);
}

TEST_CASE("seek-avoid: the navigator collects every good apple when there are no bad ones") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SeekAvoidEnv env({.n_good = 3, .n_bad = 0, .max_steps = 400, .seed = seed});
        env.reset();
        SeekAvoidNavigator nav;
        Rng rng(seed);
        nav.begin_episode(env, rng);
        double ret = 0.0;
        for (int i = 0; i < 400; ++i) {
            const auto a = nav.act(env, rng);
            if (!a) break;
            const auto r = env.step(*a);
            ret += r.reward;
            if (r.done) break;
        }
        CHECK(ret == doctest::Approx(3.0));
    }
}

TEST_CASE("property: environments are deterministic under a fixed seed and action sequence") {
    auto trace = [](Environment& env, std::uint64_t seed) {
        std::vector<double> out;
        Rng rng(seed);
        for (int episode = 0; episode < 3; ++episode) {
            const auto obs = env.reset();
            out.insert(out.end(), obs.features.begin(), obs.features.end());
            for (int i = 0; i < 60; ++i) {
                const auto r = env.step(rng.uniform_index(env.num_actions()));
                out.insert(out.end(), r.observation.features.begin(), r.observation.features.end());
                out.push_back(r.reward);
                if (r.done) break;
            }
        }
        return out;
    };
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SquareEnv s1({.seed = seed}), s2({.seed = seed});
        CHECK(trace(s1, seed) == trace(s2, seed));
        Nav2dEnv n1({.seed = seed}), n2({.seed = seed});
        CHECK(trace(n1, seed) == trace(n2, seed));
        SeekAvoidEnv a1({.seed = seed}), a2({.seed = seed});
        CHECK(trace(a1, seed) == trace(a2, seed));
    }
}

TEST_CASE("sequence wrapper") {
    SequenceWrapper one(std::make_unique<Nav2dEnv>(), 1);
    CHECK(one.num_actions() == 3);
    SequenceWrapper two(std::make_unique<Nav2dEnv>(), 2);
    CHECK(two.num_actions() == 9);
    CHECK(two.action_name(0) == "F+F");
    CHECK(two.decode(5) == std::vector<std::size_t>{1, 2});
    CHECK(two.action_name(5) == "L+R");
}

TEST_CASE("property: wrapped returns equal the returns of the flattened plan") {
    for (std::size_t k = 1; k <= 3; ++k) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            SeekAvoidConfig cfg{.max_steps = 90, .seed = seed};
            SequenceWrapper wrapped(std::make_unique<SeekAvoidEnv>(cfg), k);
            SeekAvoidEnv flat(cfg);
            wrapped.reset();
            flat.reset();
            Rng rng(seed * 7 + k);
            double rw = 0.0, rf = 0.0;
            bool done = false;
            while (!done) {
                const std::size_t a = rng.uniform_index(wrapped.num_actions());
                const auto r = wrapped.step(a);
                rw += r.reward;
                done = r.done;
                for (std::size_t prim : wrapped.decode(a)) {
                    const auto f = flat.step(prim);
                    rf += f.reward;
                    if (f.done) break;
                }
            }
            CHECK(rw == doctest::Approx(rf));
        }
    }
}

TEST_CASE("duplicated action env") {
    DuplicatedActionEnv env(std::make_unique<Nav2dEnv>(), {3, 12, 12});
    CHECK(env.num_actions() == 27);
    CHECK(env.base_action(0) == 0);
    CHECK(env.base_action(3) == 1);
    CHECK(env.base_action(26) == 2);
    CHECK(env.action_name(1) == "F#1");
    CHECK_THROWS_AS(DuplicatedActionEnv(std::make_unique<Nav2dEnv>(), {1, 0, 1}), Error);
}

TEST_CASE("demonstration corpora") {
    Nav2dEnv env;
    ScriptedNavigator nav(0.1);
    const Corpus c = gen_demo_corpus(env, nav, 3000, 4);
    CHECK(c.action_count() >= 3000);
    for (const auto& t : c.trajectories)
        for (const auto& a : t.actions) CHECK((a == "F" || a == "L" || a == "R"));
    Nav2dEnv env2;
    ScriptedNavigator nav2(0.1);
    CHECK(gen_demo_corpus(env2, nav2, 3000, 4) == c);
    CHECK_THROWS_AS(gen_demo_corpus(env, nav, 0, 4), Error);

    SquareEnv sq;
    SquareDemonstrator demo(8);
    const Corpus s = gen_demo_corpus(sq, demo, 500, 2);
    CHECK(s.action_count() >= 500);
}
