#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "act2vec/agent.hpp"
#include "act2vec/error.hpp"

using namespace act2vec;

namespace {

// One action, reward 1, every episode lasts one step.
class OneStepEnv : public Environment {
public:
    std::size_t num_actions() const override { return 1; }
    std::string action_name(std::size_t) const override { return "go"; }
    std::size_t observation_size() const override { return 2; }
    Observation reset() override { return {{1.0, 0.0}, false}; }
    StepResult step(std::size_t) override { return {{{0.0, 1.0}, true}, 1.0, true}; }
    nlohmann::json config() const override { return {{"env", "one-step"}}; }
};

Matrix matrix_of(std::vector<std::vector<double>> rows) {
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    return m;
}

// Sum of squared outputs weighted by `w`, the scalar loss used for gradient checks.
double weighted_output(const Mlp& net, std::span<const double> x, const std::vector<double>& w) {
    const auto y = net.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
    return s;
}

Transition transition(std::vector<double> s, std::size_t a, double r, std::vector<double> s2, bool done) {
    return {std::move(s), a, r, std::move(s2), done};
}

}  // namespace

TEST_CASE("mlp: zero weights output the bias, a single layer is affine") {
    Rng rng(1);
    Mlp net({3, 4, 2}, rng);
    for (std::size_t l = 0; l < net.num_layers(); ++l)
        for (double& w : net.weights(l).data()) w = 0.0;
    net.bias(1) = {0.5, -2.0};
    const std::vector<double> x{1, 2, 3};
    CHECK(net.forward(x) == std::vector<double>{0.5, -2.0});

    Mlp lin({2, 2}, rng);
    lin.weights(0) = matrix_of({{1, 2}, {3, 4}});
    lin.bias(0) = {0.1, 0.2};
    const std::vector<double> v{1, -1};
    const auto y = lin.forward(v);
    CHECK(y[0] == doctest::Approx(1 - 2 + 0.1));
    CHECK(y[1] == doctest::Approx(3 - 4 + 0.2));
}

TEST_CASE("property: mlp backward matches central differences") {
    Rng rng(2);
    const double h = 1e-6;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t in = 1 + rng.uniform_index(5), hid = 1 + rng.uniform_index(6), out = 1 + rng.uniform_index(4);
        Mlp net({in, hid, out}, rng);
        for (std::size_t l = 0; l < net.num_layers(); ++l)
            for (double& b : net.bias(l)) b = rng.uniform(-0.5, 0.5);
        std::vector<double> x(in), w(out);
        for (double& v : x) v = rng.uniform(-1, 1);
        for (double& v : w) v = rng.uniform(-1, 1);
        Mlp::Cache cache;
        net.forward(x, cache);
        MlpGradient g = net.zero_gradient();
        const auto dx = net.backward(cache, w, g);
        for (std::size_t i = 0; i < net.num_parameters(); ++i) {
            double& p = net.parameter(i);
            const double keep = p;
            p = keep + h;
            const double up = weighted_output(net, x, w);
            p = keep - h;
            const double down = weighted_output(net, x, w);
            p = keep;
            const double numeric = (up - down) / (2 * h);
            const double analytic = Mlp::gradient_entry(g, i);
            worst = std::max(worst, std::abs(numeric - analytic) / std::max(1e-6, std::abs(numeric) + std::abs(analytic)));
        }
        for (std::size_t i = 0; i < in; ++i) {
            auto xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double numeric = (weighted_output(net, xp, w) - weighted_output(net, xm, w)) / (2 * h);
            worst = std::max(worst, std::abs(numeric - dx[i]) / std::max(1e-6, std::abs(numeric) + std::abs(dx[i])));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("q-values: zero features, equal embeddings and a hand fixture") {
    QNetworkShape shape{.observation = 2, .actions = 3, .phi_hidden = 0, .features = 2, .psi_hidden = 0};
    const Matrix e = matrix_of({{1.0, 0.5}, {1.0, 0.5}, {-0.3, 2.0}});
    QNetwork net(shape, QMode::Embedding, e, 3);
    for (double& w : net.phi().weights(0).data()) w = 0.0;
    for (double q : net.q_values(std::vector<double>{0.4, -0.7})) CHECK(q == 0.0);

    QNetwork fresh(shape, QMode::Embedding, e, 4);
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const std::vector<double> s{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const auto q = fresh.q_values(s);
        CHECK(q[0] == q[1]);
    }

    QNetworkShape two{.observation = 2, .actions = 2, .phi_hidden = 0, .features = 2, .psi_hidden = 0};
    QNetwork hand(two, QMode::Baseline, std::nullopt, 1);
    hand.phi().weights(0) = matrix_of({{1, 0}, {0, 2}});
    hand.phi().bias(0) = {0, 1};
    hand.action_weights() = matrix_of({{1, 1}, {2, -1}});
    // phi(s) = (s0, 2 s1 + 1) = (3, -1) for s = (3, -1)
    const auto q = hand.q_values(std::vector<double>{3, -1});
    CHECK(q[0] == doctest::Approx(3 - 1));
    CHECK(q[1] == doctest::Approx(6 + 1));

    CHECK_THROWS_AS(QNetwork(shape, QMode::Embedding, std::nullopt, 1), Error);
    CHECK_THROWS_AS(QNetwork(shape, QMode::Embedding, matrix_of({{1, 2}}), 1), Error);
}

TEST_CASE("greedy selection and argmax invariance") {
    Rng rng(1);
    const std::vector<double> q{0.1, 0.9, 0.9, -3};
    CHECK(argmax(q) == 1);
    for (int i = 0; i < 100; ++i) CHECK(select_action(q, 0.0, Exploration::uniform(), rng) == 1);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(6), scaled(6);
        for (double& x : v) x = rng.uniform(-5, 5);
        const double c = rng.uniform(0.01, 100);
        for (std::size_t i = 0; i < 6; ++i) scaled[i] = c * v[i];
        CHECK(argmax(scaled) == argmax(v));
    }
}

TEST_CASE("uniform exploration frequencies pass a chi-square check") {
    Rng rng(9);
    const std::vector<double> q{0, 0, 0};
    std::vector<double> counts(3, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) counts[select_action(q, 1.0, Exploration::uniform(), rng)] += 1;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - n / 3.0) * (c - n / 3.0) / (n / 3.0);
    // 99.9th percentile of chi-square with 2 degrees of freedom.
    CHECK(chi2 < 13.82);
}

TEST_CASE("k-Exp marginals") {
    const std::vector<std::size_t> assignment{0, 1, 1};
    const Exploration e = Exploration::kexp(assignment, 2);
    // Exhaustive two-stage product.
    std::vector<double> exact(3, 0.0);
    for (std::size_t c = 0; c < e.clusters.size(); ++c)
        for (std::size_t a : e.clusters[c]) exact[a] += 1.0 / e.clusters.size() / e.clusters[c].size();
    CHECK(exact[0] == doctest::Approx(0.5));
    CHECK(exact[1] == doctest::Approx(0.25));
    CHECK(exact[2] == doctest::Approx(0.25));

    Rng rng(3);
    std::vector<double> counts(3, 0.0);
    const int n = 100000;
    const std::vector<double> q{0, 0, 0};
    for (int i = 0; i < n; ++i) counts[select_action(q, 1.0, e, rng)] += 1;
    double chi2 = 0.0;
    for (std::size_t a = 0; a < 3; ++a) chi2 += (counts[a] - n * exact[a]) * (counts[a] - n * exact[a]) / (n * exact[a]);
    CHECK(chi2 < 13.82);

    const std::vector<std::size_t> gap{0, 0, 2};
    const Exploration holes = Exploration::kexp(gap, 3);
    bool threw = false;
    for (int i = 0; i < 200 && !threw; ++i) {
        try {
            select_action(q, 1.0, holes, rng);
        } catch (const Error&) {
            threw = true;
        }
    }
    CHECK(threw);
    CHECK_THROWS_AS(Exploration::kexp(std::vector<std::size_t>{0, 3}, 2), Error);
}

TEST_CASE("replay buffer is a FIFO ring") {
    ReplayBuffer buf(3);
    Rng rng(1);
    CHECK_THROWS_AS(buf.sample(1, rng), Error);
    for (int i = 0; i < 5; ++i) buf.push(transition({double(i)}, 0, i, {0}, false));
    CHECK(buf.size() == 3);
    CHECK(buf.at(0).reward == 2);
    CHECK(buf.at(1).reward == 3);
    CHECK(buf.at(2).reward == 4);
    for (const Transition* t : buf.sample(3, rng)) CHECK(t->reward >= 2);
    CHECK_THROWS_AS(buf.sample(4, rng), Error);
}

TEST_CASE("td_update: zero error leaves parameters untouched") {
    QNetworkShape shape{.observation = 1, .actions = 2, .phi_hidden = 0, .features = 1, .psi_hidden = 0};
    QNetwork net(shape, QMode::Baseline, std::nullopt, 1);
    net.phi().weights(0)(0, 0) = 0.0;
    const Transition t = transition({1.0}, 0, 0.0, {1.0}, true);
    const Transition* batch[] = {&t};
    const Matrix w_before = net.action_weights();
    CHECK(td_update(net, batch, 0.9, 0.1) == 0.0);
    CHECK(net.action_weights() == w_before);
    CHECK(net.phi().weights(0)(0, 0) == 0.0);
}

TEST_CASE("td_update: hand-derived SGD step") {
    QNetworkShape shape{.observation = 1, .actions = 2, .phi_hidden = 0, .features = 1, .psi_hidden = 0};
    const double w = 0.5, u0 = 2.0, u1 = -1.0, lr = 0.1;

    SUBCASE("terminal transition uses y = r") {
        QNetwork net(shape, QMode::Baseline, std::nullopt, 1);
        net.phi().weights(0)(0, 0) = w;
        net.action_weights() = matrix_of({{u0}, {u1}});
        const Transition t = transition({1.0}, 0, 3.0, {7.0}, true);
        const Transition* batch[] = {&t};
        const double err = u0 * w - 3.0;
        CHECK(td_update(net, batch, 0.9, lr) == doctest::Approx(err * err));
        CHECK(net.phi().weights(0)(0, 0) == doctest::Approx(w - lr * 2 * err * u0));
        CHECK(net.action_weights()(0, 0) == doctest::Approx(u0 - lr * 2 * err * w));
        CHECK(net.action_weights()(1, 0) == u1);
    }
    SUBCASE("bootstrapped target is held constant") {
        QNetwork net(shape, QMode::Baseline, std::nullopt, 1);
        net.phi().weights(0)(0, 0) = w;
        net.action_weights() = matrix_of({{u0}, {u1}});
        const Transition t = transition({1.0}, 1, 0.5, {2.0}, false);
        const Transition* batch[] = {&t};
        const double y = 0.5 + 0.9 * std::max(u0 * w * 2.0, u1 * w * 2.0);
        const double err = u1 * w - y;
        CHECK(td_update(net, batch, 0.9, lr) == doctest::Approx(err * err));
        CHECK(net.phi().weights(0)(0, 0) == doctest::Approx(w - lr * 2 * err * u1));
        CHECK(net.action_weights()(1, 0) == doctest::Approx(u1 - lr * 2 * err * w));
        CHECK(net.action_weights()(0, 0) == u0);
    }
}

TEST_CASE("td_update in embedding mode leaves the table frozen and reports divergence") {
    QNetworkShape shape{.observation = 2, .actions = 2, .phi_hidden = 4, .features = 3, .psi_hidden = 4};
    const Matrix e = matrix_of({{1, 0}, {0, 1}});
    QNetwork net(shape, QMode::Embedding, e, 2);
    const Transition t = transition({0.3, 0.1}, 1, 1.0, {0.2, 0.2}, false);
    const Transition* batch[] = {&t, &t};
    td_update(net, batch, 0.9, 0.05);
    CHECK(net.embeddings() == e);
    // A huge step blows the weights up; the next loss evaluation is non-finite.
    CHECK_THROWS_AS(
        {
            td_update(net, batch, 0.9, 1e300);
            td_update(net, batch, 0.9, 1e300);
        },
        DivergenceError);
    CHECK_THROWS_AS(td_update(net, {}, 0.9, 0.1), Error);
}

TEST_CASE("epsilon schedule anneals linearly") {
    AgentConfig c;
    c.anneal_steps = 100;
    CHECK(c.epsilon_at(0) == doctest::Approx(1.0));
    CHECK(c.epsilon_at(50) == doctest::Approx(0.55));
    CHECK(c.epsilon_at(100) == doctest::Approx(0.1));
    CHECK(c.epsilon_at(1000) == doctest::Approx(0.1));
    c.epsilon_end = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.gamma = 1.0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("run_q_learning on a one-action environment") {
    OneStepEnv env;
    AgentConfig c;
    c.total_steps = 200;
    c.batch = 8;
    c.capacity = 100;
    c.shape.phi_hidden = 8;
    c.shape.features = 4;
    const LearningResult r = run_q_learning(env, c, QMode::Baseline, std::nullopt, Exploration::uniform());
    CHECK(r.curve.size() == 200);
    for (const auto& e : r.curve) CHECK(e.ret == 1.0);
}

TEST_CASE("run_q_learning is deterministic") {
    AgentConfig c;
    c.total_steps = 1500;
    c.anneal_steps = 1000;
    c.batch = 16;
    c.capacity = 1000;
    c.shape.phi_hidden = 16;
    c.shape.features = 8;
    c.shape.psi_hidden = 8;
    const Matrix e = matrix_of({{1, 0}, {0, 1}, {1, 1}});
    const std::vector<std::size_t> clusters{0, 1, 1};
    auto run = [&] {
        SeekAvoidEnv env({.max_steps = 60});
        return run_q_learning(env, c, QMode::Embedding, e, Exploration::kexp(clusters, 2)).curve;
    };
    const auto a = run(), b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].ret == b[i].ret);
        CHECK(a[i].steps == b[i].steps);
    }
    SeekAvoidEnv env;
    CHECK_THROWS_AS(run_q_learning(env, c, QMode::Embedding, std::nullopt, Exploration::uniform()), Error);
}

TEST_CASE("learning curves are written as CSV") {
    const std::vector<EpisodeRecord> curve{{0, 1.5, 1.0, 10}, {1, -0.5, 0.9, 25}};
    const auto path = (std::filesystem::temp_directory_path() / "act2vec_test_curve.csv").string();
    write_learning_curve(curve, path);
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "episode,return,epsilon,steps");
    CHECK(row.rfind("0,1.5,", 0) == 0);
    std::filesystem::remove(path);
}

TEST_CASE("sum-of-embeddings state") {
    SumEmbeddingState one_hot(embedding_vectors(EmbeddingSource::OneHot, 3, nullptr, 0, 1));
    for (double v : one_hot.value()) CHECK(v == 0.0);
    one_hot.add(0);
    one_hot.add(0);
    one_hot.add(1);
    CHECK(one_hot.value() == std::vector<double>{2, 1, 0});
    one_hot.reset();
    CHECK(one_hot.value() == std::vector<double>{0, 0, 0});

    const Matrix act = matrix_of({{3, 4}, {0, -2}, {1, 1}});
    const Matrix norm = embedding_vectors(EmbeddingSource::Act2VecNormalized, 3, &act, 2, 1);
    for (std::size_t a = 0; a < 3; ++a) CHECK(std::sqrt(dot(norm.row(a), norm.row(a))) == doctest::Approx(1.0));
    CHECK(embedding_vectors(EmbeddingSource::Act2Vec, 3, &act, 2, 1) == act);

    const Matrix rnd = embedding_vectors(EmbeddingSource::Random, 12, nullptr, 5, 7);
    CHECK(rnd.rows() == 12);
    CHECK(rnd.cols() == 5);
    for (double v : rnd.data()) CHECK((v >= 0.0 && v < 1.0));
    CHECK(embedding_vectors(EmbeddingSource::Random, 12, nullptr, 5, 7) == rnd);
    CHECK_THROWS_AS(embedding_vectors(EmbeddingSource::Act2Vec, 3, nullptr, 2, 1), Error);

    Rng rng(4);
    SumEmbeddingState s(act);
    std::vector<double> oracle(2, 0.0);
    for (int i = 0; i < 50; ++i) {
        const std::size_t a = rng.uniform_index(3);
        s.add(a);
        oracle[0] += act(a, 0);
        oracle[1] += act(a, 1);
    }
    CHECK(s.value() == oracle);
}

TEST_CASE("sum-of-embeddings environment scales and resets the state") {
    SumEmbeddingEnv env(std::make_unique<SquareEnv>(), embedding_vectors(EmbeddingSource::OneHot, 12, nullptr, 0, 1), 0.5);
    CHECK(env.observation_size() == 12);
    const auto obs = env.reset();
    for (double v : obs.features) CHECK(v == 0.0);
    env.step(2);
    const auto r = env.step(2);
    CHECK(r.observation.features[2] == doctest::Approx(1.0));
    CHECK(env.reset().features[2] == 0.0);
}
