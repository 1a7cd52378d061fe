#include "act2vec/mlp.hpp"

#include <cmath>

#include "act2vec/error.hpp"

namespace act2vec {

void MlpGradient::zero() {
    for (auto& w : weights) std::fill(w.data().begin(), w.data().end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

Mlp::Mlp(std::vector<std::size_t> sizes, Rng& rng) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw Error("mlp: need at least input and output sizes");
    for (std::size_t s : sizes_)
        if (s == 0) throw Error("mlp: layer sizes must be >= 1");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const double limit = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
        Matrix w(sizes_[l + 1], sizes_[l]);
        for (double& v : w.data()) v = rng.uniform(-limit, limit);
        weights_.push_back(std::move(w));
        biases_.emplace_back(sizes_[l + 1], 0.0);
    }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
    Cache cache;
    return forward(x, cache);
}

const std::vector<double>& Mlp::forward(std::span<const double> x, Cache& cache) const {
    if (x.size() != input_size())
        throw Error("mlp: input has " + std::to_string(x.size()) + " entries, expected " + std::to_string(input_size()));
    cache.resize(weights_.size() + 1);
    cache[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const Matrix& w = weights_[l];
        const auto& in = cache[l];
        auto& out = cache[l + 1];
        out.resize(w.rows());
        const bool hidden = l + 1 < weights_.size();
        for (std::size_t i = 0; i < w.rows(); ++i) {
            const double z = biases_[l][i] + dot(w.row(i), in);
            out[i] = hidden ? std::tanh(z) : z;
        }
    }
    return cache.back();
}

std::vector<double> Mlp::backward(const Cache& cache, std::span<const double> dy, MlpGradient& grad) const {
    if (dy.size() != output_size()) throw Error("mlp: output gradient has the wrong size");
    if (cache.size() != weights_.size() + 1) throw Error("mlp: backward needs the cache of a forward pass");
    std::vector<double> delta(dy.begin(), dy.end());
    for (std::size_t l = weights_.size(); l-- > 0;) {
        const Matrix& w = weights_[l];
        const auto& in = cache[l];
        if (l + 1 < weights_.size()) {
            const auto& out = cache[l + 1];
            for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= 1.0 - out[i] * out[i];
        }
        Matrix& gw = grad.weights[l];
        auto& gb = grad.biases[l];
        std::vector<double> prev(w.cols(), 0.0);
        for (std::size_t i = 0; i < w.rows(); ++i) {
            const double d = delta[i];
            if (d == 0.0) continue;
            gb[i] += d;
            auto grow = gw.row(i);
            const auto wrow = w.row(i);
            for (std::size_t j = 0; j < w.cols(); ++j) {
                grow[j] += d * in[j];
                prev[j] += d * wrow[j];
            }
        }
        delta = std::move(prev);
    }
    return delta;
}

MlpGradient Mlp::zero_gradient() const {
    MlpGradient g;
    for (const auto& w : weights_) g.weights.emplace_back(w.rows(), w.cols());
    for (const auto& b : biases_) g.biases.emplace_back(b.size(), 0.0);
    return g;
}

void Mlp::apply(const MlpGradient& grad, double lr) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        auto w = weights_[l].data();
        const auto gw = grad.weights[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
        for (std::size_t i = 0; i < biases_[l].size(); ++i) biases_[l][i] -= lr * grad.biases[l][i];
    }
}

std::size_t Mlp::num_parameters() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].data().size() + biases_[l].size();
    return n;
}

double& Mlp::parameter(std::size_t index) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const std::size_t nw = weights_[l].data().size();
        if (index < nw) return weights_[l].data()[index];
        index -= nw;
        if (index < biases_[l].size()) return biases_[l][index];
        index -= biases_[l].size();
    }
    throw Error("mlp: parameter index out of range");
}

double Mlp::gradient_entry(const MlpGradient& grad, std::size_t index) {
    for (std::size_t l = 0; l < grad.weights.size(); ++l) {
        const std::size_t nw = grad.weights[l].data().size();
        if (index < nw) return grad.weights[l].data()[index];
        index -= nw;
        if (index < grad.biases[l].size()) return grad.biases[l][index];
        index -= grad.biases[l].size();
    }
    throw Error("mlp: gradient index out of range");
}

bool Mlp::finite() const {
    for (const auto& w : weights_)
        for (double v : w.data())
            if (!std::isfinite(v)) return false;
    for (const auto& b : biases_)
        for (double v : b)
            if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace act2vec
