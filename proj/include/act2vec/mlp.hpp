#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "act2vec/matrix.hpp"
#include "act2vec/random.hpp"

namespace act2vec {

struct MlpGradient {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    void zero();
};

// Dense feedforward network: tanh on hidden layers, identity on the output layer.
class Mlp {
public:
    Mlp() = default;
    // sizes = {input, hidden..., output}. Weights uniform in +-1/sqrt(fan_in), biases zero.
    Mlp(std::vector<std::size_t> sizes, Rng& rng);

    std::size_t input_size() const { return sizes_.front(); }
    std::size_t output_size() const { return sizes_.back(); }
    std::size_t num_layers() const noexcept { return weights_.size(); }
    const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }

    Matrix& weights(std::size_t layer) { return weights_.at(layer); }
    const Matrix& weights(std::size_t layer) const { return weights_.at(layer); }
    std::vector<double>& bias(std::size_t layer) { return biases_.at(layer); }
    const std::vector<double>& bias(std::size_t layer) const { return biases_.at(layer); }

    // Activations of every layer, input first; filled by forward and consumed by backward.
    using Cache = std::vector<std::vector<double>>;

    std::vector<double> forward(std::span<const double> x) const;
    const std::vector<double>& forward(std::span<const double> x, Cache& cache) const;

    // Adds parameter gradients for output gradient `dy` to `grad` and returns dL/dx.
    std::vector<double> backward(const Cache& cache, std::span<const double> dy, MlpGradient& grad) const;

    MlpGradient zero_gradient() const;
    // params -= lr * grad
    void apply(const MlpGradient& grad, double lr);

    // Flat parameter access (layer by layer, weights then bias) for gradient checks.
    std::size_t num_parameters() const;
    double& parameter(std::size_t index);
    static double gradient_entry(const MlpGradient& grad, std::size_t index);

    bool finite() const;

private:
    std::vector<std::size_t> sizes_;
    std::vector<Matrix> weights_;  // out x in
    std::vector<std::vector<double>> biases_;
};

}  // namespace act2vec
