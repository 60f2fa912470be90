#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sembprobe/rng.hpp"
#include "sembprobe/tensor.hpp"

namespace sembprobe::nn {

/// Trainable tensor with its gradient and AdaGrad history.
struct Parameter {
    Parameter() = default;
    Parameter(std::string name, std::vector<std::size_t> shape);

    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adagrad_accum;

    std::size_t size() const noexcept { return value.size(); }
    void zero_grad() noexcept { grad.fill(0.0); }
    /// Uniform in [-range, range].
    void init_uniform(Rng& rng, double range);
};

using ParamRefs = std::vector<Parameter*>;

/// y = W x + b. Weight is out x in.
class LinearLayer {
public:
    LinearLayer() = default;
    LinearLayer(std::string name, std::size_t in, std::size_t out);

    std::size_t in_dim() const noexcept { return weight.value.cols(); }
    std::size_t out_dim() const noexcept { return weight.value.rows(); }

    /// Computes the output and remembers x for backward().
    Vec forward(std::span<const double> x);
    /// Stateless variant; no cache.
    Vec apply(std::span<const double> x) const;
    /// Accumulates weight/bias gradients for the cached input and returns dL/dx.
    Vec backward(std::span<const double> dy);
    /// Same as backward() with an explicit input.
    Vec backward(std::span<const double> x, std::span<const double> dy);

    ParamRefs params() { return {&weight, &bias}; }

    Parameter weight;
    Parameter bias;

private:
    Vec cached_input_;
};

/// Free-function form of LinearLayer::forward.
Vec linear_forward(LinearLayer& layer, std::span<const double> x);

/// Vocabulary-indexed rows of dimension d.
struct EmbeddingTable {
    EmbeddingTable() = default;
    EmbeddingTable(std::string name, std::size_t vocab_size, std::size_t dim);

    std::size_t vocab_size() const noexcept { return vectors.value.rows(); }
    std::size_t dim() const noexcept { return vectors.value.cols(); }
    std::span<const double> row(std::size_t id) const;
    /// Adds g into the gradient row of id.
    void accumulate(std::size_t id, std::span<const double> g);

    Parameter vectors;
};

struct LossAndGrad {
    double loss = 0.0;
    Vec grad;
};

/// loss = -log softmax(logits)[target]; grad = softmax - onehot.
LossAndGrad softmax_cross_entropy(std::span<const double> logits, std::size_t target);
Vec softmax(std::span<const double> logits);

inline constexpr double kAdagradEps = 1e-8;

/// accum += g^2; value -= lr g / (sqrt(accum) + eps); grad zeroed.
void adagrad_update(Parameter& param, double lr, double eps = kAdagradEps);

/// Rescales all gradients so their global L2 norm is at most threshold.
/// Returns the factor applied (1 when no clipping happened).
double clip_gradients(const ParamRefs& params, double threshold);

double global_grad_norm(const ParamRefs& params);

struct DropoutResult {
    Vec output;
    /// Per-entry multiplier (0 or 1/(1-rate)); empty when dropout was the identity.
    Vec mask;
};

/// Inverted dropout. Identity in eval mode or when rate == 0.
DropoutResult dropout(std::span<const double> x, double rate, Rng& rng, bool train_mode);
Vec dropout_backward(std::span<const double> dy, const DropoutResult& fwd);

inline double sigmoid(double x) noexcept {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace sembprobe::nn
