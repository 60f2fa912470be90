#include "sembprobe/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sembprobe/error.hpp"

namespace sembprobe::nn {

Parameter::Parameter(std::string name_, std::vector<std::size_t> shape)
    : name(std::move(name_)), value(shape), grad(shape), adagrad_accum(std::move(shape)) {}

void Parameter::init_uniform(Rng& rng, double range) {
    for (double& v : value.data()) {
        v = rng.uniform(-range, range);
    }
}

LinearLayer::LinearLayer(std::string name, std::size_t in, std::size_t out)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}) {}

Vec LinearLayer::apply(std::span<const double> x) const {
    const std::size_t in = in_dim();
    const std::size_t out = out_dim();
    if (x.size() != in) {
        throw DimensionError("linear layer " + weight.name + " expects input of length " +
                             std::to_string(in) + ", got " + std::to_string(x.size()));
    }
    Vec y(bias.value.data().begin(), bias.value.data().end());
    const double* w = weight.value.raw();
    for (std::size_t r = 0; r < out; ++r) {
        const double* wr = w + r * in;
        double acc = 0.0;
        for (std::size_t c = 0; c < in; ++c) {
            acc += wr[c] * x[c];
        }
        y[r] += acc;
    }
    return y;
}

Vec LinearLayer::forward(std::span<const double> x) {
    Vec y = apply(x);
    cached_input_.assign(x.begin(), x.end());
    return y;
}

Vec LinearLayer::backward(std::span<const double> dy) { return backward(cached_input_, dy); }

Vec LinearLayer::backward(std::span<const double> x, std::span<const double> dy) {
    const std::size_t in = in_dim();
    const std::size_t out = out_dim();
    if (x.size() != in || dy.size() != out) {
        throw DimensionError("linear layer " + weight.name + " backward shape mismatch");
    }
    Vec dx(in, 0.0);
    const double* w = weight.value.raw();
    double* gw = weight.grad.raw();
    double* gb = bias.grad.raw();
    for (std::size_t r = 0; r < out; ++r) {
        const double g = dy[r];
        if (g == 0.0) {
            continue;
        }
        gb[r] += g;
        const double* wr = w + r * in;
        double* gwr = gw + r * in;
        for (std::size_t c = 0; c < in; ++c) {
            gwr[c] += g * x[c];
            dx[c] += g * wr[c];
        }
    }
    return dx;
}

Vec linear_forward(LinearLayer& layer, std::span<const double> x) { return layer.forward(x); }

EmbeddingTable::EmbeddingTable(std::string name, std::size_t vocab_size, std::size_t dim)
    : vectors(std::move(name), {vocab_size, dim}) {}

std::span<const double> EmbeddingTable::row(std::size_t id) const {
    if (id >= vocab_size()) {
        throw RangeError("embedding id " + std::to_string(id) + " outside table of " +
                         std::to_string(vocab_size()) + " rows");
    }
    return vectors.value.row(id);
}

void EmbeddingTable::accumulate(std::size_t id, std::span<const double> g) {
    auto dst = vectors.grad.row(id);
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += g[i];
    }
}

Vec softmax(std::span<const double> logits) {
    Vec p(logits.begin(), logits.end());
    const double m = *std::max_element(p.begin(), p.end());
    double z = 0.0;
    for (double& v : p) {
        v = std::exp(v - m);
        z += v;
    }
    for (double& v : p) {
        v /= z;
    }
    return p;
}

LossAndGrad softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
    if (target >= logits.size()) {
        throw RangeError("target class " + std::to_string(target) + " outside " +
                         std::to_string(logits.size()) + " logits");
    }
    const auto top = static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    const double m = logits[top];
    // log-sum-exp as m + log1p(sum of the non-max terms) keeps precision when
    // the target dominates.
    double rest = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (i != top) {
            rest += std::exp(logits[i] - m);
        }
    }
    const double log_z_shift = std::log1p(rest);
    LossAndGrad out;
    out.loss = (m - logits[target]) + log_z_shift;
    out.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.grad[i] = std::exp(logits[i] - m - log_z_shift);
    }
    out.grad[target] -= 1.0;
    return out;
}

void adagrad_update(Parameter& param, double lr, double eps) {
    double* v = param.value.raw();
    double* g = param.grad.raw();
    double* a = param.adagrad_accum.raw();
    const std::size_t n = param.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (g[i] == 0.0) {
            continue;
        }
        a[i] += g[i] * g[i];
        v[i] -= lr * g[i] / (std::sqrt(a[i]) + eps);
        g[i] = 0.0;
    }
}

double global_grad_norm(const ParamRefs& params) {
    double sq = 0.0;
    for (const Parameter* p : params) {
        for (double g : p->grad.data()) {
            sq += g * g;
        }
    }
    return std::sqrt(sq);
}

double clip_gradients(const ParamRefs& params, double threshold) {
    if (!(threshold > 0.0)) {
        throw ConfigError("gradient clipping threshold must be positive");
    }
    const double norm = global_grad_norm(params);
    // Relative slack so that a freshly clipped set is not rescaled by rounding.
    if (norm <= threshold * (1.0 + 1e-12)) {
        return 1.0;
    }
    const double scale = threshold / norm;
    for (Parameter* p : params) {
        for (double& g : p->grad.data()) {
            g *= scale;
        }
    }
    return scale;
}

DropoutResult dropout(std::span<const double> x, double rate, Rng& rng, bool train_mode) {
    if (!(rate >= 0.0) || rate >= 1.0) {
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
    DropoutResult r;
    r.output.assign(x.begin(), x.end());
    if (!train_mode || rate == 0.0) {
        return r;
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    r.mask.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        r.mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
        r.output[i] *= r.mask[i];
    }
    return r;
}

Vec dropout_backward(std::span<const double> dy, const DropoutResult& fwd) {
    Vec dx(dy.begin(), dy.end());
    if (fwd.mask.empty()) {
        return dx;
    }
    for (std::size_t i = 0; i < dx.size(); ++i) {
        dx[i] *= fwd.mask[i];
    }
    return dx;
}

} // namespace sembprobe::nn
