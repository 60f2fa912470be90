#include "sembprobe/lstm.hpp"

#include <cmath>

#include "sembprobe/error.hpp"

namespace sembprobe::nn {

LstmCellParams::LstmCellParams(const std::string& name, std::size_t input_size,
                               std::size_t hidden_size)
    : input_weights(name + ".W", {4 * hidden_size, input_size}),
      recurrent_weights(name + ".U", {4 * hidden_size, hidden_size}),
      bias(name + ".b", {4 * hidden_size}) {}

LstmStepCache lstm_step(const LstmCellParams& params, std::span<const double> x,
                        std::span<const double> h_prev, std::span<const double> c_prev) {
    const std::size_t n_in = params.input_size();
    const std::size_t h = params.hidden_size();
    if (x.size() != n_in || h_prev.size() != h || c_prev.size() != h) {
        throw DimensionError("lstm step expects x[" + std::to_string(n_in) + "], h/c[" +
                             std::to_string(h) + "], got x[" + std::to_string(x.size()) +
                             "], h[" + std::to_string(h_prev.size()) + "], c[" +
                             std::to_string(c_prev.size()) + "]");
    }

    Vec z(params.bias.value.data().begin(), params.bias.value.data().end());
    const double* w = params.input_weights.value.raw();
    const double* u = params.recurrent_weights.value.raw();
    for (std::size_t r = 0; r < 4 * h; ++r) {
        const double* wr = w + r * n_in;
        const double* ur = u + r * h;
        double acc = 0.0;
        for (std::size_t c = 0; c < n_in; ++c) {
            acc += wr[c] * x[c];
        }
        for (std::size_t c = 0; c < h; ++c) {
            acc += ur[c] * h_prev[c];
        }
        z[r] += acc;
    }

    LstmStepCache s;
    s.x.assign(x.begin(), x.end());
    s.h_prev.assign(h_prev.begin(), h_prev.end());
    s.c_prev.assign(c_prev.begin(), c_prev.end());
    s.in_gate.resize(h);
    s.forget_gate.resize(h);
    s.candidate.resize(h);
    s.out_gate.resize(h);
    s.tanh_c.resize(h);
    s.h.resize(h);
    s.c.resize(h);
    for (std::size_t j = 0; j < h; ++j) {
        s.in_gate[j] = sigmoid(z[j]);
        s.forget_gate[j] = sigmoid(z[h + j]);
        s.candidate[j] = std::tanh(z[2 * h + j]);
        s.out_gate[j] = sigmoid(z[3 * h + j]);
        s.c[j] = s.forget_gate[j] * c_prev[j] + s.in_gate[j] * s.candidate[j];
        s.tanh_c[j] = std::tanh(s.c[j]);
        s.h[j] = s.out_gate[j] * s.tanh_c[j];
    }
    return s;
}

LstmStepGrads lstm_step_backward(LstmCellParams& params, const LstmStepCache& s,
                                 std::span<const double> dh, std::span<const double> dc) {
    const std::size_t n_in = params.input_size();
    const std::size_t h = params.hidden_size();
    if (dh.size() != h || dc.size() != h) {
        throw DimensionError("lstm backward expects gradients of length " + std::to_string(h));
    }

    // Pre-activation gradients, same gate layout as the forward pass.
    Vec dz(4 * h);
    LstmStepGrads g;
    g.dc_prev.resize(h);
    for (std::size_t j = 0; j < h; ++j) {
        const double d_out = dh[j] * s.tanh_c[j];
        const double d_c = dc[j] + dh[j] * s.out_gate[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
        const double d_in = d_c * s.candidate[j];
        const double d_forget = d_c * s.c_prev[j];
        const double d_cand = d_c * s.in_gate[j];
        g.dc_prev[j] = d_c * s.forget_gate[j];
        dz[j] = d_in * s.in_gate[j] * (1.0 - s.in_gate[j]);
        dz[h + j] = d_forget * s.forget_gate[j] * (1.0 - s.forget_gate[j]);
        dz[2 * h + j] = d_cand * (1.0 - s.candidate[j] * s.candidate[j]);
        dz[3 * h + j] = d_out * s.out_gate[j] * (1.0 - s.out_gate[j]);
    }

    g.dx.assign(n_in, 0.0);
    g.dh_prev.assign(h, 0.0);
    const double* w = params.input_weights.value.raw();
    const double* u = params.recurrent_weights.value.raw();
    double* gw = params.input_weights.grad.raw();
    double* gu = params.recurrent_weights.grad.raw();
    double* gb = params.bias.grad.raw();
    for (std::size_t r = 0; r < 4 * h; ++r) {
        const double d = dz[r];
        gb[r] += d;
        const double* wr = w + r * n_in;
        double* gwr = gw + r * n_in;
        for (std::size_t c = 0; c < n_in; ++c) {
            gwr[c] += d * s.x[c];
            g.dx[c] += d * wr[c];
        }
        const double* ur = u + r * h;
        double* gur = gu + r * h;
        for (std::size_t c = 0; c < h; ++c) {
            gur[c] += d * s.h_prev[c];
            g.dh_prev[c] += d * ur[c];
        }
    }
    return g;
}

} // namespace sembprobe::nn
