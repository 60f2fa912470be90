#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "sembprobe/nn.hpp"

namespace sembprobe::nn {

/// Single-layer LSTM cell without peepholes. Gate blocks are stacked in
/// the order input, forget, candidate, output along the first axis of each
/// parameter (4h rows).
struct LstmCellParams {
    LstmCellParams() = default;
    LstmCellParams(const std::string& name, std::size_t input_size, std::size_t hidden_size);

    std::size_t input_size() const noexcept { return input_weights.value.cols(); }
    std::size_t hidden_size() const noexcept { return recurrent_weights.value.cols(); }

    ParamRefs params() { return {&input_weights, &recurrent_weights, &bias}; }

    Parameter input_weights;     // 4h x in
    Parameter recurrent_weights; // 4h x h
    Parameter bias;              // 4h
};

struct LstmState {
    Vec h;
    Vec c;
};

/// Everything backward needs for one step.
struct LstmStepCache {
    Vec x, h_prev, c_prev;
    Vec in_gate, forget_gate, candidate, out_gate, tanh_c;
    Vec h, c;
};

struct LstmStepGrads {
    Vec dx, dh_prev, dc_prev;
};

/// i,f,o = sigma(Wx + Uh + b); g = tanh(Wx + Uh + b); c' = f*c + i*g; h = o*tanh(c').
LstmStepCache lstm_step(const LstmCellParams& params, std::span<const double> x,
                        std::span<const double> h_prev, std::span<const double> c_prev);

/// Backpropagates dL/dh and dL/dc of this step's outputs. Parameter gradients
/// accumulate into params.
LstmStepGrads lstm_step_backward(LstmCellParams& params, const LstmStepCache& step,
                                 std::span<const double> dh, std::span<const double> dc);

} // namespace sembprobe::nn
