#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "sembprobe/checkpoint.hpp"
#include "sembprobe/error.hpp"
#include "sembprobe/gradcheck.hpp"
#include "sembprobe/lstm.hpp"
#include "sembprobe/nn.hpp"

using namespace sembprobe;
using namespace sembprobe::nn;

namespace {

void set_values(Parameter& p, std::initializer_list<double> vals) {
    std::size_t i = 0;
    for (double v : vals) {
        p.value[i++] = v;
    }
}

// Sum of a fixed random projection of h and c, so every output feeds the loss.
struct LstmProbeLoss {
    Vec wh, wc;
};

} // namespace

TEST(Linear, IdentityWeightPassesInputThrough) {
    LinearLayer layer("l", 2, 2);
    set_values(layer.weight, {1, 0, 0, 1});
    Vec x{3, -1};
    EXPECT_EQ(linear_forward(layer, x), (Vec{3, -1}));
}

TEST(Linear, ZeroWeightReturnsBias) {
    LinearLayer layer("l", 3, 1);
    layer.bias.value[0] = 2;
    EXPECT_EQ(layer.apply(Vec{5, -7, 9}), Vec{2});
}

TEST(Linear, HandMatrixVectorProduct) {
    LinearLayer layer("l", 2, 2);
    set_values(layer.weight, {1, 2, 3, 4});
    EXPECT_EQ(layer.apply(Vec{1, 1}), (Vec{3, 7}));
}

TEST(Linear, ShapeMismatchThrows) {
    LinearLayer layer("l", 2, 2);
    EXPECT_THROW(layer.apply(Vec{1, 2, 3}), DimensionError);
}

TEST(Lstm, ZeroWeightsHalveTheCell) {
    LstmCellParams p("cell", 3, 2);
    Vec x{0.3, -0.2, 1.0}, h{0.7, -0.4}, c{1.5, -2.0};
    auto s = lstm_step(p, x, h, c);
    for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_DOUBLE_EQ(s.c[j], 0.5 * c[j]);
        EXPECT_DOUBLE_EQ(s.h[j], 0.5 * std::tanh(0.5 * c[j]));
    }
}

TEST(Lstm, ZeroStateZeroWeightsGiveZeroHidden) {
    LstmCellParams p("cell", 2, 2);
    auto s = lstm_step(p, Vec{1, 1}, Vec{0, 0}, Vec{0, 0});
    EXPECT_EQ(s.h, (Vec{0, 0}));
}

TEST(Lstm, DimensionMismatchThrows) {
    LstmCellParams p("cell", 2, 3);
    EXPECT_THROW(lstm_step(p, Vec{1, 1}, Vec{0, 0}, Vec{0, 0, 0}), DimensionError);
}

TEST(Lstm, StepGradientMatchesFiniteDifferences) {
    Rng rng(7);
    LstmCellParams p("cell", 4, 3);
    for (auto* q : p.params()) {
        q->init_uniform(rng, 0.5);
    }
    Vec x{0.2, -0.5, 0.9, 0.1}, h0{0.3, -0.1, 0.4}, c0{-0.6, 0.2, 0.8};
    Vec wh{0.7, -1.3, 0.4}, wc{-0.2, 0.5, 1.1};
    auto loss = [&] {
        for (auto* q : p.params()) {
            q->zero_grad();
        }
        auto s = lstm_step(p, x, h0, c0);
        double l = 0;
        for (std::size_t j = 0; j < 3; ++j) {
            l += wh[j] * s.h[j] + wc[j] * s.c[j];
        }
        lstm_step_backward(p, s, wh, wc);
        return l;
    };
    auto r = grad_check(loss, p.params());
    EXPECT_LT(r.max_relative_error, 1e-6) << r.worst_parameter << "[" << r.worst_index << "]";
}

TEST(Lstm, InputAndStateGradientsMatchFiniteDifferences) {
    Rng rng(11);
    LstmCellParams cell("cell", 3, 2);
    for (auto* q : cell.params()) {
        q->init_uniform(rng, 0.6);
    }
    // Treat x, h_prev and c_prev as parameters to check dx, dh_prev, dc_prev.
    Parameter px("x", {3}), ph("h", {2}), pc("c", {2});
    px.init_uniform(rng, 1.0);
    ph.init_uniform(rng, 1.0);
    pc.init_uniform(rng, 1.0);
    auto loss = [&] {
        auto s = lstm_step(cell, px.value.data(), ph.value.data(), pc.value.data());
        Vec dh{1.0, -0.5}, dc{0.25, 0.75};
        double l = s.h[0] - 0.5 * s.h[1] + 0.25 * s.c[0] + 0.75 * s.c[1];
        auto g = lstm_step_backward(cell, s, dh, dc);
        std::copy(g.dx.begin(), g.dx.end(), px.grad.raw());
        std::copy(g.dh_prev.begin(), g.dh_prev.end(), ph.grad.raw());
        std::copy(g.dc_prev.begin(), g.dc_prev.end(), pc.grad.raw());
        return l;
    };
    auto r = grad_check(loss, {&px, &ph, &pc});
    EXPECT_LT(r.max_relative_error, 1e-6) << r.worst_parameter;
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogV) {
    for (std::size_t v : {2u, 5u, 50u}) {
        Vec logits(v, 0.37);
        auto r = softmax_cross_entropy(logits, v - 1);
        EXPECT_NEAR(r.loss, std::log(static_cast<double>(v)), 1e-15);
    }
}

TEST(SoftmaxCrossEntropy, SaturatedLogitsMatchClosedForm) {
    auto r = softmax_cross_entropy(Vec{10, -10}, 0);
    // -log sigma(20) = log1p(exp(-20))
    EXPECT_NEAR(r.loss, std::log1p(std::exp(-20.0)), 1e-20);
    EXPECT_NEAR(r.loss, 2.06e-9, 0.01e-9);
}

TEST(SoftmaxCrossEntropy, GradientSumsToZeroAndLossNonNegative) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(20);
        Vec logits(n);
        for (double& v : logits) {
            v = rng.uniform(-30, 30);
        }
        auto r = softmax_cross_entropy(logits, rng.below(n));
        EXPECT_GE(r.loss, 0.0);
        EXPECT_NEAR(std::accumulate(r.grad.begin(), r.grad.end(), 0.0), 0.0, 1e-12);
    }
}

TEST(SoftmaxCrossEntropy, TargetOutOfRangeThrows) {
    EXPECT_THROW(softmax_cross_entropy(Vec{1, 2}, 2), RangeError);
}

TEST(Adagrad, ZeroGradientIsNoOp) {
    Parameter p("p", {3});
    set_values(p, {1, -2, 3});
    Tensor before = p.value;
    adagrad_update(p, 0.1);
    EXPECT_EQ(p.value, before);
}

TEST(Adagrad, FirstAndSecondStepSizes) {
    Parameter p("p", {1});
    p.grad[0] = 3;
    adagrad_update(p, 0.1);
    EXPECT_NEAR(p.value[0], -0.1, 1e-9);
    EXPECT_EQ(p.grad[0], 0.0);
    p.grad[0] = 3;
    adagrad_update(p, 0.1);
    EXPECT_NEAR(p.value[0], -0.1 - 0.1 * 3 / std::sqrt(18.0), 1e-9);
    EXPECT_NEAR(0.1 * 3 / std::sqrt(18.0), 0.0707, 1e-4);
}

TEST(Adagrad, AccumulatorNeverDecreases) {
    Rng rng(5);
    Parameter p("p", {16});
    Tensor prev = p.adagrad_accum;
    for (int step = 0; step < 50; ++step) {
        for (double& g : p.grad.data()) {
            g = rng.bernoulli(0.3) ? 0.0 : rng.uniform(-2, 2);
        }
        adagrad_update(p, 0.05);
        for (std::size_t i = 0; i < p.size(); ++i) {
            EXPECT_GE(p.adagrad_accum[i], prev[i]);
        }
        prev = p.adagrad_accum;
    }
}

TEST(ClipGradients, BelowThresholdUnchanged) {
    Parameter p("p", {2});
    p.grad[0] = 0.3;
    p.grad[1] = 0.4;
    EXPECT_EQ(clip_gradients({&p}, 5.0), 1.0);
    EXPECT_EQ(p.grad[0], 0.3);
    EXPECT_EQ(p.grad[1], 0.4);
}

TEST(ClipGradients, ScalesToUnitNorm) {
    Parameter p("p", {2});
    p.grad[0] = 3;
    p.grad[1] = 4;
    EXPECT_DOUBLE_EQ(clip_gradients({&p}, 1.0), 0.2);
    EXPECT_NEAR(p.grad[0], 0.6, 1e-15);
    EXPECT_NEAR(p.grad[1], 0.8, 1e-15);
}

TEST(ClipGradients, GlobalNormBoundedAndIdempotent) {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        Parameter a("a", {5}), b("b", {2, 3});
        for (auto* p : {&a, &b}) {
            for (double& g : p->grad.data()) {
                g = rng.uniform(-10, 10);
            }
        }
        const double threshold = rng.uniform(0.1, 20);
        clip_gradients({&a, &b}, threshold);
        EXPECT_LE(global_grad_norm({&a, &b}), threshold + 1e-9);
        Tensor ga = a.grad, gb = b.grad;
        clip_gradients({&a, &b}, threshold);
        EXPECT_EQ(a.grad, ga);
        EXPECT_EQ(b.grad, gb);
    }
}

TEST(ClipGradients, NonPositiveThresholdRejected) {
    Parameter p("p", {1});
    EXPECT_THROW(clip_gradients({&p}, 0.0), ConfigError);
}

TEST(Dropout, ZeroRateIsIdentity) {
    Rng rng(1);
    Vec x{1, 2, 3};
    EXPECT_EQ(dropout(x, 0.0, rng, true).output, x);
    EXPECT_EQ(dropout(x, 0.0, rng, false).output, x);
}

TEST(Dropout, EvalModeIsBitIdentical) {
    Rng rng(1);
    Vec x{0.1, -1e-300, 7.25, std::nextafter(1.0, 2.0)};
    EXPECT_EQ(dropout(x, 0.8, rng, false).output, x);
}

TEST(Dropout, InvertedScalingPreservesMean) {
    Rng rng(2024);
    Vec ones(100000, 1.0);
    auto r = dropout(ones, 0.8, rng, true);
    const double mean = std::accumulate(r.output.begin(), r.output.end(), 0.0) / ones.size();
    EXPECT_GE(mean, 0.97);
    EXPECT_LE(mean, 1.03);
}

TEST(Dropout, RateOfOneRejected) {
    Rng rng(1);
    EXPECT_THROW(dropout(Vec{1}, 1.0, rng, true), ConfigError);
}

TEST(GradCheck, QuadraticMatchesExactly) {
    Parameter p("p", {6});
    set_values(p, {0.5, -1.25, 3.0, 10.0, -0.01, 2.5});
    auto loss = [&] {
        double l = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            l += 0.5 * p.value[i] * p.value[i];
            p.grad[i] = p.value[i];
        }
        return l;
    };
    // Central differences are exact on quadratics, so a wide step only trims roundoff.
    GradCheckOptions opts;
    opts.step = 1e-3;
    EXPECT_LT(grad_check(loss, {&p}, opts).max_relative_error, 1e-9);
}

TEST(GradCheck, LinearSoftmaxComposite) {
    Rng rng(17);
    LinearLayer layer("l", 5, 4);
    layer.weight.init_uniform(rng, 1.0);
    layer.bias.init_uniform(rng, 1.0);
    Vec x{0.3, -0.7, 1.2, 0.05, -0.4};
    auto loss = [&] {
        layer.weight.zero_grad();
        layer.bias.zero_grad();
        auto logits = layer.forward(x);
        auto ce = softmax_cross_entropy(logits, 2);
        layer.backward(ce.grad);
        return ce.loss;
    };
    EXPECT_LT(grad_check(loss, layer.params()).max_relative_error, 1e-6);
}

TEST(GradCheck, LstmUnrollFiveSteps) {
    Rng rng(23);
    const std::size_t in = 3, hid = 4, steps = 5;
    LstmCellParams cell("cell", in, hid);
    LinearLayer head("head", hid, 3);
    ParamRefs params = cell.params();
    params.push_back(&head.weight);
    params.push_back(&head.bias);
    for (auto* p : params) {
        p->init_uniform(rng, 0.4);
    }
    std::vector<Vec> xs(steps, Vec(in));
    for (auto& x : xs) {
        for (double& v : x) {
            v = rng.uniform(-1, 1);
        }
    }
    const std::size_t targets[steps] = {0, 2, 1, 1, 0};
    auto loss = [&] {
        for (auto* p : params) {
            p->zero_grad();
        }
        std::vector<LstmStepCache> caches;
        Vec h(hid, 0.0), c(hid, 0.0);
        double l = 0;
        std::vector<Vec> dlogits;
        for (std::size_t t = 0; t < steps; ++t) {
            caches.push_back(lstm_step(cell, xs[t], h, c));
            h = caches.back().h;
            c = caches.back().c;
            auto ce = softmax_cross_entropy(head.apply(h), targets[t]);
            l += ce.loss;
            dlogits.push_back(ce.grad);
        }
        Vec dh(hid, 0.0), dc(hid, 0.0);
        for (std::size_t t = steps; t-- > 0;) {
            Vec dh_out = head.backward(caches[t].h, dlogits[t]);
            for (std::size_t j = 0; j < hid; ++j) {
                dh_out[j] += dh[j];
            }
            auto g = lstm_step_backward(cell, caches[t], dh_out, dc);
            dh = g.dh_prev;
            dc = g.dc_prev;
        }
        return l;
    };
    EXPECT_LT(grad_check(loss, params).max_relative_error, 1e-5);
}

TEST(GradCheck, NonFiniteLossFails) {
    Parameter p("p", {1});
    auto loss = [] { return std::nan(""); };
    EXPECT_THROW(grad_check(loss, {&p}), NumericError);
}

TEST(Checkpoint, ByteLayoutOfSmallContainer) {
    Checkpoint ck;
    ck.put("w", Tensor({1}, {1.0}));
    const std::string bytes = ck.serialize();
    std::string expected = "SEMBPROBE1";
    expected.push_back('\x01');
    auto u64 = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            expected.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
        }
    };
    u64(1);
    u64(1);
    expected += "w";
    u64(1);
    u64(1);
    u64(0x3FF0000000000000ULL);
    EXPECT_EQ(bytes, expected);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    Rng rng(99);
    Checkpoint ck;
    Tensor a({3, 4});
    for (double& v : a.data()) {
        v = rng.uniform(-1e6, 1e6);
    }
    a[0] = -0.0;
    a[1] = 5e-324;
    ck.put("alpha", a);
    ck.put("\xce\xb2/bias", Tensor({2}, {1.0 / 3.0, -2.5}));
    ck.put_scalar("epoch", 7);
    const auto bytes = ck.serialize();
    const auto back = Checkpoint::deserialize(bytes);
    EXPECT_EQ(back.serialize(), bytes);
    EXPECT_EQ(back.entries().size(), 3u);
    EXPECT_EQ(std::signbit(back.get("alpha")[0]), true);
    EXPECT_EQ(back.get_scalar("epoch"), 7);
}

TEST(Checkpoint, RejectsCorruptInput) {
    EXPECT_THROW(Checkpoint::deserialize("NOTACHECKPOINT"), ParseError);
    Checkpoint ck;
    ck.put("x", Tensor({2}, {1, 2}));
    auto bytes = ck.serialize();
    EXPECT_THROW(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 3)), ParseError);
    EXPECT_THROW(Checkpoint::deserialize(bytes + "z"), ParseError);
}
