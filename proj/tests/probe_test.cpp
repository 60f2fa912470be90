#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "sembprobe/error.hpp"
#include "sembprobe/gradcheck.hpp"
#include "sembprobe/probe.hpp"

using namespace sembprobe;

namespace {

TaskDataset make_dataset(const std::vector<Vec>& xs, const std::vector<std::uint32_t>& ys,
                         std::size_t classes) {
    TaskDataset ds;
    ds.task = classes == 2 ? TaskKind::Content : TaskKind::Length;
    ds.classes = classes;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        TaskInstance inst;
        inst.input = xs[i];
        inst.label = ys[i];
        inst.meta.sent_id = i;
        ds.instances.push_back(std::move(inst));
    }
    return ds;
}

// Two 2-D Gaussian blobs centred at (-1.5, -1.5) and (1.5, 1.5).
TaskDataset blobs(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> noise(0.0, 0.6);
    std::vector<Vec> xs;
    std::vector<std::uint32_t> ys;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t y = i % 2;
        const double c = y == 1 ? 1.5 : -1.5;
        xs.push_back({c + noise(gen), c + noise(gen)});
        ys.push_back(y);
    }
    return make_dataset(xs, ys, 2);
}

TaskDataset random_inputs(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec> xs;
    std::vector<std::uint32_t> ys;
    for (std::size_t i = 0; i < n; ++i) {
        Vec x(dim);
        for (auto& v : x) {
            v = rng.uniform(-1, 1);
        }
        xs.push_back(std::move(x));
        ys.push_back(static_cast<std::uint32_t>(i % 2));
    }
    return make_dataset(xs, ys, 2);
}

} // namespace

TEST(Probe, HiddenLayerIsSquare) {
    ProbeMLP m(7, 3, 0.8);
    EXPECT_EQ(m.hidden.weight.value.rows(), 7u);
    EXPECT_EQ(m.hidden.weight.value.cols(), 7u);
    EXPECT_EQ(m.output.weight.value.rows(), 3u);
    EXPECT_THROW(ProbeMLP(3, 2, 1.0), ConfigError);
}

TEST(Probe, ZeroWeightsGiveLogClassCount) {
    ProbeMLP m(4, 8, 0.8);
    Vec x{1, -2, 3, 0.5};
    EXPECT_NEAR(probe_example_loss(m, x, 3, nullptr, false), std::log(8.0), 1e-15);
    EXPECT_THROW(probe_forward(m, Vec{1, 2}, false), DimensionError);
}

TEST(Probe, EvalModeIsDeterministic) {
    ProbeMLP m(5, 2, 0.8);
    Rng rng(1);
    m.init_uniform(rng, 0.5);
    Vec x{1, -2, 3, -4, 5};
    EXPECT_EQ(probe_forward(m, x, false), probe_forward(m, x, false));
    Rng d(3);
    const Vec first = probe_forward(m, x, true, &d);
    bool varied = false;
    for (int i = 0; i < 20; ++i) {
        varied = varied || probe_forward(m, x, true, &d) != first;
    }
    EXPECT_TRUE(varied);
}

TEST(Probe, CompositePassesGradientCheck) {
    ProbeMLP m(6, 3, 0.5);
    Rng rng(8);
    m.init_uniform(rng, 0.5);
    Vec x(6);
    for (auto& v : x) {
        v = rng.uniform(-1, 1);
    }
    auto params = m.params();
    auto loss = [&] {
        for (auto* p : params) {
            p->zero_grad();
        }
        Rng mask(5);
        return probe_example_loss(m, x, 2, &mask, true);
    };
    auto res = nn::grad_check(loss, params);
    EXPECT_EQ(res.entries_checked, 6u * 6 + 6 + 3 * 6 + 3);
    EXPECT_LT(res.max_relative_error, 1e-5);
}

TEST(Probe, SeparatesGaussianBlobs) {
    auto train = blobs(200, 1);
    auto dev = blobs(200, 2);
    auto res = probe_train(train, dev, ProbeTrainConfig{});
    EXPECT_GE(probe_eval(res.model, dev).accuracy, 0.95);
}

TEST(Probe, ShuffledLabelsStayNearChance) {
    auto train = shuffle_labels(random_inputs(2000, 10, 1), 3);
    auto dev = shuffle_labels(random_inputs(1000, 10, 2), 4);
    auto res = probe_train(train, dev, ProbeTrainConfig{});
    EXPECT_NEAR(probe_eval(res.model, dev).accuracy, 0.5, 0.05);
}

TEST(Probe, SameSeedGivesIdenticalModel) {
    auto train = blobs(100, 5);
    auto dev = blobs(50, 6);
    ProbeTrainConfig cfg;
    cfg.max_epochs = 5;
    auto a = probe_train(train, dev, cfg).model.to_checkpoint().serialize();
    auto b = probe_train(train, dev, cfg).model.to_checkpoint().serialize();
    EXPECT_EQ(a, b);
    cfg.seed = 2;
    EXPECT_NE(a, probe_train(train, dev, cfg).model.to_checkpoint().serialize());
}

TEST(Probe, ReturnedModelHasLowestDevLoss) {
    auto train = random_inputs(300, 4, 7);
    auto dev = random_inputs(200, 4, 8);
    ProbeTrainConfig cfg;
    cfg.lr = 0.2;
    auto res = probe_train(train, dev, cfg);
    const double got = probe_dataset_loss(res.model, dev);
    EXPECT_EQ(got, res.best_dev_loss);
    for (const auto& e : res.curve) {
        EXPECT_LE(got, e.dev_loss);
    }
    if (res.curve.size() < cfg.max_epochs) {
        EXPECT_EQ(res.curve.size(), res.best_epoch + cfg.patience);
    }
}

TEST(Probe, ConstantPredictorScoresClassShare) {
    std::vector<Vec> xs(50, Vec{0.0});
    std::vector<std::uint32_t> ys;
    for (std::size_t i = 0; i < 50; ++i) {
        ys.push_back(i < 13 ? 4 : static_cast<std::uint32_t>(i % 3));
    }
    auto ds = make_dataset(xs, ys, 8);
    const auto maj = majority_class(ds);
    const auto share =
        static_cast<double>(std::count(ys.begin(), ys.end(), maj)) / static_cast<double>(ys.size());
    EXPECT_EQ(constant_class_eval(ds, maj).accuracy, share);
    // A probe whose only signal is the output bias behaves the same way.
    ProbeMLP m(1, 8, 0.0);
    m.output.bias.value[4] = 1.0;
    EXPECT_EQ(probe_eval(m, ds).accuracy, 13.0 / 50.0);
}

TEST(Probe, MemorizesSeparableTrainSet) {
    auto train = blobs(40, 11);
    ProbeTrainConfig cfg;
    cfg.dropout = 0.0;
    auto res = probe_train(train, train, cfg);
    auto ev = probe_eval(res.model, train);
    EXPECT_EQ(ev.accuracy, 1.0);
}

TEST(Probe, AccuracyIsMeanOfCorrectnessAndEvalIsPure) {
    auto train = random_inputs(200, 3, 1);
    ProbeTrainConfig cfg;
    cfg.max_epochs = 3;
    auto res = probe_train(train, train, cfg);
    auto a = probe_eval(res.model, train);
    auto b = probe_eval(res.model, train);
    EXPECT_EQ(a.correct, b.correct);
    const double mean = std::accumulate(a.correct.begin(), a.correct.end(), 0.0) /
                        static_cast<double>(a.correct.size());
    EXPECT_EQ(a.accuracy, mean);
    EXPECT_THROW(probe_eval(res.model, TaskDataset{}), ConfigError);
}

TEST(Probe, CheckpointRoundTrip) {
    ProbeMLP m(3, 2, 0.8);
    Rng rng(2);
    m.init_uniform(rng, 0.1);
    auto ck = m.to_checkpoint();
    auto back = ProbeMLP::from_checkpoint(Checkpoint::deserialize(ck.serialize()));
    EXPECT_EQ(back.to_checkpoint().serialize(), ck.serialize());
}
