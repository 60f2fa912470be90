#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sembprobe/checkpoint.hpp"
#include "sembprobe/nn.hpp"
#include "sembprobe/tasks.hpp"

namespace sembprobe {

struct ProbeTrainConfig {
    double lr = 0.01;
    double dropout = 0.8;
    std::size_t patience = 5;
    std::size_t max_epochs = 100;
    std::size_t batch = 32;
    double init_range = 0.1;
    std::uint64_t seed = 1;
};

/// One hidden ReLU layer as wide as the input, dropout, then class scores.
class ProbeMLP {
public:
    ProbeMLP() = default;
    ProbeMLP(std::size_t input_dim, std::size_t classes, double dropout);

    std::size_t input_dim() const noexcept { return hidden.in_dim(); }
    std::size_t classes() const noexcept { return output.out_dim(); }

    void init_uniform(Rng& rng, double range);
    nn::ParamRefs params();

    Checkpoint to_checkpoint() const;
    static ProbeMLP from_checkpoint(const Checkpoint& ck);

    nn::LinearLayer hidden;
    nn::LinearLayer output;
    double dropout_rate = 0.0;
};

/// Class scores (pre-softmax). rng is required only in train mode.
Vec probe_forward(const ProbeMLP& model, std::span<const double> x, bool train_mode,
                  Rng* rng = nullptr);

/// Cross-entropy of one example; with grads set, accumulates gradients
/// scaled by grad_scale. rng == nullptr means eval mode.
double probe_example_loss(ProbeMLP& model, std::span<const double> x, std::uint32_t label,
                          Rng* rng, bool grads, double grad_scale = 1.0);

/// Argmax of the scores; ties go to the smaller class id.
std::uint32_t probe_predict(const ProbeMLP& model, std::span<const double> x);

/// Mean eval-mode cross-entropy.
double probe_dataset_loss(const ProbeMLP& model, const TaskDataset& dataset);

struct ProbeEpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double dev_loss = 0.0;
};

struct ProbeTrainResult {
    /// Best-dev-loss model.
    ProbeMLP model;
    std::vector<ProbeEpochStats> curve;
    std::size_t best_epoch = 0;
    double best_dev_loss = 0.0;
};

/// Minibatch AdaGrad with early stopping on dev loss. Both datasets must be
/// assembled and share the input width and class count.
ProbeTrainResult probe_train(const TaskDataset& train, const TaskDataset& dev,
                             const ProbeTrainConfig& config);

struct ProbeEval {
    double accuracy = 0.0;
    std::vector<std::uint8_t> correct;
    std::vector<std::uint32_t> predictions;
};

ProbeEval probe_eval(const ProbeMLP& model, const TaskDataset& dataset);

/// Most frequent label (smaller id on ties).
std::uint32_t majority_class(const TaskDataset& dataset);
/// Scores a predictor that always answers cls.
ProbeEval constant_class_eval(const TaskDataset& dataset, std::uint32_t cls);

} // namespace sembprobe
