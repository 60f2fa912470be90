#include "sembprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sembprobe/error.hpp"

namespace sembprobe {

ProbeMLP::ProbeMLP(std::size_t input_dim, std::size_t classes, double dropout)
    : hidden("probe.hidden", input_dim, input_dim), output("probe.output", input_dim, classes),
      dropout_rate(dropout) {
    if (classes < 2) {
        throw ConfigError("probe needs at least two classes");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw ConfigError("probe dropout must lie in [0, 1)");
    }
}

void ProbeMLP::init_uniform(Rng& rng, double range) {
    for (nn::Parameter* p : params()) {
        p->init_uniform(rng, range);
    }
}

nn::ParamRefs ProbeMLP::params() {
    return {&hidden.weight, &hidden.bias, &output.weight, &output.bias};
}

Checkpoint ProbeMLP::to_checkpoint() const {
    Checkpoint ck;
    ck.put(hidden.weight.name, hidden.weight.value);
    ck.put(hidden.bias.name, hidden.bias.value);
    ck.put(output.weight.name, output.weight.value);
    ck.put(output.bias.name, output.bias.value);
    ck.put_scalar("probe.dropout", dropout_rate);
    return ck;
}

ProbeMLP ProbeMLP::from_checkpoint(const Checkpoint& ck) {
    const Tensor& ow = ck.get("probe.output.weight");
    if (ow.rank() != 2) {
        throw ParseError("probe checkpoint output weight must be a matrix");
    }
    ProbeMLP m(ow.cols(), ow.rows(), ck.get_scalar("probe.dropout"));
    for (nn::Parameter* p : m.params()) {
        const Tensor& t = ck.get(p->name);
        if (t.shape() != p->value.shape()) {
            throw ParseError("checkpoint tensor " + p->name + " has shape " +
                             shape_string(t.shape()));
        }
        p->value = t;
    }
    return m;
}

namespace {

struct ProbeActivations {
    Vec hidden_out;
    nn::DropoutResult drop;
    Vec scores;
};

ProbeActivations run_forward(const ProbeMLP& model, std::span<const double> x, Rng* rng) {
    if (x.size() != model.input_dim()) {
        throw DimensionError("probe input has dimension " + std::to_string(x.size()) +
                             ", expected " + std::to_string(model.input_dim()));
    }
    ProbeActivations a;
    a.hidden_out = model.hidden.apply(x);
    for (double& v : a.hidden_out) {
        v = std::max(v, 0.0);
    }
    Rng unused(0);
    a.drop = nn::dropout(a.hidden_out, model.dropout_rate, rng ? *rng : unused, rng != nullptr);
    a.scores = model.output.apply(a.drop.output);
    return a;
}

} // namespace

Vec probe_forward(const ProbeMLP& model, std::span<const double> x, bool train_mode, Rng* rng) {
    if (train_mode && rng == nullptr) {
        throw ConfigError("train-mode probe forward needs a random generator");
    }
    return run_forward(model, x, train_mode ? rng : nullptr).scores;
}

double probe_example_loss(ProbeMLP& model, std::span<const double> x, std::uint32_t label,
                          Rng* rng, bool grads, double grad_scale) {
    ProbeActivations a = run_forward(model, x, rng);
    auto ce = nn::softmax_cross_entropy(a.scores, label);
    if (grads) {
        for (double& g : ce.grad) {
            g *= grad_scale;
        }
        Vec dh = nn::dropout_backward(model.output.backward(a.drop.output, ce.grad), a.drop);
        for (std::size_t i = 0; i < dh.size(); ++i) {
            if (a.hidden_out[i] <= 0.0) {
                dh[i] = 0.0;
            }
        }
        model.hidden.backward(x, dh);
    }
    return ce.loss;
}

std::uint32_t probe_predict(const ProbeMLP& model, std::span<const double> x) {
    const Vec scores = run_forward(model, x, nullptr).scores;
    return static_cast<std::uint32_t>(std::max_element(scores.begin(), scores.end()) -
                                      scores.begin());
}

namespace {

void check_dataset(const TaskDataset& ds, const char* what) {
    if (ds.instances.empty()) {
        throw ConfigError(std::string("probe ") + what + " set is empty");
    }
    if (!ds.assembled()) {
        throw ConfigError(std::string("probe ") + what + " set has no assembled inputs");
    }
}

} // namespace

double probe_dataset_loss(const ProbeMLP& model, const TaskDataset& dataset) {
    check_dataset(dataset, "evaluation");
    auto& m = const_cast<ProbeMLP&>(model); // no gradients are written
    double loss = 0.0;
    for (const auto& inst : dataset.instances) {
        loss += probe_example_loss(m, inst.input, inst.label, nullptr, false);
    }
    return loss / static_cast<double>(dataset.instances.size());
}

ProbeTrainResult probe_train(const TaskDataset& train, const TaskDataset& dev,
                             const ProbeTrainConfig& config) {
    check_dataset(train, "train");
    check_dataset(dev, "dev");
    if (train.classes != dev.classes || train.instances[0].input.size() !=
                                            dev.instances[0].input.size()) {
        throw DimensionError("probe train and dev sets differ in shape");
    }
    if (config.batch == 0 || config.patience == 0 || config.max_epochs == 0) {
        throw ConfigError("probe batch, patience and max_epochs must be positive");
    }
    const std::size_t in = train.instances[0].input.size();
    ProbeMLP model(in, train.classes, config.dropout);
    Rng init(config.seed);
    model.init_uniform(init, config.init_range);
    const nn::ParamRefs params = model.params();

    ProbeTrainResult result;
    result.model = model;
    result.best_dev_loss = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(train.instances.size());
    std::size_t since_best = 0;
    for (std::size_t epoch = 0; epoch < config.max_epochs && since_best < config.patience;
         ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, 2 * epoch + 1));
        Rng dropout_rng(derive_seed(config.seed, 2 * epoch + 2));
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        double loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += config.batch) {
            const std::size_t end = std::min(order.size(), b + config.batch);
            const double scale = 1.0 / static_cast<double>(end - b);
            for (std::size_t i = b; i < end; ++i) {
                const auto& inst = train.instances[order[i]];
                loss += probe_example_loss(model, inst.input, inst.label, &dropout_rng, true,
                                           scale);
            }
            for (nn::Parameter* p : params) {
                nn::adagrad_update(*p, config.lr);
            }
        }
        const double train_loss = loss / static_cast<double>(order.size());
        if (!std::isfinite(train_loss)) {
            throw NumericError("probe training loss became non-finite in epoch " +
                               std::to_string(epoch + 1));
        }
        const double dev_loss = probe_dataset_loss(model, dev);
        result.curve.push_back({epoch + 1, train_loss, dev_loss});
        if (dev_loss < result.best_dev_loss) {
            result.best_dev_loss = dev_loss;
            result.best_epoch = epoch + 1;
            result.model = model;
            since_best = 0;
        } else {
            ++since_best;
        }
    }
    return result;
}

ProbeEval probe_eval(const ProbeMLP& model, const TaskDataset& dataset) {
    check_dataset(dataset, "evaluation");
    ProbeEval ev;
    ev.correct.reserve(dataset.instances.size());
    std::size_t hits = 0;
    for (const auto& inst : dataset.instances) {
        const std::uint32_t p = probe_predict(model, inst.input);
        ev.predictions.push_back(p);
        ev.correct.push_back(p == inst.label ? 1 : 0);
        hits += p == inst.label;
    }
    ev.accuracy = static_cast<double>(hits) / static_cast<double>(dataset.instances.size());
    return ev;
}

std::uint32_t majority_class(const TaskDataset& dataset) {
    if (dataset.instances.empty()) {
        throw ConfigError("majority class of an empty dataset");
    }
    std::vector<std::size_t> counts(std::max<std::size_t>(dataset.classes, 1), 0);
    for (const auto& inst : dataset.instances) {
        if (inst.label >= counts.size()) {
            counts.resize(inst.label + 1, 0);
        }
        ++counts[inst.label];
    }
    return static_cast<std::uint32_t>(std::max_element(counts.begin(), counts.end()) -
                                      counts.begin());
}

ProbeEval constant_class_eval(const TaskDataset& dataset, std::uint32_t cls) {
    if (dataset.instances.empty()) {
        throw ConfigError("cannot evaluate on an empty dataset");
    }
    ProbeEval ev;
    std::size_t hits = 0;
    for (const auto& inst : dataset.instances) {
        ev.predictions.push_back(cls);
        ev.correct.push_back(inst.label == cls ? 1 : 0);
        hits += inst.label == cls;
    }
    ev.accuracy = static_cast<double>(hits) / static_cast<double>(dataset.instances.size());
    return ev;
}

} // namespace sembprobe
