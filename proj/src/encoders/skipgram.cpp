#include "sembprobe/skipgram.hpp"

#include <algorithm>
#include <cmath>

#include "sembprobe/error.hpp"

namespace sembprobe {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

// log sigma(x), stable for large |x|.
double log_sigmoid(double x) {
    return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

void check_id(const SkipGramModel& m, TokenId id) {
    if (id >= m.vocab_size()) {
        throw RangeError("word id " + std::to_string(id) + " outside skip-gram vocabulary of " +
                         std::to_string(m.vocab_size()));
    }
}

} // namespace

SkipGramModel::SkipGramModel(const std::vector<std::uint64_t>& counts_, std::size_t dim,
                             std::size_t window_)
    : input("skipgram.input", counts_.size(), dim), tree(build_huffman(counts_)),
      nodes("skipgram.nodes", {counts_.size() - 1, dim}), counts(counts_), window(window_) {}

Checkpoint SkipGramModel::to_checkpoint() const {
    Checkpoint ck;
    ck.put("skipgram.input", input.vectors.value);
    ck.put("skipgram.nodes", nodes.value);
    std::vector<double> c(counts.begin(), counts.end());
    const std::size_t n = c.size();
    ck.put("skipgram.counts", Tensor({n}, std::move(c)));
    ck.put_scalar("skipgram.window", static_cast<double>(window));
    return ck;
}

SkipGramModel SkipGramModel::from_checkpoint(const Checkpoint& ck) {
    const Tensor& c = ck.get("skipgram.counts");
    std::vector<std::uint64_t> counts(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        counts[i] = static_cast<std::uint64_t>(c[i]);
    }
    const Tensor& in = ck.get("skipgram.input");
    SkipGramModel m(counts, in.cols(), static_cast<std::size_t>(ck.get_scalar("skipgram.window")));
    if (in.rows() != counts.size() || ck.get("skipgram.nodes").shape() != m.nodes.value.shape()) {
        throw ParseError("skip-gram checkpoint tensors have inconsistent shapes");
    }
    m.input.vectors.value = in;
    m.nodes.value = ck.get("skipgram.nodes");
    return m;
}

double hs_log_probability(const SkipGramModel& model, TokenId center, TokenId context) {
    check_id(model, center);
    check_id(model, context);
    const std::size_t d = model.dim();
    const double* v = model.input.vectors.value.raw() + static_cast<std::size_t>(center) * d;
    const auto& path = model.tree.paths[context];
    const auto& code = model.tree.codes[context];
    double logp = 0.0;
    for (std::size_t k = 0; k < path.size(); ++k) {
        const double x = dot(v, model.nodes.value.raw() + path[k] * d, d);
        logp += log_sigmoid(code[k] == 0 ? x : -x);
    }
    return logp;
}

double hs_probability(const SkipGramModel& model, TokenId center, TokenId context) {
    return std::exp(hs_log_probability(model, center, context));
}

std::vector<std::pair<TokenId, TokenId>> context_pairs(const Sentence& s, std::size_t window) {
    std::vector<std::pair<TokenId, TokenId>> pairs;
    const std::size_t n = s.tokens.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= window ? i - window : 0;
        const std::size_t hi = std::min(n - 1, i + window);
        for (std::size_t j = lo; j <= hi; ++j) {
            if (j != i) {
                pairs.emplace_back(s.tokens[i], s.tokens[j]);
            }
        }
    }
    return pairs;
}

double skipgram_corpus_loss(const SkipGramModel& model, const std::vector<Sentence>& corpus) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& s : corpus) {
        for (auto [center, context] : context_pairs(s, model.window)) {
            total -= hs_log_probability(model, center, context);
            ++n;
        }
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
}

SkipGramTrainResult skipgram_train(const std::vector<Sentence>& corpus, const Vocabulary& vocab,
                                   const SkipGramConfig& config) {
    if (corpus.empty()) {
        throw ConfigError("skip-gram training needs a nonempty corpus");
    }
    if (config.dim == 0 || config.window == 0 || config.epochs == 0) {
        throw ConfigError("skip-gram dim, window and epochs must be positive");
    }
    SkipGramTrainResult result;
    SkipGramModel& m = result.model;
    m = SkipGramModel(vocab.counts(), config.dim, config.window);
    Rng rng(config.seed);
    m.input.vectors.init_uniform(rng, config.init_range);

    std::size_t pairs_per_epoch = 0;
    for (const auto& s : corpus) {
        pairs_per_epoch += context_pairs(s, config.window).size();
    }
    const double total = static_cast<double>(pairs_per_epoch * config.epochs);
    const std::size_t d = config.dim;
    std::vector<double> grad_center(d);
    double* in = m.input.vectors.value.raw();
    double* nodes = m.nodes.value.raw();
    std::size_t seen = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double loss = 0.0;
        std::size_t pairs = 0;
        for (const auto& s : corpus) {
            for (auto [center, context] : context_pairs(s, config.window)) {
                if (center >= m.vocab_size() || context >= m.vocab_size()) {
                    throw RangeError("corpus token outside skip-gram vocabulary");
                }
                const double progress = static_cast<double>(seen) / total;
                const double lr =
                    config.lr * std::max(config.min_lr_fraction, 1.0 - progress);
                double* v = in + static_cast<std::size_t>(center) * d;
                std::fill(grad_center.begin(), grad_center.end(), 0.0);
                const auto& path = m.tree.paths[context];
                const auto& code = m.tree.codes[context];
                for (std::size_t k = 0; k < path.size(); ++k) {
                    double* u = nodes + path[k] * d;
                    const double x = dot(v, u, d);
                    loss -= log_sigmoid(code[k] == 0 ? x : -x);
                    // d log P / dx for this branch, times lr.
                    const double g = (1.0 - code[k] - nn::sigmoid(x)) * lr;
                    for (std::size_t i = 0; i < d; ++i) {
                        grad_center[i] += g * u[i];
                        u[i] += g * v[i];
                    }
                }
                for (std::size_t i = 0; i < d; ++i) {
                    v[i] += grad_center[i];
                }
                ++pairs;
                ++seen;
            }
        }
        if (!std::isfinite(loss)) {
            throw NumericError("skip-gram loss became non-finite in epoch " +
                               std::to_string(epoch + 1));
        }
        result.epoch_loss.push_back(pairs == 0 ? 0.0 : loss / static_cast<double>(pairs));
    }
    return result;
}

} // namespace sembprobe
