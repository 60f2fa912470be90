#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "sembprobe/checkpoint.hpp"
#include "sembprobe/corpus.hpp"
#include "sembprobe/huffman.hpp"
#include "sembprobe/nn.hpp"

namespace sembprobe {

struct SkipGramConfig {
    std::size_t dim = 100;
    std::size_t window = 5;
    std::size_t epochs = 5;
    /// Linearly decayed to lr * min_lr_fraction over all epochs.
    double lr = 0.025;
    double min_lr_fraction = 1e-4;
    double init_range = 0.1;
    std::uint64_t seed = 1;
};

/// Skip-gram word vectors with a hierarchical-softmax output layer.
struct SkipGramModel {
    SkipGramModel() = default;
    SkipGramModel(const std::vector<std::uint64_t>& counts, std::size_t dim, std::size_t window);

    std::size_t vocab_size() const noexcept { return input.vocab_size(); }
    std::size_t dim() const noexcept { return input.dim(); }

    Checkpoint to_checkpoint() const;
    /// Rebuilds the tree from the stored counts.
    static SkipGramModel from_checkpoint(const Checkpoint& ck);

    nn::EmbeddingTable input;
    HuffmanTree tree;
    /// One vector per internal tree node, (V-1) x d.
    nn::Parameter nodes;
    std::vector<std::uint64_t> counts;
    std::size_t window = 5;
};

/// P(context | center): product over the context's tree path of
/// sigma(+-v_center . u_node), + for bit 0 and - for bit 1.
double hs_probability(const SkipGramModel& model, TokenId center, TokenId context);
double hs_log_probability(const SkipGramModel& model, TokenId center, TokenId context);

/// (center, context) pairs within +-window, clipped at sentence bounds.
std::vector<std::pair<TokenId, TokenId>> context_pairs(const Sentence& s, std::size_t window);

struct SkipGramTrainResult {
    SkipGramModel model;
    /// Mean -log P(context | center) over the pairs seen in each epoch.
    std::vector<double> epoch_loss;
};

/// Plain SGD over all context pairs, corpus order, no subsampling.
SkipGramTrainResult skipgram_train(const std::vector<Sentence>& corpus, const Vocabulary& vocab,
                                   const SkipGramConfig& config);

/// Mean -log P over all context pairs of the corpus.
double skipgram_corpus_loss(const SkipGramModel& model, const std::vector<Sentence>& corpus);

} // namespace sembprobe
