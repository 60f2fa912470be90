#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sembprobe/checkpoint.hpp"
#include "sembprobe/corpus.hpp"
#include "sembprobe/lstm.hpp"
#include "sembprobe/nn.hpp"

namespace sembprobe {

/// LSTM auto-encoder. The decoder works over an extended symbol space where
/// 0 and 1 are begin/end of sentence and corpus token t maps to t + 2.
class EdModel {
public:
    static constexpr TokenId kBos = 0;
    static constexpr TokenId kEos = 1;
    static constexpr TokenId kReserved = 2;

    EdModel() = default;
    /// vocab_size counts corpus tokens (UNK included); dim is k = d.
    EdModel(std::size_t vocab_size, std::size_t dim);

    static TokenId symbol(TokenId corpus_id) noexcept { return corpus_id + kReserved; }

    std::size_t dim() const noexcept { return embedding.dim(); }
    std::size_t vocab_size() const noexcept { return embedding.vocab_size() - kReserved; }
    std::size_t symbols() const noexcept { return embedding.vocab_size(); }

    void init_uniform(Rng& rng, double range);
    nn::ParamRefs params();

    Checkpoint to_checkpoint() const;
    static EdModel from_checkpoint(const Checkpoint& ck);

    nn::EmbeddingTable embedding;
    nn::LstmCellParams encoder;
    nn::LstmCellParams decoder;
    nn::LinearLayer projection;
};

using EncoderState = nn::LstmState;

/// Encoder over the reversed token sequence; returns final (h, c).
EncoderState ed_encode_state(const EdModel& model, std::span<const TokenId> tokens);
/// Encoder over tokens exactly as given (no reversal).
EncoderState ed_encode_state_in_order(const EdModel& model, std::span<const TokenId> tokens);
/// Sentence vector: final encoder hidden state h_N.
Vec ed_encode(const EdModel& model, const Sentence& sentence);

/// Greedy decoding from an encoder state, BOS fed first. Stops at EOS or
/// max_len tokens; argmax ties go to the smaller id. Returns corpus ids.
std::vector<TokenId> ed_decode_greedy(const EdModel& model, const EncoderState& state,
                                      std::size_t max_len = 70);
/// Encode then greedily decode.
std::vector<TokenId> ed_reconstruct(const EdModel& model, const Sentence& sentence,
                                    std::size_t max_len = 70);

/// Teacher-forced summed cross-entropy over the N+1 decoder targets
/// (tokens then EOS). With grads set, gradients are accumulated into the
/// model scaled by grad_scale. dropout_rng == nullptr means eval mode.
double ed_sentence_loss(EdModel& model, std::span<const TokenId> tokens, double dropout_rate,
                        Rng* dropout_rng, bool grads, double grad_scale = 1.0);

/// Mean per-token cross-entropy without dropout.
double ed_corpus_loss(const EdModel& model, const std::vector<Sentence>& corpus);

struct EdConfig {
    std::size_t dim = 64;
    double lr = 0.01;
    double dropout = 0.1;
    std::size_t batch = 32;
    std::size_t max_epochs = 50;
    std::size_t patience = 5;
    double clip = 5.0;
    double init_range = 0.1;
    std::uint64_t seed = 1;
};

struct EdEpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double dev_loss = 0.0;
};

/// Everything needed to continue an interrupted run.
struct EdTrainState {
    EdModel current;
    EdModel best;
    std::size_t epochs_done = 0;
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;
    double best_dev_loss = 0.0;
    std::vector<EdEpochStats> curve;

    Checkpoint to_checkpoint() const;
    static EdTrainState from_checkpoint(const Checkpoint& ck);
};

struct EdTrainHooks {
    /// Called after each epoch with the current model; return false to stop.
    std::function<bool(const EdEpochStats&, const EdModel&)> on_epoch;
    /// Called after each epoch with resumable state.
    std::function<void(const EdTrainState&)> save_state;
};

struct EdTrainResult {
    /// Best-dev-loss model.
    EdModel model;
    std::vector<EdEpochStats> curve;
    std::size_t best_epoch = 0;
    double best_dev_loss = 0.0;
};

/// Minibatch AdaGrad with gradient clipping and patience-based early
/// stopping on dev loss. Throws NumericError on a non-finite loss.
EdTrainResult ed_train(const std::vector<Sentence>& train, const std::vector<Sentence>& dev,
                       std::size_t vocab_size, const EdConfig& config,
                       const EdTrainHooks& hooks = {},
                       std::optional<EdTrainState> resume = std::nullopt);

} // namespace sembprobe
