#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sembprobe/corpus.hpp"
#include "sembprobe/encoder.hpp"

namespace sembprobe {

/// Inclusive word-count ranges; contiguous and non-overlapping.
class LengthBins {
public:
    LengthBins();
    explicit LengthBins(std::vector<std::pair<std::size_t, std::size_t>> bins);

    std::size_t size() const noexcept { return bins_.size(); }
    const std::vector<std::pair<std::size_t, std::size_t>>& bins() const noexcept { return bins_; }
    /// RangeError outside the covered range.
    std::size_t bin(std::size_t n) const;

private:
    std::vector<std::pair<std::size_t, std::size_t>> bins_;
};

/// Class of n under the default eight bins covering 5..70.
std::size_t bin_length(std::size_t n);

enum class TaskKind { Length, Content, Order, OrderNoSentence };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view name);
std::size_t task_classes(TaskKind kind);

struct TaskMeta {
    std::uint64_t sent_id = 0;
    std::vector<TokenId> words;
    std::vector<std::size_t> positions;
    friend bool operator==(const TaskMeta&, const TaskMeta&) = default;
};

struct TaskInstance {
    Vec input;
    std::uint32_t label = 0;
    TaskMeta meta;
};

struct SkippedSentence {
    std::uint64_t sent_id = 0;
    std::string reason;
};

struct TaskDataset {
    TaskKind task = TaskKind::Length;
    std::vector<TaskInstance> instances;
    std::size_t classes = 0;
    std::size_t k = 0;
    std::size_t d = 0;
    std::uint64_t seed = 0;
    std::string encoder_digest;
    std::vector<SkippedSentence> skipped;

    std::size_t input_dim() const;
    bool assembled() const noexcept { return !instances.empty() && !instances[0].input.empty(); }
    std::vector<std::uint32_t> labels() const;
};

/// Sampling only: labels and metadata, inputs left empty. Instances come
/// out ordered by source_id.
TaskDataset sample_length_task(const std::vector<Sentence>& sentences);
/// Positive word uniform over the sentence's distinct tokens; negative
/// uniform over the positive pool minus the sentence's tokens. Sentences
/// whose tokens cover the pool are dropped and the pool recomputed until
/// stable.
TaskDataset sample_content_task(const std::vector<Sentence>& sentences, std::uint64_t seed);
/// Positions p1 < p2 uniform over pairs holding distinct tokens; the
/// positive keeps sentence order, the negative swaps the two words.
TaskDataset sample_order_task(const std::vector<Sentence>& sentences, std::uint64_t seed,
                              bool with_sentence = true);

/// Fills every instance's input from the encoder. Sentences are looked up
/// by source_id.
void assemble_inputs(TaskDataset& dataset, const std::vector<Sentence>& sentences,
                     const SentenceEncoder& encoder, std::size_t jobs = 1);

TaskDataset gen_length_task(const std::vector<Sentence>& sentences, const SentenceEncoder& encoder,
                            std::size_t jobs = 1);
TaskDataset gen_content_task(const std::vector<Sentence>& sentences,
                             const SentenceEncoder& encoder, std::uint64_t seed,
                             std::size_t jobs = 1);
TaskDataset gen_order_task(const std::vector<Sentence>& sentences, const SentenceEncoder& encoder,
                           std::uint64_t seed, std::size_t jobs = 1);
TaskDataset gen_order_task_no_sentence(const std::vector<Sentence>& sentences,
                                       const SentenceEncoder& encoder, std::uint64_t seed,
                                       std::size_t jobs = 1);
TaskDataset gen_task(TaskKind kind, const std::vector<Sentence>& sentences,
                     const SentenceEncoder& encoder, std::uint64_t seed, std::size_t jobs = 1);

/// Header line then one metadata line per instance; inputs are not stored.
std::string task_dataset_to_jsonl(const TaskDataset& dataset);
TaskDataset task_dataset_from_jsonl(std::string_view text);

/// Copy with labels permuted by a seeded shuffle; label counts unchanged.
TaskDataset shuffle_labels(const TaskDataset& dataset, std::uint64_t seed);

} // namespace sembprobe
