#include "sembprobe/tasks.hpp"

#include <algorithm>
#include <iterator>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "sembprobe/error.hpp"

namespace sembprobe {

namespace {

constexpr std::uint64_t kContentPositiveStream = 1;
constexpr std::uint64_t kContentNegativeStream = 2;
constexpr std::uint64_t kOrderStream = 3;

Rng sentence_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t sent_id) {
    return Rng(derive_seed(derive_seed(seed, stream), sent_id));
}

std::vector<const Sentence*> by_source_id(const std::vector<Sentence>& sentences) {
    std::vector<const Sentence*> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) {
        out.push_back(&s);
    }
    std::sort(out.begin(), out.end(),
              [](const Sentence* a, const Sentence* b) { return a->source_id < b->source_id; });
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out[i]->source_id == out[i - 1]->source_id) {
            throw ConfigError("duplicate sentence source_id " + std::to_string(out[i]->source_id));
        }
    }
    return out;
}

std::vector<TokenId> distinct_tokens(const Sentence& s) {
    std::vector<TokenId> t = s.tokens;
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

void require_nonempty(const std::vector<Sentence>& sentences, TaskKind kind) {
    if (sentences.empty()) {
        throw ConfigError(to_string(kind) + " task needs at least one sentence");
    }
}

} // namespace

LengthBins::LengthBins()
    : LengthBins({{5, 8}, {9, 12}, {13, 16}, {17, 20}, {21, 25}, {26, 29}, {30, 33}, {34, 70}}) {}

LengthBins::LengthBins(std::vector<std::pair<std::size_t, std::size_t>> bins)
    : bins_(std::move(bins)) {
    if (bins_.empty()) {
        throw ConfigError("length bins must not be empty");
    }
    for (std::size_t i = 0; i < bins_.size(); ++i) {
        if (bins_[i].first > bins_[i].second) {
            throw ConfigError("length bin " + std::to_string(i) + " has lo > hi");
        }
        if (i > 0 && bins_[i].first != bins_[i - 1].second + 1) {
            throw ConfigError("length bins must be contiguous and non-overlapping");
        }
    }
}

std::size_t LengthBins::bin(std::size_t n) const {
    for (std::size_t i = 0; i < bins_.size(); ++i) {
        if (n >= bins_[i].first && n <= bins_[i].second) {
            return i;
        }
    }
    throw RangeError("sentence length " + std::to_string(n) + " outside the binned range " +
                     std::to_string(bins_.front().first) + ".." +
                     std::to_string(bins_.back().second));
}

std::size_t bin_length(std::size_t n) {
    static const LengthBins bins;
    return bins.bin(n);
}

std::string to_string(TaskKind kind) {
    switch (kind) {
    case TaskKind::Length:
        return "length";
    case TaskKind::Content:
        return "content";
    case TaskKind::Order:
        return "order";
    case TaskKind::OrderNoSentence:
        return "order_no_sentence";
    }
    return "unknown";
}

TaskKind task_kind_from_string(std::string_view name) {
    for (TaskKind k :
         {TaskKind::Length, TaskKind::Content, TaskKind::Order, TaskKind::OrderNoSentence}) {
        if (name == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("unknown task '" + std::string(name) +
                      "' (expected length, content, order or order_no_sentence)");
}

std::size_t task_classes(TaskKind kind) {
    return kind == TaskKind::Length ? LengthBins().size() : 2;
}

std::size_t TaskDataset::input_dim() const {
    switch (task) {
    case TaskKind::Length:
        return k;
    case TaskKind::Content:
        return k + d;
    case TaskKind::Order:
        return k + 2 * d;
    case TaskKind::OrderNoSentence:
        return 2 * d;
    }
    return 0;
}

std::vector<std::uint32_t> TaskDataset::labels() const {
    std::vector<std::uint32_t> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) {
        out.push_back(inst.label);
    }
    return out;
}

TaskDataset sample_length_task(const std::vector<Sentence>& sentences) {
    require_nonempty(sentences, TaskKind::Length);
    TaskDataset ds;
    ds.task = TaskKind::Length;
    ds.classes = task_classes(ds.task);
    for (const Sentence* s : by_source_id(sentences)) {
        TaskInstance inst;
        inst.label = static_cast<std::uint32_t>(bin_length(s->raw_len()));
        inst.meta.sent_id = s->source_id;
        ds.instances.push_back(std::move(inst));
    }
    return ds;
}

TaskDataset sample_content_task(const std::vector<Sentence>& sentences, std::uint64_t seed) {
    require_nonempty(sentences, TaskKind::Content);
    TaskDataset ds;
    ds.task = TaskKind::Content;
    ds.classes = 2;
    ds.seed = seed;

    struct Candidate {
        const Sentence* s;
        std::vector<TokenId> distinct;
        TokenId positive;
        std::size_t position;
    };
    std::vector<Candidate> active;
    for (const Sentence* s : by_source_id(sentences)) {
        auto distinct = distinct_tokens(*s);
        if (distinct.empty()) {
            ds.skipped.push_back({s->source_id, "empty sentence"});
            continue;
        }
        Rng rng = sentence_rng(seed, kContentPositiveStream, s->source_id);
        const TokenId w = distinct[rng.below(distinct.size())];
        const auto pos = static_cast<std::size_t>(
            std::find(s->tokens.begin(), s->tokens.end(), w) - s->tokens.begin());
        active.push_back({s, std::move(distinct), w, pos});
    }

    std::vector<TokenId> pool;
    while (true) {
        pool.clear();
        for (const auto& c : active) {
            pool.push_back(c.positive);
        }
        std::sort(pool.begin(), pool.end());
        pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
        std::vector<Candidate> kept;
        for (auto& c : active) {
            if (std::includes(c.distinct.begin(), c.distinct.end(), pool.begin(), pool.end())) {
                ds.skipped.push_back({c.s->source_id, "sentence covers the positive-word pool"});
            } else {
                kept.push_back(std::move(c));
            }
        }
        const bool stable = kept.size() == active.size();
        active = std::move(kept);
        if (stable) {
            break;
        }
    }
    if (active.empty()) {
        throw DegenerateError(
            "content task needs at least two sentences with different word support");
    }
    std::sort(ds.skipped.begin(), ds.skipped.end(),
              [](const auto& a, const auto& b) { return a.sent_id < b.sent_id; });

    std::vector<TokenId> candidates;
    for (const auto& c : active) {
        candidates.clear();
        std::set_difference(pool.begin(), pool.end(), c.distinct.begin(), c.distinct.end(),
                            std::back_inserter(candidates));
        Rng rng = sentence_rng(seed, kContentNegativeStream, c.s->source_id);
        const TokenId neg = candidates[rng.below(candidates.size())];
        TaskInstance pos_inst;
        pos_inst.label = 1;
        pos_inst.meta = {c.s->source_id, {c.positive}, {c.position}};
        TaskInstance neg_inst;
        neg_inst.label = 0;
        neg_inst.meta = {c.s->source_id, {neg}, {}};
        ds.instances.push_back(std::move(pos_inst));
        ds.instances.push_back(std::move(neg_inst));
    }
    return ds;
}

TaskDataset sample_order_task(const std::vector<Sentence>& sentences, std::uint64_t seed,
                              bool with_sentence) {
    const TaskKind kind = with_sentence ? TaskKind::Order : TaskKind::OrderNoSentence;
    require_nonempty(sentences, kind);
    TaskDataset ds;
    ds.task = kind;
    ds.classes = 2;
    ds.seed = seed;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const Sentence* s : by_source_id(sentences)) {
        pairs.clear();
        const auto& t = s->tokens;
        for (std::size_t i = 0; i < t.size(); ++i) {
            for (std::size_t j = i + 1; j < t.size(); ++j) {
                if (t[i] != t[j]) {
                    pairs.emplace_back(i, j);
                }
            }
        }
        if (pairs.empty()) {
            ds.skipped.push_back({s->source_id, "fewer than two distinct tokens"});
            continue;
        }
        Rng rng = sentence_rng(seed, kOrderStream, s->source_id);
        const auto [p1, p2] = pairs[rng.below(pairs.size())];
        TaskInstance pos;
        pos.label = 1;
        pos.meta = {s->source_id, {t[p1], t[p2]}, {p1, p2}};
        TaskInstance neg;
        neg.label = 0;
        neg.meta = {s->source_id, {t[p2], t[p1]}, {p2, p1}};
        ds.instances.push_back(std::move(pos));
        ds.instances.push_back(std::move(neg));
    }
    if (ds.instances.empty()) {
        throw DegenerateError("order task: no sentence has two distinct tokens");
    }
    return ds;
}

void assemble_inputs(TaskDataset& dataset, const std::vector<Sentence>& sentences,
                     const SentenceEncoder& encoder, std::size_t jobs) {
    const bool needs_sentence = dataset.task != TaskKind::OrderNoSentence;
    const bool needs_words = dataset.task != TaskKind::Length;
    if (needs_words && !encoder.has_word_vectors()) {
        throw ConfigError(to_string(dataset.task) + " task needs word vectors, but the " +
                          to_string(encoder.kind()) + " encoder has none");
    }
    dataset.k = encoder.sentence_dim();
    dataset.d = needs_words ? encoder.word_dim() : 0;
    dataset.encoder_digest = encoder.digest();

    std::unordered_map<std::uint64_t, std::size_t> row_of;
    if (needs_sentence) {
        std::unordered_map<std::uint64_t, const Sentence*> by_id;
        for (const auto& s : sentences) {
            by_id.emplace(s.source_id, &s);
        }
        std::vector<Sentence> needed;
        for (const auto& inst : dataset.instances) {
            if (row_of.count(inst.meta.sent_id) != 0) {
                continue;
            }
            auto it = by_id.find(inst.meta.sent_id);
            if (it == by_id.end()) {
                throw RangeError("task instance refers to unknown sentence " +
                                 std::to_string(inst.meta.sent_id));
            }
            row_of.emplace(inst.meta.sent_id, needed.size());
            needed.push_back(*it->second);
        }
        auto vectors = encode_all(encoder, needed, jobs);
        for (const auto& v : vectors) {
            if (v.size() != dataset.k) {
                throw DimensionError("encoder produced a " + std::to_string(v.size()) +
                                     "-dim sentence vector, expected " +
                                     std::to_string(dataset.k));
            }
        }
        std::unordered_map<TokenId, Vec> word_cache;
        auto word = [&](TokenId id) -> const Vec& {
            auto it = word_cache.find(id);
            if (it == word_cache.end()) {
                Vec w = encoder.word_vector(id);
                if (w.size() != dataset.d) {
                    throw DimensionError("word vector has dimension " + std::to_string(w.size()) +
                                         ", expected " + std::to_string(dataset.d));
                }
                it = word_cache.emplace(id, std::move(w)).first;
            }
            return it->second;
        };
        for (auto& inst : dataset.instances) {
            inst.input = vectors[row_of.at(inst.meta.sent_id)];
            for (TokenId w : inst.meta.words) {
                const Vec& v = word(w);
                inst.input.insert(inst.input.end(), v.begin(), v.end());
            }
        }
        return;
    }
    std::unordered_map<TokenId, Vec> word_cache;
    for (auto& inst : dataset.instances) {
        inst.input.clear();
        for (TokenId w : inst.meta.words) {
            auto it = word_cache.find(w);
            if (it == word_cache.end()) {
                it = word_cache.emplace(w, encoder.word_vector(w)).first;
                if (it->second.size() != dataset.d) {
                    throw DimensionError("word vector has dimension " +
                                         std::to_string(it->second.size()) + ", expected " +
                                         std::to_string(dataset.d));
                }
            }
            inst.input.insert(inst.input.end(), it->second.begin(), it->second.end());
        }
    }
}

TaskDataset gen_length_task(const std::vector<Sentence>& sentences, const SentenceEncoder& encoder,
                            std::size_t jobs) {
    TaskDataset ds = sample_length_task(sentences);
    assemble_inputs(ds, sentences, encoder, jobs);
    return ds;
}

TaskDataset gen_content_task(const std::vector<Sentence>& sentences,
                             const SentenceEncoder& encoder, std::uint64_t seed,
                             std::size_t jobs) {
    TaskDataset ds = sample_content_task(sentences, seed);
    assemble_inputs(ds, sentences, encoder, jobs);
    return ds;
}

TaskDataset gen_order_task(const std::vector<Sentence>& sentences, const SentenceEncoder& encoder,
                           std::uint64_t seed, std::size_t jobs) {
    TaskDataset ds = sample_order_task(sentences, seed, true);
    assemble_inputs(ds, sentences, encoder, jobs);
    return ds;
}

TaskDataset gen_order_task_no_sentence(const std::vector<Sentence>& sentences,
                                       const SentenceEncoder& encoder, std::uint64_t seed,
                                       std::size_t jobs) {
    TaskDataset ds = sample_order_task(sentences, seed, false);
    assemble_inputs(ds, sentences, encoder, jobs);
    return ds;
}

TaskDataset gen_task(TaskKind kind, const std::vector<Sentence>& sentences,
                     const SentenceEncoder& encoder, std::uint64_t seed, std::size_t jobs) {
    switch (kind) {
    case TaskKind::Length:
        return gen_length_task(sentences, encoder, jobs);
    case TaskKind::Content:
        return gen_content_task(sentences, encoder, seed, jobs);
    case TaskKind::Order:
        return gen_order_task(sentences, encoder, seed, jobs);
    case TaskKind::OrderNoSentence:
        return gen_order_task_no_sentence(sentences, encoder, seed, jobs);
    }
    throw ConfigError("unknown task kind");
}

std::string task_dataset_to_jsonl(const TaskDataset& dataset) {
    nlohmann::ordered_json header;
    header["task"] = to_string(dataset.task);
    header["classes"] = dataset.classes;
    header["k"] = dataset.k;
    header["d"] = dataset.d;
    header["seed"] = dataset.seed;
    header["encoder_digest"] = dataset.encoder_digest;
    header["instances"] = dataset.instances.size();
    nlohmann::ordered_json skipped = nlohmann::ordered_json::array();
    for (const auto& s : dataset.skipped) {
        skipped.push_back({{"sent_id", s.sent_id}, {"reason", s.reason}});
    }
    header["skipped"] = std::move(skipped);
    std::string out = header.dump() + "\n";
    const std::string task = to_string(dataset.task);
    for (const auto& inst : dataset.instances) {
        nlohmann::ordered_json j;
        j["task"] = task;
        j["label"] = inst.label;
        j["sent_id"] = inst.meta.sent_id;
        j["words"] = inst.meta.words;
        j["positions"] = inst.meta.positions;
        out += j.dump() + "\n";
    }
    return out;
}

TaskDataset task_dataset_from_jsonl(std::string_view text) {
    TaskDataset ds;
    std::size_t line_no = 0;
    std::size_t start = 0;
    bool have_header = false;
    std::size_t declared = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        const std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            if (!have_header) {
                ds.task = task_kind_from_string(j.at("task").get<std::string>());
                ds.classes = j.at("classes").get<std::size_t>();
                ds.k = j.at("k").get<std::size_t>();
                ds.d = j.at("d").get<std::size_t>();
                ds.seed = j.at("seed").get<std::uint64_t>();
                ds.encoder_digest = j.at("encoder_digest").get<std::string>();
                declared = j.at("instances").get<std::size_t>();
                for (const auto& s : j.at("skipped")) {
                    ds.skipped.push_back(
                        {s.at("sent_id").get<std::uint64_t>(), s.at("reason").get<std::string>()});
                }
                have_header = true;
                continue;
            }
            if (task_kind_from_string(j.at("task").get<std::string>()) != ds.task) {
                throw ParseError("task name differs from header");
            }
            TaskInstance inst;
            inst.label = j.at("label").get<std::uint32_t>();
            if (inst.label >= ds.classes) {
                throw ParseError("label " + std::to_string(inst.label) + " out of range");
            }
            inst.meta.sent_id = j.at("sent_id").get<std::uint64_t>();
            inst.meta.words = j.at("words").get<std::vector<TokenId>>();
            inst.meta.positions = j.at("positions").get<std::vector<std::size_t>>();
            ds.instances.push_back(std::move(inst));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("task dataset line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw ParseError("task dataset line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) {
        throw ParseError("task dataset has no header line");
    }
    if (declared != ds.instances.size()) {
        throw ParseError("task dataset header declares " + std::to_string(declared) +
                         " instances but file has " + std::to_string(ds.instances.size()));
    }
    return ds;
}

TaskDataset shuffle_labels(const TaskDataset& dataset, std::uint64_t seed) {
    TaskDataset out = dataset;
    auto labels = dataset.labels();
    Rng rng(seed);
    rng.shuffle(std::span<std::uint32_t>(labels));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out.instances[i].label = labels[i];
    }
    return out;
}

} // namespace sembprobe
