#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sembprobe/tensor.hpp"

namespace sembprobe {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

/// Word-vector text format: "V d" header, then V lines "token v1 ... vd".
struct WordVectorTable {
    std::vector<std::string> tokens;
    std::vector<Vec> vectors;
    std::size_t dim = 0;
};

std::string word_vectors_to_text(const WordVectorTable& table);
/// Throws ParseError naming the offending line on ragged rows, bad counts
/// or duplicate tokens.
WordVectorTable word_vectors_from_text(std::string_view text);

using SentenceVectorList = std::vector<std::pair<std::uint64_t, Vec>>;

/// JSON lines {"id": int, "v": [floats]}.
std::string sentence_vectors_to_jsonl(const SentenceVectorList& vectors);
/// Accepts JSON lines, or the word-vector text format with integer ids.
SentenceVectorList sentence_vectors_from_text(std::string_view text);

struct ExternalEmbeddingSet {
    std::unordered_map<std::uint64_t, Vec> sentences;
    std::size_t sentence_dim = 0;
    std::unordered_map<std::string, Vec> words;
    std::size_t word_dim = 0;

    std::size_t size() const noexcept { return sentences.size(); }
    bool has_word_vectors() const noexcept { return !words.empty(); }
};

ExternalEmbeddingSet make_external_set(const SentenceVectorList& sentences,
                                       const std::optional<WordVectorTable>& words);
ExternalEmbeddingSet load_external_embeddings(
    const std::filesystem::path& sentence_file,
    const std::optional<std::filesystem::path>& word_file = std::nullopt);

} // namespace sembprobe
