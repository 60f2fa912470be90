#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sembprobe/rng.hpp"

namespace sembprobe {

using TokenId = std::uint32_t;
using Tokens = std::vector<std::string>;

struct Sentence {
    std::vector<TokenId> tokens;
    std::uint64_t source_id = 0;

    /// Word count N.
    std::size_t raw_len() const noexcept { return tokens.size(); }
    friend bool operator==(const Sentence&, const Sentence&) = default;
};

/// Splits on whitespace and detaches leading/trailing ASCII punctuation
/// characters as separate tokens. Case is preserved. With pretokenized set,
/// only the whitespace split is applied.
Tokens tokenize(std::string_view text, bool pretokenized = false);

/// Token <-> id map ordered by descending frequency (ties lexicographic),
/// with the unknown token at id 0.
class Vocabulary {
public:
    static constexpr std::string_view kUnkToken = "<unk>";
    static constexpr TokenId kUnkId = 0;
    static constexpr std::size_t kDefaultCap = 50000;

    /// Keeps the cap-1 most frequent tokens plus UNK.
    static Vocabulary build(const std::vector<Tokens>& sentences, std::size_t cap = kDefaultCap);
    /// From (token, count) entries in id order; entry 0 must be UNK.
    static Vocabulary from_entries(std::vector<std::pair<std::string, std::uint64_t>> entries);

    std::size_t size() const noexcept { return tokens_.size(); }
    TokenId unk_id() const noexcept { return kUnkId; }
    /// Id of token, or UNK.
    TokenId id(std::string_view token) const;
    bool contains(std::string_view token) const;
    const std::string& token(TokenId id) const;
    std::uint64_t count(TokenId id) const;
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

    std::vector<TokenId> encode(const Tokens& tokens) const;
    Tokens decode(const std::vector<TokenId>& ids) const;

    /// "token<TAB>count" per line, ordered by id.
    std::string to_tsv() const;
    static Vocabulary from_tsv(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.tokens_ == b.tokens_ && a.counts_ == b.counts_;
    }

private:
    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, TokenId> index_;
};

inline Vocabulary build_vocab(const std::vector<Tokens>& sentences,
                              std::size_t cap = Vocabulary::kDefaultCap) {
    return Vocabulary::build(sentences, cap);
}

struct LengthBounds {
    std::size_t min = 5;
    std::size_t max = 70;
};

/// Keeps sentences with min <= N <= max, in order.
std::vector<Tokens> filter_lengths(const std::vector<Tokens>& sentences, LengthBounds bounds = {});
std::vector<Sentence> filter_lengths(const std::vector<Sentence>& sentences,
                                     LengthBounds bounds = {});

struct SplitSizes {
    std::size_t train = 8000;
    std::size_t dev = 1000;
    std::size_t test = 1000;

    static constexpr SplitSizes paper() { return {150000, 25000, 25000}; }
    static constexpr SplitSizes desk() { return {8000, 1000, 1000}; }
};

struct CorpusSplit {
    std::vector<Sentence> train;
    std::vector<Sentence> dev;
    std::vector<Sentence> test;
    std::uint64_t seed = 0;
};

/// Seeded shuffle followed by partition into train/dev/test.
CorpusSplit split_corpus(const std::vector<Sentence>& sentences, SplitSizes sizes,
                         std::uint64_t seed);

/// JSON manifest: {"seed", "sizes": {...}, "train": [ids], "dev": [...], "test": [...]}.
std::string split_manifest_json(const CorpusSplit& split);
/// Rebuilds a split from its manifest by looking sentences up by source_id.
CorpusSplit split_from_manifest(std::string_view json, const std::vector<Sentence>& sentences);

/// Uniform random reordering of the tokens (Fisher-Yates); source_id kept.
Sentence permute_sentence(const Sentence& s, Rng& rng);

/// Tokens drawn uniformly with replacement from the non-UNK ids.
Sentence synthesize_random_sentence(std::size_t length, const Vocabulary& vocab, Rng& rng,
                                    std::uint64_t source_id = 0, LengthBounds bounds = {});

/// One sentence per line.
std::vector<std::string> read_lines(const std::filesystem::path& path);
std::vector<Tokens> load_corpus(const std::filesystem::path& path, bool pretokenized = false);

/// Prepared sentence file: "source_id<TAB>id id id" per line.
std::string sentences_to_text(const std::vector<Sentence>& sentences);
std::vector<Sentence> sentences_from_text(std::string_view text);

} // namespace sembprobe
