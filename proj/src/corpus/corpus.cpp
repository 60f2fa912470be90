#include "sembprobe/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "sembprobe/digest.hpp"
#include "sembprobe/error.hpp"

namespace sembprobe {

namespace {

bool is_punct(char ch) {
    const auto u = static_cast<unsigned char>(ch);
    return u < 0x80 && std::ispunct(u);
}

bool is_space(char ch) {
    return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v';
}

template <class F>
void for_each_field(std::string_view text, F&& f) {
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) {
            ++i;
        }
        std::size_t j = i;
        while (j < text.size() && !is_space(text[j])) {
            ++j;
        }
        if (j > i) {
            f(text.substr(i, j - i));
        }
        i = j;
    }
}

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw ParseError("invalid " + std::string(what) + " '" + std::string(s) + "'");
    }
    return v;
}

} // namespace

Tokens tokenize(std::string_view text, bool pretokenized) {
    Tokens out;
    for_each_field(text, [&](std::string_view word) {
        if (pretokenized) {
            out.emplace_back(word);
            return;
        }
        std::size_t lo = 0;
        std::size_t hi = word.size();
        while (lo < hi && is_punct(word[lo])) {
            out.emplace_back(1, word[lo]);
            ++lo;
        }
        std::size_t tail = hi;
        while (tail > lo && is_punct(word[tail - 1])) {
            --tail;
        }
        if (tail > lo) {
            out.emplace_back(word.substr(lo, tail - lo));
        }
        for (std::size_t k = tail; k < hi; ++k) {
            out.emplace_back(1, word[k]);
        }
    });
    return out;
}

Vocabulary Vocabulary::build(const std::vector<Tokens>& sentences, std::size_t cap) {
    if (cap < 2) {
        throw ConfigError("vocabulary cap must be at least 2, got " + std::to_string(cap));
    }
    if (sentences.empty()) {
        throw ConfigError("cannot build a vocabulary from an empty corpus");
    }
    std::unordered_map<std::string, std::uint64_t> freq;
    std::uint64_t unk_count = 0;
    for (const auto& s : sentences) {
        for (const auto& t : s) {
            if (t == kUnkToken) {
                ++unk_count;
            } else {
                ++freq[t];
            }
        }
    }
    std::vector<std::pair<std::string, std::uint64_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    const std::size_t keep = std::min(ranked.size(), cap - 1);
    for (std::size_t i = keep; i < ranked.size(); ++i) {
        unk_count += ranked[i].second;
    }
    ranked.resize(keep);
    ranked.insert(ranked.begin(), {std::string(kUnkToken), unk_count});
    return from_entries(std::move(ranked));
}

Vocabulary Vocabulary::from_entries(std::vector<std::pair<std::string, std::uint64_t>> entries) {
    if (entries.empty() || entries.front().first != kUnkToken) {
        throw ParseError("vocabulary must start with the " + std::string(kUnkToken) + " entry");
    }
    Vocabulary v;
    v.tokens_.reserve(entries.size());
    v.counts_.reserve(entries.size());
    for (auto& [tok, count] : entries) {
        const auto id = static_cast<TokenId>(v.tokens_.size());
        if (!v.index_.emplace(tok, id).second) {
            throw ParseError("duplicate vocabulary token '" + tok + "'");
        }
        if (id != kUnkId && count == 0) {
            throw ParseError("vocabulary token '" + tok + "' has zero count");
        }
        v.tokens_.push_back(std::move(tok));
        v.counts_.push_back(count);
    }
    return v;
}

TokenId Vocabulary::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
    return index_.count(std::string(token)) > 0;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id >= tokens_.size()) {
        throw RangeError("token id " + std::to_string(id) + " outside vocabulary of " +
                         std::to_string(tokens_.size()));
    }
    return tokens_[id];
}

std::uint64_t Vocabulary::count(TokenId id) const {
    token(id);
    return counts_[id];
}

std::vector<TokenId> Vocabulary::encode(const Tokens& tokens) const {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) {
        ids.push_back(id(t));
    }
    return ids;
}

Tokens Vocabulary::decode(const std::vector<TokenId>& ids) const {
    Tokens out;
    out.reserve(ids.size());
    for (TokenId i : ids) {
        out.push_back(token(i));
    }
    return out;
}

std::string Vocabulary::to_tsv() const {
    std::string out;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        out += tokens_[i];
        out += '\t';
        out += std::to_string(counts_[i]);
        out += '\n';
    }
    return out;
}

Vocabulary Vocabulary::from_tsv(std::string_view text) {
    std::vector<std::pair<std::string, std::uint64_t>> entries;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty()) {
            continue;
        }
        const auto tab = line.rfind('\t');
        if (tab == std::string_view::npos) {
            throw ParseError("vocabulary line " + std::to_string(line_no) + ": missing TAB");
        }
        entries.emplace_back(std::string(line.substr(0, tab)),
                             parse_u64(line.substr(tab + 1), "vocabulary count"));
    }
    return from_entries(std::move(entries));
}

void Vocabulary::save(const std::filesystem::path& path) const { write_file(path, to_tsv()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    return from_tsv(read_file(path));
}

namespace {

void check_bounds(LengthBounds b) {
    if (b.min > b.max) {
        throw ConfigError("length bounds min " + std::to_string(b.min) + " exceeds max " +
                          std::to_string(b.max));
    }
}

template <class T, class Len>
std::vector<T> keep_lengths(const std::vector<T>& items, LengthBounds b, Len len) {
    check_bounds(b);
    std::vector<T> out;
    for (const auto& s : items) {
        const std::size_t n = len(s);
        if (n >= b.min && n <= b.max) {
            out.push_back(s);
        }
    }
    return out;
}

} // namespace

std::vector<Tokens> filter_lengths(const std::vector<Tokens>& sentences, LengthBounds bounds) {
    return keep_lengths(sentences, bounds, [](const Tokens& t) { return t.size(); });
}

std::vector<Sentence> filter_lengths(const std::vector<Sentence>& sentences,
                                     LengthBounds bounds) {
    return keep_lengths(sentences, bounds, [](const Sentence& s) { return s.raw_len(); });
}

CorpusSplit split_corpus(const std::vector<Sentence>& sentences, SplitSizes sizes,
                         std::uint64_t seed) {
    const std::size_t need = sizes.train + sizes.dev + sizes.test;
    if (need > sentences.size()) {
        throw ConfigError("split needs " + std::to_string(need) + " sentences but corpus has " +
                          std::to_string(sentences.size()));
    }
    std::vector<std::size_t> order(sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    CorpusSplit split;
    split.seed = seed;
    auto take = [&](std::size_t from, std::size_t n, std::vector<Sentence>& dst) {
        dst.reserve(n);
        for (std::size_t i = from; i < from + n; ++i) {
            dst.push_back(sentences[order[i]]);
        }
        std::sort(dst.begin(), dst.end(),
                  [](const Sentence& a, const Sentence& b) { return a.source_id < b.source_id; });
    };
    take(0, sizes.train, split.train);
    take(sizes.train, sizes.dev, split.dev);
    take(sizes.train + sizes.dev, sizes.test, split.test);
    return split;
}

std::string split_manifest_json(const CorpusSplit& split) {
    auto ids = [](const std::vector<Sentence>& v) {
        std::vector<std::uint64_t> out;
        out.reserve(v.size());
        for (const auto& s : v) {
            out.push_back(s.source_id);
        }
        return out;
    };
    nlohmann::ordered_json j;
    j["seed"] = split.seed;
    j["sizes"] = {{"train", split.train.size()},
                  {"dev", split.dev.size()},
                  {"test", split.test.size()}};
    j["train"] = ids(split.train);
    j["dev"] = ids(split.dev);
    j["test"] = ids(split.test);
    return j.dump() + "\n";
}

CorpusSplit split_from_manifest(std::string_view json, const std::vector<Sentence>& sentences) {
    std::unordered_map<std::uint64_t, const Sentence*> by_id;
    for (const auto& s : sentences) {
        by_id.emplace(s.source_id, &s);
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("split manifest: ") + e.what());
    }
    CorpusSplit split;
    split.seed = j.at("seed").get<std::uint64_t>();
    auto fill = [&](const char* key, std::vector<Sentence>& dst) {
        for (auto id : j.at(key).get<std::vector<std::uint64_t>>()) {
            auto it = by_id.find(id);
            if (it == by_id.end()) {
                throw ParseError("split manifest references unknown sentence " +
                                 std::to_string(id));
            }
            dst.push_back(*it->second);
        }
    };
    fill("train", split.train);
    fill("dev", split.dev);
    fill("test", split.test);
    return split;
}

Sentence permute_sentence(const Sentence& s, Rng& rng) {
    Sentence out = s;
    rng.shuffle(std::span<TokenId>(out.tokens));
    return out;
}

Sentence synthesize_random_sentence(std::size_t length, const Vocabulary& vocab, Rng& rng,
                                    std::uint64_t source_id, LengthBounds bounds) {
    if (length < bounds.min || length > bounds.max) {
        throw RangeError("synthetic sentence length " + std::to_string(length) + " outside [" +
                         std::to_string(bounds.min) + ", " + std::to_string(bounds.max) + "]");
    }
    if (vocab.size() < 2) {
        throw ConfigError("vocabulary has no non-UNK tokens to sample");
    }
    Sentence s;
    s.source_id = source_id;
    s.tokens.resize(length);
    for (auto& t : s.tokens) {
        t = static_cast<TokenId>(1 + rng.below(vocab.size() - 1));
    }
    return s;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open corpus " + path.string());
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

std::vector<Tokens> load_corpus(const std::filesystem::path& path, bool pretokenized) {
    std::vector<Tokens> out;
    for (const auto& line : read_lines(path)) {
        auto toks = tokenize(line, pretokenized);
        if (!toks.empty()) {
            out.push_back(std::move(toks));
        }
    }
    return out;
}

std::string sentences_to_text(const std::vector<Sentence>& sentences) {
    std::string out;
    for (const auto& s : sentences) {
        out += std::to_string(s.source_id);
        out += '\t';
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            if (i > 0) {
                out += ' ';
            }
            out += std::to_string(s.tokens[i]);
        }
        out += '\n';
    }
    return out;
}

std::vector<Sentence> sentences_from_text(std::string_view text) {
    std::vector<Sentence> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos) {
            throw ParseError("sentence line " + std::to_string(line_no) + ": missing TAB");
        }
        Sentence s;
        s.source_id = parse_u64(line.substr(0, tab), "source id");
        for_each_field(line.substr(tab + 1), [&](std::string_view f) {
            s.tokens.push_back(static_cast<TokenId>(parse_u64(f, "token id")));
        });
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace sembprobe
