#include "sembprobe/embedding_io.hpp"

#include <charconv>
#include <cmath>
#include <unordered_set>

#include "json.hpp"
#include "sembprobe/digest.hpp"
#include "sembprobe/error.hpp"

namespace sembprobe {

std::string format_double(double v) {
    if (!std::isfinite(v)) {
        throw NumericError("cannot write non-finite vector entry");
    }
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ParseError("not a finite number: '" + std::string(s) + "'");
    }
    return v;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') {
            ++i;
        }
        if (i > start) {
            out.push_back(line.substr(start, i - start));
        }
    }
    return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

std::size_t parse_size(std::string_view s, std::size_t line_no) {
    std::size_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": expected an integer, got '" +
                         std::string(s) + "'");
    }
    return v;
}

} // namespace

std::string word_vectors_to_text(const WordVectorTable& table) {
    if (table.tokens.size() != table.vectors.size()) {
        throw DimensionError("word vector table has mismatched token and vector counts");
    }
    std::string out = std::to_string(table.tokens.size()) + " " + std::to_string(table.dim) + "\n";
    for (std::size_t i = 0; i < table.tokens.size(); ++i) {
        if (table.vectors[i].size() != table.dim) {
            throw DimensionError("vector for '" + table.tokens[i] + "' has dimension " +
                                 std::to_string(table.vectors[i].size()) + ", expected " +
                                 std::to_string(table.dim));
        }
        out += table.tokens[i];
        for (double v : table.vectors[i]) {
            out += ' ';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

WordVectorTable word_vectors_from_text(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty()) {
        throw ParseError("line 1: missing \"V d\" header");
    }
    const auto header = split_fields(lines[0]);
    if (header.size() != 2) {
        throw ParseError("line 1: header must be \"V d\"");
    }
    WordVectorTable table;
    const std::size_t count = parse_size(header[0], 1);
    table.dim = parse_size(header[1], 1);
    if (table.dim == 0) {
        throw ParseError("line 1: dimension must be positive");
    }
    std::unordered_set<std::string> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const auto fields = split_fields(lines[i]);
        if (fields.empty()) {
            continue;
        }
        if (fields.size() != table.dim + 1) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(table.dim) + " values, got " +
                             std::to_string(fields.size() - 1));
        }
        std::string token(fields[0]);
        if (!seen.insert(token).second) {
            throw ParseError("line " + std::to_string(line_no) + ": duplicate id '" + token + "'");
        }
        Vec v(table.dim);
        for (std::size_t j = 0; j < table.dim; ++j) {
            try {
                v[j] = parse_double(fields[j + 1]);
            } catch (const ParseError& e) {
                throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        table.tokens.push_back(std::move(token));
        table.vectors.push_back(std::move(v));
    }
    if (table.tokens.size() != count) {
        throw ParseError("header declares " + std::to_string(count) + " rows but file has " +
                         std::to_string(table.tokens.size()));
    }
    return table;
}

std::string sentence_vectors_to_jsonl(const SentenceVectorList& vectors) {
    std::string out;
    for (const auto& [id, v] : vectors) {
        out += "{\"id\":" + std::to_string(id) + ",\"v\":[";
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (j > 0) {
                out += ',';
            }
            out += format_double(v[j]);
        }
        out += "]}\n";
    }
    return out;
}

SentenceVectorList sentence_vectors_from_text(std::string_view text) {
    std::size_t first = text.find_first_not_of(" \t\r\n");
    SentenceVectorList out;
    if (first == std::string_view::npos) {
        return out;
    }
    std::unordered_set<std::uint64_t> seen;
    auto add = [&](std::uint64_t id, Vec v, std::size_t line_no) {
        if (!seen.insert(id).second) {
            throw ParseError("line " + std::to_string(line_no) + ": duplicate id " +
                             std::to_string(id));
        }
        if (!out.empty() && v.size() != out.front().second.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(out.front().second.size()) + " values, got " +
                             std::to_string(v.size()));
        }
        out.emplace_back(id, std::move(v));
    };
    if (text[first] != '{') {
        const WordVectorTable table = word_vectors_from_text(text);
        for (std::size_t i = 0; i < table.tokens.size(); ++i) {
            add(parse_size(table.tokens[i], i + 2), table.vectors[i], i + 2);
        }
        return out;
    }
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].find_first_not_of(" \t") == std::string_view::npos) {
            continue;
        }
        const std::size_t line_no = i + 1;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j.contains("v") ||
            !j["id"].is_number_integer() || !j["v"].is_array() || j["v"].empty()) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": expected {\"id\": int, \"v\": [floats]}");
        }
        Vec v;
        v.reserve(j["v"].size());
        for (const auto& x : j["v"]) {
            if (!x.is_number() || !std::isfinite(x.get<double>())) {
                throw ParseError("line " + std::to_string(line_no) + ": non-numeric vector entry");
            }
            v.push_back(x.get<double>());
        }
        add(j["id"].get<std::uint64_t>(), std::move(v), line_no);
    }
    return out;
}

ExternalEmbeddingSet make_external_set(const SentenceVectorList& sentences,
                                       const std::optional<WordVectorTable>& words) {
    if (sentences.empty()) {
        throw ParseError("external sentence-vector file is empty");
    }
    ExternalEmbeddingSet set;
    set.sentence_dim = sentences.front().second.size();
    for (const auto& [id, v] : sentences) {
        if (v.size() != set.sentence_dim) {
            throw ParseError("sentence " + std::to_string(id) + " has dimension " +
                             std::to_string(v.size()) + ", expected " +
                             std::to_string(set.sentence_dim));
        }
        if (!set.sentences.emplace(id, v).second) {
            throw ParseError("duplicate sentence id " + std::to_string(id));
        }
    }
    if (words) {
        set.word_dim = words->dim;
        for (std::size_t i = 0; i < words->tokens.size(); ++i) {
            if (!set.words.emplace(words->tokens[i], words->vectors[i]).second) {
                throw ParseError("duplicate word '" + words->tokens[i] + "'");
            }
        }
    }
    return set;
}

ExternalEmbeddingSet load_external_embeddings(const std::filesystem::path& sentence_file,
                                              const std::optional<std::filesystem::path>& word_file) {
    auto wrap = [](const std::filesystem::path& p, auto&& fn) {
        try {
            return fn(read_file(p));
        } catch (const ParseError& e) {
            throw ParseError(p.string() + ": " + e.what());
        }
    };
    const auto sentences =
        wrap(sentence_file, [](const std::string& t) { return sentence_vectors_from_text(t); });
    std::optional<WordVectorTable> words;
    if (word_file) {
        words = wrap(*word_file, [](const std::string& t) { return word_vectors_from_text(t); });
    }
    return make_external_set(sentences, words);
}

} // namespace sembprobe
