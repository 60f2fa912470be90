#include "sembprobe/encoder.hpp"

#include <algorithm>
#include <thread>

#include "sembprobe/error.hpp"

namespace sembprobe {

Vec cbow_encode(const Sentence& sentence, const nn::EmbeddingTable& table) {
    if (sentence.tokens.empty()) {
        throw ConfigError("cannot encode an empty sentence");
    }
    Vec sum(table.dim(), 0.0);
    for (TokenId t : sentence.tokens) {
        const auto row = table.row(t);
        for (std::size_t j = 0; j < sum.size(); ++j) {
            sum[j] += row[j];
        }
    }
    const double n = static_cast<double>(sentence.tokens.size());
    for (double& v : sum) {
        v /= n;
    }
    return sum;
}

std::string to_string(EncoderKind kind) {
    switch (kind) {
    case EncoderKind::Cbow:
        return "cbow";
    case EncoderKind::Ed:
        return "ed";
    case EncoderKind::External:
        return "external";
    }
    return "unknown";
}

EncoderKind encoder_kind_from_string(const std::string& name) {
    if (name == "cbow") {
        return EncoderKind::Cbow;
    }
    if (name == "ed") {
        return EncoderKind::Ed;
    }
    if (name == "external") {
        return EncoderKind::External;
    }
    throw ConfigError("unknown encoder type '" + name + "' (expected cbow, ed or external)");
}

CbowEncoder::CbowEncoder(SkipGramModel model)
    : model_(std::move(model)), digest_(model_.to_checkpoint().digest()) {}

Vec CbowEncoder::encode(const Sentence& sentence) const {
    return cbow_encode(sentence, model_.input);
}

Vec CbowEncoder::word_vector(TokenId id) const {
    const auto row = model_.input.row(id);
    return Vec(row.begin(), row.end());
}

EdEncoder::EdEncoder(EdModel model)
    : model_(std::move(model)), digest_(model_.to_checkpoint().digest()) {}

Vec EdEncoder::encode(const Sentence& sentence) const {
    return ed_encode(model_, sentence);
}

Vec EdEncoder::word_vector(TokenId id) const {
    if (id >= model_.vocab_size()) {
        throw RangeError("token id " + std::to_string(id) + " outside vocabulary");
    }
    const auto row = model_.embedding.row(EdModel::symbol(id));
    return Vec(row.begin(), row.end());
}

ExternalEncoder::ExternalEncoder(ExternalEmbeddingSet set, Vocabulary vocab, std::string digest)
    : set_(std::move(set)), vocab_(std::move(vocab)), digest_(std::move(digest)) {}

Vec ExternalEncoder::encode(const Sentence& sentence) const {
    auto it = set_.sentences.find(sentence.source_id);
    if (it == set_.sentences.end()) {
        throw RangeError("no external vector for sentence " + std::to_string(sentence.source_id));
    }
    return it->second;
}

Vec ExternalEncoder::word_vector(TokenId id) const {
    if (!set_.has_word_vectors()) {
        throw ConfigError("external encoder has no word vectors; content and order tasks need them");
    }
    const std::string& token = vocab_.token(id);
    auto it = set_.words.find(token);
    if (it == set_.words.end()) {
        it = set_.words.find(std::string(Vocabulary::kUnkToken));
    }
    if (it == set_.words.end()) {
        throw RangeError("no external word vector for '" + token + "' and no <unk> fallback");
    }
    return it->second;
}

std::vector<Vec> encode_all(const SentenceEncoder& encoder, const std::vector<Sentence>& sentences,
                            std::size_t jobs) {
    std::vector<Vec> out(sentences.size());
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, sentences.size()));
    if (jobs == 1) {
        for (std::size_t i = 0; i < sentences.size(); ++i) {
            out[i] = encoder.encode(sentences[i]);
        }
        return out;
    }
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < sentences.size(); i += jobs) {
                    out[i] = encoder.encode(sentences[i]);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return out;
}

} // namespace sembprobe
