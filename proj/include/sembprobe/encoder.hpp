#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "sembprobe/corpus.hpp"
#include "sembprobe/ed_model.hpp"
#include "sembprobe/embedding_io.hpp"
#include "sembprobe/skipgram.hpp"

namespace sembprobe {

/// Mean of the word vectors, summed in sentence order.
Vec cbow_encode(const Sentence& sentence, const nn::EmbeddingTable& table);

enum class EncoderKind { Cbow, Ed, External };

std::string to_string(EncoderKind kind);
EncoderKind encoder_kind_from_string(const std::string& name);

/// Common view over every sentence representation the probes consume.
class SentenceEncoder {
public:
    virtual ~SentenceEncoder() = default;

    virtual EncoderKind kind() const = 0;
    virtual std::size_t sentence_dim() const = 0;
    virtual std::size_t word_dim() const = 0;
    virtual bool has_word_vectors() const = 0;
    virtual Vec encode(const Sentence& sentence) const = 0;
    virtual Vec word_vector(TokenId id) const = 0;
    /// Identifies the model or files the vectors come from.
    virtual std::string digest() const = 0;
};

class CbowEncoder final : public SentenceEncoder {
public:
    explicit CbowEncoder(SkipGramModel model);

    EncoderKind kind() const override { return EncoderKind::Cbow; }
    std::size_t sentence_dim() const override { return model_.dim(); }
    std::size_t word_dim() const override { return model_.dim(); }
    bool has_word_vectors() const override { return true; }
    Vec encode(const Sentence& sentence) const override;
    /// The skip-gram input vector.
    Vec word_vector(TokenId id) const override;
    std::string digest() const override { return digest_; }

    const SkipGramModel& model() const noexcept { return model_; }

private:
    SkipGramModel model_;
    std::string digest_;
};

class EdEncoder final : public SentenceEncoder {
public:
    explicit EdEncoder(EdModel model);

    EncoderKind kind() const override { return EncoderKind::Ed; }
    std::size_t sentence_dim() const override { return model_.dim(); }
    std::size_t word_dim() const override { return model_.dim(); }
    bool has_word_vectors() const override { return true; }
    Vec encode(const Sentence& sentence) const override;
    /// The encoder's input embedding row.
    Vec word_vector(TokenId id) const override;
    std::string digest() const override { return digest_; }

    const EdModel& model() const noexcept { return model_; }

private:
    EdModel model_;
    std::string digest_;
};

/// Vectors computed elsewhere, looked up by sentence source_id and, for
/// words, by token string through the vocabulary.
class ExternalEncoder final : public SentenceEncoder {
public:
    ExternalEncoder(ExternalEmbeddingSet set, Vocabulary vocab, std::string digest);

    EncoderKind kind() const override { return EncoderKind::External; }
    std::size_t sentence_dim() const override { return set_.sentence_dim; }
    std::size_t word_dim() const override { return set_.word_dim; }
    bool has_word_vectors() const override { return set_.has_word_vectors(); }
    Vec encode(const Sentence& sentence) const override;
    /// Falls back to the "<unk>" entry when present; otherwise RangeError.
    Vec word_vector(TokenId id) const override;
    std::string digest() const override { return digest_; }

private:
    ExternalEmbeddingSet set_;
    Vocabulary vocab_;
    std::string digest_;
};

/// Encodes every sentence; output follows input order. jobs > 1 splits the
/// work across threads.
std::vector<Vec> encode_all(const SentenceEncoder& encoder, const std::vector<Sentence>& sentences,
                            std::size_t jobs = 1);

} // namespace sembprobe
