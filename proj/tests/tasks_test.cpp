#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "sembprobe/error.hpp"
#include "sembprobe/tasks.hpp"

using namespace sembprobe;

namespace {

// Sentence vector is a fixed function of the tokens; word vectors come from
// a seeded table.
class TableEncoder final : public SentenceEncoder {
public:
    TableEncoder(std::size_t vocab, std::size_t k, std::size_t d) : k_(k), d_(d) {
        Rng rng(77);
        for (std::size_t i = 0; i < vocab; ++i) {
            Vec v(d);
            for (auto& x : v) {
                x = rng.uniform(-1, 1);
            }
            words_.push_back(std::move(v));
        }
    }
    EncoderKind kind() const override { return EncoderKind::External; }
    std::size_t sentence_dim() const override { return k_; }
    std::size_t word_dim() const override { return d_; }
    bool has_word_vectors() const override { return true; }
    Vec encode(const Sentence& s) const override {
        Vec v(k_, 0.0);
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            v[i % k_] += static_cast<double>(s.tokens[i]) * (1.0 + static_cast<double>(i));
        }
        return v;
    }
    Vec word_vector(TokenId id) const override { return words_.at(id); }
    std::string digest() const override { return "table"; }

private:
    std::size_t k_, d_;
    std::vector<Vec> words_;
};

std::vector<Sentence> random_corpus(std::size_t n, std::size_t vocab, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Sentence> out;
    for (std::size_t i = 0; i < n; ++i) {
        Sentence s;
        s.source_id = 1000 - i * 3;
        const std::size_t len = 5 + rng.below(66);
        for (std::size_t j = 0; j < len; ++j) {
            s.tokens.push_back(static_cast<TokenId>(1 + rng.below(vocab - 1)));
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::map<std::uint64_t, const Sentence*> index(const std::vector<Sentence>& c) {
    std::map<std::uint64_t, const Sentence*> m;
    for (const auto& s : c) {
        m[s.source_id] = &s;
    }
    return m;
}

bool contains(const Sentence& s, TokenId w) {
    return std::find(s.tokens.begin(), s.tokens.end(), w) != s.tokens.end();
}

} // namespace

TEST(LengthBins, FootnoteBins) {
    EXPECT_EQ(bin_length(5), 0u);
    EXPECT_EQ(bin_length(8), 0u);
    EXPECT_EQ(bin_length(9), 1u);
    EXPECT_EQ(bin_length(34), 7u);
    EXPECT_EQ(bin_length(70), 7u);
    EXPECT_THROW(bin_length(4), RangeError);
    EXPECT_THROW(bin_length(71), RangeError);
}

TEST(LengthBins, ContiguousCoverOfFiveToSeventy) {
    LengthBins bins;
    EXPECT_EQ(bins.size(), 8u);
    EXPECT_EQ(bins.bins().front().first, 5u);
    EXPECT_EQ(bins.bins().back().second, 70u);
    std::size_t prev = 0;
    for (std::size_t n = 5; n <= 70; ++n) {
        const std::size_t b = bin_length(n);
        EXPECT_TRUE(b == prev || b == prev + 1);
        prev = b;
    }
    EXPECT_THROW(LengthBins({{1, 3}, {5, 6}}), ConfigError);
}

TEST(LengthTask, OneInstancePerSentenceWithBinnedLabels) {
    auto corpus = random_corpus(200, 30, 1);
    TableEncoder enc(30, 6, 4);
    auto ds = gen_length_task(corpus, enc);
    ASSERT_EQ(ds.instances.size(), corpus.size());
    EXPECT_EQ(ds.classes, 8u);
    auto idx = index(corpus);
    std::uint64_t prev = 0;
    for (const auto& inst : ds.instances) {
        EXPECT_LT(inst.label, 8u);
        EXPECT_EQ(inst.label, bin_length(idx.at(inst.meta.sent_id)->raw_len()));
        EXPECT_EQ(inst.input.size(), 6u);
        EXPECT_EQ(inst.input, enc.encode(*idx.at(inst.meta.sent_id)));
        EXPECT_GE(inst.meta.sent_id, prev);
        prev = inst.meta.sent_id;
    }
}

TEST(ContentTask, BalancedAndNegativesObeyBothConstraints) {
    auto corpus = random_corpus(500, 200, 2);
    TableEncoder enc(200, 5, 3);
    auto ds = gen_content_task(corpus, enc, 9);
    auto idx = index(corpus);
    std::set<TokenId> pool;
    std::size_t pos = 0, neg = 0;
    for (const auto& inst : ds.instances) {
        if (inst.label == 1) {
            pool.insert(inst.meta.words[0]);
        }
    }
    for (const auto& inst : ds.instances) {
        const Sentence& s = *idx.at(inst.meta.sent_id);
        ASSERT_EQ(inst.meta.words.size(), 1u);
        ASSERT_EQ(inst.input.size(), 8u);
        const Vec w = enc.word_vector(inst.meta.words[0]);
        EXPECT_TRUE(std::equal(w.begin(), w.end(), inst.input.begin() + 5));
        if (inst.label == 1) {
            ++pos;
            EXPECT_TRUE(contains(s, inst.meta.words[0]));
            EXPECT_EQ(s.tokens[inst.meta.positions.at(0)], inst.meta.words[0]);
        } else {
            ++neg;
            EXPECT_FALSE(contains(s, inst.meta.words[0]));
            EXPECT_TRUE(pool.count(inst.meta.words[0]));
        }
    }
    EXPECT_EQ(pos, neg);
    EXPECT_EQ(pos, corpus.size() - ds.skipped.size());
}

TEST(ContentTask, SentenceCoveringThePoolIsSkipped) {
    // Sentence 3 holds every word that can be a positive.
    std::vector<Sentence> corpus{{{1, 1, 1, 1, 1}, 1}, {{2, 2, 2, 2, 2}, 2},
                                {{1, 2, 3, 3, 3}, 3}, {{3, 3, 3, 3, 3}, 4}};
    auto ds = sample_content_task(corpus, 1);
    ASSERT_EQ(ds.skipped.size(), 1u);
    EXPECT_EQ(ds.skipped[0].sent_id, 3u);
    EXPECT_EQ(ds.instances.size(), 6u);
    std::vector<Sentence> one{{{1, 2, 3, 4, 5}, 1}};
    EXPECT_THROW(sample_content_task(one, 1), DegenerateError);
}

TEST(ContentTask, PositiveIsUniformOverDistinctTokens) {
    // Token 1 fills 4 of 5 slots, yet as a distinct type it is drawn half
    // the time.
    std::vector<Sentence> corpus;
    for (std::uint64_t i = 0; i < 4000; ++i) {
        corpus.push_back({{1, 1, 1, 1, 2}, i});
    }
    corpus.push_back({{7, 8, 9, 7, 8}, 99999});
    auto ds = sample_content_task(corpus, 5);
    std::size_t ones = 0, total = 0;
    for (const auto& inst : ds.instances) {
        if (inst.label == 1 && inst.meta.sent_id != 99999) {
            ones += inst.meta.words[0] == 1;
            ++total;
        }
    }
    EXPECT_NEAR(static_cast<double>(ones) / static_cast<double>(total), 0.5, 0.03);
}

TEST(OrderTask, BalancedMirroredAndDistinct) {
    auto corpus = random_corpus(500, 50, 3);
    TableEncoder enc(50, 4, 3);
    auto ds = gen_order_task(corpus, enc, 11);
    auto idx = index(corpus);
    ASSERT_EQ(ds.instances.size() % 2, 0u);
    for (std::size_t i = 0; i < ds.instances.size(); i += 2) {
        const auto& p = ds.instances[i];
        const auto& n = ds.instances[i + 1];
        const Sentence& s = *idx.at(p.meta.sent_id);
        EXPECT_EQ(p.label, 1u);
        EXPECT_EQ(n.label, 0u);
        EXPECT_EQ(p.meta.sent_id, n.meta.sent_id);
        ASSERT_EQ(p.meta.positions.size(), 2u);
        EXPECT_LT(p.meta.positions[0], p.meta.positions[1]);
        EXPECT_NE(p.meta.words[0], p.meta.words[1]);
        EXPECT_EQ(s.tokens[p.meta.positions[0]], p.meta.words[0]);
        EXPECT_EQ(s.tokens[p.meta.positions[1]], p.meta.words[1]);
        ASSERT_EQ(p.input.size(), 10u);
        Vec mirror(p.input.begin(), p.input.begin() + 4);
        mirror.insert(mirror.end(), p.input.begin() + 7, p.input.end());
        mirror.insert(mirror.end(), p.input.begin() + 4, p.input.begin() + 7);
        EXPECT_EQ(n.input, mirror);
    }
}

TEST(OrderTask, SingleTypeSentenceSkipped) {
    std::vector<Sentence> corpus{{{4, 4, 4, 4, 4}, 1}, {{1, 2, 1, 2, 1}, 2}};
    auto ds = sample_order_task(corpus, 1);
    ASSERT_EQ(ds.skipped.size(), 1u);
    EXPECT_EQ(ds.skipped[0].sent_id, 1u);
    EXPECT_EQ(ds.instances.size(), 2u);
    std::vector<Sentence> only{{{4, 4, 4, 4, 4}, 1}};
    EXPECT_THROW(sample_order_task(only, 1), DegenerateError);
}

TEST(OrderTask, NoSentenceVariantSharesSampling) {
    auto corpus = random_corpus(100, 40, 4);
    TableEncoder enc(40, 6, 3);
    auto with = gen_order_task(corpus, enc, 21);
    auto without = gen_order_task_no_sentence(corpus, enc, 21);
    ASSERT_EQ(with.instances.size(), without.instances.size());
    EXPECT_EQ(without.input_dim(), 6u);
    for (std::size_t i = 0; i < with.instances.size(); ++i) {
        EXPECT_EQ(with.instances[i].meta, without.instances[i].meta);
        EXPECT_EQ(with.instances[i].label, without.instances[i].label);
        ASSERT_EQ(without.instances[i].input.size(), 6u);
        EXPECT_TRUE(std::equal(without.instances[i].input.begin(),
                               without.instances[i].input.end(),
                               with.instances[i].input.begin() + 6));
    }
}

TEST(Tasks, DeterministicAndSeedSensitive) {
    auto corpus = random_corpus(100, 40, 5);
    auto a = sample_content_task(corpus, 3);
    auto b = sample_content_task(corpus, 3);
    auto c = sample_content_task(corpus, 4);
    EXPECT_EQ(task_dataset_to_jsonl(a), task_dataset_to_jsonl(b));
    EXPECT_NE(task_dataset_to_jsonl(a), task_dataset_to_jsonl(c));
}

TEST(Tasks, RegenerationFromMetadataIsBitExact) {
    auto corpus = random_corpus(150, 60, 6);
    TableEncoder enc(60, 5, 4);
    for (TaskKind kind :
         {TaskKind::Length, TaskKind::Content, TaskKind::Order, TaskKind::OrderNoSentence}) {
        auto ds = gen_task(kind, corpus, enc, 13);
        const std::string text = task_dataset_to_jsonl(ds);
        auto back = task_dataset_from_jsonl(text);
        EXPECT_EQ(task_dataset_to_jsonl(back), text);
        assemble_inputs(back, corpus, enc);
        ASSERT_EQ(back.instances.size(), ds.instances.size());
        for (std::size_t i = 0; i < ds.instances.size(); ++i) {
            EXPECT_EQ(back.instances[i].input, ds.instances[i].input);
            EXPECT_EQ(back.instances[i].label, ds.instances[i].label);
        }
    }
    EXPECT_THROW(task_dataset_from_jsonl("{\"task\":\"length\"}\n"), ParseError);
}

TEST(Tasks, WordTasksNeedWordVectors) {
    auto vocab = Vocabulary::build({{"a", "b", "c"}});
    ExternalEncoder enc(make_external_set({{1, {1.0}}, {2, {2.0}}}, std::nullopt), vocab, "x");
    std::vector<Sentence> corpus{{{1, 2, 1, 2, 1}, 1}, {{3, 3, 3, 3, 3}, 2}};
    EXPECT_NO_THROW(gen_length_task(corpus, enc));
    EXPECT_THROW(gen_content_task(corpus, enc, 1), ConfigError);
}

TEST(Tasks, ShuffledLabelsKeepCounts) {
    auto corpus = random_corpus(300, 40, 7);
    auto ds = sample_length_task(corpus);
    auto sh = shuffle_labels(ds, 4);
    auto a = ds.labels(), b = sh.labels();
    EXPECT_NE(a, b);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
}
