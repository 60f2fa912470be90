#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <map>
#include <set>

#include "sembprobe/corpus.hpp"
#include "sembprobe/error.hpp"
#include "sembprobe/toy_language.hpp"

using namespace sembprobe;

namespace {

std::vector<Sentence> numbered(std::size_t n, std::size_t len = 6) {
    std::vector<Sentence> out;
    for (std::size_t i = 0; i < n; ++i) {
        Sentence s;
        s.source_id = 100 + i;
        s.tokens.assign(len, static_cast<TokenId>(1 + i % 7));
        out.push_back(s);
    }
    return out;
}

} // namespace

TEST(Tokenize, DetachesPunctuation) {
    EXPECT_EQ(tokenize("The cat, sat."), (Tokens{"The", "cat", ",", "sat", "."}));
}

TEST(Tokenize, SingleWordAndEmpty) {
    EXPECT_EQ(tokenize("hello"), Tokens{"hello"});
    EXPECT_TRUE(tokenize("").empty());
    EXPECT_TRUE(tokenize("  \t ").empty());
}

TEST(Tokenize, PretokenizedPassthrough) {
    EXPECT_EQ(tokenize("a b c", true), (Tokens{"a", "b", "c"}));
    EXPECT_EQ(tokenize("sat. (x)", true), (Tokens{"sat.", "(x)"}));
}

TEST(Tokenize, LeadingPunctuationAndCasePreserved) {
    EXPECT_EQ(tokenize("(Hello) don't \"Stop\"..."),
              (Tokens{"(", "Hello", ")", "don't", "\"", "Stop", "\"", ".", ".", "."}));
    EXPECT_EQ(tokenize("--"), (Tokens{"-", "-"}));
}

TEST(Tokenize, NonAsciiBytesStayInsideTokens) {
    EXPECT_EQ(tokenize("caf\xc3\xa9, na\xc3\xafve"), (Tokens{"caf\xc3\xa9", ",", "na\xc3\xafve"}));
}

TEST(Vocabulary, CountsAndIdOrder) {
    auto v = build_vocab({{"a", "a", "b"}}, 10);
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v.token(0), "<unk>");
    EXPECT_EQ(v.token(1), "a");
    EXPECT_EQ(v.token(2), "b");
    EXPECT_EQ(v.count(v.id("a")), 2u);
    EXPECT_EQ(v.count(v.unk_id()), 0u);
}

TEST(Vocabulary, CapDropsRareTokensToUnk) {
    std::vector<Tokens> corpus{{"a", "a", "a", "a", "a", "b", "b", "b"}};
    auto v = build_vocab(corpus, 2);
    EXPECT_EQ(v.size(), 2u);
    EXPECT_EQ(v.id("a"), 1u);
    EXPECT_EQ(v.id("b"), v.unk_id());
    EXPECT_EQ(v.count(v.unk_id()), 3u);
}

TEST(Vocabulary, TiesBrokenLexicographicallyAndStable) {
    std::vector<Tokens> corpus{{"zeta", "alpha", "mid", "mid"}, {"beta"}};
    auto v1 = build_vocab(corpus, 10);
    auto v2 = build_vocab(corpus, 10);
    EXPECT_EQ(v1, v2);
    EXPECT_EQ(v1.decode({1, 2, 3, 4}), (Tokens{"mid", "alpha", "beta", "zeta"}));
}

TEST(Vocabulary, RejectsBadCapAndEmptyCorpus) {
    EXPECT_THROW(build_vocab({{"a"}}, 1), ConfigError);
    EXPECT_THROW(build_vocab({}, 10), ConfigError);
}

TEST(Vocabulary, TsvRoundTrip) {
    auto v = build_vocab({{"x", "y", "y", "z\xc3\xa9"}}, 50);
    const auto text = v.to_tsv();
    EXPECT_EQ(text.substr(0, 8), "<unk>\t0\n");
    EXPECT_EQ(Vocabulary::from_tsv(text), v);
    EXPECT_THROW(Vocabulary::from_tsv("a\t1\n"), ParseError);
    EXPECT_THROW(Vocabulary::from_tsv("<unk>\t0\nb 3\n"), ParseError);
}

TEST(FilterLengths, InclusiveBounds) {
    std::vector<Tokens> in;
    for (std::size_t n : {4u, 5u, 70u, 71u, 20u}) {
        in.push_back(Tokens(n, "w"));
    }
    auto out = filter_lengths(in);
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].size(), 5u);
    EXPECT_EQ(out[1].size(), 70u);
    EXPECT_EQ(out[2].size(), 20u);
    EXPECT_TRUE(filter_lengths(std::vector<Tokens>{}).empty());
    EXPECT_THROW(filter_lengths(in, {10, 5}), ConfigError);
}

TEST(SplitCorpus, DisjointDeterministicAndSized) {
    auto corpus = numbered(50);
    auto a = split_corpus(corpus, {30, 10, 5}, 42);
    auto b = split_corpus(corpus, {30, 10, 5}, 42);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.dev, b.dev);
    EXPECT_EQ(a.test, b.test);
    EXPECT_EQ(a.train.size(), 30u);
    EXPECT_EQ(a.dev.size(), 10u);
    EXPECT_EQ(a.test.size(), 5u);
    std::set<std::uint64_t> seen;
    for (const auto* part : {&a.train, &a.dev, &a.test}) {
        for (const auto& s : *part) {
            EXPECT_TRUE(seen.insert(s.source_id).second);
        }
    }
    auto c = split_corpus(corpus, {30, 10, 5}, 43);
    EXPECT_NE(a.train, c.train);
}

TEST(SplitCorpus, InsufficientSentences) {
    EXPECT_THROW(split_corpus(numbered(10), {8, 2, 1}, 1), ConfigError);
}

TEST(SplitCorpus, ManifestRoundTrip) {
    auto corpus = numbered(40);
    auto split = split_corpus(corpus, {20, 10, 10}, 5);
    auto json = split_manifest_json(split);
    auto back = split_from_manifest(json, corpus);
    EXPECT_EQ(back.seed, 5u);
    EXPECT_EQ(back.train, split.train);
    EXPECT_EQ(back.test, split.test);
}

TEST(PermuteSentence, PreservesMultisetAndId) {
    Rng rng(8);
    Sentence single{{7}, 3};
    EXPECT_EQ(permute_sentence(single, rng), single);
    for (int trial = 0; trial < 200; ++trial) {
        Sentence s;
        s.source_id = 77;
        for (std::size_t i = 0; i < 5 + rng.below(30); ++i) {
            s.tokens.push_back(static_cast<TokenId>(rng.below(6)));
        }
        auto p = permute_sentence(s, rng);
        EXPECT_EQ(p.source_id, 77u);
        auto a = s.tokens, b = p.tokens;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b);
    }
}

TEST(PermuteSentence, UniformOverOrders) {
    Rng rng(2718);
    Sentence s{{1, 2, 3}, 0};
    std::map<std::vector<TokenId>, int> freq;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        ++freq[permute_sentence(s, rng).tokens];
    }
    ASSERT_EQ(freq.size(), 6u);
    for (const auto& [order, count] : freq) {
        EXPECT_NEAR(static_cast<double>(count) / n, 1.0 / 6.0, 0.02);
    }
}

TEST(SynthesizeRandomSentence, LengthIdsAndDeterminism) {
    auto vocab = build_vocab({{"a", "b", "c", "d"}}, 10);
    Rng r1(5), r2(5);
    auto s1 = synthesize_random_sentence(5, vocab, r1);
    auto s2 = synthesize_random_sentence(5, vocab, r2);
    EXPECT_EQ(s1, s2);
    ASSERT_EQ(s1.raw_len(), 5u);
    for (TokenId t : s1.tokens) {
        EXPECT_GE(t, 1u);
        EXPECT_LT(t, vocab.size());
    }
    EXPECT_THROW(synthesize_random_sentence(4, vocab, r1), RangeError);
    EXPECT_THROW(synthesize_random_sentence(71, vocab, r1), RangeError);
}

TEST(SynthesizeRandomSentence, ChiSquaredUniformity) {
    Tokens words;
    for (int i = 0; i < 100; ++i) {
        words.push_back("w" + std::to_string(i));
    }
    auto vocab = build_vocab({words}, 1000);
    ASSERT_EQ(vocab.size(), 101u);
    Rng rng(31337);
    std::vector<double> counts(vocab.size(), 0.0);
    const std::size_t draws = 1000000;
    for (std::size_t i = 0; i < draws / 10; ++i) {
        for (TokenId t : synthesize_random_sentence(10, vocab, rng).tokens) {
            counts[t] += 1;
        }
    }
    EXPECT_EQ(counts[0], 0.0);
    const double expected = static_cast<double>(draws) / 100.0;
    double chi2 = 0.0;
    for (std::size_t t = 1; t < counts.size(); ++t) {
        chi2 += (counts[t] - expected) * (counts[t] - expected) / expected;
    }
    boost::math::chi_squared dist(99);
    EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.01);
}

TEST(SentenceFile, RoundTrip) {
    std::vector<Sentence> in{{{1, 2, 3}, 9}, {{4}, 12}};
    EXPECT_EQ(sentences_from_text(sentences_to_text(in)), in);
    EXPECT_THROW(sentences_from_text("12 3 4\n"), ParseError);
}

TEST(ToyLanguage, DeterministicAndBounded) {
    ToyLanguageConfig cfg;
    auto a = generate_toy_corpus(300, cfg, 11);
    auto b = generate_toy_corpus(300, cfg, 11);
    EXPECT_EQ(a, b);
    for (const auto& line : a) {
        auto toks = tokenize(line, true);
        EXPECT_GE(toks.size(), cfg.min_len);
        EXPECT_LE(toks.size(), cfg.max_len);
        EXPECT_EQ(toks.back(), ".");
    }
}
