#include "sembprobe/toy_language.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string_view>

#include "sembprobe/error.hpp"
#include "sembprobe/rng.hpp"

namespace sembprobe {

namespace {

constexpr std::array<std::string_view, 4> kDeterminers{"the", "a", "this", "every"};
constexpr std::array<std::string_view, 6> kPrepositions{"of", "in", "on", "with", "for", "from"};
constexpr std::array<std::string_view, 3> kConjunctions{"and", "but", "while"};

/// Zipf(1) sampler over a word class.
class WordClass {
public:
    WordClass(std::string prefix, std::size_t n) : prefix_(std::move(prefix)), cdf_(n) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            acc += 1.0 / static_cast<double>(r + 1);
            cdf_[r] = acc;
        }
    }

    std::string draw(Rng& rng) const {
        const double u = rng.uniform() * cdf_.back();
        const auto r = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) -
                                                cdf_.begin());
        return prefix_ + std::to_string(std::min(r, cdf_.size() - 1));
    }

private:
    std::string prefix_;
    std::vector<double> cdf_;
};

template <std::size_t N>
std::string pick(const std::array<std::string_view, N>& words, Rng& rng) {
    return std::string(words[rng.below(N)]);
}

class Generator {
public:
    explicit Generator(const ToyLanguageConfig& c)
        : config_(c), nouns_("n", c.nouns), verbs_("v", c.verbs), adjectives_("j", c.adjectives),
          adverbs_("r", c.adverbs) {}

    std::vector<std::string> sentence(Rng& rng) const {
        const std::size_t target = target_length(rng);
        std::vector<std::string> words;
        clause(rng, words);
        while (words.size() + 1 < target) {
            words.push_back(rng.bernoulli(0.5) ? pick(kConjunctions, rng) : std::string(","));
            clause(rng, words);
        }
        words.resize(target - 1);
        words.emplace_back(".");
        return words;
    }

private:
    std::size_t target_length(Rng& rng) const {
        if (config_.uniform_lengths) {
            return config_.min_len + rng.below(config_.max_len - config_.min_len + 1);
        }
        for (;;) {
            // Gamma(2, scale) as the sum of two exponentials.
            const double g = -config_.length_scale *
                             (std::log1p(-rng.uniform()) + std::log1p(-rng.uniform()));
            const auto len = config_.min_len + static_cast<std::size_t>(g);
            if (len <= config_.max_len) {
                return len;
            }
        }
    }

    void noun_phrase(Rng& rng, std::vector<std::string>& out, int depth) const {
        out.push_back(pick(kDeterminers, rng));
        for (int i = 0; i < 2 && rng.bernoulli(0.4); ++i) {
            out.push_back(adjectives_.draw(rng));
        }
        out.push_back(nouns_.draw(rng));
        if (depth < 2 && rng.bernoulli(0.3)) {
            out.push_back(pick(kPrepositions, rng));
            noun_phrase(rng, out, depth + 1);
        }
    }

    void clause(Rng& rng, std::vector<std::string>& out) const {
        noun_phrase(rng, out, 0);
        if (rng.bernoulli(0.2)) {
            out.push_back(adverbs_.draw(rng));
        }
        out.push_back(verbs_.draw(rng));
        if (rng.bernoulli(0.8)) {
            noun_phrase(rng, out, 0);
        }
        if (rng.bernoulli(0.3)) {
            out.push_back(pick(kPrepositions, rng));
            noun_phrase(rng, out, 1);
        }
    }

    ToyLanguageConfig config_;
    WordClass nouns_, verbs_, adjectives_, adverbs_;
};

} // namespace

std::vector<std::string> generate_toy_corpus(std::size_t n, const ToyLanguageConfig& config,
                                             std::uint64_t seed) {
    if (config.min_len < 2 || config.min_len > config.max_len) {
        throw ConfigError("toy language needs 2 <= min_len <= max_len");
    }
    if (config.nouns == 0 || config.verbs == 0 || config.adjectives == 0 || config.adverbs == 0) {
        throw ConfigError("toy language word classes must be nonempty");
    }
    Generator gen(config);
    std::vector<std::string> lines;
    lines.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, i));
        std::string line;
        for (const auto& w : gen.sentence(rng)) {
            if (!line.empty()) {
                line += ' ';
            }
            line += w;
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

} // namespace sembprobe
