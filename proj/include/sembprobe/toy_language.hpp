#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sembprobe {

/// A small stochastic grammar over synthetic word classes, used where no
/// real corpus is available (desk-scale runs, tests). Words inside each
/// class follow a Zipf law; clause structure gives consistent word-order
/// regularities.
struct ToyLanguageConfig {
    std::size_t nouns = 300;
    std::size_t verbs = 120;
    std::size_t adjectives = 80;
    std::size_t adverbs = 30;
    /// Sentence length targets: min + Gamma(2, length_scale), clipped to max.
    std::size_t min_len = 5;
    std::size_t max_len = 70;
    double length_scale = 7.0;
    /// Uniform length targets in [min_len, max_len] instead of the gamma law.
    bool uniform_lengths = false;
};

/// Generates n sentences as space-joined text lines.
std::vector<std::string> generate_toy_corpus(std::size_t n, const ToyLanguageConfig& config,
                                             std::uint64_t seed);

} // namespace sembprobe
