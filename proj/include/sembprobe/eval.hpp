#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sembprobe/corpus.hpp"
#include "sembprobe/encoder.hpp"
#include "sembprobe/tasks.hpp"

namespace sembprobe {

struct BleuReport {
    double score = 0.0;
    /// Modified n-gram precisions p_1..p_max_n.
    std::vector<double> precisions;
    std::vector<std::uint64_t> matches;
    std::vector<std::uint64_t> totals;
    double brevity_penalty = 0.0;
    std::size_t candidate_length = 0;
    std::size_t reference_length = 0;
};

/// Corpus-level BLEU with one reference per candidate, clipped counts,
/// uniform weights and no smoothing.
BleuReport bleu(const std::vector<std::vector<TokenId>>& candidates,
                const std::vector<std::vector<TokenId>>& references, std::size_t max_n = 4);
BleuReport bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                std::size_t max_n = 4);

struct TTestResult {
    double t = 0.0;
    std::size_t df = 0;
    double p_value = 1.0;
    double mean_difference = 0.0;
    std::size_t n = 0;
};

/// Two-tailed paired t-test on a - b. DegenerateError when the differences
/// have zero variance.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);
TTestResult paired_t_test(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);

/// Rank correlation with average ranks for ties. DegenerateError on
/// constant input.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

struct CurvePoint {
    double x = 0.0;
    double y = 0.0;
    std::size_t n = 0;
};

/// Mean L2 norm of sentence vectors grouped by exact length, ascending.
std::vector<CurvePoint> norm_length_curve(const std::vector<Sentence>& sentences,
                                          const SentenceEncoder& encoder, std::size_t jobs = 1);
std::vector<CurvePoint> norm_length_curve(const std::vector<Sentence>& sentences,
                                          const std::vector<Vec>& vectors);

/// Spearman correlation between each sentence's length and vector norm.
double length_norm_spearman(const std::vector<Sentence>& sentences, const std::vector<Vec>& vectors);

/// Mean correctness per length bin of the instance's source sentence;
/// x is the bin index. Empty bins are omitted.
std::vector<CurvePoint> content_accuracy_by_length(const std::vector<std::uint8_t>& correct,
                                                   const TaskDataset& dataset,
                                                   const std::vector<Sentence>& sentences);

} // namespace sembprobe
