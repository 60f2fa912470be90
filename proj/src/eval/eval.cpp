#include "sembprobe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>

#include "sembprobe/error.hpp"

namespace sembprobe {

namespace {

template <class T>
BleuReport bleu_impl(const std::vector<std::vector<T>>& candidates,
                     const std::vector<std::vector<T>>& references, std::size_t max_n) {
    if (candidates.size() != references.size()) {
        throw DimensionError("BLEU needs one reference per candidate (" +
                             std::to_string(candidates.size()) + " vs " +
                             std::to_string(references.size()) + ")");
    }
    if (candidates.empty()) {
        throw ConfigError("BLEU of an empty corpus");
    }
    if (max_n == 0) {
        throw ConfigError("BLEU max_n must be positive");
    }
    BleuReport r;
    r.matches.assign(max_n, 0);
    r.totals.assign(max_n, 0);
    for (std::size_t s = 0; s < candidates.size(); ++s) {
        const auto& cand = candidates[s];
        const auto& ref = references[s];
        r.candidate_length += cand.size();
        r.reference_length += ref.size();
        for (std::size_t n = 1; n <= max_n; ++n) {
            if (cand.size() < n) {
                break;
            }
            std::map<std::vector<T>, std::uint64_t> ref_counts;
            for (std::size_t i = 0; i + n <= ref.size(); ++i) {
                ++ref_counts[std::vector<T>(ref.begin() + i, ref.begin() + i + n)];
            }
            std::map<std::vector<T>, std::uint64_t> cand_counts;
            for (std::size_t i = 0; i + n <= cand.size(); ++i) {
                ++cand_counts[std::vector<T>(cand.begin() + i, cand.begin() + i + n)];
            }
            for (const auto& [gram, count] : cand_counts) {
                auto it = ref_counts.find(gram);
                r.matches[n - 1] += std::min(count, it == ref_counts.end() ? 0 : it->second);
            }
            r.totals[n - 1] += cand.size() - n + 1;
        }
    }
    r.precisions.resize(max_n);
    bool any_zero = false;
    double log_sum = 0.0;
    for (std::size_t n = 0; n < max_n; ++n) {
        r.precisions[n] = r.totals[n] == 0 ? 0.0
                                           : static_cast<double>(r.matches[n]) /
                                                 static_cast<double>(r.totals[n]);
        if (r.precisions[n] == 0.0) {
            any_zero = true;
        } else {
            log_sum += std::log(r.precisions[n]);
        }
    }
    const double c = static_cast<double>(r.candidate_length);
    const double ref_len = static_cast<double>(r.reference_length);
    r.brevity_penalty = r.candidate_length == 0 ? 0.0
                        : c < ref_len           ? std::exp(1.0 - ref_len / c)
                                                : 1.0;
    if (any_zero || r.candidate_length == 0) {
        r.score = 0.0;
    } else {
        r.score = r.brevity_penalty * std::exp(log_sum / static_cast<double>(max_n));
    }
    return r;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) {
            ++j;
        }
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t m = i; m <= j; ++m) {
            ranks[idx[m]] = r;
        }
        i = j + 1;
    }
    return ranks;
}

double l2_norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

} // namespace

BleuReport bleu(const std::vector<std::vector<TokenId>>& candidates,
                const std::vector<std::vector<TokenId>>& references, std::size_t max_n) {
    return bleu_impl(candidates, references, max_n);
}

BleuReport bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                std::size_t max_n) {
    return bleu_impl(candidates, references, max_n);
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw DimensionError("paired t-test needs equal-length inputs (" +
                             std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
    if (a.size() < 2) {
        throw ConfigError("paired t-test needs at least two pairs");
    }
    const std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean += a[i] - b[i];
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i] - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) {
        throw DegenerateError("paired t-test is undefined: the differences have zero variance");
    }
    TTestResult r;
    r.n = n;
    r.df = n - 1;
    r.mean_difference = mean;
    r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    const boost::math::students_t dist(static_cast<double>(r.df));
    r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
    return r;
}

TTestResult paired_t_test(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    return paired_t_test(std::vector<double>(a.begin(), a.end()),
                         std::vector<double>(b.begin(), b.end()));
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) {
        throw DimensionError("spearman needs equal-length inputs");
    }
    if (xs.size() < 2) {
        throw ConfigError("spearman needs at least two points");
    }
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DegenerateError("spearman correlation is undefined for constant input");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<CurvePoint> norm_length_curve(const std::vector<Sentence>& sentences,
                                          const std::vector<Vec>& vectors) {
    if (sentences.size() != vectors.size()) {
        throw DimensionError("one vector per sentence is required");
    }
    if (sentences.empty()) {
        throw ConfigError("norm/length curve of an empty corpus");
    }
    std::map<std::size_t, std::pair<double, std::size_t>> groups;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        auto& g = groups[sentences[i].raw_len()];
        g.first += l2_norm(vectors[i]);
        ++g.second;
    }
    std::vector<CurvePoint> out;
    for (const auto& [len, g] : groups) {
        out.push_back({static_cast<double>(len), g.first / static_cast<double>(g.second), g.second});
    }
    return out;
}

std::vector<CurvePoint> norm_length_curve(const std::vector<Sentence>& sentences,
                                          const SentenceEncoder& encoder, std::size_t jobs) {
    return norm_length_curve(sentences, encode_all(encoder, sentences, jobs));
}

double length_norm_spearman(const std::vector<Sentence>& sentences,
                            const std::vector<Vec>& vectors) {
    if (sentences.size() != vectors.size()) {
        throw DimensionError("one vector per sentence is required");
    }
    std::vector<double> lens, norms;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        lens.push_back(static_cast<double>(sentences[i].raw_len()));
        norms.push_back(l2_norm(vectors[i]));
    }
    return spearman(lens, norms);
}

std::vector<CurvePoint> content_accuracy_by_length(const std::vector<std::uint8_t>& correct,
                                                   const TaskDataset& dataset,
                                                   const std::vector<Sentence>& sentences) {
    if (correct.size() != dataset.instances.size()) {
        throw DimensionError("correctness vector has " + std::to_string(correct.size()) +
                             " entries for " + std::to_string(dataset.instances.size()) +
                             " instances");
    }
    std::unordered_map<std::uint64_t, std::size_t> length_of;
    for (const auto& s : sentences) {
        length_of.emplace(s.source_id, s.raw_len());
    }
    std::map<std::size_t, std::pair<double, std::size_t>> buckets;
    for (std::size_t i = 0; i < correct.size(); ++i) {
        auto it = length_of.find(dataset.instances[i].meta.sent_id);
        if (it == length_of.end()) {
            throw RangeError("instance refers to unknown sentence " +
                             std::to_string(dataset.instances[i].meta.sent_id));
        }
        auto& b = buckets[bin_length(it->second)];
        b.first += correct[i];
        ++b.second;
    }
    std::vector<CurvePoint> out;
    for (const auto& [bin, b] : buckets) {
        out.push_back({static_cast<double>(bin), b.first / static_cast<double>(b.second), b.second});
    }
    return out;
}

} // namespace sembprobe
