#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sembprobe/eval.hpp"

namespace sembprobe {

/// One evaluated cell: task x encoder x dim (x control).
struct ResultRow {
    std::string task;
    std::string encoder;
    std::size_t dim = 0;
    std::string split = "test";
    std::size_t n = 0;
    double accuracy = 0.0;
    double baseline = 0.0;
    std::optional<double> bleu;
    std::uint64_t seed = 0;
    std::string checkpoint_digest;
    /// Extra fields carried only by the JSON-lines mirror.
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();

    friend bool operator==(const ResultRow& a, const ResultRow& b) {
        return a.task == b.task && a.encoder == b.encoder && a.dim == b.dim &&
               a.split == b.split && a.n == b.n && a.accuracy == b.accuracy &&
               a.baseline == b.baseline && a.bleu == b.bleu && a.seed == b.seed &&
               a.checkpoint_digest == b.checkpoint_digest;
    }
};

inline constexpr std::string_view kReportCsvHeader =
    "task,encoder,dim,split,n,accuracy,baseline,bleu,seed,checkpoint_digest";

std::string report_csv(const std::vector<ResultRow>& rows);
/// Inverse of report_csv (meta is not stored in the CSV).
std::vector<ResultRow> parse_report_csv(std::string_view text);
std::string report_jsonl(const std::vector<ResultRow>& rows);
/// Inverse of report_jsonl; fields beyond the CSV columns land in meta.
std::vector<ResultRow> rows_from_jsonl(std::string_view text);

/// Published accuracies kept for side-by-side reading; never computed here.
struct PublishedValue {
    std::string task;
    std::string encoder;
    std::string variant;
    double accuracy = 0.0;
    std::string note;
};

const std::vector<PublishedValue>& published_values();
std::string published_values_csv();

struct SignificanceCell {
    std::string task;
    std::string model_a;
    std::string model_b;
    std::optional<TTestResult> result;
    /// "ok", "degenerate" or "skipped".
    std::string status;
    std::string note;
};

/// Pairs two correctness vectors; degenerate inputs are recorded, not thrown.
SignificanceCell compare_cells(const std::string& task, const std::string& model_a,
                               const std::vector<std::uint8_t>& a, const std::string& model_b,
                               const std::vector<std::uint8_t>& b);
std::string significance_csv(const std::vector<SignificanceCell>& cells);

/// Writes report.csv, report.jsonl and published_reference.csv into dir.
void emit_report(const std::vector<ResultRow>& rows, const std::filesystem::path& dir);

} // namespace sembprobe
