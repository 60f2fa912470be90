#include "sembprobe/report.hpp"

#include <charconv>

#include "sembprobe/digest.hpp"
#include "sembprobe/embedding_io.hpp"
#include "sembprobe/error.hpp"

namespace sembprobe {

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

template <class T>
T parse_unsigned(const std::string& s, std::size_t line_no) {
    T v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("report line " + std::to_string(line_no) + ": bad integer '" + s + "'");
    }
    return v;
}

void check_field(const std::string& s, const char* what) {
    if (s.find_first_of(",\n\r\"") != std::string::npos) {
        throw ConfigError(std::string("report ") + what + " '" + s +
                          "' contains a CSV delimiter");
    }
}

} // namespace

std::string report_csv(const std::vector<ResultRow>& rows) {
    std::string out(kReportCsvHeader);
    out += '\n';
    for (const auto& r : rows) {
        check_field(r.task, "task");
        check_field(r.encoder, "encoder");
        check_field(r.split, "split");
        check_field(r.checkpoint_digest, "digest");
        out += r.task + ',' + r.encoder + ',' + std::to_string(r.dim) + ',' + r.split + ',' +
               std::to_string(r.n) + ',' + format_double(r.accuracy) + ',' +
               format_double(r.baseline) + ',' + (r.bleu ? format_double(*r.bleu) : "") + ',' +
               std::to_string(r.seed) + ',' + r.checkpoint_digest + '\n';
    }
    return out;
}

std::vector<ResultRow> parse_report_csv(std::string_view text) {
    std::vector<ResultRow> rows;
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        const std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line_no == 1) {
            if (line != kReportCsvHeader) {
                throw ParseError("report header mismatch");
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        const auto f = split_csv_line(line);
        if (f.size() != 10) {
            throw ParseError("report line " + std::to_string(line_no) + ": expected 10 fields");
        }
        ResultRow r;
        r.task = f[0];
        r.encoder = f[1];
        r.dim = parse_unsigned<std::size_t>(f[2], line_no);
        r.split = f[3];
        r.n = parse_unsigned<std::size_t>(f[4], line_no);
        r.accuracy = parse_double(f[5]);
        r.baseline = parse_double(f[6]);
        if (!f[7].empty()) {
            r.bleu = parse_double(f[7]);
        }
        r.seed = parse_unsigned<std::uint64_t>(f[8], line_no);
        r.checkpoint_digest = f[9];
        rows.push_back(std::move(r));
    }
    if (line_no == 0) {
        throw ParseError("report is empty");
    }
    return rows;
}

std::string report_jsonl(const std::vector<ResultRow>& rows) {
    std::string out;
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["task"] = r.task;
        j["encoder"] = r.encoder;
        j["dim"] = r.dim;
        j["split"] = r.split;
        j["n"] = r.n;
        j["accuracy"] = r.accuracy;
        j["baseline"] = r.baseline;
        j["bleu"] = r.bleu ? nlohmann::ordered_json(*r.bleu) : nlohmann::ordered_json(nullptr);
        j["seed"] = r.seed;
        j["checkpoint_digest"] = r.checkpoint_digest;
        for (const auto& [key, value] : r.meta.items()) {
            j[key] = value;
        }
        out += j.dump() + '\n';
    }
    return out;
}

std::vector<ResultRow> rows_from_jsonl(std::string_view text) {
    std::vector<ResultRow> rows;
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        const std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            auto j = nlohmann::ordered_json::parse(line);
            ResultRow r;
            r.task = j.at("task").get<std::string>();
            r.encoder = j.at("encoder").get<std::string>();
            r.dim = j.at("dim").get<std::size_t>();
            r.split = j.at("split").get<std::string>();
            r.n = j.at("n").get<std::size_t>();
            r.accuracy = j.at("accuracy").get<double>();
            r.baseline = j.at("baseline").get<double>();
            if (!j.at("bleu").is_null()) {
                r.bleu = j.at("bleu").get<double>();
            }
            r.seed = j.at("seed").get<std::uint64_t>();
            r.checkpoint_digest = j.at("checkpoint_digest").get<std::string>();
            for (const char* k : {"task", "encoder", "dim", "split", "n", "accuracy", "baseline",
                                  "bleu", "seed", "checkpoint_digest"}) {
                j.erase(k);
            }
            r.meta = std::move(j);
            rows.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("result line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

const std::vector<PublishedValue>& published_values() {
    static const std::vector<PublishedValue> values{
        {"length", "majority_class", "original", 0.201, "share of the largest of 8 length bins"},
        {"length", "skip_thought", "original", 0.821, "4800-dim external embeddings"},
        {"content", "skip_thought", "original", 0.797, "4800-dim external embeddings"},
        {"order", "skip_thought", "original", 0.811, "4800-dim external embeddings"},
        {"length", "skip_thought", "permuted", 0.682, "4800-dim external embeddings"},
        {"content", "skip_thought", "permuted", 0.764, "4800-dim external embeddings"},
        {"order", "skip_thought", "permuted", 0.765, "4800-dim external embeddings"},
    };
    return values;
}

std::string published_values_csv() {
    std::string out = "source,task,encoder,variant,accuracy,note\n";
    for (const auto& v : published_values()) {
        out += "published_reference_not_computed," + v.task + ',' + v.encoder + ',' + v.variant +
               ',' + format_double(v.accuracy) + ',' + v.note + '\n';
    }
    return out;
}

SignificanceCell compare_cells(const std::string& task, const std::string& model_a,
                               const std::vector<std::uint8_t>& a, const std::string& model_b,
                               const std::vector<std::uint8_t>& b) {
    SignificanceCell cell{task, model_a, model_b, std::nullopt, "ok", ""};
    try {
        cell.result = paired_t_test(a, b);
    } catch (const DegenerateError& e) {
        cell.status = "degenerate";
        cell.note = e.what();
    } catch (const Error& e) {
        cell.status = "skipped";
        cell.note = e.what();
    }
    return cell;
}

std::string significance_csv(const std::vector<SignificanceCell>& cells) {
    std::string out = "task,model_a,model_b,status,n,t,df,p_value,mean_difference\n";
    for (const auto& c : cells) {
        out += c.task + ',' + c.model_a + ',' + c.model_b + ',' + c.status + ',';
        if (c.result) {
            out += std::to_string(c.result->n) + ',' + format_double(c.result->t) + ',' +
                   std::to_string(c.result->df) + ',' + format_double(c.result->p_value) + ',' +
                   format_double(c.result->mean_difference);
        } else {
            out += ",,,,";
        }
        out += '\n';
    }
    return out;
}

void emit_report(const std::vector<ResultRow>& rows, const std::filesystem::path& dir) {
    write_file(dir / "report.csv", report_csv(rows));
    write_file(dir / "report.jsonl", report_jsonl(rows));
    write_file(dir / "published_reference.csv", published_values_csv());
}

} // namespace sembprobe
