#include "sembprobe/config.hpp"

#include <charconv>
#include <functional>
#include <map>

#include "sembprobe/digest.hpp"
#include "sembprobe/embedding_io.hpp"
#include "sembprobe/error.hpp"

namespace sembprobe {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t comma = std::min(s.find(',', start), s.size());
        const std::string item = trim(s.substr(start, comma - start));
        if (!item.empty()) {
            out.push_back(item);
        }
        start = comma + 1;
    }
    return out;
}

std::uint64_t to_u64(const std::string& v) {
    std::uint64_t x = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError("expected a non-negative integer, got '" + v + "'");
    }
    return x;
}

std::size_t to_size(const std::string& v) { return static_cast<std::size_t>(to_u64(v)); }

double to_real(const std::string& v) {
    try {
        return parse_double(v);
    } catch (const ParseError&) {
        throw ConfigError("expected a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError("expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_dims(const std::string& v) {
    std::vector<std::size_t> dims;
    for (const auto& item : split_list(v)) {
        dims.push_back(to_size(item));
    }
    if (dims.empty()) {
        throw ConfigError("expected a comma-separated list of dimensions");
    }
    return dims;
}

std::string join_dims(const std::vector<std::size_t>& dims) {
    std::string out;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        out += (i ? "," : "") + std::to_string(dims[i]);
    }
    return out;
}

std::vector<std::size_t> profile_dims(Profile p) {
    if (p == Profile::Paper) {
        return {100, 300, 500, 750, 1000};
    }
    return {16, 32, 64};
}

void apply_key(ExperimentConfig& c, const std::string& key, const std::string& v,
               std::map<std::size_t, EncoderSpec>& encoders) {
    using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
    static const std::map<std::string, Setter> setters{
        {"seed", [](auto& c, auto& v) { c.seed = to_u64(v); }},
        {"corpus.path", [](auto& c, auto& v) { c.corpus_path = v; }},
        {"corpus.pretokenized", [](auto& c, auto& v) { c.pretokenized = to_bool(v); }},
        {"corpus.generate_sentences", [](auto& c, auto& v) { c.generate_sentences = to_size(v); }},
        {"corpus.min_len", [](auto& c, auto& v) { c.bounds.min = to_size(v); }},
        {"corpus.max_len", [](auto& c, auto& v) { c.bounds.max = to_size(v); }},
        {"vocab.cap", [](auto& c, auto& v) { c.vocab_cap = to_size(v); }},
        {"split.train", [](auto& c, auto& v) { c.split.train = to_size(v); }},
        {"split.dev", [](auto& c, auto& v) { c.split.dev = to_size(v); }},
        {"split.test", [](auto& c, auto& v) { c.split.test = to_size(v); }},
        {"split.encoder_dev", [](auto& c, auto& v) { c.encoder_dev = to_size(v); }},
        {"tasks",
         [](auto& c, auto& v) {
             c.tasks.clear();
             for (const auto& t : split_list(v)) {
                 c.tasks.push_back(task_kind_from_string(t));
             }
         }},
        {"controls.permuted", [](auto& c, auto& v) { c.control_permuted = to_bool(v); }},
        {"controls.synthetic", [](auto& c, auto& v) { c.control_synthetic = to_bool(v); }},
        {"controls.order_no_sentence",
         [](auto& c, auto& v) { c.control_order_no_sentence = to_bool(v); }},
        {"skipgram.window", [](auto& c, auto& v) { c.skipgram.window = to_size(v); }},
        {"skipgram.epochs", [](auto& c, auto& v) { c.skipgram.epochs = to_size(v); }},
        {"skipgram.lr", [](auto& c, auto& v) { c.skipgram.lr = to_real(v); }},
        {"ed.lr", [](auto& c, auto& v) { c.ed.lr = to_real(v); }},
        {"ed.dropout", [](auto& c, auto& v) { c.ed.dropout = to_real(v); }},
        {"ed.batch", [](auto& c, auto& v) { c.ed.batch = to_size(v); }},
        {"ed.max_epochs", [](auto& c, auto& v) { c.ed.max_epochs = to_size(v); }},
        {"ed.patience", [](auto& c, auto& v) { c.ed.patience = to_size(v); }},
        {"ed.clip", [](auto& c, auto& v) { c.ed.clip = to_real(v); }},
        {"probe.lr", [](auto& c, auto& v) { c.probe.lr = to_real(v); }},
        {"probe.dropout", [](auto& c, auto& v) { c.probe.dropout = to_real(v); }},
        {"probe.batch", [](auto& c, auto& v) { c.probe.batch = to_size(v); }},
        {"probe.max_epochs", [](auto& c, auto& v) { c.probe.max_epochs = to_size(v); }},
        {"probe.patience", [](auto& c, auto& v) { c.probe.patience = to_size(v); }},
        {"output.dir", [](auto& c, auto& v) { c.out_dir = v; }},
    };
    if (auto it = setters.find(key); it != setters.end()) {
        it->second(c, v);
        return;
    }
    if (key.rfind("encoder.", 0) == 0) {
        const std::size_t dot = key.find('.', 8);
        if (dot == std::string::npos) {
            throw ConfigError("unknown key '" + key + "'");
        }
        const std::size_t index = to_size(key.substr(8, dot - 8));
        const std::string field = key.substr(dot + 1);
        EncoderSpec& e = encoders[index];
        if (field == "type") {
            e.type = encoder_kind_from_string(v);
        } else if (field == "dims" || field == "dim") {
            e.dims = to_dims(v);
        } else if (field == "sentence_vectors") {
            e.sentence_vectors = v;
        } else if (field == "word_vectors") {
            e.word_vectors = v;
        } else if (field == "permuted_sentence_vectors") {
            e.permuted_sentence_vectors = v;
        } else {
            throw ConfigError("unknown key '" + key + "'");
        }
        return;
    }
    throw ConfigError("unknown key '" + key + "'");
}

} // namespace

Profile profile_from_string(std::string_view name) {
    if (name == "desk") {
        return Profile::Desk;
    }
    if (name == "paper") {
        return Profile::Paper;
    }
    throw ConfigError("unknown profile '" + std::string(name) + "' (expected desk or paper)");
}

std::string to_string(Profile p) { return p == Profile::Paper ? "paper" : "desk"; }

std::uint64_t ExperimentConfig::seed_value() const {
    if (!seed) {
        throw ConfigError("no seed given: set seed= in the config or pass --seed");
    }
    return *seed;
}

ExperimentConfig default_config(Profile profile) {
    ExperimentConfig c;
    c.profile = profile;
    if (profile == Profile::Paper) {
        c.split = SplitSizes::paper();
        c.vocab_cap = 50000;
        c.generate_sentences = 1000000;
        c.encoder_dev = 10000;
        c.out_dir = "runs/paper";
    } else {
        c.split = SplitSizes::desk();
        c.ed.lr = 0.1;
        c.ed.max_epochs = 15;
        c.skipgram.epochs = 10;
        c.probe.lr = 0.1;
        c.probe.dropout = 0.1;
        c.out_dir = "runs/desk";
    }
    return c;
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
    std::map<std::size_t, EncoderSpec> encoders;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view raw = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string_view::npos) {
            raw = raw.substr(0, hash);
        }
        const std::string line = trim(raw);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key=value, got '" + line + "'");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        try {
            apply_key(base, key, value, encoders);
        } catch (const Error& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!encoders.empty()) {
        base.encoders.clear();
        for (auto& [index, spec] : encoders) {
            base.encoders.push_back(std::move(spec));
        }
    }
    return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, Profile profile) {
    if (!std::filesystem::exists(path)) {
        throw ConfigError("config file " + path.string() + " does not exist");
    }
    return parse_config(read_file(path), default_config(profile));
}

void validate_config(ExperimentConfig& c) {
    c.seed_value();
    if (c.encoders.empty()) {
        c.encoders.push_back({EncoderKind::Cbow, profile_dims(c.profile), {}, {}, {}});
        c.encoders.push_back({EncoderKind::Ed, profile_dims(c.profile), {}, {}, {}});
    }
    for (std::size_t i = 0; i < c.encoders.size(); ++i) {
        auto& e = c.encoders[i];
        const std::string where = "encoder." + std::to_string(i);
        if (e.type == EncoderKind::External) {
            if (e.sentence_vectors.empty()) {
                throw ConfigError(where + ".sentence_vectors is required for external encoders");
            }
            for (const auto& p : {e.sentence_vectors, e.word_vectors, e.permuted_sentence_vectors}) {
                if (!p.empty() && !std::filesystem::exists(p)) {
                    throw ConfigError(where + ": file " + p.string() + " does not exist");
                }
            }
            e.dims = {0};
            continue;
        }
        if (e.dims.empty()) {
            e.dims = profile_dims(c.profile);
        }
        for (std::size_t d : e.dims) {
            if (d == 0) {
                throw ConfigError(where + ": dimensions must be positive");
            }
        }
    }
    if (!c.corpus_path.empty() && !std::filesystem::exists(c.corpus_path)) {
        throw ConfigError("corpus file " + c.corpus_path.string() + " does not exist");
    }
    if (c.bounds.min == 0 || c.bounds.min > c.bounds.max) {
        throw ConfigError("corpus length bounds must satisfy 1 <= min <= max");
    }
    if (c.bounds.min < 5 || c.bounds.max > 70) {
        throw ConfigError("corpus length bounds must stay within the binned range 5..70");
    }
    if (c.split.train == 0 || c.split.dev == 0 || c.split.test == 0 || c.encoder_dev == 0) {
        throw ConfigError("split sizes must be positive");
    }
    if (c.vocab_cap < 2) {
        throw ConfigError("vocab.cap must be at least 2");
    }
    if (c.tasks.empty()) {
        throw ConfigError("at least one task is required");
    }
    if (!(c.ed.dropout >= 0 && c.ed.dropout < 1) || !(c.probe.dropout >= 0 && c.probe.dropout < 1)) {
        throw ConfigError("dropout rates must lie in [0, 1)");
    }
    if (c.ed.lr <= 0 || c.probe.lr <= 0 || c.skipgram.lr <= 0 || c.ed.clip <= 0) {
        throw ConfigError("learning rates and the clipping threshold must be positive");
    }
    if (c.ed.batch == 0 || c.probe.batch == 0 || c.ed.patience == 0 || c.probe.patience == 0 ||
        c.ed.max_epochs == 0 || c.probe.max_epochs == 0 || c.skipgram.epochs == 0 ||
        c.skipgram.window == 0) {
        throw ConfigError("batch sizes, patience, epochs and window must be positive");
    }
}

std::string config_to_text(const ExperimentConfig& c) {
    std::string out;
    auto put = [&](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
    out += "# profile=" + to_string(c.profile) + "\n";
    put("seed", c.seed ? std::to_string(*c.seed) : "");
    put("corpus.path", c.corpus_path.string());
    put("corpus.pretokenized", c.pretokenized ? "true" : "false");
    put("corpus.generate_sentences", std::to_string(c.generate_sentences));
    put("corpus.min_len", std::to_string(c.bounds.min));
    put("corpus.max_len", std::to_string(c.bounds.max));
    put("vocab.cap", std::to_string(c.vocab_cap));
    put("split.train", std::to_string(c.split.train));
    put("split.dev", std::to_string(c.split.dev));
    put("split.test", std::to_string(c.split.test));
    put("split.encoder_dev", std::to_string(c.encoder_dev));
    for (std::size_t i = 0; i < c.encoders.size(); ++i) {
        const auto& e = c.encoders[i];
        const std::string p = "encoder." + std::to_string(i) + ".";
        put(p + "type", to_string(e.type));
        put(p + "dims", join_dims(e.dims));
        if (e.type == EncoderKind::External) {
            put(p + "sentence_vectors", e.sentence_vectors.string());
            put(p + "word_vectors", e.word_vectors.string());
            put(p + "permuted_sentence_vectors", e.permuted_sentence_vectors.string());
        }
    }
    std::string tasks;
    for (std::size_t i = 0; i < c.tasks.size(); ++i) {
        tasks += (i ? "," : "") + to_string(c.tasks[i]);
    }
    put("tasks", tasks);
    put("controls.permuted", c.control_permuted ? "true" : "false");
    put("controls.synthetic", c.control_synthetic ? "true" : "false");
    put("controls.order_no_sentence", c.control_order_no_sentence ? "true" : "false");
    put("skipgram.window", std::to_string(c.skipgram.window));
    put("skipgram.epochs", std::to_string(c.skipgram.epochs));
    put("skipgram.lr", format_double(c.skipgram.lr));
    put("ed.lr", format_double(c.ed.lr));
    put("ed.dropout", format_double(c.ed.dropout));
    put("ed.batch", std::to_string(c.ed.batch));
    put("ed.max_epochs", std::to_string(c.ed.max_epochs));
    put("ed.patience", std::to_string(c.ed.patience));
    put("ed.clip", format_double(c.ed.clip));
    put("probe.lr", format_double(c.probe.lr));
    put("probe.dropout", format_double(c.probe.dropout));
    put("probe.batch", std::to_string(c.probe.batch));
    put("probe.max_epochs", std::to_string(c.probe.max_epochs));
    put("probe.patience", std::to_string(c.probe.patience));
    put("output.dir", c.out_dir.string());
    return out;
}

} // namespace sembprobe
