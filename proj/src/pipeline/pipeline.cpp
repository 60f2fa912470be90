#include "sembprobe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <numeric>
#include <set>
#include <thread>

#include "sembprobe/digest.hpp"
#include "sembprobe/embedding_io.hpp"
#include "sembprobe/error.hpp"
#include "sembprobe/toy_language.hpp"

namespace sembprobe {

namespace fs = std::filesystem;

namespace {

// Seed streams derived from the experiment seed.
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kEncoderDevStream = 2;
constexpr std::uint64_t kSkipGramStream = 10;
constexpr std::uint64_t kEdStream = 11;
constexpr std::uint64_t kTaskStream = 20;
constexpr std::uint64_t kProbeStream = 30;
constexpr std::uint64_t kPermuteStream = 40;
constexpr std::uint64_t kSyntheticStream = 41;
constexpr std::uint64_t kCorpusStream = 50;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string curve_csv(const std::vector<CurvePoint>& points, const char* x_name) {
    std::string out = std::string(x_name) + ",y,n\n";
    for (const auto& p : points) {
        out += format_double(p.x) + ',' + format_double(p.y) + ',' + std::to_string(p.n) + '\n';
    }
    return out;
}

std::string bits_text(const std::vector<std::uint8_t>& bits) {
    std::string out;
    out.reserve(bits.size() + 1);
    for (auto b : bits) {
        out += b ? '1' : '0';
    }
    out += '\n';
    return out;
}

std::vector<std::uint8_t> bits_from_text(const std::string& text) {
    std::vector<std::uint8_t> out;
    for (char c : text) {
        if (c == '0' || c == '1') {
            out.push_back(c == '1');
        } else if (c != '\n') {
            throw ParseError("correctness file holds a character other than 0/1");
        }
    }
    return out;
}

std::vector<Sentence> permuted_copy(const std::vector<Sentence>& sentences, std::uint64_t seed) {
    std::vector<Sentence> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) {
        Rng rng(derive_seed(seed, s.source_id));
        out.push_back(permute_sentence(s, rng));
    }
    return out;
}

std::vector<Sentence> synthetic_copy(const std::vector<Sentence>& sentences, const Vocabulary& vocab,
                                     std::uint64_t seed, LengthBounds bounds) {
    std::vector<Sentence> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) {
        Rng rng(derive_seed(seed, s.source_id));
        out.push_back(synthesize_random_sentence(s.raw_len(), vocab, rng, s.source_id, bounds));
    }
    return out;
}

struct Variant {
    TaskKind task;
    std::string control;
};

std::string variant_label(const Variant& v) {
    return v.control == "original" ? to_string(v.task) : to_string(v.task) + ":" + v.control;
}

} // namespace

RunManifest::RunManifest(fs::path root) : root_(std::move(root)) {
    const fs::path file = root_ / "manifest.json";
    if (fs::exists(file)) {
        try {
            data_ = nlohmann::ordered_json::parse(read_file(file));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("corrupt run manifest " + file.string() + ": " + e.what());
        }
    }
    if (!data_.is_object()) {
        data_ = nlohmann::ordered_json::object();
    }
    data_["tool_version"] = kToolVersion;
    if (!data_.contains("stages")) {
        data_["stages"] = nlohmann::ordered_json::object();
    }
}

bool RunManifest::is_current(const std::string& stage, const std::string& input_digest) const {
    std::lock_guard lock(mutex_);
    const auto& stages = data_["stages"];
    if (!stages.contains(stage)) {
        return false;
    }
    const auto& s = stages[stage];
    if (s.value("input_digest", "") != input_digest) {
        return false;
    }
    for (const auto& [rel, digest] : s["artifacts"].items()) {
        const fs::path p = root_ / rel;
        if (!fs::exists(p) || sha256_file(p) != digest.get<std::string>()) {
            return false;
        }
    }
    return true;
}

void RunManifest::record(const std::string& stage, const std::string& input_digest,
                         const std::vector<fs::path>& artifacts, double seconds) {
    nlohmann::ordered_json entry;
    entry["input_digest"] = input_digest;
    nlohmann::ordered_json arts = nlohmann::ordered_json::object();
    for (const auto& a : artifacts) {
        arts[fs::relative(a, root_).generic_string()] = sha256_file(a);
    }
    entry["artifacts"] = std::move(arts);
    entry["seconds"] = seconds;
    std::lock_guard lock(mutex_);
    data_["stages"][stage] = std::move(entry);
    write_file(root_ / "manifest.json", data_.dump(2) + "\n");
}

std::string RunManifest::artifact_digest(const std::string& stage,
                                         const std::string& rel_path) const {
    std::lock_guard lock(mutex_);
    const auto& stages = data_["stages"];
    if (!stages.contains(stage) || !stages[stage]["artifacts"].contains(rel_path)) {
        throw ConfigError("stage '" + stage + "' has not produced " + rel_path +
                          "; run the earlier pipeline steps first");
    }
    return stages[stage]["artifacts"][rel_path].get<std::string>();
}

void RunManifest::set_config_digest(const std::string& digest) {
    std::lock_guard lock(mutex_);
    data_["config_digest"] = digest;
}

void RunManifest::save() const {
    std::lock_guard lock(mutex_);
    write_file(root_ / "manifest.json", data_.dump(2) + "\n");
}

Pipeline::Pipeline(ExperimentConfig config, PipelineOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
    validate_config(config_);
    options_.jobs = std::max<std::size_t>(1, options_.jobs);
    const std::string text = config_to_text(config_);
    write_file(out() / "config.txt", text);
    manifest_ = std::make_unique<RunManifest>(out());
    manifest_->set_config_digest(sha256_hex(text));
    manifest_->save();
}

void Pipeline::log(const std::string& msg) const {
    if (options_.log) {
        options_.log(msg);
    }
}

std::vector<EncoderCell> Pipeline::cells() const {
    std::vector<EncoderCell> out;
    std::map<std::string, std::size_t> external_count;
    for (std::size_t i = 0; i < config_.encoders.size(); ++i) {
        const auto& spec = config_.encoders[i];
        for (std::size_t d : spec.dims) {
            EncoderCell c{i, spec.type, d, ""};
            if (spec.type == EncoderKind::External) {
                const std::size_t n = external_count["external"]++;
                c.name = n == 0 ? "external" : "external" + std::to_string(n);
            } else {
                c.name = to_string(spec.type) + "-" + std::to_string(d);
            }
            out.push_back(std::move(c));
        }
    }
    std::set<std::string> names;
    for (const auto& c : out) {
        if (!names.insert(c.name).second) {
            throw ConfigError("encoder " + c.name + " is configured twice");
        }
    }
    return out;
}

template <class Fn>
void Pipeline::for_each_cell(const std::vector<EncoderCell>& cells, Fn fn) {
    if (options_.jobs == 1 || cells.size() < 2) {
        for (const auto& c : cells) {
            fn(c);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(cells.size());
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < std::min(options_.jobs, cells.size()); ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < cells.size(); i = next++) {
                try {
                    fn(cells[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

std::string Pipeline::prepare_digest() const {
    std::string key = "prepare|";
    key += config_.corpus_path.empty() ? "generated:" + std::to_string(config_.generate_sentences)
                                       : "file:" + sha256_file(config_.corpus_path);
    key += "|pretok=" + std::to_string(config_.pretokenized);
    key += "|len=" + std::to_string(config_.bounds.min) + "-" + std::to_string(config_.bounds.max);
    key += "|cap=" + std::to_string(config_.vocab_cap);
    key += "|split=" + std::to_string(config_.split.train) + "," +
           std::to_string(config_.split.dev) + "," + std::to_string(config_.split.test) + "," +
           std::to_string(config_.encoder_dev);
    key += "|seed=" + std::to_string(config_.seed_value());
    return sha256_hex(key);
}

void Pipeline::prepare() {
    const std::string digest = prepare_digest();
    if (manifest_->is_current("prepare", digest)) {
        log("prepare: up to date");
        return;
    }
    const auto t0 = Clock::now();
    const std::uint64_t seed = config_.seed_value();
    std::vector<Tokens> raw;
    if (config_.corpus_path.empty()) {
        ToyLanguageConfig toy;
        toy.min_len = config_.bounds.min;
        toy.max_len = config_.bounds.max;
        for (const auto& line : generate_toy_corpus(config_.generate_sentences, toy,
                                                    derive_seed(seed, kCorpusStream))) {
            raw.push_back(tokenize(line));
        }
        log("prepare: generated " + std::to_string(raw.size()) + " sentences");
    } else {
        raw = load_corpus(config_.corpus_path, config_.pretokenized);
        log("prepare: read " + std::to_string(raw.size()) + " lines from " +
            config_.corpus_path.string());
    }
    std::vector<Tokens> kept;
    std::vector<std::uint64_t> ids;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i].size() >= config_.bounds.min && raw[i].size() <= config_.bounds.max) {
            kept.push_back(std::move(raw[i]));
            ids.push_back(i);
        }
    }
    const Vocabulary vocab = Vocabulary::build(kept, config_.vocab_cap);
    std::vector<Sentence> sentences;
    sentences.reserve(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        sentences.push_back({vocab.encode(kept[i]), ids[i]});
    }
    const std::size_t needed =
        config_.encoder_dev + config_.split.train + config_.split.dev + config_.split.test;
    if (sentences.size() < needed) {
        throw ConfigError("corpus has " + std::to_string(sentences.size()) +
                          " sentences within the length bounds but the splits need " +
                          std::to_string(needed));
    }

    std::vector<std::size_t> order(sentences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, kEncoderDevStream));
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::uint64_t> dev_ids;
    std::vector<bool> is_dev(sentences.size(), false);
    for (std::size_t i = 0; i < config_.encoder_dev; ++i) {
        is_dev[order[i]] = true;
    }
    std::vector<Sentence> encoder_train;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (is_dev[i]) {
            dev_ids.push_back(sentences[i].source_id);
        } else {
            encoder_train.push_back(sentences[i]);
        }
    }
    const CorpusSplit probe = split_corpus(encoder_train, config_.split,
                                           derive_seed(seed, kSplitStream));

    nlohmann::ordered_json enc_split;
    enc_split["seed"] = derive_seed(seed, kEncoderDevStream);
    enc_split["encoder_dev"] = dev_ids;
    const fs::path dir = out() / "prepared";
    write_file(dir / "sentences.txt", sentences_to_text(sentences));
    write_file(dir / "vocab.tsv", vocab.to_tsv());
    write_file(dir / "split.json", split_manifest_json(probe));
    write_file(dir / "encoder_split.json", enc_split.dump() + "\n");
    manifest_->record("prepare", digest,
                      {dir / "sentences.txt", dir / "vocab.tsv", dir / "split.json",
                       dir / "encoder_split.json"},
                      seconds_since(t0));
    log("prepare: " + std::to_string(sentences.size()) + " sentences, vocabulary " +
        std::to_string(vocab.size()) + ", probe split " + std::to_string(probe.train.size()) +
        "/" + std::to_string(probe.dev.size()) + "/" + std::to_string(probe.test.size()));
}

PreparedCorpus Pipeline::load_prepared() const {
    const fs::path dir = out() / "prepared";
    if (!fs::exists(dir / "sentences.txt")) {
        throw ConfigError("no prepared corpus in " + dir.string() + "; run prepare first");
    }
    PreparedCorpus p;
    p.vocab = Vocabulary::load(dir / "vocab.tsv");
    p.sentences = sentences_from_text(read_file(dir / "sentences.txt"));
    p.probe = split_from_manifest(read_file(dir / "split.json"), p.sentences);
    const auto enc = nlohmann::json::parse(read_file(dir / "encoder_split.json"));
    const auto dev_ids = enc.at("encoder_dev").get<std::vector<std::uint64_t>>();
    const std::set<std::uint64_t> dev(dev_ids.begin(), dev_ids.end());
    for (const auto& s : p.sentences) {
        (dev.count(s.source_id) ? p.encoder_dev : p.encoder_train).push_back(s);
    }
    return p;
}

std::string Pipeline::encoder_input_digest(const EncoderCell& cell) const {
    const auto& spec = config_.encoders[cell.spec_index];
    std::string key = "encoder|" + cell.name + "|" + to_string(cell.type) + "|" +
                      std::to_string(cell.dim) + "|seed=" + std::to_string(config_.seed_value());
    if (cell.type == EncoderKind::External) {
        for (const auto& p : {spec.sentence_vectors, spec.word_vectors, spec.permuted_sentence_vectors}) {
            key += "|" + (p.empty() ? std::string("-") : sha256_file(p));
        }
        return sha256_hex(key);
    }
    key += "|" + manifest_->artifact_digest("prepare", "prepared/sentences.txt");
    key += "|" + manifest_->artifact_digest("prepare", "prepared/encoder_split.json");
    if (cell.type == EncoderKind::Cbow) {
        key += "|sg=" + std::to_string(config_.skipgram.window) + "," +
               std::to_string(config_.skipgram.epochs) + "," + format_double(config_.skipgram.lr);
    } else {
        const auto& e = config_.ed;
        key += "|ed=" + format_double(e.lr) + "," + format_double(e.dropout) + "," +
               std::to_string(e.batch) + "," + std::to_string(e.max_epochs) + "," +
               std::to_string(e.patience) + "," + format_double(e.clip);
    }
    return sha256_hex(key);
}

void Pipeline::train_cell(const EncoderCell& cell, const PreparedCorpus& data) {
    const std::string stage = "encoder/" + cell.name;
    const std::string digest = encoder_input_digest(cell);
    if (manifest_->is_current(stage, digest)) {
        log("train-encoder " + cell.name + ": up to date");
        return;
    }
    const auto t0 = Clock::now();
    const std::uint64_t seed = config_.seed_value();
    const fs::path model_path = out() / "models" / (cell.name + ".ckpt");
    const fs::path curve_path = out() / "curves" / ("train-" + cell.name + ".csv");
    if (cell.type == EncoderKind::External) {
        const auto& spec = config_.encoders[cell.spec_index];
        std::optional<fs::path> words;
        if (!spec.word_vectors.empty()) {
            words = spec.word_vectors;
        }
        const auto set = load_external_embeddings(spec.sentence_vectors, words);
        log("train-encoder " + cell.name + ": external set of " + std::to_string(set.size()) +
            " sentence vectors (dim " + std::to_string(set.sentence_dim) + ")");
        manifest_->record(stage, digest, {}, seconds_since(t0));
        return;
    }
    if (cell.type == EncoderKind::Cbow) {
        SkipGramConfig sg = config_.skipgram;
        sg.dim = cell.dim;
        sg.seed = derive_seed(derive_seed(seed, kSkipGramStream), cell.dim);
        auto res = skipgram_train(data.encoder_train, data.vocab, sg);
        std::string curve = "epoch,loss\n";
        for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) {
            curve += std::to_string(e + 1) + "," + format_double(res.epoch_loss[e]) + "\n";
        }
        res.model.to_checkpoint().save(model_path);
        write_file(curve_path, curve);
        log("train-encoder " + cell.name + ": skip-gram loss " +
            format_double(res.epoch_loss.back()));
    } else {
        EdConfig ed = config_.ed;
        ed.dim = cell.dim;
        ed.seed = derive_seed(derive_seed(seed, kEdStream), cell.dim);
        const fs::path state_path = out() / "models" / (cell.name + ".state.ckpt");
        const fs::path state_tag = out() / "models" / (cell.name + ".state.digest");
        std::optional<EdTrainState> resume;
        if (fs::exists(state_path) && fs::exists(state_tag) && read_file(state_tag) == digest) {
            resume = EdTrainState::from_checkpoint(Checkpoint::load(state_path));
            log("train-encoder " + cell.name + ": resuming after epoch " +
                std::to_string(resume->epochs_done));
        }
        EdTrainHooks hooks;
        hooks.save_state = [&](const EdTrainState& st) {
            st.to_checkpoint().save(state_path);
            write_file(state_tag, digest);
        };
        hooks.on_epoch = [&](const EdEpochStats& s, const EdModel&) {
            log("train-encoder " + cell.name + ": epoch " + std::to_string(s.epoch) + " train " +
                format_double(s.train_loss) + " dev " + format_double(s.dev_loss));
            if (options_.after_ed_epoch) {
                options_.after_ed_epoch(cell.name, s.epoch);
            }
            return true;
        };
        auto res = ed_train(data.encoder_train, data.encoder_dev, data.vocab.size(), ed, hooks,
                            std::move(resume));
        std::string curve = "epoch,train_loss,dev_loss\n";
        for (const auto& s : res.curve) {
            curve += std::to_string(s.epoch) + "," + format_double(s.train_loss) + "," +
                     format_double(s.dev_loss) + "\n";
        }
        res.model.to_checkpoint().save(model_path);
        write_file(curve_path, curve);
        log("train-encoder " + cell.name + ": best epoch " + std::to_string(res.best_epoch));
    }
    manifest_->record(stage, digest, {model_path, curve_path}, seconds_since(t0));
}

void Pipeline::train_encoders(std::optional<std::size_t> spec_index) {
    if (spec_index && *spec_index >= config_.encoders.size()) {
        throw ConfigError("no encoder." + std::to_string(*spec_index) + " in the config");
    }
    prepare();
    const PreparedCorpus data = load_prepared();
    std::vector<EncoderCell> todo;
    for (const auto& c : cells()) {
        if (!spec_index || c.spec_index == *spec_index) {
            todo.push_back(c);
        }
    }
    for_each_cell(todo, [&](const EncoderCell& c) { train_cell(c, data); });
}

std::unique_ptr<SentenceEncoder> Pipeline::load_encoder(const EncoderCell& cell,
                                                        const Vocabulary& vocab,
                                                        bool permuted) const {
    if (cell.type == EncoderKind::External) {
        const auto& spec = config_.encoders[cell.spec_index];
        const fs::path& sentences = permuted ? spec.permuted_sentence_vectors : spec.sentence_vectors;
        if (sentences.empty()) {
            return nullptr;
        }
        std::optional<fs::path> words;
        if (!spec.word_vectors.empty()) {
            words = spec.word_vectors;
        }
        std::string digest = sha256_file(sentences);
        if (words) {
            digest = sha256_hex(digest + sha256_file(*words));
        }
        return std::make_unique<ExternalEncoder>(load_external_embeddings(sentences, words), vocab,
                                                 digest);
    }
    const fs::path model_path = out() / "models" / (cell.name + ".ckpt");
    if (!fs::exists(model_path)) {
        throw ConfigError("missing checkpoint " + model_path.string() + "; run train-encoder first");
    }
    const Checkpoint ck = Checkpoint::load(model_path);
    if (cell.type == EncoderKind::Cbow) {
        return std::make_unique<CbowEncoder>(SkipGramModel::from_checkpoint(ck));
    }
    return std::make_unique<EdEncoder>(EdModel::from_checkpoint(ck));
}

void Pipeline::run_cell(const EncoderCell& cell, const PreparedCorpus& data) {
    const std::string stage = "tasks/" + cell.name;
    const std::uint64_t seed = config_.seed_value();
    auto encoder = load_encoder(cell, data.vocab);
    std::string key = "tasks|" + encoder->digest() + "|" +
                      manifest_->artifact_digest("prepare", "prepared/split.json") + "|" +
                      manifest_->artifact_digest("prepare", "prepared/vocab.tsv");
    for (TaskKind t : config_.tasks) {
        key += "|" + to_string(t);
    }
    key += "|controls=" + std::to_string(config_.control_permuted) +
           std::to_string(config_.control_synthetic) +
           std::to_string(config_.control_order_no_sentence);
    const auto& pc = config_.probe;
    key += "|probe=" + format_double(pc.lr) + "," + format_double(pc.dropout) + "," +
           std::to_string(pc.batch) + "," + std::to_string(pc.max_epochs) + "," +
           std::to_string(pc.patience) + "|seed=" + std::to_string(seed);
    const std::string digest = sha256_hex(key);
    if (manifest_->is_current(stage, digest)) {
        log("run-tasks " + cell.name + ": up to date");
        return;
    }
    const auto t0 = Clock::now();
    const std::size_t dim = cell.type == EncoderKind::External ? encoder->sentence_dim() : cell.dim;

    std::vector<Variant> variants;
    for (TaskKind t : config_.tasks) {
        variants.push_back({t, "original"});
    }
    const bool has_order =
        std::find(config_.tasks.begin(), config_.tasks.end(), TaskKind::Order) != config_.tasks.end();
    const bool has_length =
        std::find(config_.tasks.begin(), config_.tasks.end(), TaskKind::Length) != config_.tasks.end();
    if (config_.control_order_no_sentence && has_order) {
        variants.push_back({TaskKind::OrderNoSentence, "original"});
    }
    std::unique_ptr<SentenceEncoder> permuted_encoder;
    if (config_.control_permuted) {
        if (cell.type == EncoderKind::External) {
            permuted_encoder = load_encoder(cell, data.vocab, true);
            if (!permuted_encoder) {
                log("run-tasks " + cell.name +
                    ": permuted control skipped (no permuted_sentence_vectors file)");
            }
        }
        if (cell.type != EncoderKind::External || permuted_encoder) {
            for (TaskKind t : config_.tasks) {
                variants.push_back({t, "permuted"});
            }
        }
    }
    if (config_.control_synthetic && has_length && cell.type == EncoderKind::Cbow) {
        variants.push_back({TaskKind::Length, "synthetic"});
    }

    struct Splits {
        std::vector<Sentence> train, dev, test;
    };
    std::map<std::string, Splits> corpora;
    corpora["original"] = {data.probe.train, data.probe.dev, data.probe.test};
    if (config_.control_permuted) {
        const std::uint64_t ps = derive_seed(seed, kPermuteStream);
        corpora["permuted"] = {permuted_copy(data.probe.train, ps),
                               permuted_copy(data.probe.dev, ps), permuted_copy(data.probe.test, ps)};
    }
    if (config_.control_synthetic) {
        const std::uint64_t ss = derive_seed(seed, kSyntheticStream);
        corpora["synthetic"] = {synthetic_copy(data.probe.train, data.vocab, ss, config_.bounds),
                                synthetic_copy(data.probe.dev, data.vocab, ss, config_.bounds),
                                synthetic_copy(data.probe.test, data.vocab, ss, config_.bounds)};
    }

    std::map<std::string, std::optional<double>> bleu_by_control;
    std::map<std::string, double> spearman_by_control;
    std::vector<fs::path> artifacts;
    const fs::path curves = out() / "curves";
    for (const std::string control : {"original", "permuted", "synthetic"}) {
        if (!corpora.count(control)) {
            continue;
        }
        const SentenceEncoder* enc =
            control == "permuted" && permuted_encoder ? permuted_encoder.get() : encoder.get();
        if (control == "permuted" && cell.type == EncoderKind::External && !permuted_encoder) {
            continue;
        }
        if (control == "synthetic" && cell.type != EncoderKind::Cbow) {
            continue;
        }
        const auto& test = corpora[control].test;
        const auto vectors = encode_all(*enc, test, 1);
        const fs::path norm_path = curves / ("norm_length-" + cell.name + "-" + control + ".csv");
        write_file(norm_path, curve_csv(norm_length_curve(test, vectors), "length"));
        artifacts.push_back(norm_path);
        try {
            spearman_by_control[control] = length_norm_spearman(test, vectors);
        } catch (const DegenerateError&) {
        }
        if (cell.type == EncoderKind::Ed && control != "synthetic") {
            const auto& model = static_cast<const EdEncoder&>(*encoder).model();
            std::vector<std::vector<TokenId>> cands, refs;
            for (const auto& s : test) {
                cands.push_back(ed_reconstruct(model, s));
                refs.push_back(s.tokens);
            }
            bleu_by_control[control] = bleu(cands, refs).score;
        }
    }

    ProbeTrainConfig probe_cfg = config_.probe;
    probe_cfg.seed = derive_seed(seed, kProbeStream);
    std::vector<ResultRow> rows;
    for (const auto& v : variants) {
        const std::string label = variant_label(v);
        const bool needs_words = v.task != TaskKind::Length;
        const SentenceEncoder* enc =
            v.control == "permuted" && permuted_encoder ? permuted_encoder.get() : encoder.get();
        if (needs_words && !enc->has_word_vectors()) {
            log("run-tasks " + cell.name + ": " + label + " skipped (encoder has no word vectors)");
            continue;
        }
        const auto& split = corpora.at(v.control);
        const std::uint64_t task_seed =
            derive_seed(seed, kTaskStream + static_cast<std::uint64_t>(v.task == TaskKind::OrderNoSentence
                                                                             ? TaskKind::Order
                                                                             : v.task));
        TaskDataset train = gen_task(v.task, split.train, *enc, task_seed);
        TaskDataset dev = gen_task(v.task, split.dev, *enc, task_seed);
        TaskDataset test = gen_task(v.task, split.test, *enc, task_seed);
        const auto trained = probe_train(train, dev, probe_cfg);
        const auto ev = probe_eval(trained.model, test);
        const double baseline = constant_class_eval(test, majority_class(test)).accuracy;

        const std::string stem = cell.name + "-" + to_string(v.task) + "-" + v.control;
        const fs::path bits_path = out() / "results" / "correct" / (stem + ".bits");
        const fs::path task_dir = out() / "tasks" / cell.name;
        write_file(bits_path, bits_text(ev.correct));
        artifacts.push_back(bits_path);
        for (const auto& [name, ds] : {std::pair<const char*, const TaskDataset*>{"train", &train},
                                       {"dev", &dev}, {"test", &test}}) {
            const fs::path p = task_dir / (to_string(v.task) + "-" + v.control + "-" + name + ".jsonl");
            write_file(p, task_dataset_to_jsonl(*ds));
            artifacts.push_back(p);
        }
        if (v.task == TaskKind::Content && v.control == "original") {
            const fs::path p = curves / ("content_by_length-" + cell.name + ".csv");
            write_file(p, curve_csv(content_accuracy_by_length(ev.correct, test, split.test), "bin"));
            artifacts.push_back(p);
        }

        ResultRow row;
        row.task = label;
        row.encoder = to_string(cell.type);
        row.dim = dim;
        row.split = "test";
        row.n = test.instances.size();
        row.accuracy = ev.accuracy;
        row.baseline = baseline;
        if (auto it = bleu_by_control.find(v.control); it != bleu_by_control.end()) {
            row.bleu = it->second;
        }
        row.seed = seed;
        row.checkpoint_digest = enc->digest();
        row.meta["cell"] = cell.name;
        row.meta["base_task"] = to_string(v.task);
        row.meta["control"] = v.control;
        row.meta["k"] = test.k;
        row.meta["d"] = test.d;
        row.meta["input_dim"] = test.input_dim();
        row.meta["task_seed"] = task_seed;
        row.meta["probe_seed"] = probe_cfg.seed;
        row.meta["probe_best_epoch"] = trained.best_epoch;
        row.meta["probe_epochs"] = trained.curve.size();
        row.meta["probe_best_dev_loss"] = trained.best_dev_loss;
        row.meta["train_n"] = train.instances.size();
        row.meta["dev_n"] = dev.instances.size();
        row.meta["skipped_sentences"] = train.skipped.size() + dev.skipped.size() + test.skipped.size();
        row.meta["correct_digest"] = sha256_hex(bits_text(ev.correct));
        if (v.task == TaskKind::Length) {
            if (auto it = spearman_by_control.find(v.control); it != spearman_by_control.end()) {
                row.meta["length_norm_spearman"] = it->second;
            }
        }
        log("run-tasks " + cell.name + ": " + label + " accuracy " + format_double(ev.accuracy) +
            " (baseline " + format_double(baseline) + ")");
        rows.push_back(std::move(row));
    }
    const fs::path result_path = out() / "results" / (cell.name + ".jsonl");
    write_file(result_path, report_jsonl(rows));
    artifacts.insert(artifacts.begin(), result_path);
    manifest_->record(stage, digest, artifacts, seconds_since(t0));
}

void Pipeline::run_tasks() {
    const PreparedCorpus data = load_prepared();
    for_each_cell(cells(), [&](const EncoderCell& c) { run_cell(c, data); });
}

void Pipeline::report() {
    const auto t0 = Clock::now();
    const auto all = cells();
    std::vector<ResultRow> rows;
    for (const auto& c : all) {
        const fs::path p = out() / "results" / (c.name + ".jsonl");
        if (!fs::exists(p)) {
            throw ConfigError("missing probe results " + p.string() + "; run run-tasks first");
        }
        for (auto& r : rows_from_jsonl(read_file(p))) {
            rows.push_back(std::move(r));
        }
    }
    const fs::path dir = out() / "report";
    emit_report(rows, dir);

    auto bits_for = [&](const std::string& cell, TaskKind task) -> std::optional<std::vector<std::uint8_t>> {
        const fs::path p = out() / "results" / "correct" /
                           (cell + "-" + to_string(task) + "-original.bits");
        if (!fs::exists(p)) {
            return std::nullopt;
        }
        return bits_from_text(read_file(p));
    };
    std::vector<TaskKind> tasks = config_.tasks;
    if (config_.control_order_no_sentence &&
        std::find(tasks.begin(), tasks.end(), TaskKind::Order) != tasks.end()) {
        tasks.push_back(TaskKind::OrderNoSentence);
    }
    std::vector<SignificanceCell> sig;
    if (all.size() < 2) {
        log("report: fewer than two encoder cells, significance tests skipped");
    } else {
        std::map<EncoderKind, std::vector<std::size_t>> dims;
        for (const auto& c : all) {
            if (c.type != EncoderKind::External) {
                dims[c.type].push_back(c.dim);
            }
        }
        for (auto& [type, ds] : dims) {
            std::sort(ds.begin(), ds.end());
        }
        for (TaskKind task : tasks) {
            const std::string tname = to_string(task);
            for (std::size_t d : dims[EncoderKind::Ed]) {
                const auto& cbow_dims = dims[EncoderKind::Cbow];
                if (std::find(cbow_dims.begin(), cbow_dims.end(), d) == cbow_dims.end()) {
                    continue;
                }
                const std::string a = "ed-" + std::to_string(d), b = "cbow-" + std::to_string(d);
                auto ba = bits_for(a, task), bb = bits_for(b, task);
                if (ba && bb) {
                    sig.push_back(compare_cells(tname, a, *ba, b, *bb));
                }
            }
            for (EncoderKind type : {EncoderKind::Ed, EncoderKind::Cbow}) {
                const auto& ds = dims[type];
                for (std::size_t i = 0; i + 1 < ds.size(); ++i) {
                    const std::string a = to_string(type) + "-" + std::to_string(ds[i]);
                    const std::string b = to_string(type) + "-" + std::to_string(ds[i + 1]);
                    auto ba = bits_for(a, task), bb = bits_for(b, task);
                    if (ba && bb) {
                        sig.push_back(compare_cells(tname, a, *ba, b, *bb));
                    }
                }
            }
        }
    }
    write_file(dir / "significance.csv", significance_csv(sig));
    manifest_->record("report", sha256_hex(report_csv(rows)),
                      {dir / "report.csv", dir / "report.jsonl", dir / "published_reference.csv",
                       dir / "significance.csv"},
                      seconds_since(t0));
    log("report: " + std::to_string(rows.size()) + " rows written to " + (dir / "report.csv").string());
}

void Pipeline::run_all() {
    train_encoders();
    run_tasks();
    report();
}

} // namespace sembprobe
