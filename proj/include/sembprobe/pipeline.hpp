#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sembprobe/config.hpp"
#include "sembprobe/report.hpp"

namespace sembprobe {

inline constexpr const char* kToolVersion = "0.1.0";

struct PreparedCorpus {
    Vocabulary vocab;
    std::vector<Sentence> sentences;
    std::vector<Sentence> encoder_train;
    std::vector<Sentence> encoder_dev;
    CorpusSplit probe;
};

/// One trained representation: an encoder type at one dimension.
struct EncoderCell {
    std::size_t spec_index = 0;
    EncoderKind type = EncoderKind::Cbow;
    std::size_t dim = 0;
    std::string name;
};

struct PipelineOptions {
    std::size_t jobs = 1;
    /// Progress messages; silent when empty.
    std::function<void(const std::string&)> log;
    /// Called after each saved encoder-decoder epoch; throwing from it
    /// interrupts training with the epoch state already on disk.
    std::function<void(const std::string& cell, std::size_t epoch)> after_ed_epoch;
};

/// Digest-tracked record of every stage and the files it produced.
class RunManifest {
public:
    explicit RunManifest(std::filesystem::path root);

    /// True when the stage ran with the same input digest and every listed
    /// artifact still has its recorded digest.
    bool is_current(const std::string& stage, const std::string& input_digest) const;
    void record(const std::string& stage, const std::string& input_digest,
                const std::vector<std::filesystem::path>& artifacts, double seconds);
    std::string artifact_digest(const std::string& stage, const std::string& rel_path) const;
    void set_config_digest(const std::string& digest);
    void save() const;

private:
    std::filesystem::path root_;
    nlohmann::ordered_json data_;
    mutable std::mutex mutex_;
};

class Pipeline {
public:
    Pipeline(ExperimentConfig config, PipelineOptions options = {});

    const ExperimentConfig& config() const noexcept { return config_; }
    const std::filesystem::path& out() const noexcept { return config_.out_dir; }
    std::vector<EncoderCell> cells() const;

    void prepare();
    /// All encoders, or only those of one encoder.N entry.
    void train_encoders(std::optional<std::size_t> spec_index = std::nullopt);
    void run_tasks();
    void report();
    void run_all();

    PreparedCorpus load_prepared() const;
    std::unique_ptr<SentenceEncoder> load_encoder(const EncoderCell& cell, const Vocabulary& vocab,
                                                  bool permuted = false) const;

private:
    void log(const std::string& msg) const;
    std::string prepare_digest() const;
    std::string encoder_input_digest(const EncoderCell& cell) const;
    void train_cell(const EncoderCell& cell, const PreparedCorpus& data);
    void run_cell(const EncoderCell& cell, const PreparedCorpus& data);
    template <class Fn>
    void for_each_cell(const std::vector<EncoderCell>& cells, Fn fn);

    ExperimentConfig config_;
    PipelineOptions options_;
    std::unique_ptr<RunManifest> manifest_;
};

} // namespace sembprobe
