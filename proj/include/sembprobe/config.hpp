#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sembprobe/corpus.hpp"
#include "sembprobe/ed_model.hpp"
#include "sembprobe/encoder.hpp"
#include "sembprobe/probe.hpp"
#include "sembprobe/skipgram.hpp"
#include "sembprobe/tasks.hpp"

namespace sembprobe {

enum class Profile { Desk, Paper };

Profile profile_from_string(std::string_view name);
std::string to_string(Profile p);

struct EncoderSpec {
    EncoderKind type = EncoderKind::Cbow;
    std::vector<std::size_t> dims;
    /// External encoders only.
    std::filesystem::path sentence_vectors;
    std::filesystem::path word_vectors;
    std::filesystem::path permuted_sentence_vectors;
};

struct ExperimentConfig {
    Profile profile = Profile::Desk;
    std::optional<std::uint64_t> seed;

    std::filesystem::path corpus_path;
    bool pretokenized = false;
    /// Used when corpus_path is empty: built-in generated language.
    std::size_t generate_sentences = 12000;
    LengthBounds bounds;
    std::size_t vocab_cap = Vocabulary::kDefaultCap;
    SplitSizes split = SplitSizes::desk();
    /// Sentences held out from encoder training for early stopping.
    std::size_t encoder_dev = 1000;

    std::vector<EncoderSpec> encoders;
    std::vector<TaskKind> tasks{TaskKind::Length, TaskKind::Content, TaskKind::Order};
    bool control_permuted = true;
    bool control_synthetic = true;
    bool control_order_no_sentence = true;

    SkipGramConfig skipgram;
    EdConfig ed;
    ProbeTrainConfig probe;

    std::filesystem::path out_dir = "runs/desk";

    std::uint64_t seed_value() const;
};

/// Profile defaults before any config file is applied.
ExperimentConfig default_config(Profile profile);

/// Applies "key=value" lines ('#' comments) over the given defaults.
/// Errors name the offending line.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base);
ExperimentConfig load_config(const std::filesystem::path& path, Profile profile);

/// Fills defaulted encoder lists and checks paths, ranges and the seed.
void validate_config(ExperimentConfig& config);

/// Canonical key=value rendering; stable across runs.
std::string config_to_text(const ExperimentConfig& config);

} // namespace sembprobe
