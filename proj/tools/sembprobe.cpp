#include <cstdlib>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sembprobe/config.hpp"
#include "sembprobe/error.hpp"
#include "sembprobe/pipeline.hpp"
#include "sembprobe/selfcheck.hpp"

using namespace sembprobe;

namespace {

enum Exit : int { kOk = 0, kValidation = 1, kRuntime = 2, kCheckFailed = 3 };

struct GlobalFlags {
    std::string config;
    std::string profile = "desk";
    std::size_t jobs = 1;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quiet = false;
};

ExperimentConfig resolve_config(const GlobalFlags& flags) {
    const Profile profile = profile_from_string(flags.profile);
    ExperimentConfig cfg =
        flags.config.empty() ? default_config(profile) : load_config(flags.config, profile);
    if (flags.seed) {
        cfg.seed = flags.seed;
    }
    if (!flags.out.empty()) {
        cfg.out_dir = flags.out;
    }
    if (cfg.profile == Profile::Paper) {
        std::cerr << "warning: the paper profile trains on up to 1M sentences with encoders up to "
                     "dimension 1000; expect days of compute per encoder\n";
    }
    return cfg;
}

Pipeline make_pipeline(const GlobalFlags& flags) {
    static std::mutex log_mutex;
    PipelineOptions opts;
    opts.jobs = flags.jobs;
    if (!flags.quiet) {
        opts.log = [](const std::string& msg) {
            std::lock_guard lock(log_mutex);
            std::cerr << msg << '\n';
        };
    }
    return Pipeline(resolve_config(flags), opts);
}

int run_selfcheck_cmd() {
    bool ok = true;
    for (const auto& c : run_selfcheck()) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.seconds << " s) "
                  << c.detail << '\n';
        ok = ok && c.passed;
    }
    return ok ? kOk : kCheckFailed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probing sentence embeddings for length, word content and word order"};
    app.require_subcommand(1);
    GlobalFlags flags;
    app.add_option("--config", flags.config, "Experiment config (key=value lines)")
        ->check(CLI::ExistingFile);
    app.add_option("--profile", flags.profile, "Scale profile")
        ->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--jobs", flags.jobs, "Worker threads across encoder cells")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", flags.seed, "Seed (overrides the config)");
    app.add_option("--out", flags.out, "Output directory (overrides the config)");
    app.add_flag("-q,--quiet", flags.quiet, "No progress messages");

    auto* prepare = app.add_subcommand("prepare", "Tokenize, filter, build vocabulary and splits");
    auto* train = app.add_subcommand("train-encoder", "Train encoder checkpoints");
    std::optional<std::size_t> encoder_index;
    train->add_option("--encoder", encoder_index, "Only the encoder.N entry of the config");
    auto* tasks = app.add_subcommand("run-tasks", "Generate task data, train and evaluate probes");
    auto* report = app.add_subcommand("report", "Write report CSV/JSONL and significance tests");
    auto* all = app.add_subcommand("all", "prepare, train-encoder, run-tasks and report");
    auto* config_cmd = app.add_subcommand("show-config", "Print the resolved config");
    auto* selfcheck = app.add_subcommand("selfcheck", "Gradient checks and oracle suites");
    for (auto* sub : app.get_subcommands({})) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (selfcheck->parsed()) {
            return run_selfcheck_cmd();
        }
        if (config_cmd->parsed()) {
            ExperimentConfig cfg = resolve_config(flags);
            validate_config(cfg);
            std::cout << config_to_text(cfg);
            return kOk;
        }
        Pipeline pipeline = make_pipeline(flags);
        if (prepare->parsed()) {
            pipeline.prepare();
        } else if (train->parsed()) {
            pipeline.train_encoders(encoder_index);
        } else if (tasks->parsed()) {
            pipeline.run_tasks();
        } else if (report->parsed()) {
            pipeline.report();
        } else if (all->parsed()) {
            pipeline.run_all();
        }
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
}
