#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "sembprobe/config.hpp"
#include "sembprobe/digest.hpp"
#include "sembprobe/error.hpp"
#include "sembprobe/pipeline.hpp"
#include "sembprobe/report.hpp"

using namespace sembprobe;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("sembprobe-test-" + name);
    fs::remove_all(dir);
    return dir;
}

ExperimentConfig tiny_config(const fs::path& out) {
    ExperimentConfig cfg = parse_config(R"(
seed = 11
corpus.generate_sentences = 900
corpus.max_len = 16
split.train = 300
split.dev = 100
split.test = 100
split.encoder_dev = 60
skipgram.epochs = 1
ed.max_epochs = 3
ed.patience = 3
probe.max_epochs = 3
encoder.0.type = cbow
encoder.0.dims = 6
encoder.1.type = ed
encoder.1.dims = 6
)",
                                        default_config(Profile::Desk));
    cfg.out_dir = out;
    return cfg;
}

std::string message_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(Config, ErrorsNameTheLine) {
    const auto base = default_config(Profile::Desk);
    EXPECT_NE(message_of([&] { parse_config("seed = 1\nsplit.train = abc\n", base); })
                  .find("line 2"),
              std::string::npos);
    EXPECT_NE(message_of([&] { parse_config("# c\n\nbogus.key = 3\n", base); }).find("line 3"),
              std::string::npos);
    EXPECT_THROW(parse_config("no equals sign\n", base), ConfigError);
}

TEST(Config, SeedIsMandatory) {
    auto cfg = default_config(Profile::Desk);
    EXPECT_THROW(validate_config(cfg), ConfigError);
    cfg.seed = 3;
    EXPECT_NO_THROW(validate_config(cfg));
}

TEST(Config, PaperProfileConstants) {
    auto cfg = default_config(Profile::Paper);
    cfg.seed = 1;
    validate_config(cfg);
    EXPECT_EQ(cfg.generate_sentences, 1000000u);
    EXPECT_EQ(cfg.vocab_cap, 50000u);
    EXPECT_EQ(cfg.bounds.min, 5u);
    EXPECT_EQ(cfg.bounds.max, 70u);
    ASSERT_EQ(cfg.encoders.size(), 2u);
    EXPECT_EQ(cfg.encoders[0].dims, (std::vector<std::size_t>{100, 300, 500, 750, 1000}));
}

TEST(Config, DeskProfileSubstitutesSmallDims) {
    auto cfg = default_config(Profile::Desk);
    cfg.seed = 1;
    validate_config(cfg);
    EXPECT_EQ(cfg.encoders[1].dims, (std::vector<std::size_t>{16, 32, 64}));
}

TEST(Config, CanonicalTextRoundTrips) {
    auto cfg = tiny_config("/tmp/x");
    validate_config(cfg);
    auto again = parse_config(config_to_text(cfg), default_config(Profile::Desk));
    validate_config(again);
    EXPECT_EQ(config_to_text(again), config_to_text(cfg));
}

TEST(Pipeline, MissingCorpusFailsBeforeAnyWork) {
    const fs::path out = fresh_dir("missing");
    auto cfg = tiny_config(out);
    cfg.corpus_path = out / "nope.txt";
    EXPECT_THROW(Pipeline p(cfg), ConfigError);
    EXPECT_FALSE(fs::exists(out));
}

TEST(Pipeline, RunTasksWithoutCheckpointsFails) {
    const fs::path out = fresh_dir("nockpt");
    Pipeline p(tiny_config(out));
    p.prepare();
    EXPECT_THROW(p.run_tasks(), ConfigError);
}

TEST(Pipeline, EndToEndIsResumableAndComplete) {
    const fs::path out = fresh_dir("e2e");
    Pipeline p(tiny_config(out));
    p.run_all();
    const std::string csv = read_file(out / "report" / "report.csv");
    const auto rows = parse_report_csv(csv);
    std::set<std::pair<std::string, std::string>> cells;
    for (const auto& r : rows) {
        cells.insert({r.encoder + "-" + std::to_string(r.dim), r.task});
    }
    for (const std::string enc : {"cbow-6", "ed-6"}) {
        for (const std::string task : {"length", "content", "order", "order_no_sentence",
                                       "length:permuted", "content:permuted", "order:permuted"}) {
            EXPECT_TRUE(cells.count({enc, task})) << enc << " " << task;
        }
    }
    EXPECT_TRUE(cells.count({"cbow-6", "length:synthetic"}));
    EXPECT_FALSE(cells.count({"ed-6", "length:synthetic"}));
    for (const auto& r : rows) {
        EXPECT_EQ(r.bleu.has_value(), r.encoder == "ed") << r.task;
    }

    // Every artifact the manifest lists must match its digest.
    const auto manifest = nlohmann::json::parse(read_file(out / "manifest.json"));
    std::size_t listed = 0;
    for (const auto& [stage, entry] : manifest["stages"].items()) {
        for (const auto& [rel, digest] : entry["artifacts"].items()) {
            EXPECT_EQ(sha256_file(out / rel), digest.get<std::string>()) << rel;
            ++listed;
        }
    }
    EXPECT_GT(listed, 20u);
    EXPECT_TRUE(manifest.contains("config_digest"));
    EXPECT_EQ(manifest["tool_version"], kToolVersion);

    // A rerun retrains nothing.
    const auto model_time = fs::last_write_time(out / "models" / "ed-6.ckpt");
    std::vector<std::string> log;
    PipelineOptions opts;
    opts.log = [&](const std::string& m) { log.push_back(m); };
    Pipeline again(tiny_config(out), opts);
    again.run_all();
    EXPECT_EQ(fs::last_write_time(out / "models" / "ed-6.ckpt"), model_time);
    std::size_t up_to_date = 0;
    for (const auto& m : log) {
        up_to_date += m.find("up to date") != std::string::npos;
    }
    EXPECT_EQ(up_to_date, 1u + 2u + 2u);
    EXPECT_EQ(read_file(out / "report" / "report.csv"), csv);
}

TEST(Pipeline, InterruptedEncoderTrainingResumes) {
    const fs::path ref_dir = fresh_dir("resume-ref");
    Pipeline ref(tiny_config(ref_dir));
    ref.train_encoders(1);

    const fs::path out = fresh_dir("resume");
    PipelineOptions opts;
    opts.after_ed_epoch = [](const std::string&, std::size_t epoch) {
        if (epoch == 2) {
            throw std::runtime_error("killed");
        }
    };
    {
        Pipeline p(tiny_config(out), opts);
        EXPECT_THROW(p.train_encoders(1), std::runtime_error);
    }
    EXPECT_FALSE(fs::exists(out / "models" / "ed-6.ckpt"));
    std::vector<std::string> log;
    PipelineOptions resume_opts;
    resume_opts.log = [&](const std::string& m) { log.push_back(m); };
    Pipeline p(tiny_config(out), resume_opts);
    p.train_encoders(1);
    bool resumed = false;
    for (const auto& m : log) {
        resumed = resumed || m.find("resuming after epoch 2") != std::string::npos;
    }
    EXPECT_TRUE(resumed);
    EXPECT_EQ(sha256_file(out / "models" / "ed-6.ckpt"),
              sha256_file(ref_dir / "models" / "ed-6.ckpt"));
}

TEST(Pipeline, SingleCellSkipsSignificanceWithNotice) {
    const fs::path out = fresh_dir("single");
    auto cfg = tiny_config(out);
    cfg.encoders.resize(1);
    cfg.tasks = {TaskKind::Length};
    std::vector<std::string> log;
    PipelineOptions opts;
    opts.log = [&](const std::string& m) { log.push_back(m); };
    Pipeline p(cfg, opts);
    p.run_all();
    EXPECT_EQ(read_file(out / "report" / "significance.csv"),
              significance_csv({}));
    bool notice = false;
    for (const auto& m : log) {
        notice = notice || m.find("significance tests skipped") != std::string::npos;
    }
    EXPECT_TRUE(notice);
}

TEST(Pipeline, JobsDoNotChangeTheReport) {
    const fs::path a = fresh_dir("jobs1"), b = fresh_dir("jobs2");
    auto cfg = tiny_config(a);
    cfg.tasks = {TaskKind::Order};
    cfg.control_permuted = false;
    Pipeline(cfg).run_all();
    cfg.out_dir = b;
    PipelineOptions opts;
    opts.jobs = 2;
    Pipeline(cfg, opts).run_all();
    EXPECT_EQ(read_file(a / "report" / "report.csv"), read_file(b / "report" / "report.csv"));
}
