#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "se3/error.hpp"
#include "se3/harness.hpp"
#include "se3/training.hpp"

using namespace se3;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("se3_harness_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig tiny(const fs::path& root, std::uint64_t seed = 1) {
    RunConfig c;
    c.output_dir = (root / "run").string();
    c.data.dir = (root / "data").string();
    c.data.n_train = 40;
    c.data.n_test = 10;
    c.data.sim.horizon = 20;
    c.data.sim.start_range = 10;
    c.model.layers = 2;
    c.model.channels = 2;
    c.model.radial_hidden = 8;
    c.train.seed = seed;
    c.train.steps = 6;
    c.train.batch = 8;
    c.train.log_interval = 3;
    c.train.checkpoint_interval = 3;
    c.train.eval_samples = 5;
    c.eval.rotations = 3;
    c.eval.samples = 4;
    return c;
}

double full_loss(const Trainer& t, const std::vector<Sample>& samples) {
    const Encoded enc = encode(samples, t.config().data.sim, t.normalization(), t.config().model.plus_z);
    Tape tape;
    return task_loss(t.model().forward(tape, t.store(), enc).fields, enc).value().item();
}

const nlohmann::json& find_check(const nlohmann::json& report, const std::string& name) {
    for (const auto& c : report["checks"]) {
        if (c["name"] == name) return c;
    }
    throw std::runtime_error("no check " + name);
}

}  // namespace

TEST(RunConfigText, ParsesSectionsCommentsAndQuotedValues) {
    const RunConfig c = parse_run_config(
        "# comment\n"
        "output_dir = \"runs/x\"\n"
        "[data]\n"
        "n_train = 12  # trailing\n"
        "kappa = 0.5\n"
        "[model]\n"
        "architecture = \"tfn\"\n"
        "plus_z = true\n"
        "self_interaction = linear\n"
        "[train]\n"
        "seed = 9\n"
        "lr = 1e-4\n");
    EXPECT_EQ(c.output_dir, "runs/x");
    EXPECT_EQ(c.data.n_train, 12u);
    EXPECT_EQ(c.data.sim.kappa, 0.5);
    EXPECT_EQ(c.model.arch, Architecture::Tfn);
    EXPECT_TRUE(c.model.plus_z);
    EXPECT_EQ(c.train.seed, 9u);
    EXPECT_EQ(c.train.lr, 1e-4);
    EXPECT_EQ(c.data_seed(), 9u);
}

TEST(RunConfigText, ErrorsNameTheLineAndField) {
    auto message = [](const std::string& text) {
        try {
            parse_run_config(text, "cfg.toml");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message("[train]\nsede = 1\n").find("cfg.toml:2"), std::string::npos);
    EXPECT_NE(message("[train]\nsede = 1\n").find("sede"), std::string::npos);
    EXPECT_NE(message("[trian]\n").find("unknown section"), std::string::npos);
    EXPECT_NE(message("[data]\nn_train = -3\n").find("data.n_train"), std::string::npos);
    EXPECT_NE(message("[model]\narchitecture = \"mlp\"\n").find("model.architecture"), std::string::npos);
    EXPECT_NE(message("[data]\nn_train\n").find("key = value"), std::string::npos);
    EXPECT_THROW(load_run_config("/nonexistent/se3.toml"), IoError);
}

TEST(RunConfigText, SeedIsRequired) {
    RunConfig c;
    try {
        c.validate();
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("train.seed"), std::string::npos);
    }
}

TEST(RunConfigText, OverridesAndRoundTrips) {
    RunConfig c = tiny(fs::temp_directory_path());
    apply_override(c, "model.channels=5");
    apply_override(c, "output_dir=elsewhere");
    apply_override(c, "data.seed=77");
    EXPECT_EQ(c.model.channels, 5u);
    EXPECT_EQ(c.output_dir, "elsewhere");
    EXPECT_EQ(c.data_seed(), 77u);
    EXPECT_THROW(apply_override(c, "model.chanels=5"), ConfigError);
    EXPECT_THROW(apply_override(c, "model.channels"), ConfigError);
    EXPECT_EQ(to_json(parse_run_config(render_run_config(c))), to_json(c));
    EXPECT_EQ(to_json(run_config_from_json(to_json(c))), to_json(c));
}

TEST(Checkpoint, RoundTripsParametersAndOptimizerBitwise) {
    const fs::path root = scratch("ckpt");
    fs::create_directories(root);
    const RunConfig c = tiny(root);
    const std::vector<Sample> train = make_samples(c.data.sim, 3, 40);
    Trainer t(c, fit_normalization(c.data.sim, train));
    for (int i = 0; i < 3; ++i) t.step(train);
    const std::string path = (root / "a.bin").string();
    t.save(path);
    const Trainer r = Trainer::load(path, c);
    EXPECT_EQ(r.steps_done(), 3u);
    for (const std::string& name : t.store().names()) {
        EXPECT_EQ(r.store().value(name).data, t.store().value(name).data) << name;
        EXPECT_EQ(r.optimizer().first_moments().at(name).data, t.optimizer().first_moments().at(name).data);
        EXPECT_EQ(r.optimizer().second_moments().at(name).data, t.optimizer().second_moments().at(name).data);
    }
    EXPECT_EQ(to_json(r.normalization()), to_json(t.normalization()));

    RunConfig wider = c;
    wider.model.channels = 3;
    try {
        Trainer::load(path, wider);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("model.channels"), std::string::npos);
    }

    const std::string bytes = slurp(path);
    std::ofstream((root / "trunc.bin").string(), std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    EXPECT_THROW(read_checkpoint((root / "trunc.bin").string()), IoError);
    std::string bad = bytes;
    bad[0] = 'X';
    std::ofstream((root / "magic.bin").string(), std::ios::binary) << bad;
    EXPECT_THROW(read_checkpoint((root / "magic.bin").string()), IoError);
    std::string version = bytes;
    version[8] = 9;
    std::ofstream((root / "version.bin").string(), std::ios::binary) << version;
    EXPECT_THROW(read_checkpoint((root / "version.bin").string()), IoError);
    EXPECT_THROW(read_checkpoint((root / "missing.bin").string()), IoError);
}

TEST(Training, BatchesDependOnlyOnSeedAndStep) {
    EXPECT_EQ(batch_indices(4, 7, 16, 100), batch_indices(4, 7, 16, 100));
    EXPECT_NE(batch_indices(4, 7, 16, 100), batch_indices(4, 8, 16, 100));
    for (std::size_t i : batch_indices(4, 7, 16, 10)) EXPECT_LT(i, 10u);
    EXPECT_THROW(batch_indices(1, 0, 4, 0), ArgumentError);
}

TEST(Training, ResumeIsBitwiseIdenticalToUninterrupted) {
    const fs::path root = scratch("resume");
    fs::create_directories(root);
    const RunConfig c = tiny(root);
    const std::vector<Sample> train = make_samples(c.data.sim, 3, 40);
    const Normalization norm = fit_normalization(c.data.sim, train);
    Trainer straight(c, norm);
    for (int i = 0; i < 6; ++i) straight.step(train);
    Trainer first(c, norm);
    for (int i = 0; i < 3; ++i) first.step(train);
    first.save((root / "half.bin").string());
    Trainer second = Trainer::load((root / "half.bin").string(), c);
    for (int i = 0; i < 3; ++i) second.step(train);
    for (const std::string& name : straight.store().names()) {
        EXPECT_EQ(second.store().value(name).data, straight.store().value(name).data) << name;
    }
}

TEST(Training, TenStepsReduceTheLoss) {
    const fs::path root = scratch("loss");
    double before = 0.0, after = 0.0;
    for (std::uint64_t seed : {1, 2, 3}) {
        RunConfig c = tiny(root, seed);
        const std::vector<Sample> train = make_samples(c.data.sim, seed, 40);
        Trainer t(c, fit_normalization(c.data.sim, train));
        before += full_loss(t, train);
        for (int i = 0; i < 10; ++i) t.step(train);
        after += full_loss(t, train);
    }
    EXPECT_LT(after, before);
}

TEST(Training, NonFiniteParametersAbortTheStep) {
    const RunConfig c = tiny(fs::temp_directory_path());
    const std::vector<Sample> train = make_samples(c.data.sim, 3, 40);
    Trainer t(c, fit_normalization(c.data.sim, train));
    const std::string name = t.store().names().front();
    t.store().value(name)[0] = std::nan("");
    EXPECT_THROW(t.step(train), NumericError);
    EXPECT_EQ(t.steps_done(), 0u);
}

TEST(Commands, GenDataIsDeterministicAndReportsTheBaseline) {
    const fs::path a = scratch("gen_a"), b = scratch("gen_b");
    const CommandResult ra = cmd_gen_data(tiny(a)), rb = cmd_gen_data(tiny(b));
    EXPECT_EQ(ra.exit_code, kExitOk);
    EXPECT_TRUE(fs::exists(a / "data" / "manifest.json"));
    EXPECT_EQ(slurp(a / "data" / "train.jsonl"), slurp(b / "data" / "train.jsonl"));

    EXPECT_EQ(ra.report["files"]["train"]["fnv1a"], rb.report["files"]["train"]["fnv1a"]);
    EXPECT_EQ(ra.report["config_hash"], rb.report["config_hash"]);
    EXPECT_GT(ra.report["linear_mse_position"].get<double>(), 0.0);

    const fs::path c = scratch("gen_c");
    const CommandResult rc = cmd_gen_data(tiny(c, 2));
    EXPECT_NE(rc.report["files"]["train"]["fnv1a"], ra.report["files"]["train"]["fnv1a"]);
}

TEST(Commands, GenDataUnderARegularFileIsAnIoError) {
    const fs::path root = scratch("gen_io");
    fs::create_directories(root);
    std::ofstream(root / "file") << "x";
    RunConfig c = tiny(root);
    c.data.dir = (root / "file" / "data").string();
    EXPECT_THROW(cmd_gen_data(c), IoError);
}

TEST(Commands, TrainEvalAndResumeEndToEnd) {
    const fs::path root = scratch("e2e");
    RunConfig c = tiny(root);
    cmd_gen_data(c);
    const CommandResult tr = cmd_train(c);
    ASSERT_EQ(tr.exit_code, kExitOk);
    EXPECT_EQ(tr.report["step"], 6);
    EXPECT_TRUE(fs::exists(root / "run" / "checkpoint.bin"));
    EXPECT_TRUE(fs::exists(root / "run" / "checkpoint.json"));

    const CommandResult ev = cmd_eval(c);
    ASSERT_EQ(ev.exit_code, kExitOk);
    for (const char* key : {"mse_position", "mse_velocity", "delta_eq", "n_samples", "seed"}) EXPECT_TRUE(ev.report.contains(key)) << key;
    EXPECT_LT(ev.report["delta_eq"].get<double>(), 1e-9);
    EXPECT_EQ(ev.report["n_samples"], 10);

    RunConfig longer = c;
    longer.train.steps = 9;
    const CommandResult resumed = cmd_train(longer, {(root / "run" / "checkpoint.bin").string(), true});
    EXPECT_EQ(resumed.report["step"], 9);
    std::ifstream log(root / "run" / "metrics.jsonl");
    std::size_t lines = 0;
    for (std::string line; std::getline(log, line);) ++lines;
    EXPECT_EQ(lines, 3u);  // steps 3 and 6, then 9 appended on resume

    RunConfig mismatched = c;
    mismatched.model.channels = 4;
    try {
        cmd_eval(mismatched);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("model.channels"), std::string::npos);
    }

    RunConfig other_data = c;
    other_data.data.sim.kappa = 2.0;
    EXPECT_THROW(cmd_train(other_data), ConfigError);
}

TEST(Commands, CheckEquivariancePassesAndCatchesABrokenBasis) {
    RunConfig c = tiny(fs::temp_directory_path());
    c.data.sim.horizon = 5;
    const CommandResult ok = cmd_check_equivariance(c, false);
    EXPECT_EQ(ok.exit_code, kExitOk) << ok.report.dump(1);
    EXPECT_LT(find_check(ok.report, "layer0_delta_eq")["value"].get<double>(), 1e-9);
    const CommandResult broken = cmd_check_equivariance(c, true);
    EXPECT_EQ(broken.exit_code, kExitTolerance);
    EXPECT_FALSE(find_check(broken.report, "end_to_end_delta_eq")["pass"].get<bool>());
    EXPECT_FALSE(find_check(broken.report, "kernel_constraint")["pass"].get<bool>());
}

TEST(Commands, So3VerifyPasses) {
    const CommandResult r = cmd_so3_verify(5);
    EXPECT_EQ(r.exit_code, kExitOk) << r.report.dump(1);
}

TEST(Commands, SmallShBenchRuns) {
    BenchOptions o;
    o.degrees = {2, 4};
    o.points = {100, 1000};
    o.repeats = 1;
    const CommandResult r = cmd_bench_sh(o);
    EXPECT_EQ(r.report["timings"].size(), 4u);
    EXPECT_TRUE(r.report.contains("headline"));
    o.repeats = 0;
    EXPECT_THROW(cmd_bench_sh(o), ConfigError);
    EXPECT_FALSE(render_human(r.report).empty());
}

TEST(Commands, LogLogFit) {
    EXPECT_NEAR(loglog_r2({1, 2, 4, 8}, {3, 12, 48, 192}), 1.0, 1e-12);
    EXPECT_LT(loglog_r2({1, 2, 4, 8}, {5, 1, 9, 2}), 0.5);
    EXPECT_THROW(loglog_r2({1}, {1}), ArgumentError);
}
