#include <iostream>

#include <CLI11.hpp>

#include "se3/error.hpp"
#include "se3/harness.hpp"
#include "se3/parallel.hpp"

using namespace se3;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;

    RunConfig load() const {
        RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        for (const auto& o : overrides) apply_override(c, o);
        if (seed) c.train.seed = *seed;
        return c;
    }
};

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("-c,--config", common.config_path, "Run config file (TOML-style)");
    cmd->add_option("--set", common.overrides, "Override a config value, e.g. --set train.steps=100")->take_all();
    cmd->add_option("--seed", common.seed, "Shorthand for --set train.seed=N");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SE(3)-equivariant attention: N-body data, training, evaluation and checks"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    int threads = 0;
    bool human = false;
    app.add_option("--threads", threads, "Worker cap (0 = hardware concurrency)")->envname("SE3_THREADS");
    app.add_flag("--human", human, "Print tables instead of JSON");

    Common common;
    auto* gen = app.add_subcommand("gen-data", "Simulate trajectories and write train/test JSONL plus a manifest");
    add_common(gen, common);

    TrainOptions train_opt;
    std::string resume;
    auto* train = app.add_subcommand("train", "Train the configured model; writes metrics.jsonl and checkpoint.bin");
    add_common(train, common);
    train->add_option("--resume", resume, "Continue from this checkpoint");
    bool verbose = false;
    train->add_flag("-v,--verbose", verbose, "Echo each metrics line to stderr");

    EvalOptions eval_opt;
    std::string checkpoint;
    auto* eval = app.add_subcommand("eval", "MSE against the linear baseline and Δ_EQ on the test split");
    add_common(eval, common);
    eval->add_option("--checkpoint", checkpoint, "Checkpoint (default: <output_dir>/checkpoint.bin)");
    eval->add_flag("--untrained", eval_opt.untrained, "Score a freshly initialized model");

    bool broken = false;
    auto* check = app.add_subcommand("check-equivariance", "Per-layer and end-to-end Δ_EQ plus algebraic residuals");
    add_common(check, common);
    check->add_flag("--break-equivariance", broken, "Negative control: corrupt one Clebsch-Gordan block");

    BenchOptions bench_opt;
    auto* bench_sh = app.add_subcommand("bench-sh", "Memoized vs naive spherical-harmonic throughput");
    bench_sh->add_option("--degrees,--j-max", bench_opt.degrees, "Maximum degrees to sweep")->delimiter(',');
    bench_sh->add_option("--points", bench_opt.points, "Point counts to sweep")->delimiter(',');
    bench_sh->add_option("--repeats,--repeat", bench_opt.repeats, "Timed repeats per cell (minimum is reported)");
    bench_sh->add_option("--bench-seed", bench_opt.seed, "Seed for the random directions");
    bool no_memo = false;
    bench_sh->add_flag("--no-memo", no_memo, "Time the naive recursion only");

    ModelBenchOptions model_opt;
    auto* bench_model = app.add_subcommand("bench-model", "Forward-pass wall-clock against point count");
    add_common(bench_model, common);
    bench_model->add_option("--points", model_opt.points, "Point counts to sweep")->delimiter(',');
    bench_model->add_option("--neighbors", model_opt.neighbors, "k of the kNN graph");
    bench_model->add_option("--repeats", model_opt.repeats, "Timed repeats per size");

    auto* so3 = app.add_subcommand("so3", "Representation-theory utilities");
    so3->require_subcommand(1);
    so3->fallthrough();
    std::uint64_t verify_seed = 0;
    auto* verify = so3->add_subcommand("verify", "Wigner-D, Clebsch-Gordan and spherical-harmonic residuals");
    verify->add_option("--seed", verify_seed, "Seed for random rotations and directions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (threads < 0) throw ConfigError("--threads: must be non-negative");
        if (threads > 0) set_thread_count(threads);
        CommandResult result;
        if (*gen) {
            result = cmd_gen_data(common.load());
        } else if (*train) {
            if (!resume.empty()) train_opt.resume = resume;
            train_opt.quiet = !verbose;
            result = cmd_train(common.load(), train_opt);
        } else if (*eval) {
            if (!checkpoint.empty()) eval_opt.checkpoint = checkpoint;
            result = cmd_eval(common.load(), eval_opt);
        } else if (*check) {
            result = cmd_check_equivariance(common.load(), broken);
        } else if (*bench_sh) {
            bench_opt.memoize = !no_memo;
            result = cmd_bench_sh(bench_opt);
        } else if (*bench_model) {
            result = cmd_bench_model(common.load(), model_opt);
        } else if (*verify) {
            result = cmd_so3_verify(verify_seed);
        }
        std::cout << (human ? render_human(result.report) : result.report.dump(2) + "\n");
        return result.exit_code;
    } catch (const IoError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "io"}}.dump() << '\n';
        return kExitIo;
    } catch (const NumericError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "numeric"}}.dump() << '\n';
        return kExitTolerance;
    } catch (const std::exception& e) {
        // ConfigError, ArgumentError, CapabilityError, DegenerateEdgeError: bad inputs.
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "usage"}}.dump() << '\n';
        return kExitUsage;
    }
}
