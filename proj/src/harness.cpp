#include "se3/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "se3/error.hpp"
#include "se3/parallel.hpp"
#include "se3/spherical_harmonics.hpp"
#include "se3/training.hpp"
#include "se3/verify.hpp"

namespace se3 {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory: " + dir + (ec ? " (" + ec.message() + ")" : ""));
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

struct Check {
    std::string name;
    double value;
    double tolerance;
};

json check_report(const std::vector<Check>& checks, int& exit_code) {
    json out = json::array();
    bool all = true;
    for (const Check& c : checks) {
        const bool pass = std::isfinite(c.value) && c.value < c.tolerance;
        all = all && pass;
        out.push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", pass}});
    }
    exit_code = all ? kExitOk : kExitTolerance;
    return out;
}

Dataset read_dataset(const RunConfig& c) {
    const std::string manifest = c.data.dir + "/manifest.json";
    if (fs::exists(manifest)) {
        json m;
        try {
            m = json::parse(read_text(manifest));
        } catch (const json::parse_error&) {
            throw IoError("corrupt manifest: " + manifest);
        }
        const std::string want = c.data.sim.hash();
        if (m.value("config_hash", std::string{}) != want) {
            throw ConfigError("data: " + c.data.dir + " was generated with simulation config " +
                              m.value("config_hash", std::string{"?"}) + ", the config describes " + want);
        }
    }
    return {read_samples(c.data.train_path()), read_samples(c.data.test_path())};
}

std::vector<State> linear_predictions(const SimConfig& sim, std::span<const Sample> samples) {
    std::vector<State> out;
    for (const Sample& s : samples) out.push_back(linear_baseline(sim, s));
    return out;
}

std::vector<Direction> random_directions(std::size_t n, std::mt19937_64& rng) {
    std::vector<Direction> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(Direction::from_vector(random_direction(rng)));
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace

double loglog_r2(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw ArgumentError("loglog_r2: need at least two paired points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx, dy = std::log(y[i]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (syy == 0.0) return 1.0;
    return sxy * sxy / (sxx * syy);
}

CommandResult cmd_gen_data(const RunConfig& c) {
    c.validate();
    const auto t0 = Clock::now();
    ensure_dir(c.data.dir);
    const Dataset ds = make_dataset(c.data.sim, c.data.n_train, c.data.n_test, c.data_seed());
    write_samples(c.data.train_path(), ds.train);
    write_samples(c.data.test_path(), ds.test);
    write_text(c.data.dir + "/config.toml", render_run_config(c));
    json files = json::object();
    for (const auto& [split, path, n] : {std::tuple{"train", c.data.train_path(), ds.train.size()},
                                        std::tuple{"test", c.data.test_path(), ds.test.size()}}) {
        files[split] = {{"path", path}, {"samples", n}, {"fnv1a", hex(fnv1a(read_text(path)))}};
    }
    const json sim = to_json(c)["data"];
    json manifest = {{"config_hash", c.data.sim.hash()}, {"seed", c.data_seed()}, {"files", files}, {"data", sim}};
    write_text(c.data.dir + "/manifest.json", manifest.dump(2) + "\n");

    const StateError lin = mse(linear_predictions(c.data.sim, ds.test), ds.test);
    manifest["linear_mse_position"] = lin.position;
    manifest["linear_mse_velocity"] = lin.velocity;
    manifest["seconds"] = seconds_since(t0);
    return {manifest, kExitOk};
}

CommandResult cmd_train(const RunConfig& c, const TrainOptions& opt) {
    c.validate();
    const auto t0 = Clock::now();
    const Dataset ds = read_dataset(c);
    Trainer trainer = opt.resume ? Trainer::load(*opt.resume, c) : Trainer(c, fit_normalization(c.data.sim, ds.train));
    ensure_dir(c.output_dir);
    write_text(c.output_dir + "/config.toml", render_run_config(c));
    const std::string log_path = c.output_dir + "/metrics.jsonl";
    std::ofstream log(log_path, opt.resume ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot open for writing: " + log_path);
    const std::string ckpt = c.output_dir + "/checkpoint.bin";

    const std::size_t n_val = std::min(c.train.eval_samples, ds.test.size());
    const std::span<const Sample> val(ds.test.data(), n_val);
    json last = json::object();
    auto checkpoint = [&](const json& extra) {
        trainer.save(ckpt, extra);
        json side = extra;
        side["config"] = to_json(trainer.config());
        side["normalization"] = to_json(trainer.normalization());
        side["step"] = trainer.steps_done();
        side["parameters"] = trainer.store().parameter_count();
        side["checkpoint"] = ckpt;
        write_text(c.output_dir + "/checkpoint.json", side.dump(2) + "\n");
    };

    double acc = 0.0;
    std::size_t count = 0;
    while (trainer.steps_done() < c.train.steps) {
        try {
            acc += trainer.step(ds.train);
        } catch (const NumericError& e) {
            checkpoint({{"aborted", e.what()}});
            return {{{"error", e.what()}, {"step", trainer.steps_done()}, {"checkpoint", ckpt}}, kExitTolerance};
        }
        ++count;
        const std::size_t s = trainer.steps_done();
        if (s % c.train.log_interval == 0 || s == c.train.steps) {
            const StateError e = mse(predict(trainer.model(), trainer.store(), val, c.data.sim, trainer.normalization()), val);
            last = {{"step", s},
                    {"train_loss", acc / static_cast<double>(count)},
                    {"val_mse_position", e.position},
                    {"val_mse_velocity", e.velocity},
                    {"elapsed_seconds", seconds_since(t0)}};
            log << last.dump() << '\n';
            log.flush();
            if (!opt.quiet) std::cerr << last.dump() << '\n';
            acc = 0.0;
            count = 0;
        }
        if (s % c.train.checkpoint_interval == 0 && s != c.train.steps) checkpoint(json::object());
    }
    checkpoint({{"final", last}});
    return {{{"step", trainer.steps_done()},
             {"checkpoint", ckpt},
             {"metrics", log_path},
             {"parameters", trainer.store().parameter_count()},
             {"last", last},
             {"seconds", seconds_since(t0)}},
            kExitOk};
}

CommandResult cmd_eval(const RunConfig& c, const EvalOptions& opt) {
    c.validate();
    const std::string ckpt = opt.checkpoint.value_or(c.output_dir + "/checkpoint.bin");
    Dataset ds;
    ds.test = read_samples(c.data.test_path());
    if (opt.untrained) ds.train = read_samples(c.data.train_path());
    const Trainer trainer = opt.untrained ? Trainer(c, fit_normalization(c.data.sim, ds.train)) : Trainer::load(ckpt, c);
    const auto& sim = c.data.sim;
    const StateError e = mse(predict(trainer.model(), trainer.store(), ds.test, sim, trainer.normalization()), ds.test);
    const StateError lin = mse(linear_predictions(sim, ds.test), ds.test);
    std::mt19937_64 rng(mix_seed(c.seed(), 0x6576616c));
    const std::size_t n_eq = std::min(c.eval.samples, ds.test.size());
    const EquivarianceReport eq = equivariance_error(trainer.model(), trainer.store(), std::span(ds.test).first(n_eq), sim,
                                                     trainer.normalization(), c.eval.rotations, rng);
    json report = {{"mse_position", e.position},
                   {"mse_velocity", e.velocity},
                   {"delta_eq", eq.delta_eq},
                   {"delta_eq_max", eq.max_delta_eq},
                   {"max_alpha_change", eq.max_alpha_change},
                   {"n_samples", ds.test.size()},
                   {"seed", c.seed()},
                   {"linear_mse_position", lin.position},
                   {"linear_mse_velocity", lin.velocity},
                   {"position_ratio", e.position / lin.position},
                   {"velocity_ratio", e.velocity / lin.velocity},
                   {"rotations", c.eval.rotations},
                   {"equivariance_samples", n_eq},
                   {"architecture", architecture_name(c.model.arch)},
                   {"step", trainer.steps_done()},
                   {"checkpoint", opt.untrained ? json(nullptr) : json(ckpt)}};
    bool finite = true;
    for (const char* k : {"mse_position", "mse_velocity", "delta_eq"}) finite = finite && std::isfinite(report[k].get<double>());
    return {report, finite ? kExitOk : kExitTolerance};
}

CommandResult cmd_check_equivariance(const RunConfig& config, bool break_equivariance) {
    RunConfig c = config;
    c.model.basis.break_equivariance = c.model.basis.break_equivariance || break_equivariance;
    c.validate();
    const auto t0 = Clock::now();
    std::mt19937_64 rng(mix_seed(c.seed(), 0x636865636b));
    const std::vector<Sample> samples = make_samples(c.data.sim, mix_seed(c.seed(), 0x73616d70), 10);
    const Normalization norm = fit_normalization(c.data.sim, samples);
    ParamStore store;
    const TaskModel model(c.model, store, mix_seed(c.seed(), 0x6d6f64656c));
    const EquivarianceReport eq = equivariance_error(model, store, samples, c.data.sim, norm, 20, rng, true);

    std::vector<Check> checks;
    for (std::size_t i = 0; i < eq.layer_delta_eq.size(); ++i) checks.push_back({"layer" + std::to_string(i) + "_delta_eq", eq.layer_delta_eq[i], 1e-9});
    checks.push_back({"end_to_end_delta_eq", eq.max_delta_eq, 1e-9});
    if (c.model.arch == Architecture::Se3Transformer) checks.push_back({"attention_weight_change", eq.max_alpha_change, 1e-10});
    checks.push_back({"kernel_constraint", kernel_constraint_residual(3, 50, rng, c.model.basis), 1e-9});
    checks.push_back({"wigner_homomorphism", wigner_homomorphism_residual(4, 50, rng), 1e-9});
    checks.push_back({"wigner_orthogonality", wigner_orthogonality_residual(4, 50, rng), 1e-9});
    checks.push_back({"cg_decomposition", cg_decomposition_residual(3, 5, rng), 1e-9});
    checks.push_back({"sh_rotation", sh_rotation_residual(6, 1000, rng), 1e-9});
    int code = kExitOk;
    json report = {{"checks", check_report(checks, code)},
                   {"architecture", architecture_name(c.model.arch)},
                   {"break_equivariance", c.model.basis.break_equivariance},
                   {"seed", c.seed()},
                   {"seconds", seconds_since(t0)}};
    report["pass"] = code == kExitOk;
    return {report, code};
}

CommandResult cmd_bench_sh(const BenchOptions& opt) {
    if (opt.repeats == 0 || opt.degrees.empty() || opt.points.empty()) throw ConfigError("bench-sh: empty sweep");
    std::mt19937_64 rng(opt.seed);
    json rows = json::array();
    json fits = json::object();
    double headline = 0.0;
    const int top = *std::max_element(opt.degrees.begin(), opt.degrees.end());
    const std::size_t most = *std::max_element(opt.points.begin(), opt.points.end());
    for (int deg : opt.degrees) {
        std::vector<double> xs, ys;
        for (std::size_t n : opt.points) {
            const std::vector<Direction> dirs = random_directions(n, rng);
            std::vector<ShArray> out;
            std::vector<double> memo, naive;
            sph_harm_batch_into(deg, dirs, opt.memoize, out);  // warm caches and storage
            for (std::size_t r = 0; r < opt.repeats; ++r) {
                auto t = Clock::now();
                if (opt.memoize) {
                    sph_harm_batch_into(deg, dirs, true, out);
                    memo.push_back(seconds_since(t));
                    t = Clock::now();
                }
                sph_harm_batch_into(deg, dirs, false, out);
                naive.push_back(seconds_since(t));
            }
            const auto spread = [](const std::vector<double>& t) {
                return (*std::max_element(t.begin(), t.end()) - *std::min_element(t.begin(), t.end())) / median(t);
            };
            const double v = *std::min_element(naive.begin(), naive.end());
            json row = {{"max_degree", deg}, {"points", n}, {"naive_seconds", v}, {"naive_spread", spread(naive)}};
            double fit_time = v;
            if (opt.memoize) {
                const double m = *std::min_element(memo.begin(), memo.end());
                row["memo_seconds"] = m;
                row["speedup"] = v / m;
                row["memo_points_per_second"] = static_cast<double>(n) / m;
                row["memo_spread"] = spread(memo);
                fit_time = m;
                if (deg == top && n == most) headline = v / m;
            }
            rows.push_back(row);
            xs.push_back(static_cast<double>(n));
            ys.push_back(fit_time);
        }
        if (xs.size() >= 2) fits[std::to_string(deg)] = loglog_r2(xs, ys);
    }
    // The speedup threshold only binds on the headline cell (J = 8, >= 1e5 points).
    const bool pass = !opt.memoize || !(top == 8 && most >= 100000) || headline >= 5.0;
    json report = {{"timings", rows}, {"loglog_r2", fits}, {"threads", thread_count()}, {"pass", pass}};
    if (opt.memoize) report["headline"] = {{"max_degree", top}, {"points", most}, {"speedup", headline}, {"threshold", 5.0}};
    return {report, pass ? kExitOk : kExitTolerance};
}

CommandResult cmd_bench_model(const RunConfig& config, const ModelBenchOptions& opt) {
    config.validate();
    if (opt.repeats == 0 || opt.points.empty()) throw ConfigError("bench-model: empty sweep");
    if (config.model.arch == Architecture::CoordinateMlp) throw ConfigError("model.architecture: bench-model needs an equivariant model");
    ParamStore store;
    ModelConfig mc = model_config(config.model);
    mc.edge_scalars = 0;
    const Model model = build_model(mc, store, mix_seed(config.seed(), 0x6d6f64656c));
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> g;
    json rows = json::array();
    std::vector<double> xs, ys;
    for (std::size_t n : opt.points) {
        ModelInput in;
        const double spread = std::cbrt(static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) in.positions.push_back({spread * g(rng), spread * g(rng), spread * g(rng)});
        for (const auto& [l, ch] : mc.input.entries()) {
            Tensor t({n, ch, static_cast<std::size_t>(2 * l + 1)});
            for (double& v : t.data) v = g(rng);
            in.features[l] = std::move(t);
        }
        in.graph = knn_neighborhoods(in.positions, opt.neighbors);
        std::vector<double> times;
        for (std::size_t r = 0; r <= opt.repeats; ++r) {
            const auto t0 = Clock::now();
            Tape tape;
            run_model(tape, store, model, in);
            if (r > 0) times.push_back(seconds_since(t0));  // first run warms caches
        }
        const double best = *std::min_element(times.begin(), times.end());
        rows.push_back({{"points", n}, {"edges", in.graph.edges()}, {"forward_seconds", best}});
        xs.push_back(static_cast<double>(n));
        ys.push_back(best);
    }
    json report = {{"timings", rows}, {"neighbors", opt.neighbors}, {"parameters", store.parameter_count()}, {"threads", thread_count()}};
    if (xs.size() >= 2) report["loglog_r2"] = loglog_r2(xs, ys);
    return {report, kExitOk};
}

CommandResult cmd_so3_verify(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Check> checks = {
        {"wigner_homomorphism", wigner_homomorphism_residual(4, 100, rng), 1e-9},
        {"wigner_orthogonality", wigner_orthogonality_residual(4, 100, rng), 1e-9},
        {"cg_decomposition", cg_decomposition_residual(3, 10, rng), 1e-9},
        {"kernel_constraint", kernel_constraint_residual(3, 50, rng), 1e-9},
        {"sh_oracle", sh_oracle_deviation(6, 10000, rng), 1e-10},
        {"sh_rotation", sh_rotation_residual(6, 1000, rng), 1e-10},
    };
    int code = kExitOk;
    json report = {{"checks", check_report(checks, code)}, {"seed", seed}};
    report["pass"] = code == kExitOk;
    return {report, code};
}

std::string render_human(const json& report) {
    std::ostringstream os;
    auto scalar = [](const json& v) {
        if (v.is_number_float()) {
            std::ostringstream s;
            s << std::setprecision(4) << v.get<double>();
            return s.str();
        }
        return v.is_string() ? v.get<std::string>() : v.dump();
    };
    for (const auto& [key, value] : report.items()) {
        if (value.is_array() && !value.empty() && value[0].is_object()) {
            os << key << ":\n";
            std::vector<std::string> cols;
            std::vector<std::size_t> width;
            for (const auto& [k, v] : value[0].items()) {
                cols.push_back(k);
                width.push_back(k.size());
            }
            for (const auto& row : value) {
                for (std::size_t c = 0; c < cols.size(); ++c) {
                    if (row.contains(cols[c])) width[c] = std::max(width[c], scalar(row[cols[c]]).size());
                }
            }
            for (std::size_t c = 0; c < cols.size(); ++c) os << "  " << std::setw(static_cast<int>(width[c])) << cols[c];
            os << '\n';
            for (const auto& row : value) {
                for (std::size_t c = 0; c < cols.size(); ++c) {
                    os << "  " << std::setw(static_cast<int>(width[c])) << (row.contains(cols[c]) ? scalar(row[cols[c]]) : "");
                }
                os << '\n';
            }
        } else if (value.is_object()) {
            os << key << ":\n";
            for (const auto& [k, v] : value.items()) os << "  " << std::setw(22) << std::left << k << std::right << ' ' << scalar(v) << '\n';
        } else {
            os << std::setw(24) << std::left << key << std::right << ' ' << scalar(value) << '\n';
        }
    }
    return os.str();
}

}  // namespace se3
