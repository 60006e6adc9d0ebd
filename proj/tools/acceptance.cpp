// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
//
//   se3_acceptance [--config configs/nbody.toml] [--work-dir DIR] [--threads N]
//
// Criterion 8 trains the shipped desk-scale config from scratch (several minutes per core);
// criteria 1, 2 and 9 then reuse the trained checkpoint.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "se3/error.hpp"
#include "se3/harness.hpp"
#include "se3/parallel.hpp"
#include "se3/training.hpp"
#include "se3/verify.hpp"

using namespace se3;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double budget = 0.0;  // seconds; 0 = none
};

std::string sci(double v) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(2) << v;
    return os.str();
}

std::string fixed(double v, int digits = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double full_loss(const TaskModel& model, const ParamStore& store, const Encoded& enc) {
    Tape tape;
    return task_loss(model.forward(tape, store, enc).fields, enc).value().item();
}

struct GradWorst {
    double rel = 0.0, fd = 0.0, ad = 0.0;
    std::string name;
};

// Reverse-mode vs central differences on parameter entries drawn uniformly from all scalars.
GradWorst gradient_check(const RunConfig& c, std::span<const Sample> batch, const Normalization& norm, std::size_t picks,
                      std::mt19937_64& rng, double floor) {
    ParamStore store;
    const TaskModel model(c.model, store, mix_seed(c.seed(), 0x67726164));
    const Encoded enc = encode(batch, c.data.sim, norm, c.model.plus_z);
    Tape tape;
    tape.backward(task_loss(model.forward(tape, store, enc).fields, enc));
    store.zero_grad();
    tape.accumulate(store);

    std::vector<std::pair<std::string, std::size_t>> entries;
    for (const std::string& name : store.names()) {
        for (std::size_t i = 0; i < store.value(name).size(); ++i) entries.emplace_back(name, i);
    }
    const double h = 1e-5;
    GradWorst worst;
    std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
    for (std::size_t t = 0; t < picks; ++t) {
        const auto& [name, i] = entries[pick(rng)];
        Tensor& p = store.value(name);
        const double saved = p[i];
        p[i] = saved + h;
        const double fp = full_loss(model, store, enc);
        p[i] = saved - h;
        const double fm = full_loss(model, store, enc);
        p[i] = saved;
        const double fd = (fp - fm) / (2 * h), ad = store.grad(name)[i];
        const double rel = std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), floor});
        if (rel >= worst.rel) worst = {rel, fd, ad, name + "[" + std::to_string(i) + "]"};
    }
    return worst;
}

// Random clouds pushed through the model in original and permuted node order.
double permutation_error(const TaskModel& model, const ParamStore& store, const SimConfig& sim, const Normalization& norm,
                         std::size_t clouds, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    double worst = 0.0;
    for (std::size_t k = 0; k < clouds; ++k) {
        Sample s;
        for (std::size_t i = 0; i < sim.particles; ++i) {
            s.charges.push_back(rng() % 2 ? 1.0 : -1.0);
            s.input.positions.push_back({sim.box * gauss(rng), sim.box * gauss(rng), sim.box * gauss(rng)});
            s.input.velocities.push_back({gauss(rng), gauss(rng), gauss(rng)});
        }
        s.target = s.input;
        std::vector<std::size_t> perm(sim.particles);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Sample p = s;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            p.charges[i] = s.charges[perm[i]];
            p.input.positions[i] = s.input.positions[perm[i]];
            p.input.velocities[i] = s.input.velocities[perm[i]];
        }
        p.target = p.input;
        Tape ta, tb;
        const Tensor a = model.forward(ta, store, encode(std::span(&s, 1), sim, norm, false)).fields.value();
        const Tensor b = model.forward(tb, store, encode(std::span(&p, 1), sim, norm, false)).fields.value();
        for (std::size_t i = 0; i < perm.size(); ++i) {
            for (std::size_t j = 0; j < 6; ++j) worst = std::max(worst, std::abs(b[i * 6 + j] - a[perm[i] * 6 + j]));
        }
    }
    return worst;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-10"};
    std::string config_path = SE3_DEFAULT_CONFIG;
    std::string work_dir = "acceptance";
    int threads = 0;
    app.add_option("--config", config_path, "Desk-scale run config");
    app.add_option("--work-dir", work_dir, "Where data, checkpoints and metrics go");
    app.add_option("--threads", threads, "Worker cap (0 = hardware concurrency)")->envname("SE3_THREADS");
    CLI11_PARSE(app, argc, argv);
    if (threads > 0) set_thread_count(threads);

    std::map<int, Outcome> results;
    try {
        RunConfig c = load_run_config(config_path);
        c.data.dir = work_dir + "/data";
        c.output_dir = work_dir + "/se3";
        c.validate();
        std::cerr << "acceptance: " << thread_count() << " thread(s), config " << config_path << '\n';

        // 8 first: everything trained downstream reuses its checkpoint.
        {
            const auto t0 = Clock::now();
            cmd_gen_data(c);
            std::cerr << "acceptance: training " << c.train.steps << " steps...\n";
            const CommandResult tr = cmd_train(c, {std::nullopt, false});
            if (tr.exit_code != kExitOk) throw NumericError("training aborted: " + tr.report.dump());
            const nlohmann::json ev = cmd_eval(c).report;
            const double rx = ev["position_ratio"], rv = ev["velocity_ratio"];
            results[8] = {rx <= 0.8 && rv <= 0.9,
                          "position MSE " + sci(ev["mse_position"]) + " = " + fixed(rx) + "x linear (<= 0.8), velocity MSE " +
                              sci(ev["mse_velocity"]) + " = " + fixed(rv) + "x linear (<= 0.9), " +
                              std::to_string(c.data.n_train) + "/" + std::to_string(c.data.n_test) + " samples",
                          since(t0), 3600};
        }

        const Trainer trained = Trainer::load(c.output_dir + "/checkpoint.bin", c);
        const std::vector<Sample> test = read_samples(c.data.test_path());
        const std::span<const Sample> eq_samples = std::span(test).first(std::min<std::size_t>(50, test.size()));
        {
            const auto t0 = Clock::now();
            std::mt19937_64 rng(mix_seed(c.seed(), 1));
            ParamStore store;
            const TaskModel fresh(c.model, store, mix_seed(c.seed(), 0x6d6f64656c));
            const EquivarianceReport u = equivariance_error(fresh, store, eq_samples, c.data.sim, trained.normalization(), 20, rng, true);
            const EquivarianceReport t =
                equivariance_error(trained.model(), trained.store(), eq_samples, c.data.sim, trained.normalization(), 20, rng, true);
            const double s = since(t0);
            results[1] = {u.max_delta_eq < 1e-9 && t.max_delta_eq < 1e-9,
                          "max Δ_EQ untrained " + sci(u.max_delta_eq) + ", trained " + sci(t.max_delta_eq) + " (< 1e-9), " +
                              std::to_string(c.model.layers) + " layers, 20 rotations+translations x " +
                              std::to_string(eq_samples.size()) + " samples",
                          s, 120};
            results[2] = {std::max(u.max_alpha_change, t.max_alpha_change) < 1e-10,
                          "max |Δα| untrained " + sci(u.max_alpha_change) + ", trained " + sci(t.max_alpha_change) + " (< 1e-10)",
                          s, 120};
        }
        {
            const auto t0 = Clock::now();
            std::mt19937_64 rng(3);
            const double r = kernel_constraint_residual(3, 50, rng);
            results[3] = {r < 1e-9, "max kernel residual " + sci(r) + " over l,k <= 3, 50 trials (< 1e-9)", since(t0)};
        }
        {
            const auto t0 = Clock::now();
            std::mt19937_64 rng(4);
            const double h = wigner_homomorphism_residual(4, 100, rng), o = wigner_orthogonality_residual(4, 100, rng),
                         g = cg_decomposition_residual(3, 10, rng);
            results[4] = {h < 1e-9 && o < 1e-9 && g < 1e-9,
                          "Wigner homomorphism " + sci(h) + ", orthogonality " + sci(o) + " (l <= 4), CG " + sci(g) +
                              " (l,k <= 3) (< 1e-9)",
                          since(t0)};
        }
        {
            const auto t0 = Clock::now();
            std::mt19937_64 rng(5);
            const double d = sh_oracle_deviation(6, 10000, rng), r = sh_rotation_residual(6, 1000, rng);
            results[5] = {d < 1e-10 && r < 1e-10,
                          "oracle deviation " + sci(d) + " over 1e4 directions, rotation residual " + sci(r) + " (J <= 6, < 1e-10)",
                          since(t0)};
        }
        {
            const auto t0 = Clock::now();
            BenchOptions o;
            o.degrees = {8};
            o.points = {100000};
            o.repeats = 5;
            const nlohmann::json b = cmd_bench_sh(o).report;
            const double sp = b["headline"]["speedup"];
            const nlohmann::json& row = b["timings"][0];
            results[6] = {sp >= 5.0,
                          "memoized " + sci(row["memo_seconds"]) + " s vs naive " + sci(row["naive_seconds"]) + " s = " +
                              fixed(sp, 1) + "x at J=8, 1e5 points (>= 5x)",
                          since(t0), 300};
        }
        {
            const auto t0 = Clock::now();
            std::mt19937_64 rng(7);
            const std::vector<Sample> batch(test.begin(), test.begin() + std::min<std::size_t>(8, test.size()));
            const double floor = 1e-6;
            const GradWorst w = gradient_check(c, batch, trained.normalization(), 50, rng, floor);
            results[7] = {w.rel < 1e-5,
                          "max relative error " + sci(w.rel) + " over 50 parameters (< 1e-5; central step 1e-5, denominator floor " +
                              sci(floor) + "); worst " + w.name + " fd " + sci(w.fd) + " vs reverse " + sci(w.ad),
                          since(t0), 600};
        }
        {
            const auto t0 = Clock::now();
            std::mt19937_64 rng(9);
            const double e = permutation_error(trained.model(), trained.store(), c.data.sim, trained.normalization(), 100, rng);
            results[9] = {e < 1e-12, "max |f(Px) - Pf(x)| " + sci(e) + " over 100 clouds (< 1e-12)", since(t0)};
        }
        {
            const auto t0 = Clock::now();
            RunConfig m = c;
            m.model.arch = Architecture::CoordinateMlp;
            m.output_dir = work_dir + "/mlp";
            cmd_train(m);
            const nlohmann::json ev = cmd_eval(m).report;
            const nlohmann::json ev0 = cmd_eval(m, {std::nullopt, true}).report;
            const double d = ev["delta_eq"], d0 = ev0["delta_eq"];
            results[10] = {d > 0.01 && d0 > 0.01,
                           "coordinate MLP Δ_EQ trained " + fixed(d) + ", untrained " + fixed(d0) + " (> 0.01); position MSE " +
                               fixed(double(ev["position_ratio"])) + "x linear",
                           since(t0)};
        }
    } catch (const std::exception& e) {
        std::cerr << "acceptance: aborted: " << e.what() << '\n';
    }

    bool all = true;
    for (int k = 1; k <= 10; ++k) {
        auto it = results.find(k);
        Outcome o = it == results.end() ? Outcome{false, "not run", 0.0} : it->second;
        std::string timing = fixed(o.seconds, 1) + "s";
        if (o.budget > 0 && o.seconds > o.budget) {
            o.pass = false;
            timing += " over budget " + fixed(o.budget, 0) + "s";
        }
        all = all && o.pass;
        std::cout << "criterion " << std::setw(2) << k << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
                  << timing << "]\n";
    }
    std::cout << (all ? "ALL PASS" : "SOME FAILED") << '\n';
    return all ? 0 : 1;
}
