#pragma once

// Charged N-body regression task: softened Coulomb dynamics under explicit Euler, sampled as
// (state at t, state 500 recorded steps later) pairs, plus the constant-velocity baseline.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "se3/so3.hpp"

namespace se3 {

struct SimConfig {
    std::size_t particles = 5;
    double charge_p = 0.5;  // P(q = +1)
    double box = 5.0;       // initial positions uniform in [-box, box]^3
    double velocity_std = 0.5;
    double dt = 0.001;
    double kappa = 1.0;
    double softening = 0.1;
    std::size_t record_interval = 100;
    std::size_t horizon = 500;  // in recorded steps
    /// Input times are drawn from recorded steps [0, start_range).
    std::size_t start_range = 500;

    void validate() const;
    /// Simulated time between input and target.
    double lead_time() const { return static_cast<double>(horizon * record_interval) * dt; }
    /// Stable hex digest of every field.
    std::string hash() const;
};

struct State {
    std::vector<Vec3> positions;
    std::vector<Vec3> velocities;
};

/// Recorded states 0..records-1 (state 0 is the initial condition).
struct Trajectory {
    std::vector<double> charges;
    std::vector<State> states;
};

struct Sample {
    std::vector<double> charges;
    State input;
    State target;
    std::uint64_t seed = 0;
    std::string config_hash;
};

/// One explicit Euler step with unit masses. Pair forces are evaluated once and applied with
/// opposite signs, so total momentum changes only by roundoff.
void euler_step(const SimConfig& config, std::span<const double> charges, State& state);
/// Runs `records - 1` record intervals from `init`.
Trajectory simulate(const SimConfig& config, std::vector<double> charges, State init, std::size_t records);
/// Random charges and initial condition, then a full trajectory.
Trajectory simulate(const SimConfig& config, std::mt19937_64& rng, std::size_t records);

/// Sample `index` of a stream depends only on (seed, index).
Sample make_sample(const SimConfig& config, std::uint64_t seed, std::size_t index);
std::vector<Sample> make_samples(const SimConfig& config, std::uint64_t seed, std::size_t count);

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> test;
};

/// Train and test use disjoint streams derived from `seed`.
Dataset make_dataset(const SimConfig& config, std::size_t n_train, std::size_t n_test, std::uint64_t seed);

State linear_baseline(const SimConfig& config, const Sample& sample);

struct StateError {
    double position = 0.0;
    double velocity = 0.0;
};

/// Mean over samples, particles and coordinates.
StateError mse(std::span<const State> pred, std::span<const Sample> samples);

Sample rotate_sample(const Sample& s, const Rotation& g);

void write_samples(const std::string& path, std::span<const Sample> samples);
std::vector<Sample> read_samples(const std::string& path);

/// FNV-1a, for config digests.
std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace se3
