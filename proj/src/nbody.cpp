#include "se3/nbody.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "se3/error.hpp"
#include "se3/parallel.hpp"

namespace se3 {

namespace {

nlohmann::json to_json(const SimConfig& c) {
    return {{"particles", c.particles}, {"charge_p", c.charge_p},           {"box", c.box},
            {"velocity_std", c.velocity_std}, {"dt", c.dt},                 {"kappa", c.kappa},
            {"softening", c.softening},   {"record_interval", c.record_interval}, {"horizon", c.horizon},
            {"start_range", c.start_range}};
}

nlohmann::json vecs(const std::vector<Vec3>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const Vec3& p : v) out.push_back({p[0], p[1], p[2]});
    return out;
}

std::vector<Vec3> parse_vecs(const nlohmann::json& j, std::size_t n, const std::string& what) {
    if (!j.is_array() || j.size() != n) throw ArgumentError(what + ": expected " + std::to_string(n) + " rows");
    std::vector<Vec3> out;
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != 3) throw ArgumentError(what + ": rows must have 3 entries");
        out.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>()});
    }
    return out;
}

}  // namespace

void SimConfig::validate() const {
    if (particles < 2) throw ConfigError("data.particles: need at least 2");
    if (!(dt > 0.0)) throw ConfigError("data.dt: must be positive");
    if (horizon < 1) throw ConfigError("data.horizon: must be at least 1");
    if (record_interval < 1) throw ConfigError("data.record_interval: must be at least 1");
    if (start_range < 1) throw ConfigError("data.start_range: must be at least 1");
    if (!(charge_p >= 0.0 && charge_p <= 1.0)) throw ConfigError("data.charge_p: must lie in [0, 1]");
    if (!(box > 0.0)) throw ConfigError("data.box: must be positive");
    if (!(softening >= 0.0)) throw ConfigError("data.softening: must be non-negative");
    if (!(velocity_std >= 0.0)) throw ConfigError("data.velocity_std: must be non-negative");
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over both words
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::string SimConfig::hash() const {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << fnv1a(to_json(*this).dump());
    return os.str();
}

void euler_step(const SimConfig& c, std::span<const double> q, State& s) {
    const std::size_t n = q.size();
    const double s2 = c.softening * c.softening;
    std::vector<Vec3> force(n, Vec3{0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const Vec3 d{s.positions[i][0] - s.positions[j][0], s.positions[i][1] - s.positions[j][1],
                         s.positions[i][2] - s.positions[j][2]};
            const double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + s2;
            const double a = c.kappa * q[i] * q[j] / (r2 * std::sqrt(r2));
            for (int k = 0; k < 3; ++k) {
                force[i][k] += a * d[k];
                force[j][k] -= a * d[k];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) {
            s.positions[i][k] += c.dt * s.velocities[i][k];
            s.velocities[i][k] += c.dt * force[i][k];
        }
    }
}

Trajectory simulate(const SimConfig& config, std::vector<double> charges, State init, std::size_t records) {
    config.validate();
    if (charges.size() != init.positions.size() || init.velocities.size() != init.positions.size()) {
        throw ArgumentError("simulate: charges, positions and velocities differ in length");
    }
    Trajectory t;
    t.charges = std::move(charges);
    t.states.reserve(records);
    State s = std::move(init);
    for (std::size_t r = 0; r < records; ++r) {
        if (r > 0) {
            for (std::size_t k = 0; k < config.record_interval; ++k) euler_step(config, t.charges, s);
        }
        t.states.push_back(s);
    }
    return t;
}

Trajectory simulate(const SimConfig& config, std::mt19937_64& rng, std::size_t records) {
    config.validate();
    std::bernoulli_distribution coin(config.charge_p);
    std::uniform_real_distribution<double> pos(-config.box, config.box);
    std::normal_distribution<double> vel(0.0, config.velocity_std);
    std::vector<double> q(config.particles);
    for (double& v : q) v = coin(rng) ? 1.0 : -1.0;
    State s;
    for (std::size_t i = 0; i < config.particles; ++i) s.positions.push_back({pos(rng), pos(rng), pos(rng)});
    for (std::size_t i = 0; i < config.particles; ++i) s.velocities.push_back({vel(rng), vel(rng), vel(rng)});
    return simulate(config, std::move(q), std::move(s), records);
}

Sample make_sample(const SimConfig& config, std::uint64_t seed, std::size_t index) {
    config.validate();
    std::mt19937_64 rng(mix_seed(seed, index));
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, config.start_range - 1)(rng);
    Trajectory t = simulate(config, rng, start + config.horizon + 1);
    Sample out;
    out.charges = std::move(t.charges);
    out.input = std::move(t.states[start]);
    out.target = std::move(t.states.back());
    out.seed = seed;
    out.config_hash = config.hash();
    return out;
}

std::vector<Sample> make_samples(const SimConfig& config, std::uint64_t seed, std::size_t count) {
    config.validate();
    std::vector<Sample> out(count);
    parallel_for(count, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) out[i] = make_sample(config, seed, i);
    }, 1);
    return out;
}

Dataset make_dataset(const SimConfig& config, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
    return {make_samples(config, mix_seed(seed, 0x7472), n_train), make_samples(config, mix_seed(seed, 0x7465), n_test)};
}

State linear_baseline(const SimConfig& config, const Sample& sample) {
    const double t = config.lead_time();
    State out = sample.input;
    for (std::size_t i = 0; i < out.positions.size(); ++i) {
        for (int k = 0; k < 3; ++k) out.positions[i][k] += t * out.velocities[i][k];
    }
    return out;
}

StateError mse(std::span<const State> pred, std::span<const Sample> samples) {
    if (pred.size() != samples.size()) throw ArgumentError("mse: prediction and sample counts differ");
    StateError err;
    std::size_t count = 0;
    for (std::size_t s = 0; s < pred.size(); ++s) {
        const State& p = pred[s];
        const State& t = samples[s].target;
        if (p.positions.size() != t.positions.size() || p.velocities.size() != t.velocities.size()) {
            throw ArgumentError("mse: sample " + std::to_string(s) + " has mismatched particle counts");
        }
        for (std::size_t i = 0; i < p.positions.size(); ++i) {
            for (int k = 0; k < 3; ++k) {
                err.position += (p.positions[i][k] - t.positions[i][k]) * (p.positions[i][k] - t.positions[i][k]);
                err.velocity += (p.velocities[i][k] - t.velocities[i][k]) * (p.velocities[i][k] - t.velocities[i][k]);
            }
        }
        count += 3 * p.positions.size();
    }
    if (count == 0) throw ArgumentError("mse: no samples");
    err.position /= static_cast<double>(count);
    err.velocity /= static_cast<double>(count);
    return err;
}

Sample rotate_sample(const Sample& s, const Rotation& g) {
    Sample out = s;
    for (State* st : {&out.input, &out.target}) {
        for (Vec3& p : st->positions) p = g.apply(p);
        for (Vec3& v : st->velocities) v = g.apply(v);
    }
    return out;
}

void write_samples(const std::string& path, std::span<const Sample> samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const Sample& s : samples) {
        nlohmann::json j;
        j["charges"] = s.charges;
        j["input_positions"] = vecs(s.input.positions);
        j["input_velocities"] = vecs(s.input.velocities);
        j["target_positions"] = vecs(s.target.positions);
        j["target_velocities"] = vecs(s.target.velocities);
        j["meta"] = {{"seed", s.seed}, {"config_hash", s.config_hash}};
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<Sample> read_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::vector<Sample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        try {
            const auto j = nlohmann::json::parse(line);
            Sample s;
            s.charges = j.at("charges").get<std::vector<double>>();
            const std::size_t n = s.charges.size();
            s.input.positions = parse_vecs(j.at("input_positions"), n, where + " input_positions");
            s.input.velocities = parse_vecs(j.at("input_velocities"), n, where + " input_velocities");
            s.target.positions = parse_vecs(j.at("target_positions"), n, where + " target_positions");
            s.target.velocities = parse_vecs(j.at("target_velocities"), n, where + " target_velocities");
            if (j.contains("meta")) {
                s.seed = j["meta"].value("seed", std::uint64_t{0});
                s.config_hash = j["meta"].value("config_hash", std::string{});
            }
            out.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw ArgumentError(where + ": " + e.what());
        }
    }
    return out;
}

}  // namespace se3
