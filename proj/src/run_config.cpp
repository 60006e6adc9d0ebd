#include "se3/run_config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "se3/error.hpp"

namespace se3 {

namespace {

using nlohmann::json;

struct Field {
    std::string section;  // empty for top level
    std::string key;
    std::function<void(RunConfig&, const json&)> set;
    std::function<json(const RunConfig&)> get;

    std::string name() const { return section.empty() ? key : section + "." + key; }
};

template <class Access>
Field uint_field(std::string section, std::string key, Access access) {
    Field f{std::move(section), std::move(key), {}, {}};
    const std::string name = f.name();
    f.set = [access, name](RunConfig& c, const json& v) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError(name + ": expected a non-negative integer");
        access(c) = v.get<std::uint64_t>();
    };
    f.get = [access](const RunConfig& c) { return json(access(c)); };
    return f;
}

template <class Access>
Field optional_seed_field(std::string section, std::string key, Access access) {
    Field f{std::move(section), std::move(key), {}, {}};
    const std::string name = f.name();
    f.set = [access, name](RunConfig& c, const json& v) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError(name + ": expected a non-negative integer");
        access(c) = v.get<std::uint64_t>();
    };
    f.get = [access](const RunConfig& c) {
        const auto& s = access(c);
        return s ? json(*s) : json(nullptr);
    };
    return f;
}

template <class Access>
Field int_field(std::string section, std::string key, Access access) {
    Field f{std::move(section), std::move(key), {}, {}};
    const std::string name = f.name();
    f.set = [access, name](RunConfig& c, const json& v) {
        if (!v.is_number_integer()) throw ConfigError(name + ": expected an integer");
        access(c) = v.get<int>();
    };
    f.get = [access](const RunConfig& c) { return json(access(c)); };
    return f;
}

template <class Access>
Field double_field(std::string section, std::string key, Access access) {
    Field f{std::move(section), std::move(key), {}, {}};
    const std::string name = f.name();
    f.set = [access, name](RunConfig& c, const json& v) {
        if (!v.is_number()) throw ConfigError(name + ": expected a number");
        access(c) = v.get<double>();
    };
    f.get = [access](const RunConfig& c) { return json(access(c)); };
    return f;
}

template <class Access>
Field bool_field(std::string section, std::string key, Access access) {
    Field f{std::move(section), std::move(key), {}, {}};
    const std::string name = f.name();
    f.set = [access, name](RunConfig& c, const json& v) {
        if (!v.is_boolean()) throw ConfigError(name + ": expected true or false");
        access(c) = v.get<bool>();
    };
    f.get = [access](const RunConfig& c) { return json(access(c)); };
    return f;
}

template <class Access>
Field string_field(std::string section, std::string key, Access access) {
    Field f{std::move(section), std::move(key), {}, {}};
    const std::string name = f.name();
    f.set = [access, name](RunConfig& c, const json& v) {
        if (!v.is_string()) throw ConfigError(name + ": expected a string");
        access(c) = v.get<std::string>();
    };
    f.get = [access](const RunConfig& c) { return json(access(c)); };
    return f;
}

const std::vector<Field>& fields() {
    static const std::vector<Field> all = [] {
        std::vector<Field> f;
        f.push_back(string_field("", "task", [](auto& c) -> auto& { return c.task; }));
        f.push_back(string_field("", "output_dir", [](auto& c) -> auto& { return c.output_dir; }));

        f.push_back(string_field("data", "dir", [](auto& c) -> auto& { return c.data.dir; }));
        f.push_back(uint_field("data", "n_train", [](auto& c) -> auto& { return c.data.n_train; }));
        f.push_back(uint_field("data", "n_test", [](auto& c) -> auto& { return c.data.n_test; }));
        f.push_back(optional_seed_field("data", "seed", [](auto& c) -> auto& { return c.data.seed; }));
        f.push_back(uint_field("data", "particles", [](auto& c) -> auto& { return c.data.sim.particles; }));
        f.push_back(double_field("data", "charge_p", [](auto& c) -> auto& { return c.data.sim.charge_p; }));
        f.push_back(double_field("data", "box", [](auto& c) -> auto& { return c.data.sim.box; }));
        f.push_back(double_field("data", "velocity_std", [](auto& c) -> auto& { return c.data.sim.velocity_std; }));
        f.push_back(double_field("data", "dt", [](auto& c) -> auto& { return c.data.sim.dt; }));
        f.push_back(double_field("data", "kappa", [](auto& c) -> auto& { return c.data.sim.kappa; }));
        f.push_back(double_field("data", "softening", [](auto& c) -> auto& { return c.data.sim.softening; }));
        f.push_back(uint_field("data", "record_interval", [](auto& c) -> auto& { return c.data.sim.record_interval; }));
        f.push_back(uint_field("data", "horizon", [](auto& c) -> auto& { return c.data.sim.horizon; }));
        f.push_back(uint_field("data", "start_range", [](auto& c) -> auto& { return c.data.sim.start_range; }));

        {
            Field a{"model", "architecture", {}, {}};
            a.set = [](RunConfig& c, const json& v) {
                if (!v.is_string()) throw ConfigError("model.architecture: expected a string");
                c.model.arch = parse_architecture(v.get<std::string>());
            };
            a.get = [](const RunConfig& c) { return json(architecture_name(c.model.arch)); };
            f.push_back(a);
        }
        f.push_back(uint_field("model", "layers", [](auto& c) -> auto& { return c.model.layers; }));
        f.push_back(int_field("model", "degree", [](auto& c) -> auto& { return c.model.degree; }));
        f.push_back(uint_field("model", "channels", [](auto& c) -> auto& { return c.model.channels; }));
        f.push_back(uint_field("model", "heads", [](auto& c) -> auto& { return c.model.heads; }));
        {
            Field s{"model", "self_interaction", {}, {}};
            s.set = [](RunConfig& c, const json& v) {
                const std::string t = v.is_string() ? v.get<std::string>() : "";
                if (t == "linear") {
                    c.model.self_interaction = SelfInteractionKind::Linear;
                } else if (t == "attentive") {
                    c.model.self_interaction = SelfInteractionKind::Attentive;
                } else {
                    throw ConfigError("model.self_interaction: expected \"linear\" or \"attentive\"");
                }
            };
            s.get = [](const RunConfig& c) {
                return json(c.model.self_interaction == SelfInteractionKind::Linear ? "linear" : "attentive");
            };
            f.push_back(s);
        }
        f.push_back(uint_field("model", "radial_hidden", [](auto& c) -> auto& { return c.model.radial_hidden; }));
        f.push_back(bool_field("model", "plus_z", [](auto& c) -> auto& { return c.model.plus_z; }));
        f.push_back(uint_field("model", "mlp_hidden", [](auto& c) -> auto& { return c.model.mlp_hidden; }));
        f.push_back(bool_field("model", "break_equivariance", [](auto& c) -> auto& { return c.model.basis.break_equivariance; }));

        f.push_back(optional_seed_field("train", "seed", [](auto& c) -> auto& { return c.train.seed; }));
        f.push_back(uint_field("train", "steps", [](auto& c) -> auto& { return c.train.steps; }));
        f.push_back(uint_field("train", "batch", [](auto& c) -> auto& { return c.train.batch; }));
        f.push_back(double_field("train", "lr", [](auto& c) -> auto& { return c.train.lr; }));
        f.push_back(uint_field("train", "log_interval", [](auto& c) -> auto& { return c.train.log_interval; }));
        f.push_back(uint_field("train", "checkpoint_interval", [](auto& c) -> auto& { return c.train.checkpoint_interval; }));
        f.push_back(uint_field("train", "eval_samples", [](auto& c) -> auto& { return c.train.eval_samples; }));

        f.push_back(uint_field("eval", "rotations", [](auto& c) -> auto& { return c.eval.rotations; }));
        f.push_back(uint_field("eval", "samples", [](auto& c) -> auto& { return c.eval.samples; }));
        return f;
    }();
    return all;
}

const Field* find_field(std::string_view section, std::string_view key) {
    for (const Field& f : fields()) {
        if (f.section == section && f.key == key) return &f;
    }
    return nullptr;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Quoted strings, true/false and numbers follow TOML; anything else is taken as a bare string.
json parse_value(const std::string& token) {
    if (token.size() >= 2 && token.front() == '"' && token.back() == '"') return json::parse(token);
    if (token == "true") return true;
    if (token == "false") return false;
    try {
        json v = json::parse(token);
        if (v.is_number()) return v;
    } catch (const json::parse_error&) {
    }
    return token;
}

std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

void assign(RunConfig& c, const std::string& section, const std::string& key, const std::string& value,
            const std::string& where) {
    const Field* f = find_field(section, key);
    const std::string name = section.empty() ? key : section + "." + key;
    if (!f) throw ConfigError(where + ": unknown key '" + name + "'");
    json v;
    try {
        v = parse_value(value);
    } catch (const json::exception&) {
        throw ConfigError(where + ": malformed value for '" + name + "'");
    }
    try {
        f->set(c, v);
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

}  // namespace

std::uint64_t RunConfig::seed() const {
    if (!train.seed) throw ConfigError("train.seed: required");
    return *train.seed;
}

void RunConfig::validate() const {
    if (task != "nbody") throw ConfigError("task: only \"nbody\" is supported, got \"" + task + "\"");
    seed();
    data.sim.validate();
    if (data.n_train == 0) throw ConfigError("data.n_train: must be positive");
    if (data.n_test == 0) throw ConfigError("data.n_test: must be positive");
    if (train.batch == 0) throw ConfigError("train.batch: must be positive");
    if (!(train.lr > 0.0)) throw ConfigError("train.lr: must be positive");
    if (train.log_interval == 0) throw ConfigError("train.log_interval: must be positive");
    if (train.checkpoint_interval == 0) throw ConfigError("train.checkpoint_interval: must be positive");
    if (eval.rotations == 0) throw ConfigError("eval.rotations: must be positive");
    if (eval.samples == 0) throw ConfigError("eval.samples: must be positive");
    if (model.arch != Architecture::CoordinateMlp) count_parameters(model_config(model));
}

RunConfig parse_run_config(std::string_view text, const std::string& origin) {
    RunConfig c;
    std::istringstream in{std::string(text)};
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        const std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(where + ": malformed section header");
            section = trim(std::string_view(s).substr(1, s.size() - 2));
            if (section != "data" && section != "model" && section != "train" && section != "eval") {
                throw ConfigError(where + ": unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        assign(c, section, trim(std::string_view(s).substr(0, eq)), trim(std::string_view(s).substr(eq + 1)), where);
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path);
}

void apply_override(RunConfig& c, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "': expected key=value");
    const std::string lhs = trim(assignment.substr(0, eq));
    const auto dot = lhs.find('.');
    const std::string section = dot == std::string::npos ? "" : lhs.substr(0, dot);
    const std::string key = dot == std::string::npos ? lhs : lhs.substr(dot + 1);
    assign(c, section, key, trim(assignment.substr(eq + 1)), "override");
}

json to_json(const RunConfig& c) {
    json out = json::object();
    for (const Field& f : fields()) {
        json v = f.get(c);
        if (v.is_null()) continue;
        if (f.section.empty()) {
            out[f.key] = v;
        } else {
            out[f.section][f.key] = v;
        }
    }
    return out;
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    for (const auto& [k, v] : j.items()) {
        if (v.is_object()) {
            for (const auto& [key, value] : v.items()) {
                const Field* f = find_field(k, key);
                if (!f) throw ConfigError("unknown key '" + k + "." + key + "'");
                f->set(c, value);
            }
        } else {
            const Field* f = find_field("", k);
            if (!f) throw ConfigError("unknown key '" + k + "'");
            f->set(c, v);
        }
    }
    return c;
}

std::string render_run_config(const RunConfig& c) {
    std::ostringstream os;
    std::string section = "";
    for (const Field& f : fields()) {
        const json v = f.get(c);
        if (v.is_null()) continue;
        if (f.section != section) {
            section = f.section;
            os << "\n[" << section << "]\n";
        }
        os << f.key << " = " << v.dump() << '\n';
    }
    return os.str();
}

json to_json(const Normalization& n) {
    return {{"position", n.position},
            {"velocity", n.velocity},
            {"residual_position", n.residual_position},
            {"residual_velocity", n.residual_velocity}};
}

Normalization normalization_from_json(const json& j) {
    return {j.at("position").get<double>(), j.at("velocity").get<double>(), j.at("residual_position").get<double>(),
            j.at("residual_velocity").get<double>()};
}

}  // namespace se3
