#include "se3/training.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "se3/error.hpp"

namespace se3 {

namespace {

constexpr char kMagic[8] = {'S', 'E', '3', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

class Writer {
public:
    explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open for writing: " + path);
    }
    template <class T>
    void put(T v) {
        v = to_little(v);
        out_.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void bytes(std::string_view s) {
        put<std::uint64_t>(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void doubles(const std::vector<double>& v) {
        for (double x : v) put(x);
    }
    void finish() {
        out_.flush();
        if (!out_) throw IoError("write failed: " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open checkpoint: " + path);
    }
    template <class T>
    T get() {
        T v;
        in_.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in_) throw IoError("truncated checkpoint: " + path_);
        return to_little(v);
    }
    std::string bytes() {
        const auto n = get<std::uint64_t>();
        if (n > (1ull << 32)) throw IoError("corrupt checkpoint (string length): " + path_);
        std::string s(n, '\0');
        in_.read(s.data(), static_cast<std::streamsize>(n));
        if (!in_) throw IoError("truncated checkpoint: " + path_);
        return s;
    }
    void doubles(std::vector<double>& v) {
        for (double& x : v) x = get<double>();
    }
    void magic() {
        char m[8];
        in_.read(m, 8);
        if (!in_ || std::memcmp(m, kMagic, 8) != 0) throw IoError("not a checkpoint file: " + path_);
    }

private:
    std::string path_;
    std::ifstream in_;
};

}  // namespace

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t step, std::size_t batch, std::size_t n) {
    if (n == 0) throw ArgumentError("batch_indices: empty training set");
    const std::uint64_t base = mix_seed(seed, step);
    std::vector<std::size_t> out(batch);
    for (std::size_t b = 0; b < batch; ++b) out[b] = static_cast<std::size_t>(mix_seed(base, b) % n);
    return out;
}

Trainer::Trainer(RunConfig config, Normalization norm)
    : config_(std::move(config)),
      norm_(norm),
      model_(config_.model, store_, mix_seed(config_.seed(), 0x6d6f64656c)),
      adam_(AdamConfig{config_.train.lr}) {}

double Trainer::step(std::span<const Sample> train) {
    std::vector<Sample> batch;
    for (std::size_t i : batch_indices(mix_seed(config_.seed(), 0x6261746368), steps_done(), config_.train.batch, train.size())) {
        batch.push_back(train[i]);
    }
    const Encoded enc = encode(batch, config_.data.sim, norm_, config_.model.plus_z);
    Tape tape;
    const Var loss = task_loss(model_.forward(tape, store_, enc).fields, enc);
    const double value = loss.value().item();
    if (!std::isfinite(value)) throw NumericError("non-finite loss at step " + std::to_string(steps_done()));
    store_.zero_grad();
    tape.backward(loss);
    tape.accumulate(store_);
    adam_.step(store_);
    return value;
}

void Trainer::save(const std::string& path, const nlohmann::json& extra) const {
    nlohmann::json meta = extra;
    meta["config"] = to_json(config_);
    meta["normalization"] = to_json(norm_);
    meta["step"] = steps_done();
    meta["parameters"] = store_.parameter_count();
    write_checkpoint(path, meta, store_, adam_);
}

Trainer Trainer::load(const std::string& path, const RunConfig& config) {
    CheckpointData ck = read_checkpoint(path);
    const nlohmann::json want = to_json(config)["model"];
    const nlohmann::json have = ck.meta.at("config").at("model");
    for (const auto& [key, value] : want.items()) {
        if (!have.contains(key) || have[key] != value) {
            throw ConfigError("checkpoint " + path + " was trained with model." + key + "=" +
                              (have.contains(key) ? have[key].dump() : "<unset>") + " but the config has " + value.dump());
        }
    }
    Trainer t(config, normalization_from_json(ck.meta.at("normalization")));
    const auto& names = t.store_.names();
    if (names.size() != ck.store.names().size()) {
        throw ConfigError("checkpoint " + path + " holds " + std::to_string(ck.store.names().size()) +
                          " parameter arrays, the model has " + std::to_string(names.size()));
    }
    for (const auto& name : names) {
        if (!ck.store.contains(name)) throw ConfigError("checkpoint " + path + " lacks parameter '" + name + "'");
        const Tensor& src = ck.store.value(name);
        Tensor& dst = t.store_.value(name);
        if (src.shape != dst.shape) {
            throw ConfigError("checkpoint " + path + ": parameter '" + name + "' has shape " + shape_string(src.shape) +
                              ", the model expects " + shape_string(dst.shape));
        }
        dst = src;
        if (ck.steps > 0) {
            t.adam_.first_moment(name, dst.shape) = ck.first_moment.at(name);
            t.adam_.second_moment(name, dst.shape) = ck.second_moment.at(name);
        }
    }
    t.adam_.set_steps(ck.steps);
    return t;
}

void write_checkpoint(const std::string& path, const nlohmann::json& meta, const ParamStore& store, const Adam& adam) {
    const std::string tmp = path + ".tmp";
    {
        Writer w(tmp);
        for (char c : kMagic) w.put(c);
        w.put(kVersion);
        w.bytes(meta.dump());
        w.put<std::uint64_t>(store.names().size());
        for (const auto& name : store.names()) {
            const Tensor& t = store.value(name);
            w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
            for (char c : name) w.put(c);
            w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
            for (std::size_t d : t.shape) w.put<std::uint64_t>(d);
            w.doubles(t.data);
        }
        w.put<std::int64_t>(adam.steps());
        if (adam.steps() > 0) {
            for (const auto& name : store.names()) {
                w.doubles(adam.first_moments().at(name).data);
                w.doubles(adam.second_moments().at(name).data);
            }
        }
        w.finish();
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + path + " (" + ec.message() + ")");
}

CheckpointData read_checkpoint(const std::string& path) {
    Reader r(path);
    r.magic();
    if (const auto v = r.get<std::uint32_t>(); v != kVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(v) + ": " + path);
    }
    CheckpointData ck;
    try {
        ck.meta = nlohmann::json::parse(r.bytes());
    } catch (const nlohmann::json::parse_error&) {
        throw IoError("corrupt checkpoint metadata: " + path);
    }
    const auto count = r.get<std::uint64_t>();
    std::vector<std::string> order;
    for (std::uint64_t p = 0; p < count; ++p) {
        std::string name(r.get<std::uint32_t>(), '\0');
        for (char& c : name) c = r.get<char>();
        Shape shape(r.get<std::uint32_t>());
        for (std::size_t& d : shape) d = r.get<std::uint64_t>();
        Tensor t(shape);
        r.doubles(t.data);
        ck.store.add(name, std::move(t));
        order.push_back(name);
    }
    ck.steps = r.get<std::int64_t>();
    if (ck.steps > 0) {
        for (const auto& name : order) {
            Tensor m(ck.store.value(name).shape), v(ck.store.value(name).shape);
            r.doubles(m.data);
            r.doubles(v.data);
            ck.first_moment.emplace(name, std::move(m));
            ck.second_moment.emplace(name, std::move(v));
        }
    }
    return ck;
}

}  // namespace se3
