#include "se3/nbody_model.hpp"

#include <cmath>

#include "se3/error.hpp"

namespace se3 {

namespace {

constexpr std::size_t kFields = 2;  // position, velocity

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor t(std::move(shape));
    for (double& v : t.data) v = u(rng);
    return t;
}

Vec3 centroid(const std::vector<Vec3>& pts) {
    Vec3 c{0.0, 0.0, 0.0};
    for (const Vec3& p : pts) {
        for (int k = 0; k < 3; ++k) c[k] += p[k];
    }
    for (double& v : c) v /= static_cast<double>(pts.size());
    return c;
}

void register_mlp(ParamStore& store, std::size_t scalars, std::size_t coords, std::size_t hidden, std::mt19937_64& rng) {
    const double b0 = std::sqrt(6.0 / static_cast<double>(scalars + coords)), b1 = std::sqrt(6.0 / static_cast<double>(hidden));
    store.add("mlp/w0", uniform({hidden, coords}, b0, rng));
    store.add("mlp/b0", Tensor({hidden}, 0.0));
    store.add("mlp/wq", uniform({hidden, scalars}, b0, rng));
    store.add("mlp/bq", Tensor({hidden}, 0.0));
    store.add("mlp/w1", uniform({hidden, hidden}, b1, rng));
    store.add("mlp/b1", Tensor({hidden}, 0.0));
    store.add("mlp/w2", uniform({3 * kFields, hidden}, b1 / std::sqrt(static_cast<double>(hidden)), rng));
    store.add("mlp/b2", Tensor({3 * kFields}, 0.0));
}

}  // namespace

const char* architecture_name(Architecture a) {
    switch (a) {
        case Architecture::Se3Transformer: return "se3_transformer";
        case Architecture::Tfn: return "tfn";
        case Architecture::CoordinateMlp: return "coordinate_mlp";
    }
    return "?";
}

Architecture parse_architecture(const std::string& name) {
    for (Architecture a : {Architecture::Se3Transformer, Architecture::Tfn, Architecture::CoordinateMlp}) {
        if (name == architecture_name(a)) return a;
    }
    throw ConfigError("model.architecture: unknown value '" + name + "' (se3_transformer, tfn, coordinate_mlp)");
}

Normalization fit_normalization(const SimConfig& sim, std::span<const Sample> train) {
    if (train.empty()) throw ArgumentError("fit_normalization: empty training set");
    double px = 0, pv = 0, rx = 0, rv = 0;
    std::size_t n = 0;
    for (const Sample& s : train) {
        const Vec3 c = centroid(s.input.positions);
        const State lin = linear_baseline(sim, s);
        for (std::size_t i = 0; i < s.charges.size(); ++i) {
            for (int k = 0; k < 3; ++k) {
                px += std::pow(s.input.positions[i][k] - c[k], 2);
                pv += std::pow(s.input.velocities[i][k], 2);
                rx += std::pow(s.target.positions[i][k] - lin.positions[i][k], 2);
                rv += std::pow(s.target.velocities[i][k] - lin.velocities[i][k], 2);
            }
        }
        n += 3 * s.charges.size();
    }
    auto rms = [n](double v) {
        const double r = std::sqrt(v / static_cast<double>(n));
        return r > 0.0 ? r : 1.0;
    };
    return {rms(px), rms(pv), rms(rx), rms(rv)};
}

Encoded encode(std::span<const Sample> batch, const SimConfig& sim, const Normalization& norm, bool plus_z) {
    if (batch.empty()) throw ArgumentError("encode: empty batch");
    const std::size_t p = batch[0].charges.size();
    const std::size_t n = batch.size() * p;
    Encoded out;
    out.samples = batch.size();
    out.particles = p;
    Tensor vec1({n, kFields, 3}), q0({n, 1, 1});
    out.target = Tensor({n, kFields, 3});
    std::vector<NeighborGraph> graphs;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const Sample& smp = batch[s];
        if (smp.charges.size() != p) throw ArgumentError("encode: samples in a batch must have equal particle counts");
        const Vec3 c = centroid(smp.input.positions);
        const State lin = linear_baseline(sim, smp);
        for (std::size_t i = 0; i < p; ++i) {
            const std::size_t node = s * p + i;
            Vec3 x, r, dv;
            for (int k = 0; k < 3; ++k) {
                x[k] = (smp.input.positions[i][k] - c[k]) / norm.position;
                r[k] = (smp.target.positions[i][k] - lin.positions[i][k]) / norm.residual_position;
                dv[k] = (smp.target.velocities[i][k] - lin.velocities[i][k]) / norm.residual_velocity;
            }
            const Vec3 v{smp.input.velocities[i][0] / norm.velocity, smp.input.velocities[i][1] / norm.velocity,
                         smp.input.velocities[i][2] / norm.velocity};
            const Vec3 tx = to_type1(x), tv = to_type1(v), tr = to_type1(r), tdv = to_type1(dv);
            for (int m = 0; m < 3; ++m) {
                vec1[(node * kFields + 0) * 3 + m] = tx[m];
                vec1[(node * kFields + 1) * 3 + m] = tv[m];
                out.target[(node * kFields + 0) * 3 + m] = tr[m];
                out.target[(node * kFields + 1) * 3 + m] = tdv[m];
            }
            q0[node] = smp.charges[i];
            out.input.positions.push_back(x);
        }
        NeighborGraph g = fully_connected(p);
        Tensor qq({g.edges(), 1});
        for (std::size_t e = 0; e < g.edges(); ++e) qq[e] = smp.charges[g.src[e]] * smp.charges[g.dst[e]];
        g.edge_scalars = std::move(qq);
        graphs.push_back(std::move(g));
    }
    out.input.graph = batch_graphs(graphs);
    out.input.features[0] = std::move(q0);
    out.input.features[1] = std::move(vec1);
    if (plus_z) out.input.features = plus_z_features(out.input.positions, out.input.features);
    return out;
}

ModelConfig model_config(const TaskConfig& c) {
    ModelConfig m;
    m.input = Fiber::parse(c.plus_z ? "0:3,1:3" : "0:1,1:2");
    m.output = Fiber::parse("1:2");
    m.layers = c.layers;
    m.hidden_degree = c.degree;
    m.channels = c.channels;
    m.heads = c.heads;
    m.kind = c.arch == Architecture::Tfn ? LayerKind::Tfn : LayerKind::Attention;
    m.self_interaction = c.self_interaction;
    m.radial_hidden = c.radial_hidden;
    m.edge_scalars = 1;
    m.basis = c.basis;
    return m;
}

TaskModel::TaskModel(const TaskConfig& config, ParamStore& store, std::uint64_t seed) : config_(config) {
    if (config.arch == Architecture::CoordinateMlp) {
        if (config.mlp_hidden == 0) throw ConfigError("model.mlp_hidden: must be positive");
        std::mt19937_64 rng(seed);
        const Fiber in = input_fiber();
        register_mlp(store, in.channels(0), 3 * in.channels(1), config.mlp_hidden, rng);
    } else {
        model_ = build_model(model_config(config), store, seed);
    }
}

Fiber TaskModel::input_fiber() const { return model_config(config_).input; }

TaskForward TaskModel::forward(Tape& tape, const ParamStore& store, const Encoded& batch, const LayerOptions& options) const {
    if (model_) {
        ModelOutput out = run_model(tape, store, *model_, batch.input, options);
        return {out.features.at(1), std::move(out.alphas), std::move(out.layers)};
    }
    // Per-node dense net on raw coordinates; the scalar inputs enter through their own weights.
    const std::size_t n = batch.input.graph.nodes;
    const Tensor& f0 = batch.input.features.at(0);
    const Tensor& f1 = batch.input.features.at(1);
    Var h = add(linear(reshape(tape.constant(f1), {n, f1.size() / n}), tape.param(store, "mlp/w0"), tape.param(store, "mlp/b0")),
                linear(reshape(tape.constant(f0), {n, f0.size() / n}), tape.param(store, "mlp/wq"), tape.param(store, "mlp/bq")));
    h = relu(h);
    h = relu(linear(h, tape.param(store, "mlp/w1"), tape.param(store, "mlp/b1")));
    Var y = linear(h, tape.param(store, "mlp/w2"), tape.param(store, "mlp/b2"));
    return {reshape(y, {n, kFields, 3}), {}, {}};
}

Var task_loss(Var fields, const Encoded& batch) {
    Var d = sub(fields, fields.tape->constant(batch.target));
    return scale(sum(mul(d, d)), 1.0 / static_cast<double>(batch.target.size()));
}

std::vector<State> decode(const Tensor& fields, std::span<const Sample> batch, const SimConfig& sim,
                          const Normalization& norm) {
    std::vector<State> out;
    std::size_t node = 0;
    for (const Sample& s : batch) {
        State st = linear_baseline(sim, s);
        for (std::size_t i = 0; i < s.charges.size(); ++i, ++node) {
            Vec3 a, b;
            for (int m = 0; m < 3; ++m) {
                a[m] = fields[(node * kFields + 0) * 3 + m];
                b[m] = fields[(node * kFields + 1) * 3 + m];
            }
            const Vec3 dx = from_type1(a), dv = from_type1(b);
            for (int k = 0; k < 3; ++k) {
                st.positions[i][k] += norm.residual_position * dx[k];
                st.velocities[i][k] += norm.residual_velocity * dv[k];
            }
        }
        out.push_back(std::move(st));
    }
    if (node != fields.dim(0)) throw ArgumentError("decode: field rows do not match the batch");
    return out;
}

std::vector<State> predict(const TaskModel& model, const ParamStore& store, std::span<const Sample> samples,
                           const SimConfig& sim, const Normalization& norm, std::size_t batch) {
    std::vector<State> out;
    for (std::size_t b = 0; b < samples.size(); b += batch) {
        const auto chunk = samples.subspan(b, std::min(batch, samples.size() - b));
        const Encoded enc = encode(chunk, sim, norm, model.config().plus_z);
        Tape tape;
        const Tensor f = model.forward(tape, store, enc).fields.value();
        for (State& s : decode(f, chunk, sim, norm)) out.push_back(std::move(s));
    }
    return out;
}

EquivarianceReport equivariance_error(const TaskModel& model, const ParamStore& store, std::span<const Sample> samples,
                                      const SimConfig& sim, const Normalization& norm, std::size_t rotations,
                                      std::mt19937_64& rng, bool translate) {
    if (rotations == 0 || samples.empty()) throw ArgumentError("equivariance_error: need at least one rotation and sample");
    const Encoded base_in = encode(samples, sim, norm, model.config().plus_z);
    Tape t0;
    const TaskForward base = model.forward(t0, store, base_in);
    const Tensor& y = base.fields.value();
    const std::size_t p = base_in.particles;
    std::normal_distribution<double> shift(0.0, 3.0);
    EquivarianceReport rep;
    for (std::size_t r = 0; r < rotations; ++r) {
        const Rotation g = rotation_sample(rng);
        const Eigen::MatrixXd d1 = wigner_d(1, g);
        std::vector<Sample> moved;
        for (const Sample& s : samples) {
            Sample m = rotate_sample(s, g);
            if (translate) {
                const Vec3 t{shift(rng), shift(rng), shift(rng)};
                for (State* st : {&m.input, &m.target}) {
                    for (Vec3& x : st->positions) x = {x[0] + t[0], x[1] + t[1], x[2] + t[2]};
                }
            }
            moved.push_back(std::move(m));
        }
        Tape t1;
        const TaskForward out = model.forward(t1, store, encode(moved, sim, norm, model.config().plus_z));
        const Tensor& yr = out.fields.value();
        for (std::size_t s = 0; s < samples.size(); ++s) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = s * p; i < (s + 1) * p; ++i) {
                for (std::size_t c = 0; c < kFields; ++c) {
                    const double* a = &y.data[(i * kFields + c) * 3];
                    const double* b = &yr.data[(i * kFields + c) * 3];
                    for (int m = 0; m < 3; ++m) {
                        double dy = 0.0;
                        for (int q = 0; q < 3; ++q) dy += d1(m, q) * a[q];
                        num += (dy - b[m]) * (dy - b[m]);
                        den += dy * dy;
                    }
                }
            }
            const double e = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
            rep.delta_eq += e;
            rep.max_delta_eq = std::max(rep.max_delta_eq, e);
        }
        rep.layer_delta_eq.resize(base.layers.size(), 0.0);
        for (std::size_t a = 0; a < base.layers.size(); ++a) {
            double num = 0.0, den = 0.0;
            for (const auto& [l, v] : base.layers[a]) {
                const Tensor& h0 = v.value();
                const Tensor& h1 = out.layers[a].at(l).value();
                const Eigen::MatrixXd d = wigner_d(l, g);
                const std::size_t dim = static_cast<std::size_t>(2 * l + 1);
                for (std::size_t row = 0; row < h0.size() / dim; ++row) {
                    for (std::size_t m = 0; m < dim; ++m) {
                        double dy = 0.0;
                        for (std::size_t q = 0; q < dim; ++q) dy += d(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(q)) * h0[row * dim + q];
                        num += (dy - h1[row * dim + m]) * (dy - h1[row * dim + m]);
                        den += dy * dy;
                    }
                }
            }
            rep.layer_delta_eq[a] = std::max(rep.layer_delta_eq[a], den > 0.0 ? std::sqrt(num / den) : std::sqrt(num));
        }
        for (std::size_t a = 0; a < base.alphas.size(); ++a) {
            const Tensor& x0 = base.alphas[a].value();
            const Tensor& x1 = out.alphas[a].value();
            for (std::size_t i = 0; i < x0.size(); ++i) rep.max_alpha_change = std::max(rep.max_alpha_change, std::abs(x0[i] - x1[i]));
        }
    }
    rep.delta_eq /= static_cast<double>(rotations * samples.size());
    return rep;
}

}  // namespace se3
