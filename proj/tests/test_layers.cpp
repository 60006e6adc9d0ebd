#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "se3/error.hpp"
#include "se3/model.hpp"

using namespace se3;

namespace {

using TensorMap = std::map<int, Tensor>;

FeatureMap random_features(const Fiber& fiber, std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    FeatureMap out;
    for (const auto& [l, c] : fiber.entries()) {
        Tensor t({n, c, static_cast<std::size_t>(2 * l + 1)});
        for (double& v : t.data) v = g(rng);
        out[l] = std::move(t);
    }
    return out;
}

std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
    return pts;
}

std::vector<Vec3> rotate_points(const std::vector<Vec3>& pts, const Rotation& g) {
    std::vector<Vec3> out;
    for (const Vec3& p : pts) out.push_back(g.apply(p));
    return out;
}

TensorMap values(const FiberFeature& f) {
    TensorMap out;
    for (const auto& [l, v] : f) out[l] = v.value();
    return out;
}

double max_abs_diff(const TensorMap& a, const TensorMap& b) {
    double worst = 0.0;
    for (const auto& [l, t] : a) {
        const Tensor& u = b.at(l);
        EXPECT_EQ(t.shape, u.shape);
        for (std::size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(t[i] - u[i]));
    }
    return worst;
}

double relative_diff(const TensorMap& a, const TensorMap& b) {
    double num = 0.0, den = 0.0;
    for (const auto& [l, t] : a) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            num += (t[i] - b.at(l)[i]) * (t[i] - b.at(l)[i]);
            den += t[i] * t[i];
        }
    }
    return std::sqrt(num / den);
}

// Owns everything a single-layer forward needs.
struct Bench {
    std::vector<Vec3> points;
    NeighborGraph graph;
    FeatureMap features;

    LayerOutput run(Tape& tape, const ParamStore& store, const Layer& layer, const LayerOptions& opt = {}) const {
        const EdgeGeometry geo = relative_geometry(graph, points);
        const BasisSet basis(geo.vectors, 3);
        EdgeContext ctx{&basis, tape.constant(radial_input(geo.radii)), make_index(graph.src), make_index(graph.dst), graph.nodes};
        FiberFeature in;
        for (const auto& [l, t] : features) in[l] = tape.constant(t);
        return apply_layer(tape, store, layer, ctx, in, opt);
    }
    TensorMap eval(const ParamStore& store, const Layer& layer, const LayerOptions& opt = {}) const {
        Tape tape;
        return values(run(tape, store, layer, opt).features);
    }
    Bench rotated(const Rotation& g) const { return {rotate_points(points, g), graph, rotate_features(features, g)}; }
    Bench permuted(const std::vector<std::size_t>& perm) const;
};

// perm[new] = old.
Bench Bench::permuted(const std::vector<std::size_t>& perm) const {
    const std::size_t n = perm.size();
    std::vector<std::size_t> inv(n);
    for (std::size_t i = 0; i < n; ++i) inv[perm[i]] = i;
    Bench b;
    for (std::size_t i = 0; i < n; ++i) b.points.push_back(points[perm[i]]);
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : graph.neighbors(perm[i])) adj[i].push_back(inv[j]);
    }
    b.graph = from_adjacency(n, adj);
    for (const auto& [l, t] : features) {
        Tensor u(t.shape);
        const std::size_t w = t.size() / n;
        for (std::size_t i = 0; i < n; ++i) std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>(perm[i] * w), w, u.data.begin() + static_cast<std::ptrdiff_t>(i * w));
        b.features[l] = std::move(u);
    }
    return b;
}

TensorMap permute_rows(const TensorMap& m, const std::vector<std::size_t>& perm) {
    TensorMap out;
    for (const auto& [l, t] : m) {
        Tensor u(t.shape);
        const std::size_t w = t.size() / perm.size();
        for (std::size_t i = 0; i < perm.size(); ++i) std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>(perm[i] * w), w, u.data.begin() + static_cast<std::ptrdiff_t>(i * w));
        out[l] = std::move(u);
    }
    return out;
}

Bench make_bench(const Fiber& in, std::size_t n, std::size_t k, std::mt19937_64& rng) {
    Bench b;
    b.points = random_points(n, rng);
    b.graph = knn_neighborhoods(b.points, k);
    b.features = random_features(in, n, rng);
    return b;
}

LayerSpec spec_of(const Fiber& in, const Fiber& out, LayerKind kind, SelfInteractionKind si = SelfInteractionKind::Linear,
                  std::size_t heads = 1) {
    LayerSpec s;
    s.in = in;
    s.out = out;
    s.kind = kind;
    s.self_interaction = si;
    s.heads = heads;
    s.radial_hidden = 16;
    return s;
}

void zero_final_layers(ParamStore& store, const std::map<std::pair<int, int>, RadialProfile>& nets) {
    for (const auto& [key, net] : nets) {
        for (const char* name : {"/w2", "/b2"}) {
            for (double& v : store.value(net.prefix + name).data) v = 0.0;
        }
    }
}

const Fiber kHidden = Fiber::parse("0:2,1:2,2:2");

}  // namespace

TEST(TfnLayer, ZeroRadialOutputLeavesOnlySelfInteraction) {
    std::mt19937_64 rng(1);
    ParamStore store;
    const Layer layer = make_layer(store, "t", spec_of(kHidden, kHidden, LayerKind::Tfn), rng);
    zero_final_layers(store, layer.value_nets);
    const Bench b = make_bench(kHidden, 8, 4, rng);
    Tape tape;
    FiberFeature in;
    for (const auto& [l, t] : b.features) in[l] = tape.constant(t);
    const TensorMap si = values(linear_self_interaction(tape, store, "t/si", kHidden, kHidden, in));
    EXPECT_EQ(max_abs_diff(b.eval(store, layer), si), 0.0);
}

TEST(TfnLayer, EquivariantAndPermutationEquivariant) {
    std::mt19937_64 rng(2);
    ParamStore store;
    const Fiber out = Fiber::parse("0:3,1:2,2:1,3:1");
    const Layer layer = make_layer(store, "t", spec_of(kHidden, out, LayerKind::Tfn), rng);
    const Bench b = make_bench(kHidden, 10, 5, rng);
    const TensorMap base = b.eval(store, layer);
    for (int trial = 0; trial < 5; ++trial) {
        const Rotation g = rotation_sample(rng);
        EXPECT_LT(relative_diff(rotate_features(base, g), b.rotated(g).eval(store, layer)), 1e-10);
    }
    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    EXPECT_LT(max_abs_diff(permute_rows(base, perm), b.permuted(perm).eval(store, layer)), 1e-12);
}

TEST(TfnLayer, FiberMismatchIsAnArgumentError) {
    std::mt19937_64 rng(3);
    ParamStore store;
    const Layer layer = make_layer(store, "t", spec_of(kHidden, kHidden, LayerKind::Tfn), rng);
    const Bench b = make_bench(Fiber::parse("0:2,1:3"), 6, 3, rng);
    EXPECT_THROW(b.eval(store, layer), ArgumentError);
}

TEST(Attention, SingleNeighborAndEqualLogits) {
    std::mt19937_64 rng(4);
    ParamStore store;
    const Layer layer = make_layer(store, "a", spec_of(kHidden, kHidden, LayerKind::Attention), rng);
    {
        const Bench b = make_bench(kHidden, 6, 1, rng);
        Tape tape;
        const Tensor a = b.run(tape, store, layer).alpha->value();
        for (double v : a.data) EXPECT_EQ(v, 1.0);
    }
    zero_final_layers(store, layer.key_nets);
    const Bench b = make_bench(kHidden, 7, 4, rng);
    Tape tape;
    const Tensor a = b.run(tape, store, layer).alpha->value();
    for (double v : a.data) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Attention, WeightsAreRotationInvariantAndRowsSumToOne) {
    std::mt19937_64 rng(5);
    ParamStore store;
    const Layer layer = make_layer(store, "a", spec_of(kHidden, kHidden, LayerKind::Attention, SelfInteractionKind::Linear, 2), rng);
    const Bench b = make_bench(kHidden, 12, 5, rng);
    Tape t0;
    const Tensor a = b.run(t0, store, layer).alpha->value();
    std::vector<double> rows(12 * 2, 0.0);
    for (std::size_t e = 0; e < b.graph.edges(); ++e) {
        for (std::size_t h = 0; h < 2; ++h) rows[b.graph.dst[e] * 2 + h] += a[e * 2 + h];
    }
    for (double r : rows) EXPECT_NEAR(r, 1.0, 1e-12);
    for (int trial = 0; trial < 5; ++trial) {
        Tape t1;
        const Tensor ar = b.rotated(rotation_sample(rng)).run(t1, store, layer).alpha->value();
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(ar[i], a[i], 1e-10);
    }
}

TEST(Attention, LayerIsEquivariantAndPermutationEquivariant) {
    std::mt19937_64 rng(6);
    for (auto si : {SelfInteractionKind::Linear, SelfInteractionKind::Attentive}) {
        ParamStore store;
        const Layer layer = make_layer(store, "a", spec_of(kHidden, Fiber::parse("0:2,1:2,2:2,3:2"), LayerKind::Attention, si, 2), rng);
        const Bench b = make_bench(kHidden, 10, 4, rng);
        const TensorMap base = b.eval(store, layer);
        for (int trial = 0; trial < 5; ++trial) {
            const Rotation g = rotation_sample(rng);
            EXPECT_LT(relative_diff(rotate_features(base, g), b.rotated(g).eval(store, layer)), 1e-10);
        }
        std::vector<std::size_t> perm(10);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        EXPECT_LT(max_abs_diff(permute_rows(base, perm), b.permuted(perm).eval(store, layer)), 1e-12);
    }
}

TEST(Attention, UniformWeightsReduceToRescaledTfn) {
    std::mt19937_64 rng(7);
    const std::size_t k = 4;
    ParamStore att;
    const Layer a = make_layer(att, "x", spec_of(kHidden, kHidden, LayerKind::Attention), rng);
    // Same value nets and self-interaction, with the radial outputs divided by |N_i| = k.
    ParamStore tfn;
    std::mt19937_64 unused(0);
    const Layer t = make_layer(tfn, "x", spec_of(kHidden, kHidden, LayerKind::Tfn), unused);
    for (const auto& name : tfn.names()) tfn.value(name) = att.value(name);
    for (const auto& [key, net] : t.value_nets) {
        for (const char* p : {"/w2", "/b2"}) {
            for (double& v : tfn.value(net.prefix + p).data) v /= static_cast<double>(k);
        }
    }
    const Bench b = make_bench(kHidden, 9, k, rng);
    EXPECT_LT(max_abs_diff(b.eval(att, a, LayerOptions{true}), b.eval(tfn, t)), 1e-12);
}

TEST(Attention, TwoHeadsEqualTwoSingleHeadLayersOnChannelHalves) {
    std::mt19937_64 rng(8);
    const Fiber in = Fiber::parse("0:2,1:2"), out = Fiber::parse("0:4,1:4,2:4");
    const Fiber half = Fiber::parse("0:2,1:2,2:2");
    ParamStore s2, s1a, s1b;
    const Layer two = make_layer(s2, "L", spec_of(in, out, LayerKind::Attention, SelfInteractionKind::Linear, 2), rng);
    const Layer one = make_layer(s1a, "L", spec_of(in, half, LayerKind::Attention), rng);
    make_layer(s1b, "L", spec_of(in, half, LayerKind::Attention), rng);
    // Split every output-channel axis of the two-head layer between the single-head layers.
    for (const auto& name : s1a.names()) {
        const Tensor& full = s2.value(name);
        const bool final_layer = name.ends_with("/w2") || name.ends_with("/b2");
        const bool mixing = name.find("/query/") != std::string::npos || name.find("/si/") != std::string::npos;
        for (int h = 0; h < 2; ++h) {
            Tensor& part = (h == 0 ? s1a : s1b).value(name);
            if (final_layer) {
                // Rows are (J, c_out, c_in) flattened; c_out is split.
                const auto& [l, k] = [&] {
                    for (const auto& [key, net] : two.value_nets) if (name.starts_with(net.prefix + "/")) return key;
                    for (const auto& [key, net] : two.key_nets) if (name.starts_with(net.prefix + "/")) return key;
                    throw std::logic_error(name);
                }();
                const std::size_t ci = in.channels(k), co = out.channels(l), nj = static_cast<std::size_t>(l + k - std::abs(l - k) + 1);
                const std::size_t width = full.rank() == 2 ? full.dim(1) : 1;
                for (std::size_t j = 0; j < nj; ++j) {
                    for (std::size_t o = 0; o < co / 2; ++o) {
                        for (std::size_t c = 0; c < ci; ++c) {
                            const std::size_t src_row = (j * co + h * co / 2 + o) * ci + c;
                            const std::size_t dst_row = (j * co / 2 + o) * ci + c;
                            std::copy_n(full.data.begin() + static_cast<std::ptrdiff_t>(src_row * width), width,
                                        part.data.begin() + static_cast<std::ptrdiff_t>(dst_row * width));
                        }
                    }
                }
            } else if (mixing) {
                const std::size_t rows = part.dim(0), cols = part.dim(1);
                std::copy_n(full.data.begin() + static_cast<std::ptrdiff_t>(h * rows * cols), rows * cols, part.data.begin());
            } else {
                part = full;
            }
        }
    }
    const Bench b = make_bench(in, 8, 3, rng);
    const TensorMap y2 = b.eval(s2, two);
    const TensorMap ya = b.eval(s1a, one), yb = b.eval(s1b, one);
    double worst = 0.0;
    for (const auto& [l, t] : y2) {
        const std::size_t n = t.dim(0), d = t.dim(2);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < 4; ++c) {
                const Tensor& src = c < 2 ? ya.at(l) : yb.at(l);
                for (std::size_t m = 0; m < d; ++m) {
                    worst = std::max(worst, std::abs(t[(i * 4 + c) * d + m] - src[(i * 2 + c % 2) * d + m]));
                }
            }
        }
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(Attention, ConfigErrors) {
    std::mt19937_64 rng(9);
    ParamStore store;
    EXPECT_THROW(make_layer(store, "a", spec_of(kHidden, Fiber::parse("0:3"), LayerKind::Attention, SelfInteractionKind::Linear, 2), rng), ConfigError);
    EXPECT_THROW(make_layer(store, "b", spec_of(Fiber::parse("0:2"), Fiber::parse("1:2"), LayerKind::Attention), rng), ConfigError);
}

TEST(SelfInteraction, LinearIdentityZeroAndRotation) {
    std::mt19937_64 rng(10);
    ParamStore store;
    register_linear_self_interaction(store, "si", kHidden, kHidden, rng);
    const FeatureMap f = random_features(kHidden, 5, rng);
    auto run = [&](const FeatureMap& x) {
        Tape tape;
        FiberFeature in;
        for (const auto& [l, t] : x) in[l] = tape.constant(t);
        return values(linear_self_interaction(tape, store, "si", kHidden, kHidden, in));
    };
    const Rotation g = rotation_sample(rng);
    EXPECT_LT(max_abs_diff(rotate_features(run(f), g), run(rotate_features(f, g))), 1e-12);
    for (int l = 0; l <= 2; ++l) {
        Tensor& w = store.value("si/" + std::to_string(l));
        w = Tensor({2, 2}, std::vector<double>{1, 0, 0, 1});
    }
    EXPECT_EQ(max_abs_diff(run(f), f), 0.0);
    for (int l = 0; l <= 2; ++l) store.value("si/" + std::to_string(l)) = Tensor({2, 2}, 0.0);
    for (const auto& [l, t] : run(f)) {
        for (double v : t.data) EXPECT_EQ(v, 0.0);
    }
}

TEST(SelfInteraction, AttentiveWeightsInvariantAndZeroFeatures) {
    std::mt19937_64 rng(11);
    ParamStore store;
    const Fiber fib = Fiber::parse("0:3,1:3,2:3");
    register_attentive_self_interaction(store, "asi", fib, fib, rng);
    for (double& v : store.value("asi/1/b1").data) v = 0.3;
    const FeatureMap f = random_features(fib, 6, rng);
    const Rotation g = rotation_sample(rng);
    const FeatureMap fr = rotate_features(f, g);
    for (int l = 0; l <= 2; ++l) {
        Tape tape;
        const Tensor w = attentive_weights(tape, store, "asi", l, 3, tape.constant(f.at(l))).value();
        const Tensor wr = attentive_weights(tape, store, "asi", l, 3, tape.constant(fr.at(l))).value();
        for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(w[i], wr[i], 1e-10);
    }
    Tape tape;
    FiberFeature zero;
    for (const auto& [l, c] : fib.entries()) zero[l] = tape.constant(Tensor({6, c, static_cast<std::size_t>(2 * l + 1)}, 0.0));
    const Tensor w0 = attentive_weights(tape, store, "asi", 1, 3, zero.at(1)).value();
    EXPECT_NEAR(w0[0], 0.3, 1e-15);
    for (const auto& [l, t] : values(attentive_self_interaction(tape, store, "asi", fib, fib, zero))) {
        for (double v : t.data) EXPECT_EQ(v, 0.0);
    }
}

TEST(SelfInteraction, AttentiveGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(12);
    ParamStore store;
    const Fiber fib = Fiber::parse("0:2,1:2");
    register_attentive_self_interaction(store, "asi", fib, fib, rng);
    const FeatureMap f = random_features(fib, 4, rng);
    const FeatureMap w = random_features(fib, 4, rng);
    auto loss = [&](Tape& tape) {
        FiberFeature in;
        for (const auto& [l, t] : f) in[l] = tape.constant(t);
        std::optional<Var> total;
        for (const auto& [l, v] : attentive_self_interaction(tape, store, "asi", fib, fib, in)) {
            Var s = sum(mul(v, tape.constant(w.at(l))));
            total = total ? add(*total, s) : s;
        }
        return *total;
    };
    Tape tape;
    tape.backward(loss(tape));
    tape.accumulate(store);
    double worst = 0.0;
    for (const auto& name : store.names()) {
        for (std::size_t i = 0; i < store.value(name).size(); ++i) {
            double& p = store.value(name)[i];
            const double saved = p;
            p = saved + 1e-5;
            Tape a;
            const double fp = loss(a).value().item();
            p = saved - 1e-5;
            Tape b;
            const double fm = loss(b).value().item();
            p = saved;
            const double fd = (fp - fm) / 2e-5, ad = store.grad(name)[i];
            worst = std::max(worst, std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), 1e-6}));
        }
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(NormNonlinearity, ZeroChannelsRotationAndDirection) {
    std::mt19937_64 rng(13);
    ParamStore store;
    const Fiber fib = Fiber::parse("0:3,1:3,2:3");
    register_norm_nonlinearity(store, "nl", fib);
    for (double& v : store.value("nl/1/beta").data) v = 0.2;
    FeatureMap f = random_features(fib, 5, rng);
    for (std::size_t m = 0; m < 3; ++m) f.at(1)[(2 * 3 + 1) * 3 + m] = 0.0;  // node 2, channel 1
    auto run = [&](const FeatureMap& x) {
        Tape tape;
        FiberFeature in;
        for (const auto& [l, t] : x) in[l] = tape.constant(t);
        return values(norm_nonlinearity(tape, store, "nl", in));
    };
    const TensorMap y = run(f);
    for (const auto& [l, t] : y) {
        for (double v : t.data) EXPECT_TRUE(std::isfinite(v));
    }
    for (std::size_t m = 0; m < 3; ++m) EXPECT_EQ(y.at(1)[(2 * 3 + 1) * 3 + m], 0.0);
    const Rotation g = rotation_sample(rng);
    EXPECT_LT(max_abs_diff(rotate_features(y, g), run(rotate_features(f, g))), 1e-10);

    FeatureMap scaled = f;
    for (std::size_t m = 0; m < 5; ++m) scaled.at(2)[(0 * 3 + 0) * 5 + m] *= 3.0;
    const TensorMap ys = run(scaled);
    // Every output channel stays parallel to its input channel.
    for (std::size_t c = 0; c < 3; ++c) {
        const double* a = ys.at(2).data.data() + c * 5;
        const double* x = scaled.at(2).data.data() + c * 5;
        double dot = 0, na = 0, nx = 0;
        for (int m = 0; m < 5; ++m) {
            dot += a[m] * x[m];
            na += a[m] * a[m];
            nx += x[m] * x[m];
        }
        if (na > 0) EXPECT_NEAR(dot / std::sqrt(na * nx), 1.0, 1e-12);
    }
}

TEST(InvariantPool, SingleNodeRotationPermutationAndErrors) {
    std::mt19937_64 rng(14);
    const FeatureMap f = random_features(kHidden, 6, rng);
    auto pool = [](const FeatureMap& x, std::size_t n, std::vector<std::size_t> seg, std::size_t s) {
        Tape tape;
        FiberFeature in;
        for (const auto& [l, t] : x) in[l] = tape.constant(t);
        (void)n;
        return invariant_pool(in, make_index(std::move(seg)), s).value();
    };
    const Tensor p = pool(f, 6, {0, 0, 0, 0, 0, 0}, 1);
    EXPECT_EQ(p.shape, (Shape{1, 2}));
    EXPECT_EQ(pool(rotate_features(f, rotation_sample(rng)), 6, {0, 0, 0, 0, 0, 0}, 1).data, p.data);
    FeatureMap single;
    single[0] = Tensor({1, 2, 1}, std::vector<double>{0.5, -2.0});
    EXPECT_EQ(pool(single, 1, {0}, 1).data, (std::vector<double>{0.5, -2.0}));
    FeatureMap flipped;
    for (const auto& [l, t] : f) {
        Tensor u(t.shape);
        const std::size_t w = t.size() / 6;
        for (std::size_t i = 0; i < 6; ++i) std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>((5 - i) * w), w, u.data.begin() + static_cast<std::ptrdiff_t>(i * w));
        flipped[l] = u;
    }
    EXPECT_EQ(pool(flipped, 6, {0, 0, 0, 0, 0, 0}, 1).data, p.data);
    FeatureMap no_scalars;
    no_scalars[1] = f.at(1);
    EXPECT_THROW(pool(no_scalars, 6, {0, 0, 0, 0, 0, 0}, 1), ConfigError);
}

TEST(Model, EndToEndEquivarianceTranslationAndCounts) {
    ModelConfig cfg;
    cfg.input = Fiber::parse("0:1,1:2");
    cfg.output = Fiber::parse("1:2");
    cfg.radial_hidden = 16;
    ParamStore store;
    const Model model = build_model(cfg, store, 17);
    EXPECT_EQ(model.layers.size(), 4u);
    EXPECT_EQ(store.parameter_count(), count_parameters(cfg));

    std::mt19937_64 rng(15);
    ModelInput in{random_points(5, rng), random_features(cfg.input, 5, rng), fully_connected(5)};
    auto run = [&](const ModelInput& x) {
        Tape tape;
        return values(run_model(tape, store, model, x).features);
    };
    const TensorMap y = run(in);
    for (int trial = 0; trial < 10; ++trial) {
        const Rotation g = rotation_sample(rng);
        ModelInput r{rotate_points(in.positions, g), rotate_features(in.features, g), in.graph};
        EXPECT_LT(relative_diff(rotate_features(y, g), run(r)), 1e-9);
    }
    ModelInput shifted = in;
    for (Vec3& p : shifted.positions) p = {p[0] + 5, p[1] - 3, p[2] + 2};
    EXPECT_LT(max_abs_diff(y, run(shifted)), 1e-10);

    ModelConfig bad = cfg;
    bad.heads = 2;
    try {
        ParamStore s;
        build_model(bad, s, 1);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("heads"), std::string::npos);
    }
    bad = cfg;
    bad.hidden_degree = 40;
    EXPECT_THROW(count_parameters(bad), ConfigError);
}

TEST(Model, TfnVariantAndParameterCounts) {
    for (auto kind : {LayerKind::Tfn, LayerKind::Attention}) {
        for (auto si : {SelfInteractionKind::Linear, SelfInteractionKind::Attentive}) {
            ModelConfig cfg;
            cfg.input = Fiber::parse("0:1,1:2");
            cfg.output = Fiber::parse("0:1,1:2");
            cfg.kind = kind;
            cfg.self_interaction = si;
            cfg.edge_scalars = 2;
            cfg.radial_hidden = 8;
            cfg.hidden_degree = 3;
            ParamStore store;
            build_model(cfg, store, 3);
            EXPECT_EQ(store.parameter_count(), count_parameters(cfg));
        }
    }
}
