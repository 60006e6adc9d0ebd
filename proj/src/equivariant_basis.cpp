#include "se3/equivariant_basis.hpp"

#include <cmath>

#include "se3/error.hpp"
#include "se3/parallel.hpp"
#include "se3/spherical_harmonics.hpp"

namespace se3 {

namespace {

std::vector<Direction> directions(std::span<const Vec3> edge_vectors) {
    std::vector<Direction> dirs;
    dirs.reserve(edge_vectors.size());
    for (std::size_t e = 0; e < edge_vectors.size(); ++e) {
        const Vec3& v = edge_vectors[e];
        if (v[0] == 0.0 && v[1] == 0.0 && v[2] == 0.0) {
            throw DegenerateEdgeError("kernel basis: edge " + std::to_string(e) + " has zero length");
        }
        dirs.push_back(Direction::from_vector(v));
    }
    return dirs;
}

Eigen::MatrixXd cg_block(int l, int k, int J, const BasisOptions& options) {
    Eigen::MatrixXd q = clebsch_gordan(l, k, J).matrix;
    if (options.break_equivariance && l == 1 && k == 1 && J == 1) q.col(0).swap(q.col(2));
    return q;
}

// Fills one (l, k) block from precomputed harmonics sh[J] (component-major, stride = edges).
BasisBlock build_block(int l, int k, const std::vector<ShArray>& sh, std::size_t edges, const BasisOptions& options) {
    BasisBlock block{l, k, nullptr};
    const int jmin = block.j_min();
    const int nj = block.j_count();
    const std::size_t dl = static_cast<std::size_t>(2 * l + 1);
    const std::size_t dk = static_cast<std::size_t>(2 * k + 1);
    auto values = std::make_shared<Tensor>(Shape{edges, static_cast<std::size_t>(nj), dl, dk});
    std::vector<Eigen::MatrixXd> q;
    for (int j = 0; j < nj; ++j) q.push_back(cg_block(l, k, jmin + j, options));
    parallel_for(edges, [&](std::size_t first, std::size_t last) {
        for (std::size_t e = first; e < last; ++e) {
            for (int j = 0; j < nj; ++j) {
                const int J = jmin + j;
                const ShArray& y = sh[static_cast<std::size_t>(J)];
                const Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<>> yv(
                    y.values.data() + e, 2 * J + 1, Eigen::InnerStride<>(static_cast<Eigen::Index>(y.points)));
                const Eigen::VectorXd w = q[static_cast<std::size_t>(j)] * yv;
                double* out = values->data.data() + (e * static_cast<std::size_t>(nj) + static_cast<std::size_t>(j)) * dl * dk;
                // vec(W) is column-major: entry (a, b) sits at a + dl * b.
                for (std::size_t a = 0; a < dl; ++a) {
                    for (std::size_t b = 0; b < dk; ++b) out[a * dk + b] = w(static_cast<Eigen::Index>(a + dl * b));
                }
            }
        }
    }, 64);
    block.values = std::move(values);
    return block;
}

void check_degree(int degree) {
    if (degree < 0 || degree > max_degree()) {
        throw CapabilityError("kernel basis: degree " + std::to_string(degree) + " outside [0, " +
                              std::to_string(max_degree()) + "]");
    }
}

}  // namespace

const double* BasisBlock::matrix(std::size_t edge, int j_index) const {
    const std::size_t size = static_cast<std::size_t>((2 * l + 1) * (2 * k + 1));
    return values->data.data() + (edge * static_cast<std::size_t>(j_count()) + static_cast<std::size_t>(j_index)) * size;
}

BasisBlock basis_blocks(int l, int k, std::span<const Vec3> edge_vectors, const BasisOptions& options) {
    check_degree(l);
    check_degree(k);
    const auto dirs = directions(edge_vectors);
    const auto sh = sph_harm_batch(l + k, dirs);
    return build_block(l, k, sh, dirs.size(), options);
}

BasisSet::BasisSet(std::span<const Vec3> edge_vectors, int max_degree, const BasisOptions& options)
    : max_degree_(max_degree), edges_(edge_vectors.size()) {
    check_degree(max_degree);
    const auto dirs = directions(edge_vectors);
    const auto sh = sph_harm_batch(2 * max_degree, dirs);
    for (int l = 0; l <= max_degree; ++l) {
        for (int k = 0; k <= max_degree; ++k) blocks_.emplace(std::pair{l, k}, build_block(l, k, sh, edges_, options));
    }
}

const BasisBlock& BasisSet::block(int l, int k) const {
    auto it = blocks_.find({l, k});
    if (it == blocks_.end()) {
        throw CapabilityError("BasisSet: pair (" + std::to_string(l) + "," + std::to_string(k) + ") beyond degree " +
                              std::to_string(max_degree_));
    }
    return it->second;
}

RadialProfile make_radial_profile(ParamStore& store, const std::string& prefix, std::size_t inputs,
                                  std::size_t hidden, std::size_t j_count, std::size_t c_in,
                                  std::size_t c_out, std::mt19937_64& rng, bool zero_final) {
    RadialProfile p{prefix, inputs, hidden, j_count, c_in, c_out};
    auto uniform = [&](Shape shape, double bound) {
        std::uniform_real_distribution<double> u(-bound, bound);
        Tensor t(std::move(shape));
        for (double& v : t.data) v = u(rng);
        return t;
    };
    store.add(prefix + "/w0", uniform({hidden, inputs}, std::sqrt(6.0 / static_cast<double>(inputs))));
    store.add(prefix + "/b0", Tensor({hidden}, 0.0));
    store.add(prefix + "/ln0_g", Tensor({hidden}, 1.0));
    store.add(prefix + "/ln0_b", Tensor({hidden}, 0.0));
    store.add(prefix + "/w1", uniform({hidden, hidden}, std::sqrt(6.0 / static_cast<double>(hidden))));
    store.add(prefix + "/b1", Tensor({hidden}, 0.0));
    store.add(prefix + "/ln1_g", Tensor({hidden}, 1.0));
    store.add(prefix + "/ln1_b", Tensor({hidden}, 0.0));
    const double final_bound =
        zero_final ? 0.0 : std::sqrt(3.0 / static_cast<double>(hidden)) / std::sqrt(static_cast<double>(j_count * c_in));
    store.add(prefix + "/w2", zero_final ? Tensor({p.outputs(), hidden}, 0.0) : uniform({p.outputs(), hidden}, final_bound));
    store.add(prefix + "/b2", Tensor({p.outputs()}, 0.0));
    return p;
}

Tensor radial_input(std::span<const double> radii, const Tensor* edge_scalars, double radius_scale) {
    const std::size_t e = radii.size();
    std::size_t s = 0;
    if (edge_scalars) {
        if (edge_scalars->rank() != 2 || edge_scalars->dim(0) != e) {
            throw ArgumentError("radial_input: edge scalars " + shape_string(edge_scalars->shape) + " for " +
                                std::to_string(e) + " edges");
        }
        s = edge_scalars->dim(1);
    }
    Tensor out(Shape{e, 1 + s});
    for (std::size_t i = 0; i < e; ++i) {
        if (!(radii[i] >= 0.0) || !std::isfinite(radii[i])) {
            throw ArgumentError("radial_input: radius " + std::to_string(radii[i]) + " at edge " + std::to_string(i));
        }
        out[i * (1 + s)] = radii[i] / radius_scale;
        for (std::size_t c = 0; c < s; ++c) out[i * (1 + s) + 1 + c] = (*edge_scalars)[i * s + c];
    }
    return out;
}

Var radial_forward(Tape& tape, const ParamStore& store, const RadialProfile& p, Var input) {
    const Tensor& x = input.value();
    if (x.rank() != 2 || x.dim(1) != p.inputs) {
        throw ArgumentError("radial_forward: input " + shape_string(x.shape) + " for a net of width " + std::to_string(p.inputs));
    }
    for (std::size_t e = 0; e < x.dim(0); ++e) {
        if (x[e * p.inputs] < 0.0) throw ArgumentError("radial_forward: negative radius at edge " + std::to_string(e));
    }
    auto P = [&](const char* name) { return tape.param(store, p.prefix + "/" + name); };
    Var h = relu(layer_norm(linear(input, P("w0"), P("b0")), P("ln0_g"), P("ln0_b")));
    h = relu(layer_norm(linear(h, P("w1"), P("b1")), P("ln1_g"), P("ln1_b")));
    Var out = linear(h, P("w2"), P("b2"));
    return reshape(out, {x.dim(0), p.j_count, p.c_out, p.c_in});
}

Tensor assemble_kernel(const BasisBlock& blocks, const Tensor& coeffs) {
    const std::size_t e_count = blocks.edges();
    const auto nj = static_cast<std::size_t>(blocks.j_count());
    if (coeffs.rank() != 4 || coeffs.dim(0) != e_count || coeffs.dim(1) != nj) {
        throw ArgumentError("assemble_kernel: coefficients " + shape_string(coeffs.shape) + " for " +
                            std::to_string(e_count) + " edges and " + std::to_string(nj) + " J blocks");
    }
    const std::size_t co = coeffs.dim(2), ci = coeffs.dim(3);
    const std::size_t size = static_cast<std::size_t>((2 * blocks.l + 1) * (2 * blocks.k + 1));
    Tensor out(Shape{e_count, co, ci, static_cast<std::size_t>(2 * blocks.l + 1), static_cast<std::size_t>(2 * blocks.k + 1)});
    for (std::size_t e = 0; e < e_count; ++e) {
        for (std::size_t o = 0; o < co; ++o) {
            for (std::size_t i = 0; i < ci; ++i) {
                double* w = out.data.data() + ((e * co + o) * ci + i) * size;
                for (std::size_t j = 0; j < nj; ++j) {
                    const double c = coeffs[((e * nj + j) * co + o) * ci + i];
                    const double* b = blocks.matrix(e, static_cast<int>(j));
                    for (std::size_t t = 0; t < size; ++t) w[t] += c * b[t];
                }
            }
        }
    }
    return out;
}

}  // namespace se3
