#pragma once

// Angular kernel basis W_J^{lk}(x) = unvec(Q_J^{lk} Y_J(x/|x|)) and the radial nets that weight it.

#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>

#include "se3/autodiff.hpp"
#include "se3/so3.hpp"
#include "se3/tensor.hpp"

namespace se3 {

struct BasisOptions {
    /// Negative control: swaps the m=-1 and m=+1 columns of the (1,1,J=1) CG block.
    bool break_equivariance = false;
};

struct BasisBlock {
    int l = 0;
    int k = 0;
    /// [edges, J-count, 2l+1, 2k+1]; J runs |k-l|..k+l.
    std::shared_ptr<const Tensor> values;

    int j_min() const { return l > k ? l - k : k - l; }
    int j_count() const { return l + k - j_min() + 1; }
    std::size_t edges() const { return values->dim(0); }
    /// Row-major (2l+1) x (2k+1) matrix for one edge and J index (0 = J_min).
    const double* matrix(std::size_t edge, int j_index) const;
};

/// Throws DegenerateEdgeError on a zero edge vector, CapabilityError above max_degree().
BasisBlock basis_blocks(int l, int k, std::span<const Vec3> edge_vectors, const BasisOptions& options = {});

/// Every (l, k) block with l, k <= max_degree for one edge set; the spherical harmonics are
/// evaluated once and shared by all pairs.
class BasisSet {
public:
    BasisSet(std::span<const Vec3> edge_vectors, int max_degree, const BasisOptions& options = {});

    const BasisBlock& block(int l, int k) const;
    int max_degree() const { return max_degree_; }
    std::size_t edges() const { return edges_; }

private:
    int max_degree_ = 0;
    std::size_t edges_ = 0;
    std::map<std::pair<int, int>, BasisBlock> blocks_;
};

/// Dense net mapping [radius, edge scalars] to per-edge coefficients phi[E, J, C_out, C_in]:
/// Linear(H) -> LayerNorm -> ReLU -> Linear(H) -> LayerNorm -> ReLU -> Linear(J * C_out * C_in).
struct RadialProfile {
    std::string prefix;
    std::size_t inputs = 1;
    std::size_t hidden = 32;
    std::size_t j_count = 1;
    std::size_t c_in = 1;
    std::size_t c_out = 1;

    std::size_t outputs() const { return j_count * c_out * c_in; }
};

/// Registers the profile's parameters under prefix + "/...". Hidden layers use fan-in-scaled
/// uniform weights; the final layer is further scaled by 1/sqrt(J * C_in), or zeroed.
RadialProfile make_radial_profile(ParamStore& store, const std::string& prefix, std::size_t inputs,
                                  std::size_t hidden, std::size_t j_count, std::size_t c_in,
                                  std::size_t c_out, std::mt19937_64& rng, bool zero_final = false);

/// [E, 1 + S] radial-net input from radii and optional per-edge scalars [E, S].
/// Throws ArgumentError on a negative or non-finite radius.
Tensor radial_input(std::span<const double> radii, const Tensor* edge_scalars = nullptr, double radius_scale = 1.0);

Var radial_forward(Tape& tape, const ParamStore& store, const RadialProfile& profile, Var input);

/// Explicit per-channel kernels: [E, C_out, C_in, 2l+1, 2k+1] = sum_J phi[e, J, o, i] W_J(x_e).
Tensor assemble_kernel(const BasisBlock& blocks, const Tensor& coeffs);

}  // namespace se3
