#pragma once

// Property residuals shared by the CLI checks and the acceptance runner. Each returns the
// worst absolute deviation over its random trials.

#include <random>

#include "se3/equivariant_basis.hpp"

namespace se3 {

/// max |D(g1 g2) - D(g1) D(g2)| over degrees 0..max_l.
double wigner_homomorphism_residual(int max_l, std::size_t trials, std::mt19937_64& rng);
/// max |D D^T - I|.
double wigner_orthogonality_residual(int max_l, std::size_t trials, std::mt19937_64& rng);
/// max |D_k (x) D_l - Q (+)_J D_J Q^T| and |Q Q^T - I| over l, k <= max_lk.
double cg_decomposition_residual(int max_lk, std::size_t trials, std::mt19937_64& rng);
/// max |W(R_g x) - D_l(g) W(x) D_k(g)^T| over every basis block with l, k <= max_lk.
double kernel_constraint_residual(int max_lk, std::size_t trials, std::mt19937_64& rng, const BasisOptions& options = {});
/// max |Y_J^m(x) - oracle| over degrees 0..max_J (max_J <= 6).
double sh_oracle_deviation(int max_j, std::size_t points, std::mt19937_64& rng);
/// max |Y_J(R_g x) - D_J(g) Y_J(x)|.
double sh_rotation_residual(int max_j, std::size_t points, std::mt19937_64& rng);

Vec3 random_direction(std::mt19937_64& rng);

}  // namespace se3
