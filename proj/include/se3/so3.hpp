#pragma once

// Rotations, real Wigner-D matrices and real Clebsch-Gordan change-of-basis blocks, all in the
// real spherical-harmonic basis of spherical_harmonics.hpp (m = -l..l).
//
// Degree-1 vectors relate to Cartesian ones through the signed permutation
//     type1 = M * cart,   M = [[0,-1,0],[0,0,1],[-1,0,0]],
// i.e. (Y_{1,-1}, Y_{1,0}, Y_{1,1}) ~ (-y, z, -x). The signs come from the Condon-Shortley
// phase. D_1(g) = M R_g M^T.
//
// Clebsch-Gordan block Q_J^{lk} has shape ((2l+1)(2k+1)) x (2J+1). Rows index vec(W) for a
// (2l+1) x (2k+1) matrix W in column-major order (row m_l + (2l+1) m_k), so that
//     (D_k(g) kron D_l(g)) Q_J = Q_J D_J(g).

#include <Eigen/Dense>
#include <array>
#include <random>

namespace se3 {

using Vec3 = std::array<double, 3>;

/// Unit quaternion (w, x, y, z).
class Rotation {
public:
    Rotation() = default;

    static Rotation identity() { return {}; }
    /// Normalizes the input. Throws ArgumentError on a zero quaternion.
    static Rotation from_quaternion(double w, double x, double y, double z);
    static Rotation from_axis_angle(const Vec3& axis, double angle);

    double w() const { return q_[0]; }
    double x() const { return q_[1]; }
    double y() const { return q_[2]; }
    double z() const { return q_[3]; }

    Eigen::Matrix3d matrix() const;
    Vec3 apply(const Vec3& v) const;

private:
    std::array<double, 4> q_{1.0, 0.0, 0.0, 0.0};
};

/// Haar-uniform rotation from four normal draws.
Rotation rotation_sample(std::mt19937_64& rng);
/// Matrix of the result is matrix(a) * matrix(b).
Rotation rotation_compose(const Rotation& a, const Rotation& b);
Rotation rotation_inverse(const Rotation& g);
Eigen::Matrix3d to_matrix(const Rotation& g);

/// Degree cap for wigner_d / clebsch_gordan. Defaults to 6.
int max_degree();
/// Accepts 1..12. Raising it after warm-up simply extends the caches on demand.
void set_max_degree(int degree);

/// Signed permutation taking Cartesian vectors to degree-1 SH coordinates.
const Eigen::Matrix3d& cartesian_to_sh();
Vec3 to_type1(const Vec3& cart);
Vec3 from_type1(const Vec3& type1);

/// Real Wigner-D with Y_l(R_g x) = D_l(g) Y_l(x). Throws CapabilityError above max_degree().
Eigen::MatrixXd wigner_d(int degree, const Rotation& g);

/// Block-diagonal D for several degrees.
Eigen::MatrixXd wigner_d_direct_sum(std::initializer_list<int> degrees, const Rotation& g);

/// Real generator of rotations about Cartesian axis a (0,1,2) at degree l, in the SH basis:
/// D_l(exp(t L_a)) = exp(t G_l,a).
const Eigen::MatrixXd& so3_generator(int degree, int axis);

struct ClebschGordan {
    int l = 0;
    int k = 0;
    int J = 0;
    Eigen::MatrixXd matrix;
};

/// Cached real CG block. Throws ArgumentError outside |k-l| <= J <= k+l and CapabilityError
/// when any degree exceeds max_degree().
const ClebschGordan& clebsch_gordan(int l, int k, int J);

/// All blocks J = |k-l|..k+l side by side: the orthogonal ((2l+1)(2k+1))^2 change of basis.
Eigen::MatrixXd clebsch_gordan_stacked(int l, int k);

/// Populates Wigner-D recursion data and every CG block with l, k, J <= degree.
void warm_up(int degree);

}  // namespace se3
