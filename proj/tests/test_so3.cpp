#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "se3/error.hpp"
#include "se3/so3.hpp"
#include "se3/spherical_harmonics.hpp"

namespace se3 {
namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Direction::from_vector({n(rng), n(rng), n(rng)}).unit();
}

TEST(Rotation, SampleIsDeterministicAndUnit) {
    std::mt19937_64 a(42), b(42);
    const Rotation ra = rotation_sample(a);
    const Rotation rb = rotation_sample(b);
    EXPECT_EQ(ra.w(), rb.w());
    EXPECT_EQ(ra.x(), rb.x());
    EXPECT_EQ(ra.y(), rb.y());
    EXPECT_EQ(ra.z(), rb.z());
    const double n = std::sqrt(ra.w() * ra.w() + ra.x() * ra.x() + ra.y() * ra.y() + ra.z() * ra.z());
    EXPECT_NEAR(n, 1.0, 1e-12);
}

TEST(Rotation, HaarMeanMatrixIsZero) {
    std::mt19937_64 rng(7);
    Eigen::Matrix3d mean = Eigen::Matrix3d::Zero();
    const int n = 100000;
    for (int i = 0; i < n; ++i) mean += to_matrix(rotation_sample(rng));
    mean /= n;
    EXPECT_LT(max_abs(mean), 0.02);
}

TEST(Rotation, GroupLaws) {
    std::mt19937_64 rng(3);
    EXPECT_LT(max_abs(to_matrix(Rotation::identity()) - Eigen::Matrix3d::Identity()), 1e-15);
    for (int t = 0; t < 50; ++t) {
        const Rotation g1 = rotation_sample(rng);
        const Rotation g2 = rotation_sample(rng);
        const Rotation e = rotation_compose(g1, rotation_inverse(g1));
        EXPECT_LT(max_abs(to_matrix(e) - Eigen::Matrix3d::Identity()), 1e-12);
        EXPECT_LT(max_abs(to_matrix(rotation_compose(g1, g2)) - to_matrix(g1) * to_matrix(g2)), 1e-12);
        const Eigen::Matrix3d r = to_matrix(g1);
        EXPECT_LT(max_abs(r * r.transpose() - Eigen::Matrix3d::Identity()), 1e-12);
        EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    }
}

TEST(WignerD, TrivialDegrees) {
    std::mt19937_64 rng(1);
    EXPECT_DOUBLE_EQ(wigner_d(0, rotation_sample(rng))(0, 0), 1.0);
    EXPECT_LT(max_abs(wigner_d(1, Rotation::identity()) - Eigen::MatrixXd::Identity(3, 3)), 1e-15);
}

TEST(WignerD, DegreeOneIsSignedPermutationOfRotationMatrix) {
    std::mt19937_64 rng(5);
    const Eigen::Matrix3d& m = cartesian_to_sh();
    for (int t = 0; t < 20; ++t) {
        const Rotation g = rotation_sample(rng);
        const Eigen::MatrixXd d1 = wigner_d(1, g);
        EXPECT_LT(max_abs(m.transpose() * d1 * m - to_matrix(g)), 1e-12);
    }
}

TEST(WignerD, RotatesHarmonicsOfDegreeTwo) {
    std::mt19937_64 rng(11);
    const Rotation g = rotation_sample(rng);
    const Eigen::MatrixXd d = wigner_d(2, g);
    for (int t = 0; t < 100; ++t) {
        const Vec3 x = random_unit(rng);
        const Direction dx = Direction::from_vector(x);
        const Direction drx = Direction::from_vector(g.apply(x));
        Eigen::VectorXd y(5), yr(5);
        for (int m = -2; m <= 2; ++m) {
            y(m + 2) = sph_harm_oracle(2, m, dx);
            yr(m + 2) = sph_harm_oracle(2, m, drx);
        }
        EXPECT_LT((yr - d * y).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(WignerD, HomomorphismAndOrthogonality) {
    std::mt19937_64 rng(13);
    for (int l = 0; l <= 4; ++l) {
        double hom = 0.0, orth = 0.0;
        for (int t = 0; t < 100; ++t) {
            const Rotation g1 = rotation_sample(rng);
            const Rotation g2 = rotation_sample(rng);
            const Eigen::MatrixXd d1 = wigner_d(l, g1);
            hom = std::max(hom, max_abs(wigner_d(l, rotation_compose(g1, g2)) - d1 * wigner_d(l, g2)));
            orth = std::max(orth, max_abs(d1 * d1.transpose() -
                                          Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1)));
        }
        EXPECT_LT(hom, 1e-9) << "l=" << l;
        EXPECT_LT(orth, 1e-10) << "l=" << l;
    }
}

TEST(WignerD, CapabilityError) {
    EXPECT_THROW(wigner_d(max_degree() + 1, Rotation::identity()), CapabilityError);
}

TEST(ClebschGordan, TrivialCouplings) {
    EXPECT_NEAR(clebsch_gordan(0, 0, 0).matrix(0, 0), 1.0, 1e-12);
    for (int l = 0; l <= 3; ++l) {
        const Eigen::MatrixXd& q = clebsch_gordan(l, 0, l).matrix;
        EXPECT_LT(max_abs(q - Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1)), 1e-10) << l;
    }
    EXPECT_THROW(clebsch_gordan(1, 1, 3), ArgumentError);
    EXPECT_THROW(clebsch_gordan(2, 0, 1), ArgumentError);
}

// Independent route for (1,1,0): the invariant vector of D_1 kron D_1 found by least squares
// over sampled rotations.
TEST(ClebschGordan, OneOneZeroMatchesLeastSquaresOracle) {
    std::mt19937_64 rng(17);
    Eigen::MatrixXd stacked(9 * 50, 9);
    for (int t = 0; t < 50; ++t) {
        const Rotation g = rotation_sample(rng);
        const Eigen::MatrixXd d = wigner_d(1, g);
        stacked.block(9 * t, 0, 9, 9) = kron(d, d) - Eigen::MatrixXd::Identity(9, 9);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeFullV);
    Eigen::VectorXd oracle = svd.matrixV().col(8);
    const Eigen::VectorXd q = clebsch_gordan(1, 1, 0).matrix.col(0);
    if (oracle.dot(q) < 0) oracle = -oracle;
    EXPECT_LT((oracle - q).cwiseAbs().maxCoeff(), 1e-10);
    // Proportional to vec(I) / sqrt(3).
    Eigen::VectorXd vec_i = Eigen::VectorXd::Zero(9);
    vec_i(0) = vec_i(4) = vec_i(8) = 1.0 / std::sqrt(3.0);
    EXPECT_LT((q - vec_i).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ClebschGordan, DecompositionForAllLowDegrees) {
    std::mt19937_64 rng(19);
    for (int l = 0; l <= 3; ++l) {
        for (int k = 0; k <= 3; ++k) {
            const Eigen::MatrixXd q = clebsch_gordan_stacked(l, k);
            const Eigen::Index dim = q.rows();
            EXPECT_LT(max_abs(q * q.transpose() - Eigen::MatrixXd::Identity(dim, dim)), 1e-10);
            double worst = 0.0;
            for (int t = 0; t < 10; ++t) {
                const Rotation g = rotation_sample(rng);
                Eigen::MatrixXd block = Eigen::MatrixXd::Zero(dim, dim);
                Eigen::Index off = 0;
                for (int J = std::abs(k - l); J <= k + l; ++J) {
                    block.block(off, off, 2 * J + 1, 2 * J + 1) = wigner_d(J, g);
                    off += 2 * J + 1;
                }
                const Eigen::MatrixXd t_g = kron(wigner_d(k, g), wigner_d(l, g));
                worst = std::max(worst, max_abs(t_g - q * block * q.transpose()));
            }
            EXPECT_LT(worst, 1e-9) << "l=" << l << " k=" << k;
        }
    }
}

TEST(ClebschGordan, SignConventionIsDeterministic) {
    const Eigen::MatrixXd& q = clebsch_gordan(2, 1, 2).matrix;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        if (std::abs(q.data()[i]) > 1e-9) {
            EXPECT_GT(q.data()[i], 0.0);
            break;
        }
    }
}

}  // namespace
}  // namespace se3
