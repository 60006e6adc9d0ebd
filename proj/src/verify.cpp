#include "se3/verify.hpp"

#include <cmath>

#include "se3/spherical_harmonics.hpp"

namespace se3 {

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
    return out;
}

Eigen::MatrixXd block_matrix(const BasisBlock& b, std::size_t edge, int j) {
    const Eigen::Index rows = 2 * b.l + 1, cols = 2 * b.k + 1;
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(b.matrix(edge, j), rows, cols);
}

}  // namespace

Vec3 random_direction(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    for (;;) {
        const Vec3 v{g(rng), g(rng), g(rng)};
        const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if (n > 1e-6) return {v[0] / n, v[1] / n, v[2] / n};
    }
}

double wigner_homomorphism_residual(int max_l, std::size_t trials, std::mt19937_64& rng) {
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const Rotation a = rotation_sample(rng), b = rotation_sample(rng);
        for (int l = 0; l <= max_l; ++l) {
            worst = std::max(worst, max_abs(wigner_d(l, rotation_compose(a, b)) - wigner_d(l, a) * wigner_d(l, b)));
        }
    }
    return worst;
}

double wigner_orthogonality_residual(int max_l, std::size_t trials, std::mt19937_64& rng) {
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const Rotation g = rotation_sample(rng);
        for (int l = 0; l <= max_l; ++l) {
            const Eigen::MatrixXd d = wigner_d(l, g);
            worst = std::max(worst, max_abs(d * d.transpose() - Eigen::MatrixXd::Identity(d.rows(), d.rows())));
        }
    }
    return worst;
}

double cg_decomposition_residual(int max_lk, std::size_t trials, std::mt19937_64& rng) {
    double worst = 0.0;
    for (int l = 0; l <= max_lk; ++l) {
        for (int k = 0; k <= max_lk; ++k) {
            const Eigen::MatrixXd q = clebsch_gordan_stacked(l, k);
            const Eigen::Index dim = q.rows();
            worst = std::max(worst, max_abs(q * q.transpose() - Eigen::MatrixXd::Identity(dim, dim)));
            for (std::size_t t = 0; t < trials; ++t) {
                const Rotation g = rotation_sample(rng);
                Eigen::MatrixXd block = Eigen::MatrixXd::Zero(dim, dim);
                Eigen::Index off = 0;
                for (int J = std::abs(k - l); J <= k + l; ++J) {
                    block.block(off, off, 2 * J + 1, 2 * J + 1) = wigner_d(J, g);
                    off += 2 * J + 1;
                }
                worst = std::max(worst, max_abs(kron(wigner_d(k, g), wigner_d(l, g)) - q * block * q.transpose()));
            }
        }
    }
    return worst;
}

double kernel_constraint_residual(int max_lk, std::size_t trials, std::mt19937_64& rng, const BasisOptions& options) {
    std::uniform_real_distribution<double> radius(0.2, 3.0);
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const Vec3 d = random_direction(rng);
        const double r = radius(rng);
        const Vec3 x{r * d[0], r * d[1], r * d[2]};
        const Rotation g = rotation_sample(rng);
        const std::vector<Vec3> pts = {x, g.apply(x)};
        const BasisSet set(pts, max_lk, options);
        for (int l = 0; l <= max_lk; ++l) {
            const Eigen::MatrixXd dl = wigner_d(l, g);
            for (int k = 0; k <= max_lk; ++k) {
                const Eigen::MatrixXd dk = wigner_d(k, g);
                const BasisBlock& b = set.block(l, k);
                for (int j = 0; j < b.j_count(); ++j) {
                    worst = std::max(worst, max_abs(block_matrix(b, 1, j) - dl * block_matrix(b, 0, j) * dk.transpose()));
                }
            }
        }
    }
    return worst;
}

double sh_oracle_deviation(int max_j, std::size_t points, std::mt19937_64& rng) {
    std::vector<Direction> dirs;
    for (std::size_t i = 0; i < points; ++i) dirs.push_back(Direction::from_vector(random_direction(rng)));
    const std::vector<ShArray> y = sph_harm_batch(max_j, dirs);
    double worst = 0.0;
    for (int j = 0; j <= max_j; ++j) {
        for (std::size_t i = 0; i < points; ++i) {
            for (int m = -j; m <= j; ++m) {
                const double v = y[static_cast<std::size_t>(j)].at(i, static_cast<std::size_t>(m + j));
                worst = std::max(worst, std::abs(v - sph_harm_oracle(j, m, dirs[i])));
            }
        }
    }
    return worst;
}

double sh_rotation_residual(int max_j, std::size_t points, std::mt19937_64& rng) {
    double worst = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
        const Vec3 x = random_direction(rng);
        const Rotation g = rotation_sample(rng);
        const Direction a = Direction::from_vector(x), b = Direction::from_vector(g.apply(x));
        for (int j = 0; j <= max_j; ++j) {
            const std::vector<double> ya = sph_harm_at(j, a), yb = sph_harm_at(j, b);
            const Eigen::VectorXd rotated = wigner_d(j, g) * Eigen::Map<const Eigen::VectorXd>(ya.data(), static_cast<Eigen::Index>(ya.size()));
            for (std::size_t m = 0; m < yb.size(); ++m) worst = std::max(worst, std::abs(yb[m] - rotated(static_cast<Eigen::Index>(m))));
        }
    }
    return worst;
}

}  // namespace se3
