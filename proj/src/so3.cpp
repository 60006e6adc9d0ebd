#include "se3/so3.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <atomic>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "se3/error.hpp"
#include "se3/spherical_harmonics.hpp"

namespace se3 {
namespace {

std::atomic<int> g_max_degree{6};

constexpr double kSubspaceTol = 1e-6;

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

// Fibonacci-lattice directions; generic enough to pin a degree-l basis.
std::vector<Direction> lattice_directions(std::size_t n) {
    std::vector<Direction> dirs;
    dirs.reserve(n);
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
        const double r = std::sqrt(1.0 - z * z);
        const double a = golden * static_cast<double>(i) + 0.3;
        dirs.push_back(Direction::from_vector({r * std::cos(a), r * std::sin(a), z}));
    }
    return dirs;
}

Eigen::MatrixXd sh_columns(int degree, const std::vector<Direction>& dirs) {
    const std::vector<ShArray> all = sph_harm_batch(degree, dirs);
    const ShArray& y = all.back();
    Eigen::MatrixXd out(2 * degree + 1, static_cast<Eigen::Index>(dirs.size()));
    for (std::size_t s = 0; s < dirs.size(); ++s) {
        for (int m = 0; m < 2 * degree + 1; ++m) out(m, static_cast<Eigen::Index>(s)) = y.at(s, static_cast<std::size_t>(m));
    }
    return out;
}

// Orthonormal basis of the Casimir eigenspace carrying degree J inside a tensor product
// whose generators are given.
Eigen::MatrixXd casimir_subspace(const std::array<Eigen::MatrixXd, 3>& gens, int J) {
    const Eigen::Index n = gens[0].rows();
    Eigen::MatrixXd casimir = Eigen::MatrixXd::Zero(n, n);
    for (const auto& g : gens) casimir += g * g;
    casimir = 0.5 * (casimir + casimir.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(casimir);
    const double target = -static_cast<double>(J * (J + 1));
    std::vector<Eigen::Index> cols;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(eig.eigenvalues()(i) - target) < 0.25) cols.push_back(i);
    }
    if (static_cast<int>(cols.size()) != 2 * J + 1) {
        throw std::logic_error("casimir_subspace: degree " + std::to_string(J) +
                               " has multiplicity " + std::to_string(cols.size()) + " / (2J+1)");
    }
    Eigen::MatrixXd basis(n, 2 * J + 1);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        basis.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors().col(cols[c]);
    }
    return basis;
}

Eigen::MatrixXd polar_factor(const Eigen::MatrixXd& a) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.matrixU() * svd.matrixV().transpose();
}

// Flips the sign of the whole block so its first entry (column-major) above tolerance is positive.
void fix_sign(Eigen::MatrixXd& q) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            if (std::abs(q(i, j)) > 1e-9) {
                if (q(i, j) < 0.0) q = -q;
                return;
            }
        }
    }
}

class Cache {
public:
    static Cache& instance() {
        static Cache c;
        return c;
    }

    const std::array<Eigen::MatrixXd, 3>& generators(int l) {
        std::lock_guard lock(mu_);
        return generators_locked(l);
    }

    Eigen::MatrixXd wigner(int l, const Eigen::Matrix3d& r) {
        std::lock_guard lock(mu_);
        return wigner_locked(l, r);
    }

    const ClebschGordan& cg(int l, int k, int J) {
        std::lock_guard lock(mu_);
        return cg_locked(l, k, J);
    }

private:
    struct Level {
        Eigen::MatrixXd lift;  // (3(2l-1)) x (2l+1) isometry into D_1 kron D_{l-1}
        std::array<Eigen::MatrixXd, 3> gens;
    };

    static std::array<Eigen::Matrix3d, 3> cartesian_generators() {
        Eigen::Matrix3d lx, ly, lz;
        lx << 0, 0, 0, 0, 0, -1, 0, 1, 0;
        ly << 0, 0, 1, 0, 0, 0, -1, 0, 0;
        lz << 0, -1, 0, 1, 0, 0, 0, 0, 0;
        return {lx, ly, lz};
    }

    const Level& level_locked(int l) {
        auto it = levels_.find(l);
        if (it != levels_.end()) return *it->second;
        auto lvl = std::make_unique<Level>();
        if (l == 0) {
            for (auto& g : lvl->gens) g = Eigen::MatrixXd::Zero(1, 1);
        } else if (l == 1) {
            const auto cart = cartesian_generators();
            const Eigen::Matrix3d& m = cartesian_to_sh();
            for (int a = 0; a < 3; ++a) lvl->gens[static_cast<std::size_t>(a)] = m * cart[static_cast<std::size_t>(a)] * m.transpose();
        } else {
            const Level& one = level_locked(1);
            const Level& prev = level_locked(l - 1);
            const Eigen::Index dp = 2 * l - 1;
            std::array<Eigen::MatrixXd, 3> product;
            for (std::size_t a = 0; a < 3; ++a) {
                product[a] = kron(one.gens[a], Eigen::MatrixXd::Identity(dp, dp)) +
                             kron(Eigen::MatrixXd::Identity(3, 3), prev.gens[a]);
            }
            const Eigen::MatrixXd sub = casimir_subspace(product, l);
            // Map the subspace onto the SH basis: P (Y_1 kron Y_{l-1})(x) = B Y_l(x).
            const auto dirs = lattice_directions(static_cast<std::size_t>(8 * l + 8));
            const Eigen::MatrixXd y1 = sh_columns(1, dirs);
            const Eigen::MatrixXd yp = sh_columns(l - 1, dirs);
            const Eigen::MatrixXd yl = sh_columns(l, dirs);
            Eigen::MatrixXd prod(3 * dp, static_cast<Eigen::Index>(dirs.size()));
            for (Eigen::Index s = 0; s < prod.cols(); ++s) {
                prod.col(s) = kron(y1.col(s), yp.col(s));
            }
            const Eigen::MatrixXd projected = sub * (sub.transpose() * prod);
            const Eigen::MatrixXd fit =
                projected * yl.transpose() * (yl * yl.transpose()).inverse();
            lvl->lift = polar_factor(fit);
            for (std::size_t a = 0; a < 3; ++a) {
                lvl->gens[a] = lvl->lift.transpose() * product[a] * lvl->lift;
            }
        }
        return *levels_.emplace(l, std::move(lvl)).first->second;
    }

    const std::array<Eigen::MatrixXd, 3>& generators_locked(int l) { return level_locked(l).gens; }

    Eigen::MatrixXd wigner_locked(int l, const Eigen::Matrix3d& r) {
        if (l == 0) return Eigen::MatrixXd::Ones(1, 1);
        const Eigen::Matrix3d& m = cartesian_to_sh();
        Eigen::MatrixXd d1 = m * r * m.transpose();
        if (l == 1) return d1;
        Eigen::MatrixXd d = d1;
        for (int j = 2; j <= l; ++j) {
            const Level& lvl = level_locked(j);
            d = lvl.lift.transpose() * kron(d1, d) * lvl.lift;
        }
        return d;
    }

    const ClebschGordan& cg_locked(int l, int k, int J) {
        auto key = std::make_tuple(l, k, J);
        auto it = cg_.find(key);
        if (it != cg_.end()) return *it->second;

        const Eigen::Index dl = 2 * l + 1;
        const Eigen::Index dk = 2 * k + 1;
        const Eigen::Index dj = 2 * J + 1;
        const auto& gl = generators_locked(l);
        const auto& gk = generators_locked(k);
        std::array<Eigen::MatrixXd, 3> product;
        for (std::size_t a = 0; a < 3; ++a) {
            product[a] = kron(gk[a], Eigen::MatrixXd::Identity(dl, dl)) +
                         kron(Eigen::MatrixXd::Identity(dk, dk), gl[a]);
        }
        const Eigen::MatrixXd sub = casimir_subspace(product, J);

        // Intertwiner R with (sub^T T(g) sub) R = R D_J(g) for two fixed generic rotations.
        const Rotation fixed[2] = {
            Rotation::from_axis_angle({1.0, 2.0, 3.0}, 0.7),
            Rotation::from_axis_angle({-2.0, 1.0, 0.5}, 1.9),
        };
        Eigen::MatrixXd system(2 * dj * dj, dj * dj);
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dj, dj);
        for (int s = 0; s < 2; ++s) {
            const Eigen::Matrix3d r = fixed[s].matrix();
            const Eigen::MatrixXd t = kron(wigner_locked(k, r), wigner_locked(l, r));
            const Eigen::MatrixXd restricted = sub.transpose() * t * sub;
            const Eigen::MatrixXd dJ = wigner_locked(J, r);
            system.block(s * dj * dj, 0, dj * dj, dj * dj) =
                kron(eye, restricted) - kron(dJ.transpose(), eye);
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(system, Eigen::ComputeFullV);
        const Eigen::VectorXd sv = svd.singularValues();
        if (sv.size() > 1 && sv(sv.size() - 2) < kSubspaceTol) {
            throw std::logic_error("clebsch_gordan: intertwiner space is not one-dimensional");
        }
        Eigen::VectorXd null = svd.matrixV().col(dj * dj - 1);
        Eigen::MatrixXd rmat = Eigen::Map<Eigen::MatrixXd>(null.data(), dj, dj);
        rmat *= std::sqrt(static_cast<double>(dj)) / rmat.norm();
        rmat = polar_factor(rmat);

        auto cg = std::make_unique<ClebschGordan>();
        cg->l = l;
        cg->k = k;
        cg->J = J;
        cg->matrix = sub * rmat;
        fix_sign(cg->matrix);
        return *cg_.emplace(key, std::move(cg)).first->second;
    }

    std::recursive_mutex mu_;
    std::map<int, std::unique_ptr<Level>> levels_;
    std::map<std::tuple<int, int, int>, std::unique_ptr<ClebschGordan>> cg_;
};

void check_degree(const char* what, int degree) {
    if (degree < 0) throw ArgumentError(std::string(what) + ": negative degree");
    if (degree > max_degree()) {
        throw CapabilityError(std::string(what) + ": degree " + std::to_string(degree) +
                              " above configured maximum " + std::to_string(max_degree()));
    }
}

}  // namespace

Rotation Rotation::from_quaternion(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > 0.0) || !std::isfinite(n)) throw ArgumentError("Rotation: zero or non-finite quaternion");
    Rotation r;
    r.q_ = {w / n, x / n, y / n, z / n};
    return r;
}

Rotation Rotation::from_axis_angle(const Vec3& axis, double angle) {
    const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (!(n > 0.0)) throw ArgumentError("Rotation: zero axis");
    const double s = std::sin(0.5 * angle) / n;
    return from_quaternion(std::cos(0.5 * angle), axis[0] * s, axis[1] * s, axis[2] * s);
}

Eigen::Matrix3d Rotation::matrix() const {
    const auto [w, x, y, z] = q_;
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Vec3 Rotation::apply(const Vec3& v) const {
    const Eigen::Vector3d out = matrix() * Eigen::Vector3d(v[0], v[1], v[2]);
    return {out[0], out[1], out[2]};
}

Rotation rotation_sample(std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
        const double w = normal(rng), x = normal(rng), y = normal(rng), z = normal(rng);
        if (w * w + x * x + y * y + z * z > 1e-12) return Rotation::from_quaternion(w, x, y, z);
    }
}

Rotation rotation_compose(const Rotation& a, const Rotation& b) {
    return Rotation::from_quaternion(
        a.w() * b.w() - a.x() * b.x() - a.y() * b.y() - a.z() * b.z(),
        a.w() * b.x() + a.x() * b.w() + a.y() * b.z() - a.z() * b.y(),
        a.w() * b.y() - a.x() * b.z() + a.y() * b.w() + a.z() * b.x(),
        a.w() * b.z() + a.x() * b.y() - a.y() * b.x() + a.z() * b.w());
}

Rotation rotation_inverse(const Rotation& g) {
    return Rotation::from_quaternion(g.w(), -g.x(), -g.y(), -g.z());
}

Eigen::Matrix3d to_matrix(const Rotation& g) { return g.matrix(); }

int max_degree() { return g_max_degree.load(); }

void set_max_degree(int degree) {
    if (degree < 1 || degree > 12) throw ArgumentError("set_max_degree: expected 1..12");
    g_max_degree.store(degree);
}

const Eigen::Matrix3d& cartesian_to_sh() {
    static const Eigen::Matrix3d m = [] {
        Eigen::Matrix3d p;
        p << 0, -1, 0, 0, 0, 1, -1, 0, 0;
        return p;
    }();
    return m;
}

Vec3 to_type1(const Vec3& c) { return {-c[1], c[2], -c[0]}; }

Vec3 from_type1(const Vec3& t) { return {-t[2], -t[0], t[1]}; }

Eigen::MatrixXd wigner_d(int degree, const Rotation& g) {
    check_degree("wigner_d", degree);
    return Cache::instance().wigner(degree, g.matrix());
}

Eigen::MatrixXd wigner_d_direct_sum(std::initializer_list<int> degrees, const Rotation& g) {
    Eigen::Index n = 0;
    for (int d : degrees) n += 2 * d + 1;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    Eigen::Index off = 0;
    for (int d : degrees) {
        out.block(off, off, 2 * d + 1, 2 * d + 1) = wigner_d(d, g);
        off += 2 * d + 1;
    }
    return out;
}

const Eigen::MatrixXd& so3_generator(int degree, int axis) {
    check_degree("so3_generator", degree);
    if (axis < 0 || axis > 2) throw ArgumentError("so3_generator: axis must be 0, 1 or 2");
    return Cache::instance().generators(degree)[static_cast<std::size_t>(axis)];
}

const ClebschGordan& clebsch_gordan(int l, int k, int J) {
    check_degree("clebsch_gordan", l);
    check_degree("clebsch_gordan", k);
    if (J < std::abs(k - l) || J > k + l) {
        throw ArgumentError("clebsch_gordan: J=" + std::to_string(J) + " violates |k-l| <= J <= k+l for l=" +
                            std::to_string(l) + " k=" + std::to_string(k));
    }
    check_degree("clebsch_gordan", J);
    return Cache::instance().cg(l, k, J);
}

Eigen::MatrixXd clebsch_gordan_stacked(int l, int k) {
    const Eigen::Index dim = (2 * l + 1) * (2 * k + 1);
    Eigen::MatrixXd q(dim, dim);
    Eigen::Index off = 0;
    for (int J = std::abs(k - l); J <= k + l; ++J) {
        q.block(0, off, dim, 2 * J + 1) = clebsch_gordan(l, k, J).matrix;
        off += 2 * J + 1;
    }
    return q;
}

void warm_up(int degree) {
    if (degree > max_degree()) set_max_degree(degree);
    for (int l = 0; l <= degree; ++l) {
        so3_generator(l, 0);
        for (int k = 0; k <= degree; ++k) {
            for (int J = std::abs(k - l); J <= std::min(k + l, degree); ++J) clebsch_gordan(l, k, J);
        }
    }
}

}  // namespace se3
