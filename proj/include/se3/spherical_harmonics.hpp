#pragma once

// Real (tesseral) spherical harmonics and associated Legendre polynomials.
//
// Conventions used everywhere in the library:
//   * polar angle theta in [0, pi] enters the Legendre factor through cos(theta) = z,
//   * azimuth phi = atan2(y, x) in [0, 2pi) enters sin/cos; at the poles phi := 0,
//   * the Condon-Shortley phase lives in the Legendre boundary term,
//   * the m index of a degree-J vector runs -J..J, stored at offset m + J.

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace se3 {

using Vec3 = std::array<double, 3>;

/// Largest degree the harmonic engine accepts (the representation layer caps lower).
inline constexpr int kMaxShDegree = 16;

/// Unit direction on the sphere.
class Direction {
public:
    Direction() = default;

    /// Normalizes v. Throws ArgumentError for a zero or non-finite vector.
    static Direction from_vector(const Vec3& v);
    static Direction from_angles(double polar, double azimuth);

    const Vec3& unit() const { return u_; }
    double polar() const;
    /// Azimuth in [0, 2pi); 0 on the z axis.
    double azimuth() const;

private:
    Vec3 u_{0.0, 0.0, 1.0};
};

/// Memo of Legendre values P_J^m over one shared array of cos(theta) inputs.
/// Entries are written once and never move, so returned spans stay valid for the table's life.
class AlpTable {
public:
    explicit AlpTable(std::vector<double> x);

    std::span<const double> x() const { return x_; }
    /// sqrt(1 - x^2), shared by every boundary term.
    std::span<const double> sin_polar() const { return {sin_.get(), x_.size()}; }
    std::size_t points() const { return x_.size(); }
    std::size_t entries() const { return entries_; }

    bool contains(int degree, int order) const;
    /// Empty span when (degree, order) has not been stored.
    std::span<const double> find(int degree, int order) const;
    /// Uninitialized storage for a new entry; the caller fills it before any lookup.
    std::span<double> emplace(int degree, int order);

private:
    static std::size_t slot(int degree, int order) {
        return static_cast<std::size_t>(degree * degree + order + degree);
    }

    std::vector<double> x_;
    std::unique_ptr<double[]> sin_;
    std::vector<std::unique_ptr<double[]>> slots_;
    std::size_t entries_ = 0;
};

/// P_J^m over table.x(), memoizing every intermediate in the table.
std::span<const double> alp(int degree, int order, AlpTable& table);

/// Same recursion with no memo; each call re-recurses to the boundary.
std::vector<double> alp_naive(int degree, int order, std::span<const double> x);

/// Degree-J harmonics stored component-major: Y_J^m at point i is values[(m + J) * points + i].
struct ShArray {
    int degree = 0;
    std::size_t points = 0;
    std::vector<double> values;

    std::size_t width() const { return static_cast<std::size_t>(2 * degree + 1); }
    double at(std::size_t i, std::size_t k) const { return values[k * points + i]; }
    /// Component k (m = k - J) over all points.
    std::span<const double> component(std::size_t k) const { return {values.data() + k * points, points}; }
    /// The (2J+1)-vector of point i (a strided gather, so a copy).
    std::vector<double> row(std::size_t i) const {
        std::vector<double> r(width());
        for (std::size_t k = 0; k < r.size(); ++k) r[k] = at(i, k);
        return r;
    }
};

std::vector<double> cos_polar(std::span<const Direction> dirs);

/// Degree-J harmonics; `table` must have been built from cos_polar(dirs).
ShArray sph_harm(int degree, std::span<const Direction> dirs, AlpTable& table);

/// Degree-J harmonics through alp_naive.
ShArray sph_harm_naive(int degree, std::span<const Direction> dirs);

/// Degrees 0..max_degree over one shared table per chunk of points, parallel over points.
/// With memoize=false every degree goes through the naive recursion instead.
std::vector<ShArray> sph_harm_batch(int max_degree, std::span<const Direction> dirs,
                                    bool memoize = true);

/// As sph_harm_batch, reusing the storage already held by `out`.
void sph_harm_batch_into(int max_degree, std::span<const Direction> dirs, bool memoize,
                         std::vector<ShArray>& out);

/// Convenience for a single direction, degree J: the (2J+1)-vector Y_J(dir).
std::vector<double> sph_harm_at(int degree, const Direction& dir);

/// Independent reference: closed forms for J <= 2, Rodrigues expansion for 3 <= J <= 6.
/// Shares no code with the recursion above. Throws CapabilityError for J > 6.
double sph_harm_oracle(int degree, int order, const Direction& dir);

}  // namespace se3
