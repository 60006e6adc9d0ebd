#include "se3/spherical_harmonics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <cstdint>
#include <string>

#if defined(__SSE2__)
#include <emmintrin.h>
#endif

#include "se3/error.hpp"
#include "se3/parallel.hpp"

namespace se3 {
namespace {

void check_order(int degree, int order) {
    if (degree < 0 || std::abs(order) > degree) {
        throw ArgumentError("alp: need |m| <= J, got J=" + std::to_string(degree) +
                            " m=" + std::to_string(order));
    }
    if (degree > kMaxShDegree) {
        throw CapabilityError("alp: degree " + std::to_string(degree) + " above maximum " +
                              std::to_string(kMaxShDegree));
    }
}

// (J-m)!/(J+m)! for m >= 0.
double factorial_ratio(int degree, int order) {
    double r = 1.0;
    for (int i = degree - order + 1; i <= degree + order; ++i) r /= static_cast<double>(i);
    return r;
}

double sin_from_cos(double x) { return std::sqrt(std::max(0.0, 1.0 - x * x)); }

// (-1)^m (1-x^2)^{m/2} (2m-1)!!, given sqrt(1-x^2) per point.
void boundary_into(int order, std::size_t n, const double* sines, double* out) {
    double dfact = 1.0;
    for (int i = 2 * order - 1; i > 1; i -= 2) dfact *= static_cast<double>(i);
    const double coeff = (order % 2 == 0 ? 1.0 : -1.0) * dfact;
    // Power loop outermost: same multiply sequence per point, but independent across points.
    if (order == 0) {
        std::fill_n(out, n, coeff);
        return;
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = sines[i];  // 1.0 * s is exact
    for (int k = 1; k < order; ++k) {
        for (std::size_t i = 0; i < n; ++i) out[i] *= sines[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] *= coeff;
}

// Three-term recursion in J at fixed m >= 0; prev2 is null when J - m == 1.
void recurse_into(int degree, int order, std::span<const double> x, const double* __restrict prev1,
                  const double* __restrict prev2, double* __restrict out) {
    const double denom = static_cast<double>(degree - order);
    const double a = static_cast<double>(2 * degree - 1) / denom;
    const std::size_t n = x.size();
    if (prev2 == nullptr) {
        for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] * prev1[i];
    } else {
        const double b = static_cast<double>(degree + order - 1) / denom;
        for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] * prev1[i] - b * prev2[i];
    }
}

void negate_into(int degree, int positive_order, const double* p, std::size_t n, double* out) {
    const double f = (degree % 2 == 0 ? 1.0 : -1.0) * factorial_ratio(degree, positive_order);
    for (std::size_t i = 0; i < n; ++i) out[i] = f * p[i];
}

double normalization(int degree, int abs_order) {
    double n = std::sqrt(static_cast<double>(2 * degree + 1) / (4.0 * std::numbers::pi) *
                         factorial_ratio(degree, abs_order));
    return abs_order == 0 ? n : std::numbers::sqrt2 * n;
}

// cos(m phi) and sin(m phi) for m = 0..degree via the angle-addition recurrence.
// Layout: cos at trig[m * n + i], sin at trig[(degree + 1 + m) * n + i].
struct AzimuthTable {
    int degree = 0;
    std::size_t n = 0;
    std::unique_ptr<double[]> trig;  // every slot is written; skip the zero fill

    const double* cos_m(int m) const { return trig.get() + static_cast<std::size_t>(m) * n; }
    const double* sin_m(int m) const {
        return trig.get() + static_cast<std::size_t>(degree + 1 + m) * n;
    }
};

AzimuthTable azimuth_table(int degree, std::span<const Direction> dirs) {
    const std::size_t n = dirs.size();
    AzimuthTable t{degree, n, std::make_unique_for_overwrite<double[]>(2 * static_cast<std::size_t>(degree + 1) * n)};
    double* c0 = t.trig.get();
    double* s0 = c0 + static_cast<std::size_t>(degree + 1) * n;
    std::fill_n(c0, n, 1.0);
    std::fill_n(s0, n, 0.0);
    if (degree == 0) return t;
    double* c1 = c0 + n;
    double* s1 = s0 + n;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& u = dirs[i].unit();
        const double rho = std::sqrt(u[0] * u[0] + u[1] * u[1]);
        c1[i] = rho > 0.0 ? u[0] / rho : 1.0;
        s1[i] = rho > 0.0 ? u[1] / rho : 0.0;
    }
    for (int m = 2; m <= degree; ++m) {
        const double* __restrict cp = c0 + static_cast<std::size_t>(m - 1) * n;
        const double* __restrict sp = s0 + static_cast<std::size_t>(m - 1) * n;
        double* __restrict cn = c0 + static_cast<std::size_t>(m) * n;
        double* __restrict sn = s0 + static_cast<std::size_t>(m) * n;
        for (std::size_t i = 0; i < n; ++i) {
            cn[i] = cp[i] * c1[i] - sp[i] * s1[i];
            sn[i] = sp[i] * c1[i] + cp[i] * s1[i];
        }
    }
    return t;
}

// y[i] = scale * p[i] (* c[i]). Large batches use streaming stores: the output (~65 MB at
// J = 8, 1e5 points) is write-bandwidth bound and would otherwise be read in before being overwritten.
void scaled_into(double* __restrict y, const double* __restrict p, const double* __restrict c, double scale,
                 std::size_t n, bool stream) {
    std::size_t i = 0;
#if defined(__SSE2__)
    if (stream) {
        for (; i < n && (reinterpret_cast<std::uintptr_t>(y + i) & 15u) != 0; ++i) y[i] = c ? scale * p[i] * c[i] : scale * p[i];
        const __m128d s = _mm_set1_pd(scale);
        if (c) {
            for (; i + 2 <= n; i += 2) _mm_stream_pd(y + i, _mm_mul_pd(_mm_mul_pd(s, _mm_loadu_pd(p + i)), _mm_loadu_pd(c + i)));
        } else {
            for (; i + 2 <= n; i += 2) _mm_stream_pd(y + i, _mm_mul_pd(s, _mm_loadu_pd(p + i)));
        }
    }
#endif
    if (c) {
        for (; i < n; ++i) y[i] = scale * p[i] * c[i];
    } else {
        for (; i < n; ++i) y[i] = scale * p[i];
    }
}

// Writes degree-J harmonics for az.n points; component k (m = k - J) starts at out + k * stride.
template <class LegendreFn>
void assemble_into(int degree, const AzimuthTable& az, LegendreFn&& legendre, double* out, std::size_t stride,
                   bool stream = false) {
    const std::size_t n = az.n;
    const auto center = static_cast<std::size_t>(degree);
    scaled_into(out + center * stride, legendre(degree, 0), nullptr, normalization(degree, 0), n, stream);
    for (int m = 1; m <= degree; ++m) {
        const double nm = normalization(degree, m);
        const double* pm = legendre(degree, m);
        scaled_into(out + (center + static_cast<std::size_t>(m)) * stride, pm, az.cos_m(m), nm, n, stream);
        scaled_into(out + (center - static_cast<std::size_t>(m)) * stride, pm, az.sin_m(m), nm, n, stream);
    }
}

// Naive route: every P_J^m re-recurses from the boundary, every degree recomputes its azimuths.
void naive_into(int degree, std::span<const Direction> dirs, double* out, std::size_t stride, bool stream = false) {
    const std::vector<double> x = cos_polar(dirs);
    std::vector<double> slot;
    assemble_into(degree, azimuth_table(degree, dirs),
                  [&](int j, int m) {
                      slot = alp_naive(j, m, x);
                      return static_cast<const double*>(slot.data());
                  },
                  out, stride, stream);
}

constexpr std::size_t kBlock = 256;
constexpr std::size_t kStreamBytes = std::size_t{8} << 20;  // beyond cache: bypass it

ShArray make_array(int degree, std::size_t n) {
    return {degree, n, std::vector<double>(n * static_cast<std::size_t>(2 * degree + 1))};
}

}  // namespace

Direction Direction::from_vector(const Vec3& v) {
    const double r = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (!(r > 0.0) || !std::isfinite(r)) {
        throw ArgumentError("Direction: zero or non-finite vector");
    }
    Direction d;
    d.u_ = {v[0] / r, v[1] / r, v[2] / r};
    return d;
}

Direction Direction::from_angles(double polar, double azimuth) {
    const double s = std::sin(polar);
    return from_vector({s * std::cos(azimuth), s * std::sin(azimuth), std::cos(polar)});
}

double Direction::polar() const { return std::acos(std::clamp(u_[2], -1.0, 1.0)); }

double Direction::azimuth() const {
    if (u_[0] == 0.0 && u_[1] == 0.0) return 0.0;
    double a = std::atan2(u_[1], u_[0]);
    return a < 0.0 ? a + 2.0 * std::numbers::pi : a;
}

AlpTable::AlpTable(std::vector<double> x)
    : x_(std::move(x)), sin_(std::make_unique_for_overwrite<double[]>(x_.size())), slots_(slot(kMaxShDegree, kMaxShDegree) + 1) {
    for (std::size_t i = 0; i < x_.size(); ++i) {
        if (!(x_[i] >= -1.0 && x_[i] <= 1.0)) throw ArgumentError("AlpTable: inputs must lie in [-1, 1]");
        sin_[i] = sin_from_cos(x_[i]);
    }
}

bool AlpTable::contains(int degree, int order) const {
    return degree >= 0 && degree <= kMaxShDegree && std::abs(order) <= degree &&
           slots_[slot(degree, order)] != nullptr;
}

std::span<const double> AlpTable::find(int degree, int order) const {
    if (!contains(degree, order)) return {};
    return {slots_[slot(degree, order)].get(), x_.size()};
}

std::span<double> AlpTable::emplace(int degree, int order) {
    auto& entry = slots_[slot(degree, order)];
    if (entry) throw std::logic_error("AlpTable: entry already stored");
    entry.reset(new double[x_.size()]);
    ++entries_;
    return {entry.get(), x_.size()};
}

std::span<const double> alp(int degree, int order, AlpTable& table) {
    check_order(degree, order);
    if (table.contains(degree, order)) return table.find(degree, order);
    const std::size_t n = table.points();
    if (order < 0) {
        const auto p = alp(degree, -order, table);
        negate_into(degree, -order, p.data(), n, table.emplace(degree, order).data());
    } else if (degree == order) {
        boundary_into(order, n, table.sin_polar().data(), table.emplace(degree, order).data());
    } else {
        const auto p1 = alp(degree - 1, order, table);
        const double* p2 = degree - order > 1 ? alp(degree - 2, order, table).data() : nullptr;
        recurse_into(degree, order, table.x(), p1.data(), p2, table.emplace(degree, order).data());
    }
    return table.find(degree, order);
}

std::vector<double> alp_naive(int degree, int order, std::span<const double> x) {
    check_order(degree, order);
    std::vector<double> out(x.size());
    if (order < 0) {
        const std::vector<double> p = alp_naive(degree, -order, x);
        negate_into(degree, -order, p.data(), x.size(), out.data());
    } else if (degree == order) {
        std::vector<double> sines(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) sines[i] = sin_from_cos(x[i]);
        boundary_into(order, x.size(), sines.data(), out.data());
    } else {
        const std::vector<double> p1 = alp_naive(degree - 1, order, x);
        if (degree - order > 1) {
            const std::vector<double> p2 = alp_naive(degree - 2, order, x);
            recurse_into(degree, order, x, p1.data(), p2.data(), out.data());
        } else {
            recurse_into(degree, order, x, p1.data(), nullptr, out.data());
        }
    }
    return out;
}

std::vector<double> cos_polar(std::span<const Direction> dirs) {
    std::vector<double> x(dirs.size());
    for (std::size_t i = 0; i < dirs.size(); ++i) x[i] = std::clamp(dirs[i].unit()[2], -1.0, 1.0);
    return x;
}

ShArray sph_harm(int degree, std::span<const Direction> dirs, AlpTable& table) {
    if (table.points() != dirs.size()) throw ArgumentError("sph_harm: table/direction size mismatch");
    ShArray out = make_array(degree, dirs.size());
    assemble_into(degree, azimuth_table(degree, dirs),
                  [&](int j, int m) { return alp(j, m, table).data(); },
                  out.values.data(), dirs.size());
    return out;
}

ShArray sph_harm_naive(int degree, std::span<const Direction> dirs) {
    ShArray out = make_array(degree, dirs.size());
    naive_into(degree, dirs, out.values.data(), dirs.size());
    return out;
}

std::vector<ShArray> sph_harm_batch(int max_degree, std::span<const Direction> dirs, bool memoize) {
    std::vector<ShArray> out;
    sph_harm_batch_into(max_degree, dirs, memoize, out);
    return out;
}

void sph_harm_batch_into(int max_degree, std::span<const Direction> dirs, bool memoize,
                         std::vector<ShArray>& out) {
    if (max_degree < 0 || max_degree > kMaxShDegree) {
        throw CapabilityError("sph_harm_batch: degree " + std::to_string(max_degree) +
                              " outside [0, " + std::to_string(kMaxShDegree) + "]");
    }
    const std::size_t n = dirs.size();
    out.resize(static_cast<std::size_t>(max_degree + 1));
    for (int j = 0; j <= max_degree; ++j) {
        ShArray& a = out[static_cast<std::size_t>(j)];
        a.degree = j;
        a.points = n;
        a.values.resize(n * static_cast<std::size_t>(2 * j + 1));
    }
    const std::size_t components = static_cast<std::size_t>((max_degree + 1) * (max_degree + 1));
    const bool stream = n * components * sizeof(double) > kStreamBytes;
    // Blocks keep each memo table cache-resident; workers take contiguous runs of blocks.
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    parallel_for(blocks, [&](std::size_t first, std::size_t last) {
      for (std::size_t blk = first; blk < last; ++blk) {
        const std::size_t b = blk * kBlock;
        const std::size_t e = std::min(n, b + kBlock);
        std::span<const Direction> chunk = dirs.subspan(b, e - b);
        if (memoize) {
            // One Legendre memo and one azimuth table shared by every degree of the chunk.
            AlpTable table(cos_polar(chunk));
            const AzimuthTable az = azimuth_table(max_degree, chunk);
            for (int j = 0; j <= max_degree; ++j) {
                assemble_into(j, az, [&](int jj, int m) { return alp(jj, m, table).data(); },
                              out[static_cast<std::size_t>(j)].values.data() + b, n, stream);
            }
        } else {
            for (int j = 0; j <= max_degree; ++j) naive_into(j, chunk, out[static_cast<std::size_t>(j)].values.data() + b, n, stream);
        }
      }
    }, 4);
#if defined(__SSE2__)
    if (stream) _mm_sfence();  // streaming stores are weakly ordered
#endif
}

std::vector<double> sph_harm_at(int degree, const Direction& dir) {
    std::span<const Direction> one(&dir, 1);
    AlpTable table(cos_polar(one));
    return sph_harm(degree, one, table).values;
}

}  // namespace se3
