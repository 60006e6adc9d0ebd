// Reference harmonics built without the Legendre recursion: hard-coded Cartesian closed forms
// up to degree 2 and an explicit Rodrigues polynomial expansion for degrees 3..6.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "se3/error.hpp"
#include "se3/spherical_harmonics.hpp"

namespace se3 {
namespace {

constexpr double kPi = std::numbers::pi;

double closed_form(int degree, int order, double x, double y, double z) {
    if (degree == 0) return 0.5 / std::sqrt(kPi);
    if (degree == 1) {
        const double c = std::sqrt(3.0 / (4.0 * kPi));
        if (order == -1) return -c * y;
        if (order == 0) return c * z;
        return -c * x;
    }
    const double c = 0.5 * std::sqrt(15.0 / kPi);
    switch (order) {
        case -2: return c * x * y;
        case -1: return -c * y * z;
        case 0: return 0.25 * std::sqrt(5.0 / kPi) * (3.0 * z * z - 1.0);
        case 1: return -c * x * z;
        default: return 0.5 * c * (x * x - y * y);
    }
}

double factorial(int n) { return std::tgamma(static_cast<double>(n) + 1.0); }

// Coefficients (ascending powers) of d^k/dx^k (x^2 - 1)^J.
std::vector<double> rodrigues_derivative(int degree, int k) {
    std::vector<double> poly(static_cast<std::size_t>(2 * degree + 1), 0.0);
    for (int i = 0; i <= degree; ++i) {
        const double binom = factorial(degree) / (factorial(i) * factorial(degree - i));
        poly[static_cast<std::size_t>(2 * i)] = binom * (((degree - i) % 2 == 0) ? 1.0 : -1.0);
    }
    for (int d = 0; d < k; ++d) {
        std::vector<double> next(poly.size() > 1 ? poly.size() - 1 : 1, 0.0);
        for (std::size_t p = 1; p < poly.size(); ++p) next[p - 1] = static_cast<double>(p) * poly[p];
        poly = std::move(next);
    }
    return poly;
}

double horner(const std::vector<double>& poly, double x) {
    double acc = 0.0;
    for (auto it = poly.rbegin(); it != poly.rend(); ++it) acc = acc * x + *it;
    return acc;
}

double rodrigues(int degree, int order, double x, double y, double z) {
    const int am = std::abs(order);
    // P_J^m(t) = (-1)^m (1-t^2)^{m/2} / (2^J J!) d^{J+m}/dt^{J+m} (t^2-1)^J
    const double deriv = horner(rodrigues_derivative(degree, degree + am), z);
    const double sin_polar = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double legendre = ((am % 2 == 0) ? 1.0 : -1.0) * std::pow(sin_polar, am) * deriv /
                            (std::pow(2.0, degree) * factorial(degree));
    const double norm = std::sqrt((2.0 * degree + 1.0) / (4.0 * kPi) * factorial(degree - am) /
                                  factorial(degree + am));
    if (order == 0) return norm * legendre;
    const double phi = (x == 0.0 && y == 0.0) ? 0.0 : std::atan2(y, x);
    const double angular = order > 0 ? std::cos(am * phi) : std::sin(am * phi);
    return std::sqrt(2.0) * norm * legendre * angular;
}

}  // namespace

double sph_harm_oracle(int degree, int order, const Direction& dir) {
    if (degree > 6) {
        throw CapabilityError("sph_harm_oracle: degree " + std::to_string(degree) +
                              " above oracle limit 6");
    }
    if (degree < 0 || std::abs(order) > degree) {
        throw ArgumentError("sph_harm_oracle: need |m| <= J");
    }
    const Vec3& u = dir.unit();
    if (degree <= 2) return closed_form(degree, order, u[0], u[1], u[2]);
    return rodrigues(degree, order, u[0], u[1], u[2]);
}

}  // namespace se3
