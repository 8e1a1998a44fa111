#include "nonlocal/kernels.hpp"

#include <cmath>
#include <string>

namespace nonlocal {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

double sphere_area(int d) {
    require(d >= 1, "sphere_area: d must be >= 1");
    return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
}

double fractional_constant(int d, double s) {
    require(d >= 1, "fractional_constant: d must be >= 1");
    require(s > 0.0 && s < 1.0, "fractional_constant: s must lie in (0,1)");
    return std::pow(2.0, 2.0 * s) * s * std::tgamma(s + 0.5 * d) /
           (std::pow(M_PI, 0.5 * d) * std::tgamma(1.0 - s));
}

double delta_crossover(double s) {
    require(s < 1.0 && s != 0.0, "delta_crossover: requires s < 1, s != 0");
    // (2-2s) sqrt(pi) Gamma(1-s) / (2^{2s} s Gamma(s+1/2)), then the 1/(2-2s) root.
    double denom = std::pow(2.0, 2.0 * s) * s * std::tgamma(s + 0.5);
    double arg = (2.0 - 2.0 * s) * std::sqrt(M_PI) * std::tgamma(1.0 - s) / denom;
    require(arg > 0.0, "delta_crossover: non-positive root argument");
    return std::pow(arg, 1.0 / (2.0 - 2.0 * s));
}

double scaling_constant(const Kernel& k) {
    require(k.delta > 0.0, "scaling_constant: delta must be positive");
    require(k.s < 1.0, "scaling_constant: s must be < 1");
    switch (k.scaling) {
        case Scaling::Crossover: {
            require(k.d == 1, "scaling_constant: Crossover scaling is 1D only");
            if (k.s <= 0.0) {
                // delta_s exceeds every tested horizon for s <= 0; the fractional
                // branch is undefined there, so the moment branch must apply.
                require(k.s == 0.0 || k.delta <= delta_crossover(k.s),
                        "scaling_constant: delta beyond crossover with s <= 0");
                return (2.0 - 2.0 * k.s) * std::pow(k.delta, 2.0 * k.s - 2.0);
            }
            if (k.delta <= delta_crossover(k.s))
                return (2.0 - 2.0 * k.s) * std::pow(k.delta, 2.0 * k.s - 2.0);
            return fractional_constant(1, k.s);
        }
        case Scaling::LocalMoment:
            // Solves the second-moment normalization: integral of |z|^2 gamma = 2d.
            return 2.0 * k.d * (2.0 - 2.0 * k.s) /
                   (sphere_area(k.d) * std::pow(k.delta, 2.0 - 2.0 * k.s));
        case Scaling::FractionalTruncation:
            return fractional_constant(k.d, k.s);
    }
    throw std::logic_error("scaling_constant: bad scaling enum");
}

double kernel_eval(const Kernel& k, double z) {
    double az = std::fabs(z);
    if (az >= k.delta) return 0.0;
    if (az == 0.0 && k.s >= 0.0)
        throw std::domain_error("kernel_eval: singular at z = 0 for s >= 0");
    return scaling_constant(k) * std::pow(az, -static_cast<double>(k.d) - 2.0 * k.s);
}

double second_moment(const Kernel& k) {
    // omega_{d-1} C int_0^delta r^{1-2s} dr
    return sphere_area(k.d) * scaling_constant(k) *
           std::pow(k.delta, 2.0 - 2.0 * k.s) / (2.0 - 2.0 * k.s);
}

MassResult kernel_mass(const Kernel& k) {
    if (k.s >= 0.0) return {0.0, false};
    // omega_{d-1} C int_0^delta r^{-1-2s} dr, exponent -2s > 0
    double value = sphere_area(k.d) * scaling_constant(k) *
                   std::pow(k.delta, -2.0 * k.s) / (-2.0 * k.s);
    return {value, true};
}

}  // namespace nonlocal
