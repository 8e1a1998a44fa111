#include "nonlocal/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nonlocal {

namespace {

// Radius of the analytic Taylor core around kernel singularities. Large
// enough that the numeric second difference beyond it is well conditioned,
// small enough that the neglected sixth-order term is ~1e-11.
constexpr double kCoreRadius = 1.0 / 128.0;

bool effectively_bounded(const Interval& d) {
    return d.lo > -1e28 && d.hi < 1e28;
}

double eval_or_zero(const ScalarField& u, double y) {
    if (y < u.domain.lo || y > u.domain.hi) return 0.0;
    return u.eval(y);
}

double d2_of(const ScalarField& u, double x) {
    if (u.d2) return u.d2(x);
    const double h = 6e-4;  // balances O(h^4) truncation vs eps/h^2 roundoff
    return (-u.eval(x + 2 * h) + 16.0 * u.eval(x + h) - 30.0 * u.eval(x) +
            16.0 * u.eval(x - h) - u.eval(x - 2 * h)) /
           (12.0 * h * h);
}

double d4_of(const ScalarField& u, double x) {
    if (u.d2) {
        const double h = 1e-3;
        return (u.d2(x + h) - 2.0 * u.d2(x) + u.d2(x - h)) / (h * h);
    }
    const double h = 2e-2;  // eps/h^4 roundoff forces a coarse step
    return (u.eval(x + 2 * h) - 4.0 * u.eval(x + h) + 6.0 * u.eval(x) -
            4.0 * u.eval(x - h) + u.eval(x - 2 * h)) /
           (h * h * h * h);
}

// C * int_0^zmax (u(x+z) + u(x-z) - 2 u(x)) z^{-1-2s} dz. The constant is
// folded into the integrand so the quadrature tolerances apply at the scale
// of the result (C reaches ~delta^{-4} for strongly negative s). The portion
// below z0 is the analytic Taylor core (the raw second difference there is
// rounding noise amplified by the kernel); the rest is graded quadrature,
// split where u's bounded domain introduces kinks.
double pv_second_difference(const ScalarField& u, double x, double s,
                            double zmax, double C, const QuadratureSpec& q) {
    if (zmax <= 0.0) return 0.0;
    double z0 = std::min(kCoreRadius, 0.5 * zmax);
    double core =
        C * d2_of(u, x) * std::pow(z0, 2.0 - 2.0 * s) / (2.0 - 2.0 * s) +
        C * d4_of(u, x) / 12.0 * std::pow(z0, 4.0 - 2.0 * s) / (4.0 - 2.0 * s);
    double ux = u.eval(x);
    auto f = [&u, x, ux, s, C](double z) {
        return C *
               (eval_or_zero(u, x + z) + eval_or_zero(u, x - z) - 2.0 * ux) *
               std::pow(z, -1.0 - 2.0 * s);
    };
    std::vector<double> bps;
    if (effectively_bounded(u.domain)) {
        for (double d : {x - u.domain.lo, u.domain.hi - x})
            if (d > z0 && d < zmax) bps.push_back(d);
        std::sort(bps.begin(), bps.end());
        bps.erase(std::unique(bps.begin(), bps.end()), bps.end());
    }
    double numeric = 0.0, prev = z0;
    for (double b : bps) {
        numeric += (prev == z0) ? integrate_graded(f, prev, b, prev, q)
                                : integrate(f, prev, b, q);
        prev = b;
    }
    numeric += (prev == z0) ? integrate_graded(f, prev, zmax, prev, q)
                            : integrate(f, prev, zmax, q);
    return core + numeric;
}

// int_{zlo}^{zhi} (u(x + sign z) - u(x)) C z^{-1-2s} dz
double one_sided(const ScalarField& u, double x, double ux, int sign,
                 double zlo, double zhi, double C, double s,
                 const QuadratureSpec& q) {
    if (zhi <= zlo) return 0.0;
    auto f = [&u, x, ux, sign, C, s](double z) {
        return (u.eval(x + sign * z) - ux) * C * std::pow(z, -1.0 - 2.0 * s);
    };
    return integrate_graded(f, zlo, zhi, zlo, q);
}

void require_1d(const Kernel& k, const char* who) {
    if (k.d != 1)
        throw std::invalid_argument(std::string(who) +
                                    ": only d = 1 is supported");
}

}  // namespace

ScalarField gaussian_field(double center) {
    ScalarField f;
    f.eval = [center](double x) {
        double t = x - center;
        return std::exp(-t * t);
    };
    f.d2 = [center](double x) {
        double t = x - center;
        return (4.0 * t * t - 2.0) * std::exp(-t * t);
    };
    f.tail_sup = [center](double x, double Z) {
        double a = x - Z, b = x + Z;  // tail region: (-inf,a] U [b,inf)
        if (center <= a || center >= b) return 1.0;  // peak inside a tail
        double ta = a - center, tb = b - center;
        return std::max(std::exp(-ta * ta), std::exp(-tb * tb));
    };
    return f;
}

ScalarField polynomial_field(std::vector<double> coeffs, Interval domain) {
    ScalarField f;
    f.domain = domain;
    f.eval = [coeffs](double x) {
        double v = 0.0;
        for (size_t i = coeffs.size(); i-- > 0;) v = v * x + coeffs[i];
        return v;
    };
    std::vector<double> c2;
    for (size_t i = 2; i < coeffs.size(); ++i)
        c2.push_back(coeffs[i] * static_cast<double>(i) *
                     static_cast<double>(i - 1));
    f.d2 = [c2](double x) {
        double v = 0.0;
        for (size_t i = c2.size(); i-- > 0;) v = v * x + c2[i];
        return v;
    };
    return f;
}

ScalarField constant_field(double c) {
    ScalarField f;
    f.eval = [c](double) { return c; };
    f.d2 = [](double) { return 0.0; };
    f.tail_sup = [c](double, double) { return std::fabs(c); };
    return f;
}

double apply_L_delta(const Kernel& k, const ScalarField& u, double x,
                     const QuadratureSpec& q) {
    require_1d(k, "apply_L_delta");
    return pv_second_difference(u, x, k.s, k.delta, scaling_constant(k), q);
}

double apply_N_delta(const Kernel& k, const ScalarField& u, double x,
                     Interval omega, const QuadratureSpec& q) {
    require_1d(k, "apply_N_delta");
    if (x >= omega.lo && x <= omega.hi)
        throw std::invalid_argument(
            "apply_N_delta: x must lie strictly outside omega");
    double lo = std::max(omega.lo, x - k.delta);
    double hi = std::min(omega.hi, x + k.delta);
    if (hi <= lo) return 0.0;
    double ux = u.eval(x);
    auto f = [&u, &k, x, ux](double y) {
        return (u.eval(y) - ux) * kernel_eval(k, x - y);
    };
    return -integrate_singular(f, lo, hi, x, q);
}

double apply_regional_L(const Kernel& k, const ScalarField& u, double x,
                        Interval region, const QuadratureSpec& q) {
    require_1d(k, "apply_regional_L");
    if (x <= region.lo || x >= region.hi)
        throw std::invalid_argument(
            "apply_regional_L: x must lie strictly inside the region");
    double C = scaling_constant(k);
    double dl = x - region.lo, dr = region.hi - x;
    double rho = std::min({k.delta, dl, dr});
    double val = pv_second_difference(u, x, k.s, rho, C, q);
    double ux = u.eval(x);
    val += one_sided(u, x, ux, -1, rho, std::min(k.delta, dl), C, k.s, q);
    val += one_sided(u, x, ux, +1, rho, std::min(k.delta, dr), C, k.s, q);
    return val;
}

double apply_N_delta_hat(const Kernel& k, const ScalarField& u, double x,
                         Interval omega, const QuadratureSpec& q) {
    require_1d(k, "apply_N_delta_hat");
    if (x > omega.lo && x < omega.hi)
        throw std::invalid_argument(
            "apply_N_delta_hat: x must lie in the interaction layer");
    Interval hat{omega.lo - k.delta, omega.hi + k.delta};
    return -apply_regional_L(k, u, x, hat, q);
}

FracResult fractional_laplacian(double s, const ScalarField& u, double x,
                                const QuadratureSpec& q, double tail_cutoff) {
    if (!(s > 0.0 && s < 1.0))
        throw std::invalid_argument("fractional_laplacian: s must be in (0,1)");
    double C = fractional_constant(1, s);
    double ux = u.eval(x);
    bool bounded = effectively_bounded(u.domain);

    // sup of |u| over {|y - x| >= Z}
    auto sup_tail = [&](double Z) -> double {
        if (u.tail_sup) return u.tail_sup(x, Z);
        if (bounded) {
            double reach = std::max(u.domain.hi - x, x - u.domain.lo);
            if (Z >= reach) return 0.0;
            // coarse sampled bound over what remains of the domain
            double m = 0.0;
            for (int side = 0; side < 2; ++side) {
                double a = side == 0 ? u.domain.lo : x + Z;
                double b = side == 0 ? x - Z : u.domain.hi;
                if (b <= a) continue;
                for (int i = 0; i <= 256; ++i)
                    m = std::max(m, std::fabs(u.eval(a + (b - a) * i / 256.0)));
            }
            return 2.0 * m;
        }
        throw std::invalid_argument(
            "fractional_laplacian: field needs a tail envelope or a bounded "
            "domain");
    };
    auto bound_at = [&](double Z) {
        return 2.0 * sup_tail(Z) * C * std::pow(Z, -2.0 * s) / (2.0 * s);
    };

    double Z = tail_cutoff;
    if (Z <= 0.0) {
        if (u.tail_sup) {
            Z = 8.0;
            while (Z < 1e7 && bound_at(Z) > 0.01 * q.abs_tol) Z *= 2.0;
        } else if (bounded) {
            Z = std::max(u.domain.hi - x, x - u.domain.lo) + 1.0;
        } else {
            throw std::invalid_argument(
                "fractional_laplacian: field needs a tail envelope or a "
                "bounded domain");
        }
    }

    double pv = pv_second_difference(u, x, s, Z, C, q);
    double comp = 2.0 * ux * std::pow(Z, -2.0 * s) / (2.0 * s);
    FracResult r;
    r.value = -pv + C * comp;
    r.tail_bound = bound_at(Z);
    if (tail_cutoff > 0.0 &&
        r.tail_bound > 100.0 * std::max(q.abs_tol, q.rel_tol * std::fabs(r.value)))
        throw NumericalError(
            "fractional_laplacian: tail bound exceeds tolerance at the given "
            "cutoff");
    return r;
}

double fractional_neumann(double s, const ScalarField& u, double x,
                          Interval omega, NeumannVariant variant,
                          const QuadratureSpec& q) {
    if (variant == NeumannVariant::FullLine)
        return fractional_laplacian(s, u, x, q).value;
    if (!(s > 0.0 && s < 1.0))
        throw std::invalid_argument("fractional_neumann: s must be in (0,1)");
    if (x >= omega.lo && x <= omega.hi)
        throw std::invalid_argument(
            "fractional_neumann: x must lie strictly outside omega");
    double C = fractional_constant(1, s);
    double ux = u.eval(x);
    auto f = [&u, x, ux, s](double y) {
        return (u.eval(y) - ux) * std::pow(std::fabs(x - y), -1.0 - 2.0 * s);
    };
    return -C * integrate_singular(f, omega.lo, omega.hi, x, q);
}

namespace {

// Outer integration over (lo, hi) split at `pts`; segments ending at a
// corner are graded toward it when the integrand is endpoint-singular there
// (kernels with s > 1/2), otherwise handled adaptively (the corner kinks are
// Hoelder-continuous and the breakpoints isolate them). `alpha` is the
// leading endpoint power at the corners, used for sliver completion.
double outer_integrate(const Fn1& F, double lo, double hi,
                       const std::vector<double>& pts,
                       const std::vector<double>& corners, bool singular,
                       double alpha, const QuadratureSpec& q) {
    if (hi <= lo) return 0.0;
    std::vector<double> edges{lo, hi};
    for (double p : pts)
        if (p > lo && p < hi) edges.push_back(p);
    std::sort(edges.begin(), edges.end());
    auto is_corner = [&corners](double p) {
        for (double c : corners)
            if (std::fabs(p - c) <= 1e-13 * (1.0 + std::fabs(c))) return true;
        return false;
    };
    double sum = 0.0;
    for (size_t i = 0; i + 1 < edges.size(); ++i) {
        double a = edges[i], b = edges[i + 1];
        if (b <= a) continue;
        bool ca = singular && is_corner(a), cb = singular && is_corner(b);
        if (ca && cb) {
            double m = 0.5 * (a + b);
            sum += integrate_power_endpoint(F, a, m, true, alpha, q);
            sum += integrate_power_endpoint(F, m, b, false, alpha, q);
        } else if (ca) {
            sum += integrate_power_endpoint(F, a, b, true, alpha, q);
        } else if (cb) {
            sum += integrate_power_endpoint(F, a, b, false, alpha, q);
        } else {
            sum += integrate(F, a, b, q);
        }
    }
    return sum;
}

// int_{A ∩ B_delta(x)} (u(x) - u(y)) gamma(|x-y|) dy. For x inside A this is
// a principal value; the symmetric second-difference decomposition evaluates
// it without the fp noise floor of one-sided differences, whose odd leading
// parts cancel only up to the quantization of the offset cutoff (~1e-9 here,
// enough to stall the outer adaptive refinement).
double flux_inner(const Kernel& k, const ScalarField& u, Interval A, double x,
                  const QuadratureSpec& q) {
    double lo = std::max(A.lo, x - k.delta);
    double hi = std::min(A.hi, x + k.delta);
    if (hi <= lo) return 0.0;
    if (x > lo && x < hi) return -apply_regional_L(k, u, x, A, q);
    QuadratureSpec qi = q;
    qi.min_offset = std::max(q.min_offset, 1e-16);
    double ux = u.eval(x);
    auto f = [&u, &k, x, ux](double y) {
        return (ux - u.eval(y)) * kernel_eval(k, x - y);
    };
    if (k.s < 0.0) return integrate(f, lo, hi, qi);  // bounded, x outside
    return integrate_singular(f, lo, hi, x, qi);
}

double flux_pair(const Kernel& k, const ScalarField& u, Interval A, Interval B,
                 const QuadratureSpec& q) {
    if (A.hi <= A.lo || B.hi <= B.lo) return 0.0;
    auto F = [&](double x) { return flux_inner(k, u, A, x, q); };
    std::vector<double> pts{A.lo,           A.hi,           A.lo - k.delta,
                            A.lo + k.delta, A.hi - k.delta, A.hi + k.delta};
    QuadratureSpec qo = q;
    qo.min_offset = std::max(q.min_offset, 1e-16);
    return outer_integrate(F, B.lo, B.hi, pts, {A.lo, A.hi}, k.s > 0.5,
                           1.0 - 2.0 * k.s, qo);
}

// int_{x in B} int_{y in A ∩ B_delta(x)} (v(y)-v(x))(u(y)-u(x)) gamma dy dx.
// The product of two differences vanishes quadratically at y = x, so the
// inner integrand goes like |y-x|^{1-2s}: integrable, but for s > 1/2 still
// divergent enough that the unresolved sliver at y = x needs completion.
double double_form(const Kernel& k, const ScalarField& u, const ScalarField& v,
                   Interval A, Interval B, const QuadratureSpec& q) {
    if (A.hi <= A.lo || B.hi <= B.lo) return 0.0;
    double ai = 1.0 - 2.0 * k.s;
    auto F = [&](double x) {
        double lo = std::max(A.lo, x - k.delta);
        double hi = std::min(A.hi, x + k.delta);
        if (hi <= lo) return 0.0;
        double ux = u.eval(x), vx = v.eval(x);
        auto f = [&u, &v, &k, x, ux, vx](double y) {
            return (v.eval(y) - vx) * (u.eval(y) - ux) * kernel_eval(k, x - y);
        };
        QuadratureSpec qi = q;
        qi.min_offset = std::max(q.min_offset, 1e-16);
        if (x <= lo || x >= hi) return integrate_singular(f, lo, hi, x, qi);
        return integrate_power_endpoint(f, lo, x, false, ai, qi) +
               integrate_power_endpoint(f, x, hi, true, ai, qi);
    };
    std::vector<double> pts{A.lo,           A.hi,           A.lo - k.delta,
                            A.lo + k.delta, A.hi - k.delta, A.hi + k.delta};
    QuadratureSpec qo = q;
    qo.min_offset = std::max(q.min_offset, 1e-16);
    // the double-form integrand vanishes quadratically at y = x, so the
    // outer corner behaviour |x-c|^{2-2s} is always Hoelder-continuous
    return outer_integrate(F, B.lo, B.hi, pts, {A.lo, A.hi}, false, 0.0, qo);
}

}  // namespace

double flux(const Kernel& k, const ScalarField& u,
            const std::vector<Interval>& region1,
            const std::vector<Interval>& region2, const QuadratureSpec& q) {
    require_1d(k, "flux");
    double sum = 0.0;
    for (const auto& B : region2)
        for (const auto& A : region1) sum += flux_pair(k, u, A, B, q);
    return sum;
}

GreenResiduals green_identity_residuals(const Kernel& k, const ScalarField& u,
                                        const ScalarField& v,
                                        const DomainSpec& spec,
                                        const QuadratureSpec& q,
                                        bool regional) {
    require_1d(k, "green_identity_residuals");
    if (std::fabs(spec.delta - k.delta) > 1e-12 * (1.0 + k.delta))
        throw std::invalid_argument(
            "green_identity_residuals: spec.delta and kernel delta disagree");
    Interval Om = spec.omega;
    auto layers = build_layers(spec.omega, spec.delta);
    Interval Lft = layers.first, Rgt = layers.second;
    Interval hat{Om.lo - k.delta, Om.hi + k.delta};
    QuadratureSpec qg = q;
    qg.min_offset = std::max(q.min_offset, 1e-16);

    // On omega the regional volume operator over the extended domain equals
    // the full-ball operator (B_delta(x) stays inside the extended domain).
    auto Nu = [&](double x) {
        return regional ? apply_N_delta_hat(k, u, x, Om, q)
                        : apply_N_delta(k, u, x, Om, q);
    };
    auto Nv = [&](double x) {
        return regional ? apply_N_delta_hat(k, v, x, Om, q)
                        : apply_N_delta(k, v, x, Om, q);
    };

    // layer integrals: possibly endpoint-singular for s > 1/2, so grade
    // toward both component ends; kinks where the interaction window meets
    // the far side of omega are isolated as breakpoints
    std::vector<double> kinks{Om.lo + k.delta, Om.hi - k.delta};
    auto layer_term = [&](const Fn1& f) {
        double s1 = outer_integrate(f, Lft.lo, Lft.hi, kinks,
                                    {Lft.lo, Lft.hi}, true, 1.0 - 2.0 * k.s,
                                    qg);
        double s2 = outer_integrate(f, Rgt.lo, Rgt.hi, kinks,
                                    {Rgt.lo, Rgt.hi}, true, 1.0 - 2.0 * k.s,
                                    qg);
        return s1 + s2;
    };

    double I_vol1 = integrate(
        [&](double x) { return v.eval(x) * apply_L_delta(k, u, x, q); },
        Om.lo, Om.hi, q);
    double I_lay1 = layer_term([&](double x) { return v.eval(x) * Nu(x); });

    double E;
    if (regional) {
        E = 0.5 * double_form(k, u, v, hat, hat, q);
    } else {
        E = 0.5 * (double_form(k, u, v, hat, hat, q) -
                   double_form(k, u, v, Lft, Lft, q) -
                   double_form(k, u, v, Lft, Rgt, q) -
                   double_form(k, u, v, Rgt, Lft, q) -
                   double_form(k, u, v, Rgt, Rgt, q));
    }
    double first = std::fabs(E - (-I_vol1 + I_lay1));

    double I_vol2 = integrate(
        [&](double x) {
            return v.eval(x) * apply_L_delta(k, u, x, q) -
                   u.eval(x) * apply_L_delta(k, v, x, q);
        },
        Om.lo, Om.hi, q);
    double I_lay2 = layer_term(
        [&](double x) { return v.eval(x) * Nu(x) - u.eval(x) * Nv(x); });
    double second = std::fabs(I_vol2 - I_lay2);
    return {first, second};
}

}  // namespace nonlocal
