#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nonlocal {

// Raised on quadrature budget exhaustion, failed factorizations, diverged
// iterations; the CLI maps it to the numerical-failure exit code.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct QuadratureSpec {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    int max_subdiv = 32;  // adaptive bisection depth budget
    // 0: adaptive 15-point Gauss panels; 1: fixed graded composite 40-point
    // Gauss. The two share no nodes, so their agreement certifies a value.
    int scheme = 0;
    // Graded integration drops offsets closer to the singular endpoint than
    // this. Integrands built from differences of field evaluations are pure
    // rounding noise below ~1e-16 absolute offset; exactly evaluable
    // integrands (plain powers) keep the default 0 (machine-depth panels).
    double min_offset = 0.0;
};

struct GaussRule {
    std::vector<double> x;  // nodes on (-1, 1)
    std::vector<double> w;
};

// Gauss-Legendre rule of order n (nodes by Newton iteration, cached).
const GaussRule& gauss_rule(int n);

using Fn1 = std::function<double(double)>;

// Adaptive integration of a piecewise-smooth integrand.
double integrate(const Fn1& f, double lo, double hi, const QuadratureSpec& q);

// Integration with an integrable singularity at one endpoint: dyadic panels
// graded toward `toward` (which must equal lo or hi), Gauss on each panel.
// Designed for |z|^alpha endpoint behaviour with alpha >= -0.75; every
// integrand in this project is bounded by z^{-1/2} at its endpoints (energy
// and flux integrands scale like z^{1-2s} with s <= 3/4).
double integrate_graded(const Fn1& f, double lo, double hi, double toward,
                        const QuadratureSpec& q);

// Integrable singularity at xi which may lie inside (lo,hi), at an endpoint,
// or outside (in which case plain adaptive integration is used).
double integrate_singular(const Fn1& f, double lo, double hi, double xi,
                          const QuadratureSpec& q);

// Graded integration toward an endpoint where f behaves like A r^alpha + B
// in the distance r to that endpoint (alpha > -1). Graded panels stop at a
// floor r0 set by fp representability of offsets from the endpoint; the
// (0, r0) sliver -- whose mass reaches ~2 A sqrt(r0) at alpha = -1/2 -- is
// completed analytically from a two-point fit of the model just outside r0.
double integrate_power_endpoint(const Fn1& f, double lo, double hi,
                                bool singular_at_lo, double alpha,
                                const QuadratureSpec& q);

// Splits (lo,hi) at the interior breakpoints and integrates each piece
// adaptively; points outside (lo,hi) are ignored.
double integrate_with_breakpoints(const Fn1& f, double lo, double hi,
                                  std::vector<double> breakpoints,
                                  const QuadratureSpec& q);

// Fixed n-panel composite Gauss of given order (no adaptivity).
double integrate_composite(const Fn1& f, double lo, double hi, int panels,
                           int order);

}  // namespace nonlocal
