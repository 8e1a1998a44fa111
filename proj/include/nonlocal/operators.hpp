#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "nonlocal/geometry.hpp"
#include "nonlocal/kernels.hpp"
#include "nonlocal/quadrature.hpp"

namespace nonlocal {

enum class Smoothness { Smooth, PiecewiseSmooth };

// Scalar function on a stated interval (all of R when the interval is
// infinite). Evaluation outside a bounded domain is treated as zero by the
// full-line operators. The optional members sharpen the machinery:
//   d2        analytic second derivative (exact Taylor core near kernel
//             singularities instead of finite differences)
//   tail_sup  (x, Z) -> sup over |y-x| >= Z of |u(y)| (tail bounds)
struct ScalarField {
    std::function<double(double)> eval;
    Interval domain{-std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity()};
    Smoothness smooth = Smoothness::Smooth;
    std::function<double(double)> d2;
    std::function<double(double, double)> tail_sup;
};

// exp(-(x-center)^2) on R, with analytic d2 and a sharp tail envelope.
ScalarField gaussian_field(double center);
// c0 + c1 x + c2 x^2 + ... on the given domain, with analytic d2.
ScalarField polynomial_field(std::vector<double> coeffs,
                             Interval domain = {-1e30, 1e30});
ScalarField constant_field(double c);

// L_delta u(x) = PV int (u(y)-u(x)) gamma(|x-y|) dy over the full ball
// B_delta(x), realized as int_0^delta (u(x+z)+u(x-z)-2u(x)) gamma(z) dz with
// an analytic Taylor core near z = 0. Requires x in omega-like interior so
// the ball stays inside u's domain (caller's responsibility per contract).
double apply_L_delta(const Kernel& k, const ScalarField& u, double x,
                     const QuadratureSpec& q);

// N_delta u(x) = -int_{omega ∩ B_delta(x)} (u(y)-u(x)) gamma(|x-y|) dy for x
// strictly outside the closure of omega.
double apply_N_delta(const Kernel& k, const ScalarField& u, double x,
                     Interval omega, const QuadratureSpec& q);

// Regional operator: PV int_{region ∩ B_delta(x)} (u(y)-u(x)) gamma dy for x
// strictly inside the region; symmetric core plus one-sided remainders.
double apply_regional_L(const Kernel& k, const ScalarField& u, double x,
                        Interval region, const QuadratureSpec& q);

// Regional Neumann trace on the interaction layer: -apply_regional_L over
// the extended domain (omega widened by delta on both sides).
double apply_N_delta_hat(const Kernel& k, const ScalarField& u, double x,
                         Interval omega, const QuadratureSpec& q);

struct FracResult {
    double value;
    double tail_bound;  // bound on the neglected tail beyond the cutoff
};

// (-Delta)^s u(x) = C_{1,s} PV int_R (u(x)-u(y)) |x-y|^{-1-2s} dy. The tail
// beyond the cutoff Z is compensated exactly for the 2u(x) part; what
// remains is bounded through the field's tail envelope (or vanishes for
// fields with bounded domain). tail_cutoff <= 0 selects Z automatically.
FracResult fractional_laplacian(double s, const ScalarField& u, double x,
                                const QuadratureSpec& q,
                                double tail_cutoff = 0.0);

enum class NeumannVariant { OmegaIntegral, FullLine };

// Fractional Neumann data at x outside the closure of omega:
//   OmegaIntegral: -C_{1,s} int_omega (u(y)-u(x)) |x-y|^{-1-2s} dy
//   FullLine:      (-Delta)^s u(x) over all of R
double fractional_neumann(double s, const ScalarField& u, double x,
                          Interval omega, NeumannVariant variant,
                          const QuadratureSpec& q);

// F(region1, region2) = int_{region2} dx int_{region1} dy
// (u(x)-u(y)) gamma(|x-y|): the flux from region1 into region2. Regions are
// unions of intervals; x runs over region2 (outer), y over region1 (inner).
double flux(const Kernel& k, const ScalarField& u,
            const std::vector<Interval>& region1,
            const std::vector<Interval>& region2, const QuadratureSpec& q);

struct GreenResiduals {
    double first;   // energy identity residual
    double second;  // symmetric (second) identity residual
};

// Residuals |LHS - RHS| of the two Green identities on spec.omega with its
// interaction layer. regional = false uses the full-ball operator pair and
// the double integral over hat^2 minus layer^2 (inclusion-exclusion);
// regional = true uses the regional pair and the double integral over hat^2.
GreenResiduals green_identity_residuals(const Kernel& k, const ScalarField& u,
                                        const ScalarField& v,
                                        const DomainSpec& spec,
                                        const QuadratureSpec& q,
                                        bool regional = false);

}  // namespace nonlocal
