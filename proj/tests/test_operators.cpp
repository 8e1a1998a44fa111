#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "nonlocal/operators.hpp"

using namespace nonlocal;

namespace {
const QuadratureSpec kQ;  // defaults: abs 1e-10, rel 1e-10

ScalarField linear_field() { return polynomial_field({0.0, 1.0}); }
ScalarField quadratic_field() { return polynomial_field({0.0, 0.0, 1.0}); }
}  // namespace

TEST_CASE("volume operator annihilates constants and linears") {
    for (double s : {-1.0, 0.25, 0.5, 0.75}) {
        for (Scaling sc :
             {Scaling::Crossover, Scaling::LocalMoment,
              Scaling::FractionalTruncation}) {
            if (sc == Scaling::FractionalTruncation && s <= 0.0) continue;
            Kernel k{s, 0.2, 1, sc};
            CHECK(std::fabs(apply_L_delta(k, constant_field(3.7), 0.4, kQ)) <=
                  1e-12);
            CHECK(std::fabs(apply_L_delta(k, linear_field(), 0.4, kQ)) <=
                  1e-10);
        }
    }
}

TEST_CASE("moment-normalized operator recovers the local laplacian on x^2") {
    // second moment of the kernel is normalized to 2d, so L_delta x^2 = 2
    // independently of x, delta, and s
    ScalarField u = quadratic_field();
    for (double x : {0.1, 0.5, 0.77}) {
        for (double delta : {0.05, 0.3}) {
            for (double s : {-1.0, 0.25, 0.5, 0.75}) {
                Kernel k{s, delta, 1, Scaling::LocalMoment};
                CHECK(apply_L_delta(k, u, x, kQ) ==
                      doctest::Approx(2.0).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("regional volume operator equals full operator when the ball fits") {
    ScalarField u = quadratic_field();
    for (double s : {-1.0, 0.5}) {
        Kernel k{s, 0.1, 1, Scaling::LocalMoment};
        Interval region{0.5 - 0.2, 0.5 + 0.2};
        CHECK(apply_regional_L(k, u, 0.5, region, kQ) ==
              doctest::Approx(2.0).epsilon(1e-9));
    }
}

TEST_CASE("interaction operator on a linear field, hand-computed value") {
    // s = -1, crossover scaling, delta = 0.1: C = 4 * 0.1^{-4} = 40000 and
    // gamma(z) = C |z|. For u = x at x = -0.05 with omega = (0,1):
    // N u = -40000 * int_0^{0.05} (y + 0.05)^2 dy = -35/3.
    Kernel k{-1.0, 0.1, 1, Scaling::Crossover};
    ScalarField u = linear_field();
    double v = apply_N_delta(k, u, -0.05, {0.0, 1.0}, kQ);
    CHECK(v == doctest::Approx(-35.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("interaction operator vanishes beyond the horizon") {
    Kernel k{0.25, 0.1, 1, Scaling::Crossover};
    ScalarField u = gaussian_field(0.5);
    CHECK(apply_N_delta(k, u, -5.0, {0.0, 1.0}, kQ) == 0.0);
    CHECK(apply_N_delta(k, u, 1.2, {0.0, 1.0}, kQ) == 0.0);
}

TEST_CASE("interaction operator rejects points inside the domain") {
    Kernel k{0.25, 0.1, 1, Scaling::Crossover};
    ScalarField u = gaussian_field(0.5);
    CHECK_THROWS_AS(apply_N_delta(k, u, 0.5, {0.0, 1.0}, kQ),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_N_delta(k, u, 0.0, {0.0, 1.0}, kQ),
                    std::invalid_argument);
}

TEST_CASE("regional operator: hand-computed one-sided value") {
    // s = -1, delta = 0.1, u = x, x = -0.1 in region (-0.15, 0): the
    // symmetric part (radius 0.05) kills the linear field, leaving only the
    // right one-sided strip: 40000 * int_{0.05}^{0.1} z^2 dz = 35/3.
    Kernel k{-1.0, 0.1, 1, Scaling::Crossover};
    ScalarField u = linear_field();
    double v = apply_regional_L(k, u, -0.1, {-0.15, 0.0}, kQ);
    CHECK(v == doctest::Approx(35.0 / 3.0).epsilon(1e-10));
    CHECK_THROWS_AS(apply_regional_L(k, u, -0.2, {-0.15, 0.0}, kQ),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_regional_L(k, u, -0.15, {-0.15, 0.0}, kQ),
                    std::invalid_argument);
}

TEST_CASE("regional operator: symmetric window kills odd fields exactly") {
    Kernel k{0.5, 0.05, 1, Scaling::Crossover};
    ScalarField u = linear_field();
    CHECK(std::fabs(apply_regional_L(k, u, -0.1, {-0.2, 0.0}, kQ)) <= 1e-12);
}

TEST_CASE("regional interaction operator on the extended domain") {
    Kernel k{-1.0, 0.1, 1, Scaling::Crossover};
    ScalarField u = linear_field();
    // same strip computation as above, now phrased through the layer
    double v = apply_N_delta_hat(k, u, -0.05, {0.0, 1.0}, kQ);
    CHECK(v == doctest::Approx(-35.0 / 3.0).epsilon(1e-10));
    CHECK_THROWS_AS(apply_N_delta_hat(k, u, 0.5, {0.0, 1.0}, kQ),
                    std::invalid_argument);
}

TEST_CASE("regional vs full interaction operators: explicit layer relation") {
    // For x in the left layer, the extended-domain operator differs from the
    // full one by the principal-value integral over the point's own layer
    // component plus a plain integral over the reachable part of the other
    // component. With delta = 1.2 > |omega| the cross term is active.
    Interval om{0.0, 1.0};
    double delta = 1.2, x = -0.05;
    ScalarField u = gaussian_field(0.5);
    for (double s : {-1.0, 0.25, 0.75}) {
        Kernel k{s, delta, 1, Scaling::Crossover};
        Interval left{om.lo - delta, om.lo};
        double cross_lo = std::max(om.hi, x - delta);
        double cross_hi = std::min(om.hi + delta, x + delta);
        double ux = u.eval(x);
        double cross = integrate(
            [&](double y) { return (u.eval(y) - ux) * kernel_eval(k, x - y); },
            cross_lo, cross_hi, kQ);
        double nhat = apply_N_delta_hat(k, u, x, om, kQ);
        double rel = apply_N_delta(k, u, x, om, kQ) -
                     apply_regional_L(k, u, x, left, kQ) - cross;
        CHECK(nhat == doctest::Approx(rel).epsilon(1e-7));
    }
}

TEST_CASE("fractional laplacian of a gaussian: frozen reference values") {
    ScalarField u = gaussian_field(0.5);
    struct Row {
        double s, x, want;
    };
    const Row rows[] = {
        {0.25, 0.1, 0.76375298604868013},
        {0.50, 0.1, 0.80345698601779440},
        {0.75, 0.1, 0.93268477239624220},
        {0.25, 0.5, 0.97774106744692380},
        {0.50, 0.5, 1.12837916709551257},
        {0.75, 0.5, 1.44640908463207714},
    };
    for (const Row& r : rows) {
        FracResult fr = fractional_laplacian(r.s, u, r.x, kQ);
        CHECK(fr.value == doctest::Approx(r.want).epsilon(1e-9));
        CHECK(fr.tail_bound < 1e-11);
    }
    // at the center the value has a closed form: 4^s Gamma(s+1/2)/sqrt(pi)
    for (double s : {0.25, 0.5, 0.75}) {
        double closed =
            std::pow(4.0, s) * std::tgamma(s + 0.5) / std::sqrt(M_PI);
        CHECK(fractional_laplacian(s, u, 0.5, kQ).value ==
              doctest::Approx(closed).epsilon(1e-9));
    }
}

TEST_CASE("fractional laplacian: the two quadrature schemes agree") {
    ScalarField u = gaussian_field(0.5);
    QuadratureSpec q1 = kQ;
    q1.scheme = 1;
    for (double s : {0.25, 0.75}) {
        double a = fractional_laplacian(s, u, 0.1, kQ).value;
        double b = fractional_laplacian(s, u, 0.1, q1).value;
        CHECK(std::fabs(a - b) <= 1e-8);
    }
}

TEST_CASE("fractional laplacian of a constant stays within its tail bound") {
    ScalarField u = constant_field(3.0);
    for (double s : {0.25, 0.5, 0.75}) {
        FracResult fr = fractional_laplacian(s, u, 0.2, kQ);
        CHECK(std::fabs(fr.value) <= fr.tail_bound + 1e-12);
    }
}

TEST_CASE("fractional laplacian of a windowed quadratic: scaling law") {
    // u = x^2 on (-W, W), evaluated at 0: value = -2 C W^{2-2s}/(2-2s),
    // so halving the window scales the value by 2^{2s-2}.
    double s = 0.25;
    double C = fractional_constant(1, s);
    auto win = [&](double W) {
        ScalarField u = polynomial_field({0.0, 0.0, 1.0}, {-W, W});
        return fractional_laplacian(s, u, 0.0, kQ);
    };
    FracResult f5 = win(5.0), f10 = win(10.0);
    double want5 = -2.0 * C * std::pow(5.0, 1.5) / 1.5;
    CHECK(f5.value == doctest::Approx(want5).epsilon(1e-8));
    CHECK(f5.tail_bound == 0.0);
    CHECK(f10.value / f5.value ==
          doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-8));
}

TEST_CASE("fractional laplacian input validation") {
    ScalarField u = gaussian_field(0.5);
    CHECK_THROWS_AS(fractional_laplacian(1.2, u, 0.1, kQ),
                    std::invalid_argument);
    CHECK_THROWS_AS(fractional_laplacian(-0.5, u, 0.1, kQ),
                    std::invalid_argument);
    // constant field truncated at Z = 5: the tail bound dwarfs the tolerance
    CHECK_THROWS_AS(fractional_laplacian(0.5, constant_field(1.0), 0.0, kQ, 5.0),
                    NumericalError);
}

TEST_CASE("fractional interaction operator: frozen reference values") {
    ScalarField u = gaussian_field(0.5);
    Interval om{0.0, 1.0};
    struct Row {
        double s, x, omega_integral, full_line;
    };
    const Row rows[] = {
        {0.25, -0.3, -0.142640699418025647, 0.31968570214343005},
        {0.25, 1.7, -0.115924064960063123, -0.022778181116284084},
        {0.50, -0.3, -0.299500357801197802, 0.16771919746613330},
        {0.50, 1.7, -0.180390296854653773, -0.24537326178335234},
        {0.75, -0.3, -0.38463668227444785, -0.013178829140574008},
        {0.75, 1.7, -0.167802937859836594, -0.51385761204986720},
    };
    for (const Row& r : rows) {
        double a = fractional_neumann(r.s, u, r.x, om,
                                      NeumannVariant::OmegaIntegral, kQ);
        double b =
            fractional_neumann(r.s, u, r.x, om, NeumannVariant::FullLine, kQ);
        CHECK(a == doctest::Approx(r.omega_integral).epsilon(1e-9));
        CHECK(b == doctest::Approx(r.full_line).epsilon(1e-9));
    }
}

TEST_CASE("fractional interaction operator: constants and decay") {
    Interval om{0.0, 1.0};
    CHECK(fractional_neumann(0.5, constant_field(5.0), -0.3, om,
                             NeumannVariant::OmegaIntegral, kQ) == 0.0);
    // far from omega the value decays at least like the kernel
    ScalarField u = gaussian_field(0.5);
    for (double s : {0.25, 0.75}) {
        double v = fractional_neumann(s, u, -10.5, om,
                                      NeumannVariant::OmegaIntegral, kQ);
        double bound = fractional_constant(1, s) *
                       std::pow(10.5, -1.0 - 2.0 * s);
        CHECK(std::fabs(v) <= bound);
    }
    CHECK_THROWS_AS(fractional_neumann(0.5, u, 0.5, om,
                                       NeumannVariant::OmegaIntegral, kQ),
                    std::invalid_argument);
}

TEST_CASE("flux of a region with itself vanishes") {
    Kernel k{0.25, 0.3, 1, Scaling::Crossover};
    ScalarField u = gaussian_field(0.5);
    std::vector<Interval> om{{0.0, 1.0}};
    CHECK(std::fabs(flux(k, u, om, om, kQ)) <= 1e-9);
}

TEST_CASE("flux antisymmetry and additivity on randomized disjoint pairs") {
    Kernel k{0.25, 0.3, 1, Scaling::Crossover};
    ScalarField u = gaussian_field(0.5);
    std::mt19937 rng(20240615u);
    std::uniform_real_distribution<double> U(-0.5, 1.5);
    int done = 0;
    while (done < 20) {
        double p[4] = {U(rng), U(rng), U(rng), U(rng)};
        std::sort(p, p + 4);
        if (p[1] - p[0] < 0.05 || p[2] - p[1] < 0.05 || p[3] - p[2] < 0.05)
            continue;
        ++done;
        std::vector<Interval> A{{p[0], p[1]}}, B{{p[2], p[3]}};
        double fab = flux(k, u, A, B, kQ);
        double fba = flux(k, u, B, A, kQ);
        CHECK(std::fabs(fab + fba) <= 1e-9);
        double m = 0.5 * (p[0] + p[1]);
        std::vector<Interval> A1{{p[0], m}}, A2{{m, p[1]}};
        double split = flux(k, u, A1, B, kQ) + flux(k, u, A2, B, kQ);
        CHECK(fab == doctest::Approx(split).epsilon(1e-9));
    }
}

TEST_CASE("green identities: polynomial fields, bounded kernel") {
    Kernel k{-1.0, 0.1, 1, Scaling::Crossover};
    DomainSpec spec;
    spec.omega = {0.0, 1.0};
    spec.delta = 0.1;
    ScalarField u = quadratic_field();
    ScalarField v = linear_field();
    for (int scheme : {0, 1}) {
        QuadratureSpec q = kQ;
        q.scheme = scheme;
        GreenResiduals r = green_identity_residuals(k, u, v, spec, q);
        CHECK(r.first <= 1e-8);
        CHECK(r.second <= 1e-8);
    }
}

TEST_CASE("green identities: singular kernels, both operator families") {
    DomainSpec spec;
    spec.omega = {0.0, 1.0};
    spec.delta = 0.1;
    QuadratureSpec q;
    q.abs_tol = 1e-8;
    q.rel_tol = 1e-8;
    struct Case {
        double s;
        ScalarField u, v;
    };
    const Case cases[] = {
        {0.25, gaussian_field(0.5), linear_field()},
        {0.75, gaussian_field(0.3), quadratic_field()},
    };
    for (const Case& c : cases) {
        Kernel k{c.s, spec.delta, 1, Scaling::Crossover};
        for (bool regional : {false, true}) {
            GreenResiduals r =
                green_identity_residuals(k, c.u, c.v, spec, q, regional);
            CHECK(r.first <= 1e-7);
            CHECK(r.second <= 1e-7);
        }
    }
}

TEST_CASE("green identities: constants give exactly zero residuals") {
    Kernel k{0.5, 0.1, 1, Scaling::Crossover};
    DomainSpec spec;
    spec.omega = {0.0, 1.0};
    spec.delta = 0.1;
    GreenResiduals r = green_identity_residuals(k, constant_field(2.0),
                                                constant_field(-1.0), spec, kQ);
    CHECK(r.first <= 1e-14);
    CHECK(r.second <= 1e-14);
}

TEST_CASE("green identities reject mismatched horizons") {
    Kernel k{0.5, 0.2, 1, Scaling::Crossover};
    DomainSpec spec;
    spec.omega = {0.0, 1.0};
    spec.delta = 0.1;
    CHECK_THROWS_AS(green_identity_residuals(k, constant_field(1.0),
                                             constant_field(1.0), spec, kQ),
                    std::invalid_argument);
}
