#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "nonlocal/kernels.hpp"

using namespace nonlocal;

TEST_CASE("fractional constant closed forms") {
    // 2*0.5*Gamma(1)/(sqrt(pi)*Gamma(0.5)) = 1/pi
    CHECK(fractional_constant(1, 0.5) == doctest::Approx(1.0 / M_PI).epsilon(1e-14));
    // high-precision gamma oracle values
    CHECK(fractional_constant(1, 0.25) ==
          doctest::Approx(0.19947114020071633897).epsilon(1e-14));
    CHECK(fractional_constant(1, 0.75) ==
          doctest::Approx(0.29920671030107450845).epsilon(1e-14));
    // d=2: Gamma(1.5)/(pi*Gamma(0.5))
    CHECK(fractional_constant(2, 0.5) ==
          doctest::Approx(0.15915494309189533577).epsilon(1e-14));
    // s -> 1: Gamma(1-s) blows up, so the constant vanishes like 1-s
    CHECK(fractional_constant(1, 0.999) ==
          doctest::Approx(std::pow(2.0, 1.998) * 0.999 * std::tgamma(1.499) /
                          (std::sqrt(M_PI) * std::tgamma(0.001)))
              .epsilon(1e-12));
    CHECK(fractional_constant(1, 0.999) < 0.01);
    CHECK_THROWS_AS(fractional_constant(1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(fractional_constant(1, -0.5), std::invalid_argument);
}

TEST_CASE("crossover horizon") {
    CHECK(std::fabs(delta_crossover(0.5) - M_PI) <= 1e-12);
    CHECK(delta_crossover(-1.0) ==
          doctest::Approx(std::pow(8.0, 0.25)).epsilon(1e-14));
    CHECK(delta_crossover(0.25) ==
          doctest::Approx(3.8383165853550260132).epsilon(1e-14));
    CHECK(delta_crossover(0.75) ==
          doctest::Approx(2.7925268031909273231).epsilon(1e-14));
    CHECK_THROWS_AS(delta_crossover(0.0), std::invalid_argument);
    CHECK_THROWS_AS(delta_crossover(1.0), std::invalid_argument);
}

TEST_CASE("crossover continuity at delta_s") {
    for (double s : {0.25, 0.5, 0.75}) {
        double ds = delta_crossover(s);
        double moment = (2.0 - 2.0 * s) * std::pow(ds, 2.0 * s - 2.0);
        double frac = fractional_constant(1, s);
        CHECK(std::fabs(moment - frac) <= 1e-12);
        Kernel k{s, ds, 1, Scaling::Crossover};
        double c = scaling_constant(k);
        CHECK(std::fabs(c - frac) <= 1e-12);
    }
}

TEST_CASE("scaling constants and branch selection") {
    // s=0.5, delta=1 < pi: moment branch, (2-1)*1 = 1
    CHECK(scaling_constant({0.5, 1.0, 1, Scaling::Crossover}) ==
          doctest::Approx(1.0).epsilon(1e-14));
    // beyond the crossover the constant freezes at C_{1,s}
    CHECK(scaling_constant({0.5, 10.0, 1, Scaling::Crossover}) ==
          doctest::Approx(1.0 / M_PI).epsilon(1e-14));
    // s=-1, delta=0.1: 4*delta^{-4}
    CHECK(scaling_constant({-1.0, 0.1, 1, Scaling::Crossover}) ==
          doctest::Approx(40000.0).epsilon(1e-14));
    // LocalMoment at d=1 equals the moment branch
    CHECK(scaling_constant({0.25, 0.08, 1, Scaling::LocalMoment}) ==
          doctest::Approx((2.0 - 0.5) * std::pow(0.08, -1.5)).epsilon(1e-14));
    CHECK_THROWS_AS(scaling_constant({0.5, 1.0, 2, Scaling::Crossover}),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        scaling_constant({-1.0, 1.0, 1, Scaling::FractionalTruncation}),
        std::invalid_argument);
}

TEST_CASE("kernel evaluation") {
    Kernel k{-1.0, 0.1, 1, Scaling::Crossover};
    CHECK(kernel_eval(k, 0.2) == 0.0);
    CHECK(kernel_eval(k, 0.05) == doctest::Approx(2000.0).epsilon(1e-14));
    CHECK(kernel_eval(k, -0.05) == doctest::Approx(2000.0).epsilon(1e-14));
    CHECK(kernel_eval({0.5, M_PI, 1, Scaling::Crossover}, 1.0) ==
          doctest::Approx(1.0 / M_PI).epsilon(1e-13));
    CHECK_THROWS_AS(kernel_eval({0.5, 1.0, 1, Scaling::Crossover}, 0.0),
                    std::domain_error);
}

TEST_CASE("kernel support and monotonicity") {
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> far(0.1, 10.0);
    Kernel k{0.25, 0.1, 1, Scaling::Crossover};
    for (int i = 0; i < 1000; ++i) CHECK(kernel_eval(k, far(rng)) == 0.0);
    // nonincreasing in |z| for s >= 0 (the power -1-2s is increasing in |z|
    // once s < -1/2, e.g. the |z|^1 kernel at s = -1)
    for (double s : {0.25, 0.5, 0.75}) {
        Kernel km{s, 0.1, 1, Scaling::Crossover};
        double prev = kernel_eval(km, 1e-4);
        for (int i = 1; i <= 200; ++i) {
            double z = 1e-4 + (0.1 - 2e-4) * i / 200.0;
            double v = kernel_eval(km, z);
            CHECK(v <= prev * (1.0 + 1e-15));
            CHECK(v >= 0.0);
            prev = v;
        }
    }
    for (int i = 1; i < 100; ++i) {
        double z = -0.1 + 0.2 * i / 100.0;
        if (z == 0.0) continue;  // singular point for s >= 0
        CHECK(kernel_eval(k, z) >= 0.0);
    }
}

TEST_CASE("second moment normalization") {
    for (double s : {-1.0, 0.25, 0.5, 0.75})
        for (double delta : {0.02, 0.08, 0.5}) {
            Kernel k{s, delta, 1, Scaling::LocalMoment};
            CHECK(std::fabs(second_moment(k) - 2.0) <= 1e-10 * 2.0);
        }
    // Crossover below delta_s is the moment branch
    CHECK(second_moment({-1.0, 0.1, 1, Scaling::Crossover}) ==
          doctest::Approx(2.0).epsilon(1e-14));
    // d=2 LocalMoment normalizes to 2d = 4
    CHECK(second_moment({0.5, 0.3, 2, Scaling::LocalMoment}) ==
          doctest::Approx(4.0).epsilon(1e-13));
    // FractionalTruncation closed form: C * 2 * delta^{1-2s+1}/(2-2s)
    double c = fractional_constant(1, 0.75);
    CHECK(second_moment({0.75, 10.0, 1, Scaling::FractionalTruncation}) ==
          doctest::Approx(2.0 * c * std::pow(10.0, 0.5) / 0.5).epsilon(1e-13));
}

TEST_CASE("kernel mass") {
    auto m = kernel_mass({-1.0, 0.1, 1, Scaling::Crossover});
    CHECK(m.finite);
    CHECK(m.value == doctest::Approx(400.0).epsilon(1e-13));
    CHECK_FALSE(kernel_mass({0.25, 0.04, 1, Scaling::Crossover}).finite);
    CHECK_FALSE(kernel_mass({0.75, 1.0, 1, Scaling::Crossover}).finite);
}
