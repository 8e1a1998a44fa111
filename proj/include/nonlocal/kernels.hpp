#pragma once

#include <stdexcept>

namespace nonlocal {

// Truncated fractional-type kernel gamma_delta(z) = C * |z|^{-d-2s} on |z| < delta.
// Three normalizations of C are supported:
//   Crossover            - moment-normalizing constant for delta <= delta_s,
//                          truncated fractional constant beyond (1D only)
//   LocalMoment          - C such that the second moment of the kernel is 2d
//   FractionalTruncation - C_{d,s}, independent of delta (requires 0 < s < 1)
enum class Scaling { Crossover, LocalMoment, FractionalTruncation };

struct Kernel {
    double s = 0.5;
    double delta = 1.0;
    int d = 1;
    Scaling scaling = Scaling::Crossover;
};

// Surface area of the unit sphere S^{d-1}; equals 2 for d = 1.
double sphere_area(int d);

// C_{d,s} = 2^{2s} s Gamma(s + d/2) / (pi^{d/2} Gamma(1 - s)), 0 < s < 1.
double fractional_constant(int d, double s);

// Horizon at which the moment-normalizing and fractional constants coincide.
double delta_crossover(double s);

// The constant C multiplying |z|^{-d-2s} under the kernel's scaling rule.
double scaling_constant(const Kernel& k);

// Pointwise kernel value; 0 outside the horizon. Throws on z = 0 with s >= 0.
double kernel_eval(const Kernel& k, double z);

// Integral of |z|^2 gamma(z) over the horizon ball, by closed form.
double second_moment(const Kernel& k);

struct MassResult {
    double value = 0.0;
    bool finite = false;
};

// Integral of gamma over the horizon ball: finite iff s < 0.
MassResult kernel_mass(const Kernel& k);

}  // namespace nonlocal
