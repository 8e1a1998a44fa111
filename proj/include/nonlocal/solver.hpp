#pragma once

#include <optional>
#include <vector>

#include "nonlocal/assembly.hpp"
#include "nonlocal/geometry.hpp"

namespace nonlocal {

struct Solution {
    std::vector<double> values;       // all mesh nodes, Dirichlet data filled
    std::optional<double> lambda;     // pure-Neumann multiplier
    std::optional<int> newton_iters;  // accepted Newton steps
    double residual_norm = 0.0;       // ||A u - b||_inf over unknown rows
};

// Cholesky solve of the reduced SPD system: banded (dpbtrf/dpbtrs), dense
// (dpotrf/dpotrs) once the bandwidth reaches n/2. Throws NumericalError on
// a non-positive pivot -- typically a singular pure-Neumann matrix routed
// to the wrong solver.
Solution solve_linear(const LinearSystem& sys, const Mesh& mesh);

// Compatible singular system (A 1 = 0, no Dirichlet rows) under the
// zero-mean constraint int_K u_h = 0. The multiplier splits off exactly:
// lambda = (sum of b) / |K|; the shifted system A u = b - lambda w is solved
// on the complement of constants (one node pinned) and the result shifted
// to zero K-mean. Returns lambda and the K-mean residual-free solution.
Solution solve_pure_neumann(const LinearSystem& sys, const Mesh& mesh,
                            const Interval& K);

struct NewtonOptions {
    double tol = 1e-11;                         // on ||residual||_inf
    int max_iters = 50;
    std::vector<double>* energy_trace = nullptr;  // energies of accepted steps
};

// Damped Newton minimization of the discrete energy
//   E(u) = 1/2 u^T A u - b^T u + alpha/m int_Omega |u_h|^m,   m in (2, 4],
// with residual A u + N(u) - b, Jacobian A plus the mass matrix weighted by
// alpha (m-1) |u_h|^{m-2}, and Armijo backtracking on E. With a mean
// constraint present (and no Dirichlet rows) each step solves the dense KKT
// system instead. alpha = 0 reproduces solve_linear bit-for-bit.
Solution solve_nonlinear(const LinearSystem& sys, const Mesh& mesh,
                         double alpha, double m, const NewtonOptions& opts = {});

// Discrete energy and its gradient (the Newton residual), exposed so tests
// and the verification battery can difference one against the other.
double nonlinear_energy(const LinearSystem& sys, const Mesh& mesh, double alpha,
                        double m, const std::vector<double>& u);
std::vector<double> nonlinear_residual(const LinearSystem& sys, const Mesh& mesh,
                                       double alpha, double m,
                                       const std::vector<double>& u);

}  // namespace nonlocal
