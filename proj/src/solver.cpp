#include "nonlocal/solver.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nonlocal/quadrature.hpp"

namespace nonlocal {

namespace {

// Cholesky solve, banded (packed 'L', ldab = bw+1, exactly the matrix's own
// storage) or dense once the band covers half the matrix.
std::vector<double> cholesky_solve(const BandedSymMatrix& A,
                                   std::vector<double> rhs) {
    lapack_int n = static_cast<lapack_int>(A.n);
    lapack_int bw = static_cast<lapack_int>(A.bandwidth);
    if (n == 0) return rhs;
    lapack_int info;
    if (2 * bw >= n) {
        std::vector<double> full(static_cast<size_t>(n) * n, 0.0);
        for (long j = 0; j < A.n; ++j)
            for (long i = j; i <= std::min(A.n - 1, j + A.bandwidth); ++i)
                full[static_cast<size_t>(j) * n + i] = A.get(i, j);
        info = LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, full.data(), n);
        if (info > 0)
            throw NumericalError(
                "factorization hit a non-positive pivot (singular system; "
                "pure-Neumann problems need the constrained solver)");
        if (info < 0) throw NumericalError("dpotrf: invalid argument");
        LAPACKE_dpotrs(LAPACK_COL_MAJOR, 'L', n, 1, full.data(), n, rhs.data(),
                       n);
    } else {
        std::vector<double> ab = A.a;
        info = LAPACKE_dpbtrf(LAPACK_COL_MAJOR, 'L', n, bw, ab.data(), bw + 1);
        if (info > 0)
            throw NumericalError(
                "factorization hit a non-positive pivot (singular system; "
                "pure-Neumann problems need the constrained solver)");
        if (info < 0) throw NumericalError("dpbtrf: invalid argument");
        LAPACKE_dpbtrs(LAPACK_COL_MAJOR, 'L', n, bw, 1, ab.data(), bw + 1,
                       rhs.data(), n);
    }
    return rhs;
}

double residual_inf(const BandedSymMatrix& A, const std::vector<double>& u,
                    const std::vector<double>& b,
                    const std::vector<double>* extra = nullptr,
                    double extra_scale = 0.0) {
    std::vector<double> r = A.matvec(u);
    double worst = 0.0;
    for (size_t i = 0; i < r.size(); ++i) {
        double v = r[i] - b[i];
        if (extra) v += extra_scale * (*extra)[i];
        worst = std::max(worst, std::fabs(v));
    }
    return worst;
}

std::vector<long> slot_table(const LinearSystem& sys, const Mesh& mesh) {
    std::vector<long> slot(mesh.n_nodes(), -1);
    for (size_t i = 0; i < sys.retained.size(); ++i) slot[sys.retained[i]] = i;
    return slot;
}

// alpha/m int_Omega |u_h|^m over the full nodal vector.
double reaction_energy(const Mesh& mesh, const std::vector<double>& full,
                       double alpha, double m) {
    if (alpha == 0.0) return 0.0;
    const GaussRule& g = gauss_rule(7);
    double sum = 0.0;
    for (long e = mesh.r; e < mesh.r + mesh.M; ++e) {
        double u0 = full[e], u1 = full[e + 1];
        for (size_t i = 0; i < g.x.size(); ++i) {
            double xi = 0.5 * (g.x[i] + 1.0);
            double uv = (1.0 - xi) * u0 + xi * u1;
            sum += 0.5 * mesh.h * g.w[i] * std::pow(std::fabs(uv), m);
        }
    }
    return alpha / m * sum;
}

// Adds N_a(u) = int_Omega alpha |u_h|^{m-2} u_h phi_a to r (slot-indexed).
void add_reaction_gradient(const Mesh& mesh, const std::vector<double>& full,
                           const std::vector<long>& slot, double alpha,
                           double m, std::vector<double>& r) {
    if (alpha == 0.0) return;
    const GaussRule& g = gauss_rule(7);
    for (long e = mesh.r; e < mesh.r + mesh.M; ++e) {
        double u0 = full[e], u1 = full[e + 1];
        double n0 = 0.0, n1 = 0.0;
        for (size_t i = 0; i < g.x.size(); ++i) {
            double xi = 0.5 * (g.x[i] + 1.0);
            double uv = (1.0 - xi) * u0 + xi * u1;
            double q = alpha * std::pow(std::fabs(uv), m - 2.0) * uv;
            n0 += 0.5 * mesh.h * g.w[i] * q * (1.0 - xi);
            n1 += 0.5 * mesh.h * g.w[i] * q * xi;
        }
        if (slot[e] >= 0) r[slot[e]] += n0;
        if (slot[e + 1] >= 0) r[slot[e + 1]] += n1;
    }
}

// Adds the reaction Hessian int_Omega alpha (m-1) |u_h|^{m-2} phi_a phi_b.
void add_reaction_hessian(const Mesh& mesh, const std::vector<double>& full,
                          const std::vector<long>& slot, double alpha, double m,
                          BandedSymMatrix& J) {
    if (alpha == 0.0) return;
    const GaussRule& g = gauss_rule(7);
    for (long e = mesh.r; e < mesh.r + mesh.M; ++e) {
        double u0 = full[e], u1 = full[e + 1];
        double w00 = 0.0, w01 = 0.0, w11 = 0.0;
        for (size_t i = 0; i < g.x.size(); ++i) {
            double xi = 0.5 * (g.x[i] + 1.0);
            double uv = (1.0 - xi) * u0 + xi * u1;
            double qp = alpha * (m - 1.0) * std::pow(std::fabs(uv), m - 2.0);
            double c = 0.5 * mesh.h * g.w[i] * qp;
            w00 += c * (1.0 - xi) * (1.0 - xi);
            w01 += c * (1.0 - xi) * xi;
            w11 += c * xi * xi;
        }
        long s0 = slot[e], s1 = slot[e + 1];
        if (s0 >= 0) J.add(s0, s0, w00);
        if (s1 >= 0) J.add(s1, s1, w11);
        if (s0 >= 0 && s1 >= 0 && std::labs(s1 - s0) <= J.bandwidth)
            J.add(s1, s0, w01);
    }
}

// One dense symmetric-indefinite KKT solve [[J, w],[w^T, 0]] [d; l] = [-r; 0]
// for mean-constrained Newton steps.
std::pair<std::vector<double>, double> kkt_step(const BandedSymMatrix& J,
                                                const std::vector<double>& w,
                                                const std::vector<double>& r) {
    lapack_int n = static_cast<lapack_int>(J.n), nk = n + 1;
    std::vector<double> M(static_cast<size_t>(nk) * nk, 0.0);
    for (long j = 0; j < J.n; ++j)
        for (long i = j; i <= std::min(J.n - 1, j + J.bandwidth); ++i)
            M[static_cast<size_t>(j) * nk + i] = J.get(i, j);
    for (long i = 0; i < J.n; ++i)
        M[static_cast<size_t>(i) * nk + n] = w[i];  // last row of 'L' part
    std::vector<double> rhs(nk, 0.0);
    for (long i = 0; i < J.n; ++i) rhs[i] = -r[i];
    std::vector<lapack_int> ipiv(nk);
    lapack_int info = LAPACKE_dsysv(LAPACK_COL_MAJOR, 'L', nk, 1, M.data(), nk,
                                    ipiv.data(), rhs.data(), nk);
    if (info != 0)
        throw NumericalError("KKT step factorization failed (singular system)");
    double lam = rhs[n];
    rhs.resize(n);
    return {std::move(rhs), lam};
}

}  // namespace

Solution solve_linear(const LinearSystem& sys, const Mesh& mesh) {
    std::vector<double> u = cholesky_solve(sys.matrix, sys.load);
    Solution sol;
    sol.residual_norm = residual_inf(sys.matrix, u, sys.load);
    sol.values = expand_solution(sys, mesh, u);
    return sol;
}

Solution solve_pure_neumann(const LinearSystem& sys, const Mesh& mesh,
                            const Interval& K) {
    if (!sys.dirichlet.empty())
        throw std::invalid_argument(
            "pure-Neumann solve on a system with Dirichlet rows");
    const BandedSymMatrix& A = sys.matrix;
    long n = A.n;
    MeanConstraint mc = mean_constraint_over(mesh, K);
    if (mc.measure <= 0.0)
        throw std::invalid_argument("mean-constraint region has zero measure");

    double bsum = 0.0;
    for (double v : sys.load) bsum += v;
    double lambda = bsum / mc.measure;

    // A u = b - lambda w is compatible (A 1 = 0); pin the first node and
    // solve the strictly positive definite remainder.
    std::vector<double> bt(n);
    for (long i = 0; i < n; ++i) bt[i] = sys.load[i] - lambda * mc.weights[i];
    BandedSymMatrix R(n - 1, std::min(A.bandwidth, n - 2));
    for (long j = 1; j < n; ++j)
        for (long i = j; i <= std::min(n - 1, j + A.bandwidth); ++i)
            R.at(i - 1, j - 1) = A.get(i, j);
    std::vector<double> rb(bt.begin() + 1, bt.end());
    std::vector<double> ur = cholesky_solve(R, rb);

    std::vector<double> u(n, 0.0);
    std::copy(ur.begin(), ur.end(), u.begin() + 1);
    double mean = 0.0;
    for (long i = 0; i < n; ++i) mean += mc.weights[i] * u[i];
    mean /= mc.measure;
    for (double& v : u) v -= mean;

    Solution sol;
    sol.lambda = lambda;
    sol.residual_norm = residual_inf(A, u, sys.load, &mc.weights, -lambda);
    sol.values = expand_solution(sys, mesh, u);
    return sol;
}

double nonlinear_energy(const LinearSystem& sys, const Mesh& mesh, double alpha,
                        double m, const std::vector<double>& u) {
    std::vector<double> Au = sys.matrix.matvec(u);
    double e = 0.0;
    for (size_t i = 0; i < u.size(); ++i)
        e += (0.5 * Au[i] - sys.load[i]) * u[i];
    return e + reaction_energy(mesh, expand_solution(sys, mesh, u), alpha, m);
}

std::vector<double> nonlinear_residual(const LinearSystem& sys, const Mesh& mesh,
                                       double alpha, double m,
                                       const std::vector<double>& u) {
    std::vector<double> r = sys.matrix.matvec(u);
    for (size_t i = 0; i < r.size(); ++i) r[i] -= sys.load[i];
    add_reaction_gradient(mesh, expand_solution(sys, mesh, u),
                          slot_table(sys, mesh), alpha, m, r);
    return r;
}

Solution solve_nonlinear(const LinearSystem& sys, const Mesh& mesh, double alpha,
                         double m, const NewtonOptions& opts) {
    if (alpha < 0.0) throw std::invalid_argument("negative reaction strength");
    if (m <= 2.0 || m > 4.0)
        throw std::invalid_argument("reaction exponent must lie in (2, 4]");
    if (alpha == 0.0) {
        // the energy is exactly quadratic: Newton is a single linear solve
        Solution sol = solve_linear(sys, mesh);
        sol.newton_iters = 1;
        return sol;
    }

    bool kkt = sys.mean_constraint.has_value() && sys.dirichlet.empty();
    long nr = sys.matrix.n;
    std::vector<long> slot = slot_table(sys, mesh);
    std::vector<double> u(nr, 0.0);
    double E = nonlinear_energy(sys, mesh, alpha, m, u);
    if (opts.energy_trace) opts.energy_trace->push_back(E);

    Solution sol;
    for (int iter = 0; iter <= opts.max_iters; ++iter) {
        std::vector<double> r = nonlinear_residual(sys, mesh, alpha, m, u);
        // on the zero-mean manifold the gradient converges to -lambda w, so
        // stationarity is measured on r + lambda w with the least-squares
        // multiplier lambda = -w.r / w.w
        double lam = 0.0;
        if (kkt) {
            const std::vector<double>& w = sys.mean_constraint->weights;
            double wr = 0.0, ww = 0.0;
            for (long i = 0; i < nr; ++i) {
                wr += w[i] * r[i];
                ww += w[i] * w[i];
            }
            lam = -wr / ww;
        }
        double rn = 0.0;
        for (long i = 0; i < nr; ++i) {
            double v = r[i];
            if (kkt) v += lam * sys.mean_constraint->weights[i];
            rn = std::max(rn, std::fabs(v));
        }
        if (rn <= opts.tol) {
            sol.newton_iters = iter;
            sol.residual_norm = rn;
            if (kkt) sol.lambda = lam;
            sol.values = expand_solution(sys, mesh, u);
            return sol;
        }
        if (iter == opts.max_iters) break;

        BandedSymMatrix J = sys.matrix;
        add_reaction_hessian(mesh, expand_solution(sys, mesh, u), slot, alpha,
                             m, J);
        std::vector<double> d;
        if (kkt) {
            d = kkt_step(J, sys.mean_constraint->weights, r).first;
        } else {
            std::vector<double> nr_rhs(r.size());
            for (size_t i = 0; i < r.size(); ++i) nr_rhs[i] = -r[i];
            d = cholesky_solve(J, std::move(nr_rhs));
        }

        double gd = 0.0, dn = 0.0, un = 0.0;
        for (long i = 0; i < nr; ++i) {
            gd += r[i] * d[i];
            dn = std::max(dn, std::fabs(d[i]));
            un = std::max(un, std::fabs(u[i]));
        }
        bool accepted = false;
        if (dn <= 1.5e-8 * (1.0 + un)) {
            // quadratic-convergence regime: the true energy decrease sits
            // below fp resolution of E, so Armijo would reject on noise
            for (long i = 0; i < nr; ++i) u[i] += d[i];
            E = nonlinear_energy(sys, mesh, alpha, m, u);
            accepted = true;
        } else {
            double t = 1.0;
            for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
                std::vector<double> ut(u);
                for (long i = 0; i < nr; ++i) ut[i] += t * d[i];
                double Et = nonlinear_energy(sys, mesh, alpha, m, ut);
                if (Et <= E + 1e-4 * t * gd) {
                    u = std::move(ut);
                    E = Et;
                    accepted = true;
                    break;
                }
            }
        }
        if (!accepted)
            throw NumericalError("Newton line search failed to decrease energy");
        if (opts.energy_trace) opts.energy_trace->push_back(E);
    }
    throw NumericalError("Newton did not converge within the iteration budget");
}

}  // namespace nonlocal
