#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "nonlocal/assembly.hpp"
#include "nonlocal/geometry.hpp"
#include "nonlocal/kernels.hpp"
#include "nonlocal/solver.hpp"

using namespace nonlocal;

namespace {

DomainSpec neumann_spec(double a, double b, double delta,
                        std::function<double(double)> gl = nullptr,
                        std::function<double(double)> gr = nullptr) {
    DomainSpec spec;
    spec.omega = {a, b};
    spec.delta = delta;
    spec.pieces = {{{a - delta, a}, PieceKind::Neumann, std::move(gl)},
                   {{b, b + delta}, PieceKind::Neumann, std::move(gr)}};
    return spec;
}

DomainSpec dirichlet_spec(double a, double b, double delta,
                          std::function<double(double)> g = nullptr) {
    DomainSpec spec;
    spec.omega = {a, b};
    spec.delta = delta;
    spec.pieces = {{{a - delta, a}, PieceKind::Dirichlet, g},
                   {{b, b + delta}, PieceKind::Dirichlet, g}};
    return spec;
}

LinearSystem neumann_system(const BandedSymMatrix& A, std::vector<double> b,
                            const Mesh& mesh) {
    LinearSystem sys;
    sys.matrix = A;
    sys.load = std::move(b);
    for (long g = 0; g < mesh.n_nodes(); ++g) sys.retained.push_back(g);
    return sys;
}

double norm_inf(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace

TEST_CASE("mass system reproduces a prescribed nodal vector") {
    Mesh m = build_mesh(neumann_spec(0.0, 1.0, 0.3), 0.1);
    BandedSymMatrix M = assemble_mass(m, MassRegion::OmegaHat);
    std::mt19937 rng(414u);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> w(m.n_nodes());
    for (double& v : w) v = dist(rng);
    LinearSystem sys = neumann_system(M, M.matvec(w), m);
    Solution sol = solve_linear(sys, m);
    for (long g = 0; g < m.n_nodes(); ++g)
        CHECK(sol.values[g] == doctest::Approx(w[g]).epsilon(1e-12));
    CHECK(sol.residual_norm <=
          1e-10 * (M.norm_inf() * norm_inf(sol.values) + norm_inf(sys.load)));
}

TEST_CASE("toy system against a hand-inverted 2x2 matrix") {
    Mesh m = build_mesh(dirichlet_spec(0.0, 1.0, 1.0), 1.0);  // 4 nodes
    LinearSystem sys;
    sys.matrix = BandedSymMatrix(2, 1);
    sys.matrix.at(0, 0) = 2.0;
    sys.matrix.at(1, 1) = 2.0;
    sys.matrix.at(1, 0) = -1.0;
    sys.load = {1.0, 0.0};
    sys.retained = {1, 2};
    sys.dirichlet = {{0, 0.0}, {3, 0.0}};
    Solution sol = solve_linear(sys, m);
    // inverse of [[2,-1],[-1,2]] is (1/3) [[2,1],[1,2]]
    CHECK(sol.values[0] == 0.0);
    CHECK(sol.values[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(sol.values[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(sol.values[3] == 0.0);
}

TEST_CASE("full-layer dirichlet with constant data reproduces the constant") {
    auto g25 = [](double) { return 2.5; };
    DomainSpec spec = dirichlet_spec(0.0, 1.0, 0.3, g25);
    Mesh m = build_mesh(spec, 0.1);
    for (double s : {0.5, -1.0}) {
        Kernel k{s, 0.3, 1, Scaling::Crossover};
        BandedSymMatrix A = assemble_stiffness(k, m, FormKind::FullConstrained);
        std::vector<double> zero(m.n_nodes(), 0.0);
        LinearSystem sys = apply_dirichlet(A, zero, m, spec.pieces);
        Solution sol = solve_linear(sys, m);
        CAPTURE(s);
        for (double v : sol.values)
            CHECK(v == doctest::Approx(2.5).epsilon(1e-10));
        CHECK(sol.residual_norm <=
              1e-10 * (sys.matrix.norm_inf() * 2.5 + norm_inf(sys.load)));
    }
}

TEST_CASE("indefinite matrix raises a numerical error") {
    Mesh m = build_mesh(dirichlet_spec(0.0, 1.0, 1.0), 1.0);
    LinearSystem sys;
    sys.matrix = BandedSymMatrix(2, 1);
    sys.matrix.at(0, 0) = 1.0;
    sys.matrix.at(1, 1) = 1.0;
    sys.matrix.at(1, 0) = 2.0;  // eigenvalues 3 and -1
    sys.load = {1.0, 1.0};
    sys.retained = {1, 2};
    sys.dirichlet = {{0, 0.0}, {3, 0.0}};
    CHECK_THROWS_AS((void)solve_linear(sys, m), NumericalError);
}

TEST_CASE("dense fallback agrees with the banded path") {
    auto gz = [](double) { return 0.0; };
    DomainSpec spec = dirichlet_spec(0.0, 1.0, 0.3, gz);
    Mesh m = build_mesh(spec, 0.1);
    Kernel k{0.5, 0.3, 1, Scaling::Crossover};
    BandedSymMatrix A = assemble_stiffness(k, m, FormKind::FullConstrained);
    std::vector<double> b(m.n_nodes(), 1.0);
    LinearSystem sys = apply_dirichlet(A, b, m, spec.pieces);
    Solution banded = solve_linear(sys, m);

    LinearSystem wide = sys;
    long nr = sys.matrix.n;
    wide.matrix = BandedSymMatrix(nr, nr - 1);  // forces the dense branch
    for (long i = 0; i < nr; ++i)
        for (long j = std::max<long>(0, i - sys.matrix.bandwidth); j <= i; ++j)
            wide.matrix.at(i, j) = sys.matrix.get(i, j);
    Solution dense = solve_linear(wide, m);
    for (long g = 0; g < m.n_nodes(); ++g)
        CHECK(dense.values[g] ==
              doctest::Approx(banded.values[g]).epsilon(1e-12));
}

TEST_CASE("pure neumann: compatible data yields a vanishing multiplier") {
    double delta = 0.1;
    DomainSpec spec = neumann_spec(
        0.0, 1.0, delta, [delta](double) { return -1.0 / (6.0 * delta); },
        [](double) { return 0.0; });
    Mesh m = build_mesh(spec, 0.05);
    Kernel k{0.5, delta, 1, Scaling::Crossover};
    BandedSymMatrix A = assemble_stiffness(k, m, FormKind::FullConstrained);
    auto f = [](double x) { return x * (1.0 - x); };
    LinearSystem sys = neumann_system(A, assemble_load(m, f, spec.pieces), m);
    Interval K = m.hat();
    Solution sol = solve_pure_neumann(sys, m, K);
    REQUIRE(sol.lambda.has_value());
    CHECK(std::fabs(*sol.lambda) <= 1e-10);
    MeanConstraint mc = mean_constraint_over(m, K);
    double mean = 0.0;
    for (long g = 0; g < m.n_nodes(); ++g)
        mean += mc.weights[g] * sol.values[g];
    CHECK(std::fabs(mean) <= 1e-10 * mc.measure * norm_inf(sol.values));
    CHECK(sol.residual_norm <=
          1e-10 * (A.norm_inf() * norm_inf(sol.values) + norm_inf(sys.load)));
}

TEST_CASE("pure neumann: unit source multiplier equals 1/|K|") {
    double delta = 0.1;
    DomainSpec spec = neumann_spec(0.0, 1.0, delta);
    Mesh m = build_mesh(spec, 0.05);
    Kernel k{0.25, delta, 1, Scaling::Crossover};
    BandedSymMatrix A = assemble_stiffness(k, m, FormKind::FullConstrained);
    auto f = [](double) { return 1.0; };
    LinearSystem sys = neumann_system(A, assemble_load(m, f, spec.pieces), m);

    Solution hat = solve_pure_neumann(sys, m, m.hat());
    CHECK(*hat.lambda == doctest::Approx(1.0 / 1.2).epsilon(1e-10));

    Solution om = solve_pure_neumann(sys, m, m.omega());
    CHECK(*om.lambda == doctest::Approx(1.0).epsilon(1e-10));
    MeanConstraint mo = mean_constraint_over(m, m.omega());
    double mean = 0.0;
    for (long g = 0; g < m.n_nodes(); ++g) mean += mo.weights[g] * om.values[g];
    CHECK(std::fabs(mean) <= 1e-10 * norm_inf(om.values));
}

TEST_CASE("pure neumann: zero data gives the zero solution") {
    DomainSpec spec = neumann_spec(0.0, 1.0, 0.1);
    Mesh m = build_mesh(spec, 0.1);
    Kernel k{0.5, 0.1, 1, Scaling::Crossover};
    BandedSymMatrix A = assemble_stiffness(k, m, FormKind::RegionalHat);
    LinearSystem sys =
        neumann_system(A, std::vector<double>(m.n_nodes(), 0.0), m);
    Solution sol = solve_pure_neumann(sys, m, m.hat());
    CHECK(*sol.lambda == 0.0);
    CHECK(norm_inf(sol.values) <= 1e-14);
}

TEST_CASE("vanishing reaction strength reduces to the linear solve") {
    auto gz = [](double) { return 1.0; };
    DomainSpec spec = dirichlet_spec(0.0, 1.0, 0.3, gz);
    Mesh m = build_mesh(spec, 0.1);
    Kernel k{0.25, 0.3, 1, Scaling::Crossover};
    BandedSymMatrix A = assemble_stiffness(k, m, FormKind::FullConstrained);
    std::vector<double> b(m.n_nodes(), 0.5);
    LinearSystem sys = apply_dirichlet(A, b, m, spec.pieces);
    Solution lin = solve_linear(sys, m);
    Solution non = solve_nonlinear(sys, m, 0.0, 3.0);
    for (long g = 0; g < m.n_nodes(); ++g)
        CHECK(non.values[g] == lin.values[g]);  // same factorization path
}

TEST_CASE("homogeneous dirichlet with zero source minimizes at zero") {
    DomainSpec spec = dirichlet_spec(0.0, 1.0, 0.3);
    Mesh m = build_mesh(spec, 0.1);
    Kernel k{0.5, 0.3, 1, Scaling::Crossover};
    BandedSymMatrix A = assemble_stiffness(k, m, FormKind::FullConstrained);
    std::vector<double> zero(m.n_nodes(), 0.0);
    LinearSystem sys = apply_dirichlet(A, zero, m, spec.pieces);
    Solution sol = solve_nonlinear(sys, m, 1.0, 3.0);
    CHECK(norm_inf(sol.values) == 0.0);
    CHECK(*sol.newton_iters == 0);
}

TEST_CASE("newton energy matches a coordinate-descent minimization oracle") {
    auto gd = [](double x) { return x < 0.5 ? 1.0 : 0.0; };
    DomainSpec spec = dirichlet_spec(0.0, 1.0, 0.5, gd);
    Mesh m = build_mesh(spec, 0.25);  // M = 4, r = 2
    Kernel k{0.25, 0.5, 1, Scaling::Crossover};
    BandedSymMatrix A = assemble_stiffness(k, m, FormKind::FullConstrained);
    std::vector<double> b(m.n_nodes(), 1.0);
    LinearSystem sys = apply_dirichlet(A, b, m, spec.pieces);
    const double alpha = 1.0, mm = 3.0;

    std::vector<double> trace;
    NewtonOptions opts;
    opts.tol = 1e-12;
    opts.energy_trace = &trace;
    Solution sol = solve_nonlinear(sys, m, alpha, mm, opts);
    double e_newton = 0.0;
    {
        std::vector<double> u(sys.retained.size());
        for (size_t i = 0; i < u.size(); ++i) u[i] = sol.values[sys.retained[i]];
        e_newton = nonlinear_energy(sys, m, alpha, mm, u);
    }

    // derivative-free oracle: cyclic coordinate descent with per-coordinate
    // bisection on the (monotone) directional derivative
    long nr = sys.matrix.n;
    std::vector<double> u(nr, 0.0);
    auto dphi = [&](long a, double t) {
        std::vector<double> ut(u);
        ut[a] += t;
        return nonlinear_residual(sys, m, alpha, mm, ut)[a];
    };
    for (int sweep = 0; sweep < 400; ++sweep) {
        double moved = 0.0;
        for (long a = 0; a < nr; ++a) {
            double lo = -1.0, hi = 1.0;
            while (dphi(a, lo) > 0.0) lo *= 2.0;
            while (dphi(a, hi) < 0.0) hi *= 2.0;
            for (int it = 0; it < 60; ++it) {
                double mid = 0.5 * (lo + hi);
                (dphi(a, mid) > 0.0 ? hi : lo) = mid;
            }
            double t = 0.5 * (lo + hi);
            u[a] += t;
            moved = std::max(moved, std::fabs(t));
        }
        if (moved < 1e-12) break;
    }
    double e_oracle = nonlinear_energy(sys, m, alpha, mm, u);
    CHECK(std::fabs(e_newton - e_oracle) <= 1e-8 * (1.0 + std::fabs(e_oracle)));

    // accepted Newton steps decrease the energy monotonically
    REQUIRE(trace.size() >= 2);
    for (size_t i = 1; i < trace.size(); ++i)
        CHECK(trace[i] <= trace[i - 1] + 1e-15 * (1.0 + std::fabs(trace[i - 1])));
    CHECK(*sol.newton_iters >= 1);
    CHECK(sol.residual_norm <= 1e-12);
}

TEST_CASE("newton residual matches finite differences of the energy") {
    auto gd = [](double) { return 0.5; };
    DomainSpec spec = dirichlet_spec(0.0, 1.0, 0.5, gd);
    Mesh m = build_mesh(spec, 0.25);
    Kernel k{0.75, 0.5, 1, Scaling::Crossover};
    BandedSymMatrix A = assemble_stiffness(k, m, FormKind::FullConstrained);
    std::vector<double> b(m.n_nodes(), 1.0);
    LinearSystem sys = apply_dirichlet(A, b, m, spec.pieces);
    const double alpha = 2.0, mm = 3.5;

    std::mt19937 rng(99u);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> u(sys.retained.size());
    for (double& v : u) v = dist(rng);

    std::vector<double> r = nonlinear_residual(sys, m, alpha, mm, u);
    const double eps = 1e-6;
    for (size_t a = 0; a < u.size(); ++a) {
        std::vector<double> up(u), um(u);
        up[a] += eps;
        um[a] -= eps;
        double fd = (nonlinear_energy(sys, m, alpha, mm, up) -
                     nonlinear_energy(sys, m, alpha, mm, um)) /
                    (2.0 * eps);
        CHECK(std::fabs(fd - r[a]) <= 1e-5 * (1.0 + std::fabs(r[a])));
    }
}

TEST_CASE("mean-constrained newton keeps the zero-mean manifold") {
    DomainSpec spec = neumann_spec(0.0, 1.0, 0.1);
    Mesh m = build_mesh(spec, 0.1);
    Kernel k{0.5, 0.1, 1, Scaling::Crossover};
    BandedSymMatrix A = assemble_stiffness(k, m, FormKind::FullConstrained);
    auto f = [](double x) { return std::sin(3.0 * x); };
    LinearSystem sys = neumann_system(A, assemble_load(m, f, spec.pieces), m);
    sys.mean_constraint = mean_constraint_over(m, m.hat());
    Solution sol = solve_nonlinear(sys, m, 1.0, 3.0, {1e-11, 50, nullptr});
    REQUIRE(sol.lambda.has_value());
    double mean = 0.0;
    for (long g = 0; g < m.n_nodes(); ++g)
        mean += sys.mean_constraint->weights[g] * sol.values[g];
    CHECK(std::fabs(mean) <= 1e-10 * (1.0 + norm_inf(sol.values)));
    CHECK(sol.residual_norm <= 1e-11);
}
