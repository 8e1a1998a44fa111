#include "nonlocal/assembly.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace nonlocal {

namespace {

void require_kernel_mesh(const Kernel& k, const Mesh& mesh) {
    if (k.d != 1)
        throw std::invalid_argument("assembly: kernel dimension must be 1");
    if (std::fabs(k.delta - mesh.delta) > 1e-12 * (1.0 + mesh.delta))
        throw std::invalid_argument(
            "assembly: kernel horizon does not match the mesh horizon");
}

// Coefficients of phi_nu(y) - phi_nu(x) over {1, xi, t} for the element pair
// (e, e+k) in local coordinates x = x_e + h xi, y = x + h t. Integer-valued,
// so all downstream polynomial arithmetic is exact in doubles.
struct LinXT {
    double A = 0.0, B = 0.0, C = 0.0;
};

LinXT basis_difference(long nu, long e, long k) {
    LinXT d;
    if (nu == e + k) {  // 1 - eta, eta = xi + t - k
        d.A += 1.0 + k;
        d.B -= 1.0;
        d.C -= 1.0;
    } else if (nu == e + k + 1) {  // eta
        d.A -= k;
        d.B += 1.0;
        d.C += 1.0;
    }
    if (nu == e) {  // minus (1 - xi)
        d.A -= 1.0;
        d.B += 1.0;
    } else if (nu == e + 1) {  // minus xi
        d.B -= 1.0;
    }
    return d;
}

using Poly3 = std::array<double, 4>;  // coefficients of 1, t, t^2, t^3

// (u0 + u1 t)^m for m <= 3.
Poly3 affine_power(double u0, double u1, int m) {
    Poly3 p{0.0, 0.0, 0.0, 0.0};
    switch (m) {
        case 1:
            p = {u0, u1, 0.0, 0.0};
            break;
        case 2:
            p = {u0 * u0, 2.0 * u0 * u1, u1 * u1, 0.0};
            break;
        case 3:
            p = {u0 * u0 * u0, 3.0 * u0 * u0 * u1, 3.0 * u0 * u1 * u1,
                 u1 * u1 * u1};
            break;
        default:
            p = {1.0, 0.0, 0.0, 0.0};
    }
    return p;
}

// 6 * int_{lo(t)}^{up(t)} D_a D_b dxi as a cubic in t, with affine limits
// lo = l0 + l1 t, up = u0 + u1 t. Scaled by 6 so every coefficient stays an
// exact integer; the structural cancellations (continuity of the hats) then
// produce exact zeros instead of roundoff residue.
Poly3 x_integral6(const LinXT& a, const LinXT& b, double l0, double l1,
                  double u0, double u1) {
    double P00 = a.A * b.A;
    double P10 = a.A * b.B + a.B * b.A;
    double P01 = a.A * b.C + a.C * b.A;
    double P20 = a.B * b.B;
    double P11 = a.B * b.C + a.C * b.B;
    double P02 = a.C * b.C;

    Poly3 acc{0.0, 0.0, 0.0, 0.0};
    auto axpy = [&acc](double c, const Poly3& p, int shift) {
        for (int i = 0; i + shift < 4; ++i) acc[i + shift] += c * p[i];
    };
    for (int m = 1; m <= 3; ++m) {
        Poly3 d = affine_power(u0, u1, m);
        Poly3 l = affine_power(l0, l1, m);
        for (int i = 0; i < 4; ++i) d[i] -= l[i];
        switch (m) {
            case 1:  // (up - lo): carries P00 + P01 t + P02 t^2
                axpy(6.0 * P00, d, 0);
                axpy(6.0 * P01, d, 1);
                axpy(6.0 * P02, d, 2);
                break;
            case 2:  // (up^2 - lo^2)/2: carries P10 + P11 t
                axpy(3.0 * P10, d, 0);
                axpy(3.0 * P11, d, 1);
                break;
            case 3:  // (up^3 - lo^3)/3: carries P20
                axpy(2.0 * P20, d, 0);
                break;
        }
    }
    return acc;
}

// int_{t0}^{t1} t^{m-1-2s} dt; log branch when the exponent hits -1.
double t_moment(int m, double s, double t0, double t1) {
    double p = m - 2.0 * s;
    if (std::fabs(p) < 1e-12) return std::log(t1 / t0);
    return (std::pow(t1, p) - std::pow(t0, p)) / p;
}

double piece_value(const Poly3& c6, double s, double t0, double t1) {
    double sum = 0.0;
    for (int m = 0; m < 4; ++m) {
        if (c6[m] == 0.0) continue;  // exact: integer cancellation
        sum += (c6[m] / 6.0) * t_moment(m, s, t0, t1);
    }
    return sum;
}

bool pair_admissible(const Mesh& mesh, FormKind form, long e1, long e2) {
    switch (form) {
        case FormKind::RegionalHat:
            return true;
        case FormKind::RegionalOmega:
            return mesh.element_in_omega(e1) && mesh.element_in_omega(e2);
        case FormKind::FullConstrained:
            return !(mesh.element_in_layer(e1) && mesh.element_in_layer(e2));
    }
    return false;
}

double hat_value(const Mesh& mesh, long nu, double x) {
    double t = 1.0 - std::fabs(x - mesh.node(nu)) / mesh.h;
    return t > 0.0 ? t : 0.0;
}

// Adaptive-quadrature evaluation of one element-pair contribution, graded
// toward the singular diagonal and any shared node. Reference path for tests.
double pair_quad_oracle(const Kernel& kern, const Mesh& mesh, long ei, long ej,
                        long a, long b, const QuadratureSpec& q) {
    Interval Ei = mesh.element(ei), Ej = mesh.element(ej);
    double tol = 1e-13 * mesh.h;
    auto segments = [tol](std::vector<double> pts) {
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end(),
                              [tol](double x, double y) {
                                  return std::fabs(x - y) < tol;
                              }),
                  pts.end());
        return pts;
    };

    auto F = [&](double x) {
        auto f = [&](double y) {
            double dz = std::fabs(y - x);
            if (dz >= kern.delta || dz == 0.0) return 0.0;
            return (hat_value(mesh, a, y) - hat_value(mesh, a, x)) *
                   (hat_value(mesh, b, y) - hat_value(mesh, b, x)) *
                   kernel_eval(kern, y - x);
        };
        std::vector<double> pts{Ej.lo, Ej.hi};
        for (double p : {x, x - kern.delta, x + kern.delta})
            if (p > Ej.lo + tol && p < Ej.hi - tol) pts.push_back(p);
        pts = segments(std::move(pts));
        double sum = 0.0;
        double ai = 1.0 - 2.0 * kern.s;  // z^{1-2s} endpoint behaviour
        for (size_t i = 0; i + 1 < pts.size(); ++i) {
            double lo = pts[i], hi = pts[i + 1];
            if (std::fabs(lo - x) < tol)
                sum += integrate_power_endpoint(f, lo, hi, true, ai, q);
            else if (std::fabs(hi - x) < tol)
                sum += integrate_power_endpoint(f, lo, hi, false, ai, q);
            else if (x <= lo)
                // grade toward the end nearest x: boundary layer when x
                // sits just outside the segment
                sum += integrate_graded(f, lo, hi, lo, q);
            else if (x >= hi)
                sum += integrate_graded(f, lo, hi, hi, q);
            else
                sum += integrate(f, lo, hi, q);
        }
        return sum;
    };

    std::vector<double> pts{Ei.lo, Ei.hi};
    for (double p : {Ej.lo - kern.delta, Ej.lo + kern.delta,
                     Ej.hi - kern.delta, Ej.hi + kern.delta})
        if (p > Ei.lo + tol && p < Ei.hi - tol) pts.push_back(p);
    pts = segments(std::move(pts));
    auto shared = [&](double c) {
        return std::fabs(c - Ej.lo) < tol || std::fabs(c - Ej.hi) < tol;
    };
    double sum = 0.0;
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        double lo = pts[i], hi = pts[i + 1];
        if (shared(lo) && shared(hi)) {
            double mid = 0.5 * (lo + hi);
            sum += integrate_graded(F, lo, mid, lo, q);
            sum += integrate_graded(F, mid, hi, hi, q);
        } else if (shared(lo)) {
            sum += integrate_graded(F, lo, hi, lo, q);
        } else if (shared(hi)) {
            sum += integrate_graded(F, lo, hi, hi, q);
        } else {
            sum += integrate(F, lo, hi, q);
        }
    }
    return sum;
}

const GaussRule& load_rule() { return gauss_rule(7); }

double element_basis_integral(const Mesh& mesh, long e, long nu,
                              const std::function<double(double)>& f) {
    Interval E = mesh.element(e);
    const GaussRule& g = load_rule();
    double mid = 0.5 * (E.lo + E.hi), half = 0.5 * (E.hi - E.lo);
    double sum = 0.0;
    for (size_t i = 0; i < g.x.size(); ++i) {
        double x = mid + half * g.x[i];
        sum += g.w[i] * f(x) * hat_value(mesh, nu, x);
    }
    return half * sum;
}

// Index of the piece containing element e (pieces tile the layer and are
// node-aligned, so the midpoint decides).
int element_piece(const Mesh& mesh, long e,
                  const std::vector<ConstraintPiece>& pieces) {
    double mid = 0.5 * (mesh.node(e) + mesh.node(e + 1));
    for (size_t i = 0; i < pieces.size(); ++i)
        if (mid >= pieces[i].interval.lo && mid < pieces[i].interval.hi)
            return static_cast<int>(i);
    return -1;
}

}  // namespace

BandedSymMatrix::BandedSymMatrix(long n_, long bw)
    : n(n_), bandwidth(bw),
      a(static_cast<size_t>(n_) * (bw + 1), 0.0) {
    if (n_ < 1 || bw < 0 || bw > n_ - 1)
        throw std::invalid_argument("BandedSymMatrix: invalid shape");
}

double& BandedSymMatrix::at(long i, long j) {
    if (j > i || i - j > bandwidth || j < 0 || i >= n)
        throw std::out_of_range("BandedSymMatrix::at outside stored band");
    return a[static_cast<size_t>(j) * (bandwidth + 1) + (i - j)];
}

double BandedSymMatrix::get(long i, long j) const {
    if (i < j) std::swap(i, j);
    if (j < 0 || i >= n) throw std::out_of_range("BandedSymMatrix::get");
    if (i - j > bandwidth) return 0.0;
    return a[static_cast<size_t>(j) * (bandwidth + 1) + (i - j)];
}

void BandedSymMatrix::add(long i, long j, double v) {
    if (i < j) std::swap(i, j);
    at(i, j) += v;
}

std::vector<double> BandedSymMatrix::matvec(const std::vector<double>& x) const {
    std::vector<double> y(n, 0.0);
    for (long j = 0; j < n; ++j) {
        long top = std::min(n - 1, j + bandwidth);
        for (long i = j; i <= top; ++i) {
            double v = a[static_cast<size_t>(j) * (bandwidth + 1) + (i - j)];
            y[i] += v * x[j];
            if (i != j) y[j] += v * x[i];
        }
    }
    return y;
}

double BandedSymMatrix::norm_inf() const {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::fabs(v));
    return m;
}

double element_pair_integral(const Kernel& kern, long elem_i, long elem_j,
                             long basis_a, long basis_b, const Mesh& mesh) {
    require_kernel_mesh(kern, mesh);
    if (elem_i > elem_j) std::swap(elem_i, elem_j);
    long k = elem_j - elem_i;
    double rr = static_cast<double>(mesh.r);
    if (static_cast<double>(k - 1) >= rr) return 0.0;  // beyond the horizon

    LinXT Da = basis_difference(basis_a, elem_i, k);
    LinXT Db = basis_difference(basis_b, elem_i, k);
    if ((Da.A == 0.0 && Da.B == 0.0 && Da.C == 0.0) ||
        (Db.A == 0.0 && Db.B == 0.0 && Db.C == 0.0))
        return 0.0;

    double s = kern.s;
    double sum = 0.0;
    if (k == 0) {
        // z > 0 half, doubled: xi in (0, 1-t), t in (0, min(1, r))
        Poly3 c6 = x_integral6(Da, Db, 0.0, 0.0, 1.0, -1.0);
        sum = 2.0 * piece_value(c6, s, 0.0, std::min(1.0, rr));
    } else {
        // rising piece: t in (k-1, k), xi in (k-t, 1)
        double t0 = k - 1.0, t1 = std::min(static_cast<double>(k), rr);
        if (t1 > t0) {
            Poly3 c6 = x_integral6(Da, Db, static_cast<double>(k), -1.0, 1.0, 0.0);
            sum += piece_value(c6, s, t0, t1);
        }
        // falling piece: t in (k, k+1), xi in (0, k+1-t)
        t0 = static_cast<double>(k);
        t1 = std::min(k + 1.0, rr);
        if (t1 > t0) {
            Poly3 c6 = x_integral6(Da, Db, 0.0, 0.0, k + 1.0, -1.0);
            sum += piece_value(c6, s, t0, t1);
        }
    }
    return scaling_constant(kern) * std::pow(mesh.h, 1.0 - 2.0 * s) * sum;
}

BandedSymMatrix assemble_stiffness(const Kernel& kern, const Mesh& mesh,
                                   FormKind form) {
    require_kernel_mesh(kern, mesh);
    long n = mesh.n_nodes(), nel = mesh.n_elements();
    long bw = std::min(n - 1, mesh.r + 1);
    BandedSymMatrix A(n, bw);

    // Translation-invariant tables: one set of basis-pair values per offset.
    struct Entry {
        long oi, oj;  // node offsets relative to the left element index
        double val;
    };
    long kmax = std::min(mesh.r, nel - 1);
    std::vector<std::vector<Entry>> tab(kmax + 1);
    for (long k = 0; k <= kmax; ++k) {
        std::vector<long> offs{0, 1, k, k + 1};
        std::sort(offs.begin(), offs.end());
        offs.erase(std::unique(offs.begin(), offs.end()), offs.end());
        for (size_t ii = 0; ii < offs.size(); ++ii)
            for (size_t jj = ii; jj < offs.size(); ++jj) {
                double v = element_pair_integral(kern, 0, k, offs[ii],
                                                 offs[jj], mesh);
                if (v != 0.0) tab[k].push_back({offs[ii], offs[jj], v});
            }
    }

    for (long e = 0; e < nel; ++e) {
        long klim = std::min(kmax, nel - 1 - e);
        for (long k = 0; k <= klim; ++k) {
            if (!pair_admissible(mesh, form, e, e + k)) continue;
            // ordered-pair sum with the 1/2 prefactor: unordered pairs with
            // distinct elements appear twice, the coincident pair once
            double w = (k == 0) ? 0.5 : 1.0;
            for (const Entry& t : tab[k]) A.add(e + t.oj, e + t.oi, w * t.val);
        }
    }
    return A;
}

BandedSymMatrix assemble_stiffness_oracle(const Kernel& kern, const Mesh& mesh,
                                          FormKind form,
                                          const QuadratureSpec& q) {
    require_kernel_mesh(kern, mesh);
    long n = mesh.n_nodes(), nel = mesh.n_elements();
    long bw = std::min(n - 1, mesh.r + 1);
    BandedSymMatrix A(n, bw);
    for (long e = 0; e < nel; ++e) {
        long klim = std::min(mesh.r, nel - 1 - e);
        for (long k = 0; k <= klim; ++k) {
            if (!pair_admissible(mesh, form, e, e + k)) continue;
            double w = (k == 0) ? 0.5 : 1.0;
            std::vector<long> offs{0, 1, k, k + 1};
            std::sort(offs.begin(), offs.end());
            offs.erase(std::unique(offs.begin(), offs.end()), offs.end());
            for (size_t ii = 0; ii < offs.size(); ++ii)
                for (size_t jj = ii; jj < offs.size(); ++jj) {
                    double v = pair_quad_oracle(kern, mesh, e, e + k,
                                                e + offs[ii], e + offs[jj], q);
                    A.add(e + offs[jj], e + offs[ii], w * v);
                }
        }
    }
    return A;
}

BandedSymMatrix assemble_mass(const Mesh& mesh, MassRegion region) {
    long n = mesh.n_nodes();
    BandedSymMatrix M(n, std::min<long>(n - 1, 1));
    double w = mesh.h / 6.0;
    for (long e = 0; e < mesh.n_elements(); ++e) {
        if (region == MassRegion::Omega && !mesh.element_in_omega(e)) continue;
        M.add(e, e, 2.0 * w);
        M.add(e + 1, e + 1, 2.0 * w);
        M.add(e + 1, e, w);
    }
    return M;
}

BandedSymMatrix assemble_robin(
    const Mesh& mesh, const std::function<double(double, double)>& sigma) {
    long n = mesh.n_nodes();
    BandedSymMatrix M(n, n - 1);
    const GaussRule& g = gauss_rule(5);
    std::vector<long> layer_elems;
    for (long e = 0; e < mesh.n_elements(); ++e)
        if (mesh.element_in_layer(e)) layer_elems.push_back(e);

    for (long ex : layer_elems) {
        Interval Ex = mesh.element(ex);
        double mx = 0.5 * (Ex.lo + Ex.hi), hx = 0.5 * (Ex.hi - Ex.lo);
        for (long ey : layer_elems) {
            Interval Ey = mesh.element(ey);
            double my = 0.5 * (Ey.lo + Ey.hi), hy = 0.5 * (Ey.hi - Ey.lo);
            double blk[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
            for (size_t i = 0; i < g.x.size(); ++i) {
                double x = mx + hx * g.x[i];
                for (size_t j = 0; j < g.x.size(); ++j) {
                    double y = my + hy * g.x[j];
                    double sv = g.w[i] * g.w[j] * sigma(x, y);
                    if (sv == 0.0) continue;
                    for (int ia = 0; ia < 2; ++ia)
                        for (int ib = 0; ib < 2; ++ib)
                            blk[ia][ib] += sv * hat_value(mesh, ex + ia, x) *
                                           hat_value(mesh, ey + ib, y);
                }
            }
            // symmetric sigma: each lower-triangle entry collects exactly the
            // ordered pairs with the row basis on the x side
            for (int ia = 0; ia < 2; ++ia)
                for (int ib = 0; ib < 2; ++ib) {
                    long a = ex + ia, b = ey + ib;
                    if (a >= b) M.add(a, b, hx * hy * blk[ia][ib]);
                }
        }
    }
    return M;
}

std::function<double(double, double)> default_robin_sigma(const Mesh& mesh) {
    auto [L, R] = build_layers(mesh.omega(), mesh.delta);
    double c = 1.0 / (mesh.delta * mesh.delta);
    return [L, R, c](double x, double y) {
        if (L.contains(x) && L.contains(y)) return c;
        if (R.contains(x) && R.contains(y)) return c;
        return 0.0;
    };
}

std::vector<double> assemble_load(const Mesh& mesh,
                                  const std::function<double(double)>& f,
                                  const std::vector<ConstraintPiece>& pieces) {
    long n = mesh.n_nodes();
    std::vector<double> b(n, 0.0);
    for (long e = 0; e < mesh.n_elements(); ++e) {
        if (mesh.element_in_omega(e)) {
            if (f) {
                b[e] += element_basis_integral(mesh, e, e, f);
                b[e + 1] += element_basis_integral(mesh, e, e + 1, f);
            }
        } else {
            int pi = element_piece(mesh, e, pieces);
            if (pi < 0) continue;
            const ConstraintPiece& p = pieces[pi];
            if (p.kind != PieceKind::Neumann && p.kind != PieceKind::NeumannHat)
                continue;
            if (!p.data) continue;
            b[e] += element_basis_integral(mesh, e, e, p.data);
            b[e + 1] += element_basis_integral(mesh, e, e + 1, p.data);
        }
    }
    return b;
}

double compatibility_residual(const Mesh& mesh,
                              const std::function<double(double)>& f,
                              const std::vector<ConstraintPiece>& pieces) {
    const GaussRule& g = load_rule();
    double sum = 0.0;
    for (long e = 0; e < mesh.n_elements(); ++e) {
        const std::function<double(double)>* fn = nullptr;
        if (mesh.element_in_omega(e)) {
            if (f) fn = &f;
        } else {
            int pi = element_piece(mesh, e, pieces);
            if (pi >= 0 && (pieces[pi].kind == PieceKind::Neumann ||
                            pieces[pi].kind == PieceKind::NeumannHat) &&
                pieces[pi].data)
                fn = &pieces[pi].data;
        }
        if (!fn) continue;
        Interval E = mesh.element(e);
        double mid = 0.5 * (E.lo + E.hi), half = 0.5 * (E.hi - E.lo);
        for (size_t i = 0; i < g.x.size(); ++i)
            sum += half * g.w[i] * (*fn)(mid + half * g.x[i]);
    }
    return sum;
}

MeanConstraint mean_constraint_over(const Mesh& mesh, const Interval& K) {
    MeanConstraint mc;
    mc.weights.assign(mesh.n_nodes(), 0.0);
    double tol = 1e-12 * mesh.h;
    for (long e = 0; e < mesh.n_elements(); ++e) {
        Interval E = mesh.element(e);
        if (E.lo < K.lo - tol || E.hi > K.hi + tol) continue;
        mc.weights[e] += 0.5 * mesh.h;
        mc.weights[e + 1] += 0.5 * mesh.h;
    }
    mc.measure = K.hi - K.lo;
    return mc;
}

LinearSystem apply_dirichlet(const BandedSymMatrix& A,
                             const std::vector<double>& load, const Mesh& mesh,
                             const std::vector<ConstraintPiece>& pieces) {
    long n = mesh.n_nodes();
    if (A.n != n || static_cast<long>(load.size()) != n)
        throw std::invalid_argument("apply_dirichlet: size mismatch");

    LinearSystem sys;
    std::vector<long> slot(n, -1);
    for (long g = 0; g < n; ++g) {
        if (mesh.node_class[g] == NodeClass::Dirichlet) {
            int pi = mesh.node_piece[g];
            double v = 0.0;
            if (pi >= 0 && pieces[static_cast<size_t>(pi)].data)
                v = pieces[static_cast<size_t>(pi)].data(mesh.node(g));
            sys.dirichlet[g] = v;
        } else {
            slot[g] = static_cast<long>(sys.retained.size());
            sys.retained.push_back(g);
        }
    }

    long nr = static_cast<long>(sys.retained.size());
    if (nr == 0) throw std::invalid_argument("apply_dirichlet: no unknowns left");
    long bw = std::min(A.bandwidth, nr - 1);
    sys.matrix = BandedSymMatrix(nr, bw);
    sys.load.assign(nr, 0.0);

    for (long i2 = 0; i2 < nr; ++i2) {
        long i = sys.retained[i2];
        sys.load[i2] = load[i];
        for (long j2 = std::max<long>(0, i2 - bw); j2 <= i2; ++j2)
            sys.matrix.at(i2, j2) = A.get(i, sys.retained[j2]);
    }
    for (const auto& [j, v] : sys.dirichlet) {
        if (v == 0.0) continue;
        long ilo = std::max<long>(0, j - A.bandwidth);
        long ihi = std::min(n - 1, j + A.bandwidth);
        for (long i = ilo; i <= ihi; ++i)
            if (slot[i] >= 0) sys.load[slot[i]] -= A.get(i, j) * v;
    }
    return sys;
}

std::vector<double> expand_solution(const LinearSystem& sys, const Mesh& mesh,
                                    const std::vector<double>& reduced) {
    std::vector<double> full(mesh.n_nodes(), 0.0);
    for (size_t i = 0; i < sys.retained.size(); ++i)
        full[sys.retained[i]] = reduced[i];
    for (const auto& [g, v] : sys.dirichlet) full[g] = v;
    return full;
}

}  // namespace nonlocal
