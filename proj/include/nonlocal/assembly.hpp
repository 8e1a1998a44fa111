#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "nonlocal/geometry.hpp"
#include "nonlocal/kernels.hpp"
#include "nonlocal/quadrature.hpp"

namespace nonlocal {

// Symmetric banded matrix in LAPACK lower ('L') packed column-major storage:
// entry (i, j) with j <= i <= min(n-1, j+bandwidth) lives at
// a[j*(bandwidth+1) + (i-j)]. Only the lower triangle is stored; get()
// resolves the mirror entry and returns exact 0 outside the band.
struct BandedSymMatrix {
    long n = 0;
    long bandwidth = 0;
    std::vector<double> a;

    BandedSymMatrix() = default;
    BandedSymMatrix(long n_, long bw);

    double& at(long i, long j);          // lower-triangle reference, i >= j
    double get(long i, long j) const;    // symmetric fetch, 0 outside band
    void add(long i, long j, double v);  // accumulate into the (i, j) entry
    std::vector<double> matvec(const std::vector<double>& x) const;
    double norm_inf() const;  // largest absolute entry
};

// Region of the double integral defining the stiffness form: FullConstrained
// integrates over the hat square minus the layer square (volume-constrained
// operator), RegionalHat over the hat square, RegionalOmega over the Omega
// square (regional operator without layer coupling).
enum class FormKind { FullConstrained, RegionalHat, RegionalOmega };

enum class MassRegion { Omega, OmegaHat };

// Exact value of
//   int_{e_i} int_{e_j} (phi_a(y)-phi_a(x)) (phi_b(y)-phi_b(x)) gamma(|x-y|),
// computed by substituting z = y-x, integrating x analytically (the hats are
// polynomial) and z against C |z|^{-1-2s} with power antiderivatives (log
// branch when an exponent hits -1, i.e. s = 1/2). The horizon cut |z| < delta
// clips the z-range exactly, which is where pairs near offset r = delta/h are
// split. Zero whenever |elem_i - elem_j| > r or the bases miss the elements.
double element_pair_integral(const Kernel& k, long elem_i, long elem_j,
                             long basis_a, long basis_b, const Mesh& mesh);

// A[a][b] = 1/2 * sum of element_pair_integral over admissible ordered
// element pairs. Admissibility: RegionalHat takes all pairs, RegionalOmega
// both elements inside Omega, FullConstrained all pairs except both-in-layer
// (the inclusion-exclusion realization of hat^2 minus layer^2). Bandwidth is
// min(n-1, r+1). Entries are translation-invariant per element offset, so
// one closed-form table per offset feeds the whole band.
BandedSymMatrix assemble_stiffness(const Kernel& k, const Mesh& mesh,
                                   FormKind form);

// Slow reference assembly of the same matrix by adaptive quadrature over
// every element pair (graded toward shared nodes). Test oracle for small n.
BandedSymMatrix assemble_stiffness_oracle(const Kernel& k, const Mesh& mesh,
                                          FormKind form,
                                          const QuadratureSpec& q);

// Tridiagonal piecewise-linear mass matrix over the region's elements
// (h/6 * {1,4,1} rows in the interior of the region).
BandedSymMatrix assemble_mass(const Mesh& mesh, MassRegion region);

// M_R[a][b] = int int_{layer^2} phi_a(x) sigma(x,y) phi_b(y) dy dx by 5x5
// tensor Gauss per element pair. A general sigma couples any two layer
// nodes, so the result carries full bandwidth n-1.
BandedSymMatrix assemble_robin(
    const Mesh& mesh, const std::function<double(double, double)>& sigma);

// Default Robin kernel: sigma(x,y) = delta^{-2} when x and y lie in the same
// layer component, 0 across components or outside the layer.
std::function<double(double, double)> default_robin_sigma(const Mesh& mesh);

// b[a] = int_Omega f phi_a + sum over Neumann/NeumannHat pieces of
// int_piece g phi_a (7-point Gauss per element; pieces are node-aligned).
std::vector<double> assemble_load(const Mesh& mesh,
                                  const std::function<double(double)>& f,
                                  const std::vector<ConstraintPiece>& pieces);

// int_Omega f + sum over Neumann/NeumannHat pieces of int g: the pure
// Neumann solvability defect (must vanish for compatible data).
double compatibility_residual(const Mesh& mesh,
                              const std::function<double(double)>& f,
                              const std::vector<ConstraintPiece>& pieces);

struct MeanConstraint {
    std::vector<double> weights;  // int_K phi_a per retained unknown
    double measure = 0.0;         // |K|
};

// Constraint data for the zero-mean condition over a node-aligned region K
// (Omega or the hat domain in practice): w_a = int_K phi_a, measure = |K|.
MeanConstraint mean_constraint_over(const Mesh& mesh, const Interval& K);

struct LinearSystem {
    BandedSymMatrix matrix;           // restricted to retained unknowns
    std::vector<double> load;
    std::vector<long> retained;       // unknown slot -> mesh node index
    std::map<long, double> dirichlet; // eliminated node -> boundary value
    std::optional<MeanConstraint> mean_constraint;
};

// Eliminates the Dirichlet-classified nodes by nodal interpolation of their
// piece data: restricts matrix and load to the retained nodes and moves the
// A[:, j] * g_D(x_j) columns to the right-hand side.
LinearSystem apply_dirichlet(const BandedSymMatrix& A,
                             const std::vector<double>& load, const Mesh& mesh,
                             const std::vector<ConstraintPiece>& pieces);

// Expands a solution on retained unknowns back to all mesh nodes, filling
// eliminated nodes with their Dirichlet values.
std::vector<double> expand_solution(const LinearSystem& sys, const Mesh& mesh,
                                    const std::vector<double>& reduced);

}  // namespace nonlocal
