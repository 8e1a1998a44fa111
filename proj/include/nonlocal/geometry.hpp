#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace nonlocal {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
    bool contains(double x) const { return x > lo && x < hi; }
};

enum class PieceKind { Dirichlet, Neumann, NeumannHat, Robin };

// One constraint piece on the interaction layer. Intervals are half-open
// [lo, hi) for node classification, so adjacent pieces tile without ties.
struct ConstraintPiece {
    Interval interval;
    PieceKind kind = PieceKind::Dirichlet;
    std::function<double(double)> data;  // g_D or g_N on the piece
};

struct DomainSpec {
    Interval omega;
    double delta = 0.0;
    std::vector<ConstraintPiece> pieces;
};

// (a-delta, a) and (b, b+delta).
std::pair<Interval, Interval> build_layers(const Interval& omega, double delta);

struct PartitionReport {
    bool ok = true;
    std::string message;  // names the offending piece and gap/overlap interval
};

// Checks that the pieces tile the layer exactly: inside the layer, pairwise
// disjoint, no gaps. Reports problems instead of aborting.
PartitionReport validate_partition(const DomainSpec& spec);

enum class NodeClass { Interior, Dirichlet, Neumann, NeumannHat, Robin };

// Uniform mesh over the extended domain: nodes a + (g - r) h for g = 0..n-1,
// n = M + 2r + 1, with M = |omega|/h and r = delta/h both integers. Elements
// are indexed 0..M+2r-1; element e spans nodes (e, e+1).
struct Mesh {
    double a = 0.0, b = 1.0;
    double h = 0.0;
    double delta = 0.0;
    long M = 0, r = 0;
    std::vector<NodeClass> node_class;
    std::vector<int> node_piece;  // index into spec.pieces, -1 for interior

    long n_nodes() const { return M + 2 * r + 1; }
    long n_elements() const { return M + 2 * r; }
    double node(long g) const { return a + (g - r) * h; }
    Interval element(long e) const { return {node(e), node(e + 1)}; }
    bool element_in_omega(long e) const { return e >= r && e < r + M; }
    bool element_in_layer(long e) const { return !element_in_omega(e); }
    Interval omega() const { return {a, b}; }
    Interval hat() const { return {a - delta, b + delta}; }
};

// Fails on non-integer |omega|/h or delta/h (1e-12 relative tolerance) and on
// piece endpoints that do not coincide with mesh nodes.
Mesh build_mesh(const DomainSpec& spec, double h);

}  // namespace nonlocal
