#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nonlocal/geometry.hpp"
#include "nonlocal/operators.hpp"
#include "nonlocal/quadrature.hpp"

namespace nonlocal {

// Built-in convergence studies. Ex1/Ex2 drive the horizon to zero against a
// closed-form local limit; Ex3 drives it to infinity against a manufactured
// fractional-limit solution. The *_Ndelta ids use the volume-constrained
// form with flux data integrated over omega; the *_NdeltaHat ids use the
// regional (hat-domain) form with the matching hat flux data.
enum class ExampleId {
    Ex1_Ndelta,     // compatible pure-Neumann flux data, constrained form
    Ex1_NdeltaHat,  // same data under the regional form
    Ex2a,           // flux on (-d, -d/2), value 1 on [-d/2, 0) and (1, 1+d)
    Ex2b,           // the two left pieces swapped relative to Ex2a
    Ex3_Ndelta,     // Gaussian manufactured solution, omega-integral flux
    Ex3_NdeltaHat,  // Gaussian manufactured solution, full-line flux
    Custom,         // programmatic cell hook, no built-in data
};

const char* example_name(ExampleId id);
std::optional<ExampleId> parse_example(const std::string& name);

struct CellResult {
    ExampleId example = ExampleId::Custom;
    double s = 0.0;
    double delta = 0.0;
    double h = 0.0;
    double l2_error = 0.0;
    double runtime_s = 0.0;
    std::optional<double> lambda;  // pure-Neumann multiplier when one exists
    std::vector<double> x;         // node coordinates (curve export)
    std::vector<double> u;         // solution values at the nodes
};

struct RateRow {
    double s = 0.0;
    double rate = 0.0;
    double r2 = 1.0;
};

// Rows in s-major order (the delta list cycles fastest); one fitted rate per
// s whenever the delta list has at least two entries and positive errors.
// Rates are oriented so that a decaying error is positive: slope of
// log(error) against log(delta) for the delta -> 0 families, against
// log(1/delta) for the fractional-limit family.
struct ExperimentReport {
    std::vector<CellResult> rows;
    std::vector<RateRow> rates;
};

struct ExperimentConfig {
    ExampleId example = ExampleId::Ex1_NdeltaHat;
    std::vector<double> s_list;
    std::vector<double> delta_list;
    double h = 0.0;       // mesh width; delta/h must be an integer per cell
    QuadratureSpec quad;  // manufactured-data oracle tolerances
    double solver_tol = 1e-11;  // iterative (nonlinear) solves only
    std::string out;            // output directory, consumed by the CLI
    bool emit_curves = false;
    int threads = 1;
    // Custom studies plug a cell evaluator here; the driver runs it over the
    // (s, delta) grid and fits rates like any built-in example.
    std::function<CellResult(double s, double delta)> custom_cell;
};

// Desk-scale defaults: h = 1/2000 with delta in {0.08, 0.04, 0.02} (Ex1),
// h = 1/1000 with delta in {0.16, 0.08, 0.04} (Ex2), h = 1/100 with delta in
// {5, 10, 20} (Ex3); s in {-1, 0.25, 0.75} except Ex3's {0.25, 0.5, 0.75}.
ExperimentConfig default_config(ExampleId id);

// Closed-form local (delta -> 0) references: Ex1 integrates -u'' = x(1 - x)
// with u'(0) = 1/6, u'(1) = 0, the additive constant fixed to zero mean over
// omega (x^4/12 - x^3/6 + x/6 - 7/120); Ex2 is identically 1. Throws
// std::invalid_argument for examples without a closed-form limit.
ScalarField local_reference(ExampleId id);

struct ManufacturedData {
    ScalarField u_inf;                // exp(-(x - 1/2)^2) on all of R
    std::function<double(double)> f;  // (-Lap)^s u_inf + u_inf, for x in omega
    std::function<double(double)> g;  // flux data, for x outside closed omega
};

// Manufactured fractional-limit data for omega = (0, 1). The flux variant
// selects the data operator: OmegaIntegral integrates over omega only,
// FullLine over all of R. Values are memoized per evaluation point and
// persisted to disk ($NONLOCAL_CACHE_DIR, default ./.nonlocal-cache), so
// repeated studies share one oracle quadrature per node.
ManufacturedData manufactured_fractional(double s, NeumannVariant variant,
                                         const QuadratureSpec& q);

struct OracleStats {
    long long computed = 0;  // oracle quadratures actually evaluated
    long long reused = 0;    // served from the memo or the disk cache
};

// Process-wide counters for the manufactured-data oracle, for run manifests
// and cache diagnostics.
OracleStats manufactured_oracle_stats();

enum class Alignment { None, MeanZeroOnOmega };

// || u_h - u_ref ||_{L2(region)} with u_h the nodal interpolant of `u`,
// by 5-point Gauss per mesh element clipped to the region. MeanZeroOnOmega
// first shifts both functions to zero mean over omega (the interpolant mean
// is exact, the reference mean uses the same composite rule).
double l2_error(const Mesh& mesh, const std::vector<double>& u,
                const ScalarField& u_ref, Interval region, Alignment align);

struct RateFit {
    double rate = 0.0;
    double r2 = 1.0;
};

// Least-squares slope of log(error) against log(delta), with the coefficient
// of determination of the fit. Requires two or more points, positive
// coordinates, and non-degenerate abscissae.
RateFit fit_rate(const std::vector<std::pair<double, double>>& delta_error);

// One-sided linear extrapolations of the nodal values to `at` from the two
// nodes on each side (the node at `at` itself sits on the jump and is
// skipped); returns |right limit - left limit|. Measures interface jumps
// that a continuous interpolant cannot represent directly.
double extrapolated_jump(const Mesh& mesh, const std::vector<double>& u,
                         double at);

// Runs the (s, delta) grid for the configured example: mesh, assembly (plus
// the omega mass matrix for Ex3), constraints (pure Neumann with a hat-mean
// constraint for Ex1, Dirichlet elimination for Ex2), solve, and the L2
// error against the example's reference (mean-aligned for Ex1). Cells run
// concurrently when threads > 1; failures carry the (s, delta) context.
ExperimentReport run_example(const ExperimentConfig& config);

}  // namespace nonlocal
