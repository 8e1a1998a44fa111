#include "nonlocal/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>

#include "nonlocal/assembly.hpp"
#include "nonlocal/kernels.hpp"
#include "nonlocal/solver.hpp"

namespace nonlocal {

namespace {

double elapsed_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::string cell_context(ExampleId id, double s, double delta) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s cell (s = %g, delta = %g): ",
                  example_name(id), s, delta);
    return buf;
}

// ---- manufactured-data oracle cache ----------------------------------------

struct OracleStore {
    std::mutex mu;
    std::unordered_map<std::string, double> memo;
    std::filesystem::path file;
    bool loaded = false;
};

std::filesystem::path oracle_cache_dir() {
    if (const char* env = std::getenv("NONLOCAL_CACHE_DIR"); env && *env)
        return env;
    return ".nonlocal-cache";
}

std::shared_ptr<OracleStore> oracle_store(double s, NeumannVariant variant,
                                          const QuadratureSpec& q) {
    static std::mutex reg_mu;
    static std::map<std::string, std::shared_ptr<OracleStore>> registry;
    char name[160];
    std::snprintf(name, sizeof name, "manufactured_s%.10g_%s_tol%.3g_%.3g.txt",
                  s, variant == NeumannVariant::OmegaIntegral ? "omega" : "line",
                  q.abs_tol, q.rel_tol);
    std::filesystem::path file = oracle_cache_dir() / name;
    std::lock_guard lk(reg_mu);
    auto& slot = registry[file.string()];
    if (!slot) {
        slot = std::make_shared<OracleStore>();
        slot->file = file;
    }
    return slot;
}

void load_into_memo(OracleStore& st) {
    if (st.loaded) return;
    st.loaded = true;
    std::ifstream in(st.file);
    if (!in) return;
    std::string tag, xs;
    double v;
    while (in >> tag >> xs >> v) st.memo.emplace(tag + ":" + xs, v);
}

// Memoized oracle evaluation; the key is the exact %.17g print of x, so a
// reloaded cache matches bit-for-bit. Computation happens outside the lock:
// concurrent cells may duplicate a quadrature but never block on one.
std::atomic<long long> g_oracle_computed{0};
std::atomic<long long> g_oracle_reused{0};

double cached_eval(const std::shared_ptr<OracleStore>& st, char tag, double x,
                   const std::function<double(double)>& compute) {
    char xs[40];
    std::snprintf(xs, sizeof xs, "%.17g", x);
    std::string key = std::string(1, tag) + ":" + xs;
    {
        std::lock_guard lk(st->mu);
        load_into_memo(*st);
        if (auto it = st->memo.find(key); it != st->memo.end()) {
            ++g_oracle_reused;
            return it->second;
        }
    }
    ++g_oracle_computed;
    double v = compute(x);
    std::lock_guard lk(st->mu);
    auto [it, fresh] = st->memo.emplace(key, v);
    if (fresh) {
        std::error_code ec;
        std::filesystem::create_directories(st->file.parent_path(), ec);
        std::ofstream out(st->file, std::ios::app);
        if (out)
            out << tag << ' ' << xs << ' ' << std::setprecision(17) << v
                << '\n';
    }
    return it->second;
}

// ---- experiment driver helpers ---------------------------------------------

// Nodal samples of the manufactured data: one oracle quadrature per mesh
// node instead of per load Gauss point. The two layer elements touching
// omega keep the exact oracle: the omega-integral flux data is singular at
// the omega boundary and a nodal interpolant cannot follow it there.
struct SampledData {
    std::function<double(double)> f;
    std::function<double(double)> g;
};

SampledData sample_manufactured(const Mesh& mesh,
                                const ManufacturedData& data) {
    auto vals = std::make_shared<std::vector<double>>(mesh.n_nodes());
    for (long g = 0; g < mesh.n_nodes(); ++g) {
        double x = mesh.node(g);
        bool in_omega = g >= mesh.r && g <= mesh.r + mesh.M;
        (*vals)[g] = in_omega ? data.f(x) : data.g(x);
    }
    double origin = mesh.a - mesh.delta, h = mesh.h;
    long n = mesh.n_nodes();
    auto lerp = [vals, origin, h, n](double x) {
        double t = (x - origin) / h;
        long e = std::clamp(static_cast<long>(std::floor(t)), 0L, n - 2);
        double w = t - static_cast<double>(e);
        return (1.0 - w) * (*vals)[e] + w * (*vals)[e + 1];
    };
    SampledData out;
    out.f = lerp;
    double a = mesh.a, b = mesh.b;
    auto exact_g = data.g;
    out.g = [lerp, exact_g, a, b, h](double x) {
        bool boundary_element = (x > a - h && x < a) || (x > b && x < b + h);
        return boundary_element ? exact_g(x) : lerp(x);
    };
    return out;
}

// A += B for banded matrices with B no wider than A.
void add_banded(BandedSymMatrix& A, const BandedSymMatrix& B) {
    for (long j = 0; j < B.n; ++j)
        for (long i = j; i <= std::min(B.n - 1, j + B.bandwidth); ++i) {
            double v = B.get(i, j);
            if (v != 0.0) A.add(i, j, v);
        }
}

CellResult run_cell(const ExperimentConfig& cfg, double s, double delta) {
    auto t0 = std::chrono::steady_clock::now();
    CellResult cell;
    cell.example = cfg.example;
    cell.s = s;
    cell.delta = delta;
    cell.h = cfg.h;

    if (cfg.example == ExampleId::Custom) {
        cell = cfg.custom_cell(s, delta);
        cell.example = ExampleId::Custom;
        cell.s = s;
        cell.delta = delta;
        cell.runtime_s = elapsed_since(t0);
        return cell;
    }

    auto constant = [](double c) {
        return [c](double) { return c; };
    };

    DomainSpec spec;
    spec.omega = {0.0, 1.0};
    spec.delta = delta;
    Kernel kern{s, delta, 1, Scaling::Crossover};
    FormKind form = FormKind::FullConstrained;
    std::function<double(double)> f;
    ScalarField reference;
    Alignment align = Alignment::None;
    bool pure_neumann = false;
    bool add_mass = false;
    std::optional<ManufacturedData> manufactured;

    switch (cfg.example) {
        case ExampleId::Ex1_Ndelta:
        case ExampleId::Ex1_NdeltaHat: {
            bool hat = cfg.example == ExampleId::Ex1_NdeltaHat;
            form = hat ? FormKind::RegionalHat : FormKind::FullConstrained;
            PieceKind kind = hat ? PieceKind::NeumannHat : PieceKind::Neumann;
            spec.pieces = {
                {{-delta, 0.0}, kind, constant(-1.0 / (6.0 * delta))},
                {{1.0, 1.0 + delta}, kind, constant(0.0)},
            };
            f = [](double x) { return x * (1.0 - x); };
            pure_neumann = true;
            reference = local_reference(cfg.example);
            // The published errors compare the discrete solution pinned to
            // zero mean over the hat domain against the zero-Omega-mean local
            // limit without re-aligning: the regional-variant table is the
            // resulting mean mismatch, delta/30 + O(delta^2), almost exactly.
            // Re-aligning both to a common mean reports the much smaller
            // shape error and loses contact with those values.
            align = Alignment::None;
            break;
        }
        case ExampleId::Ex2a:
        case ExampleId::Ex2b: {
            auto flux = constant(-1.0 / (3.0 * delta));
            auto one = constant(1.0);
            bool flux_outer = cfg.example == ExampleId::Ex2a;
            spec.pieces = {
                {{-delta, -0.5 * delta},
                 flux_outer ? PieceKind::Neumann : PieceKind::Dirichlet,
                 flux_outer ? std::function<double(double)>(flux) : one},
                {{-0.5 * delta, 0.0},
                 flux_outer ? PieceKind::Dirichlet : PieceKind::Neumann,
                 flux_outer ? std::function<double(double)>(one) : flux},
                {{1.0, 1.0 + delta}, PieceKind::Dirichlet, one},
            };
            f = constant(0.0);
            reference = local_reference(cfg.example);
            break;
        }
        case ExampleId::Ex3_Ndelta:
        case ExampleId::Ex3_NdeltaHat: {
            bool hat = cfg.example == ExampleId::Ex3_NdeltaHat;
            kern.scaling = Scaling::FractionalTruncation;
            form = hat ? FormKind::RegionalHat : FormKind::FullConstrained;
            PieceKind kind = hat ? PieceKind::NeumannHat : PieceKind::Neumann;
            manufactured = manufactured_fractional(
                s,
                hat ? NeumannVariant::FullLine : NeumannVariant::OmegaIntegral,
                cfg.quad);
            spec.pieces = {
                {{-delta, 0.0}, kind, manufactured->g},
                {{1.0, 1.0 + delta}, kind, manufactured->g},
            };
            f = manufactured->f;
            add_mass = true;
            reference = manufactured->u_inf;
            break;
        }
        case ExampleId::Custom:
            break;  // handled above
    }

    Mesh mesh = build_mesh(spec, cfg.h);
    std::vector<ConstraintPiece> pieces = spec.pieces;
    if (manufactured) {
        SampledData sampled = sample_manufactured(mesh, *manufactured);
        f = sampled.f;
        for (ConstraintPiece& p : pieces)
            if (p.kind != PieceKind::Dirichlet) p.data = sampled.g;
    }

    BandedSymMatrix A = assemble_stiffness(kern, mesh, form);
    if (add_mass) add_banded(A, assemble_mass(mesh, MassRegion::Omega));
    std::vector<double> b = assemble_load(mesh, f, pieces);
    LinearSystem sys = apply_dirichlet(A, b, mesh, pieces);

    Solution sol;
    if (pure_neumann) {
        sol = solve_pure_neumann(sys, mesh, mesh.hat());
        cell.lambda = sol.lambda;
    } else {
        sol = solve_linear(sys, mesh);
    }

    cell.l2_error = l2_error(mesh, sol.values, reference, mesh.omega(), align);
    cell.x.resize(mesh.n_nodes());
    for (long g = 0; g < mesh.n_nodes(); ++g) cell.x[g] = mesh.node(g);
    cell.u = std::move(sol.values);
    cell.runtime_s = elapsed_since(t0);
    return cell;
}

}  // namespace

const char* example_name(ExampleId id) {
    switch (id) {
        case ExampleId::Ex1_Ndelta: return "Ex1_Ndelta";
        case ExampleId::Ex1_NdeltaHat: return "Ex1_NdeltaHat";
        case ExampleId::Ex2a: return "Ex2a";
        case ExampleId::Ex2b: return "Ex2b";
        case ExampleId::Ex3_Ndelta: return "Ex3_Ndelta";
        case ExampleId::Ex3_NdeltaHat: return "Ex3_NdeltaHat";
        case ExampleId::Custom: return "Custom";
    }
    return "?";
}

std::optional<ExampleId> parse_example(const std::string& name) {
    for (ExampleId id :
         {ExampleId::Ex1_Ndelta, ExampleId::Ex1_NdeltaHat, ExampleId::Ex2a,
          ExampleId::Ex2b, ExampleId::Ex3_Ndelta, ExampleId::Ex3_NdeltaHat,
          ExampleId::Custom})
        if (name == example_name(id)) return id;
    return std::nullopt;
}

ExperimentConfig default_config(ExampleId id) {
    ExperimentConfig cfg;
    cfg.example = id;
    switch (id) {
        case ExampleId::Ex1_Ndelta:
        case ExampleId::Ex1_NdeltaHat:
            cfg.s_list = {-1.0, 0.25, 0.75};
            cfg.delta_list = {0.08, 0.04, 0.02};
            cfg.h = 1.0 / 2000.0;
            break;
        case ExampleId::Ex2a:
        case ExampleId::Ex2b:
            cfg.s_list = {-1.0, 0.25, 0.75};
            cfg.delta_list = {0.16, 0.08, 0.04};
            cfg.h = 1.0 / 1000.0;
            break;
        case ExampleId::Ex3_Ndelta:
        case ExampleId::Ex3_NdeltaHat:
            cfg.s_list = {0.25, 0.5, 0.75};
            cfg.delta_list = {5.0, 10.0, 20.0};
            cfg.h = 1.0 / 100.0;
            break;
        case ExampleId::Custom:
            break;
    }
    return cfg;
}

ScalarField local_reference(ExampleId id) {
    switch (id) {
        case ExampleId::Ex1_Ndelta:
        case ExampleId::Ex1_NdeltaHat:
            // Integrates -u'' = x(1 - x) with u'(0) = 1/6, u'(1) = 0; the
            // constant makes the omega mean zero.
            return polynomial_field(
                {-7.0 / 120.0, 1.0 / 6.0, 0.0, -1.0 / 6.0, 1.0 / 12.0});
        case ExampleId::Ex2a:
        case ExampleId::Ex2b:
            return constant_field(1.0);
        default:
            throw std::invalid_argument(
                "local_reference: no closed-form local limit for this example");
    }
}

ManufacturedData manufactured_fractional(double s, NeumannVariant variant,
                                         const QuadratureSpec& q) {
    if (!(s > 0.0 && s < 1.0))
        throw std::invalid_argument(
            "manufactured_fractional: s must lie in (0, 1)");
    ManufacturedData data;
    data.u_inf = gaussian_field(0.5);
    auto store = oracle_store(s, variant, q);
    ScalarField u = data.u_inf;
    Interval omega{0.0, 1.0};
    data.f = [store, s, q, u](double x) {
        return cached_eval(store, 'f', x, [&s, &q, &u](double xx) {
            return fractional_laplacian(s, u, xx, q).value + u.eval(xx);
        });
    };
    data.g = [store, s, q, u, omega, variant](double x) {
        return cached_eval(store, 'g', x, [&](double xx) {
            return fractional_neumann(s, u, xx, omega, variant, q);
        });
    };
    return data;
}

OracleStats manufactured_oracle_stats() {
    return {g_oracle_computed.load(), g_oracle_reused.load()};
}

double l2_error(const Mesh& mesh, const std::vector<double>& u,
                const ScalarField& u_ref, Interval region, Alignment align) {
    if (static_cast<long>(u.size()) != mesh.n_nodes())
        throw std::invalid_argument(
            "l2_error: nodal vector does not match the mesh");
    const GaussRule& rule = gauss_rule(5);
    auto gauss = [&rule](double lo, double hi, auto&& fn) {
        double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo), acc = 0.0;
        for (size_t i = 0; i < rule.x.size(); ++i)
            acc += rule.w[i] * fn(mid + half * rule.x[i]);
        return acc * half;
    };

    double shift_h = 0.0, shift_ref = 0.0;
    if (align == Alignment::MeanZeroOnOmega) {
        double num_h = 0.0, num_ref = 0.0;
        for (long e = mesh.r; e < mesh.r + mesh.M; ++e) {
            num_h += 0.5 * mesh.h * (u[e] + u[e + 1]);  // exact interpolant mean
            Interval E = mesh.element(e);
            num_ref += gauss(E.lo, E.hi, u_ref.eval);
        }
        double len = mesh.b - mesh.a;
        shift_h = num_h / len;
        shift_ref = num_ref / len;
    }

    double acc = 0.0;
    for (long e = 0; e < mesh.n_elements(); ++e) {
        Interval E = mesh.element(e);
        double lo = std::max(E.lo, region.lo), hi = std::min(E.hi, region.hi);
        if (hi - lo <= 1e-12 * mesh.h) continue;
        double u0 = u[e], u1 = u[e + 1];
        acc += gauss(lo, hi, [&](double x) {
            double w = (x - E.lo) / mesh.h;
            double uh = (1.0 - w) * u0 + w * u1;
            double d = (uh - shift_h) - (u_ref.eval(x) - shift_ref);
            return d * d;
        });
    }
    return std::sqrt(acc);
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& delta_error) {
    if (delta_error.size() < 2)
        throw std::invalid_argument("fit_rate: need at least two points");
    std::vector<double> xs, ys;
    for (auto [d, e] : delta_error) {
        if (!(d > 0.0) || !(e > 0.0))
            throw std::invalid_argument(
                "fit_rate: deltas and errors must be positive");
        xs.push_back(std::log(d));
        ys.push_back(std::log(e));
    }
    double n = static_cast<double>(xs.size());
    double xbar = 0.0, ybar = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        xbar += xs[i];
        ybar += ys[i];
    }
    xbar /= n;
    ybar /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - xbar, dy = ys[i] - ybar;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx <= 1e-20)
        throw std::invalid_argument("fit_rate: degenerate abscissae");
    RateFit fit;
    fit.rate = sxy / sxx;
    double ss_res = syy - sxy * sxy / sxx;
    fit.r2 = syy <= 0.0 ? 1.0 : std::max(0.0, 1.0 - ss_res / syy);
    return fit;
}

double extrapolated_jump(const Mesh& mesh, const std::vector<double>& u,
                         double at) {
    if (static_cast<long>(u.size()) != mesh.n_nodes())
        throw std::invalid_argument(
            "extrapolated_jump: nodal vector does not match the mesh");
    double t = (at - (mesh.a - mesh.delta)) / mesh.h;
    long g0 = std::lround(t);
    if (std::fabs(t - static_cast<double>(g0)) > 1e-9)
        throw std::invalid_argument(
            "extrapolated_jump: point is not a mesh node");
    if (g0 < 2 || g0 > mesh.n_nodes() - 3)
        throw std::invalid_argument(
            "extrapolated_jump: needs two nodes on each side");
    double left = 2.0 * u[g0 - 1] - u[g0 - 2];
    double right = 2.0 * u[g0 + 1] - u[g0 + 2];
    return std::fabs(right - left);
}

ExperimentReport run_example(const ExperimentConfig& cfg) {
    if (cfg.s_list.empty())
        throw std::invalid_argument("experiment config: empty s list");
    if (cfg.delta_list.empty())
        throw std::invalid_argument("experiment config: empty delta list");
    if (cfg.example == ExampleId::Custom) {
        if (!cfg.custom_cell)
            throw std::invalid_argument(
                "experiment config: Custom runs need a cell hook");
    } else {
        if (cfg.h <= 0.0)
            throw std::invalid_argument("experiment config: h must be positive");
        for (double delta : cfg.delta_list) {
            double r = delta / cfg.h;
            if (delta <= 0.0 ||
                std::fabs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) {
                char buf[160];
                std::snprintf(
                    buf, sizeof buf,
                    "r not integer: delta = %g with h = %g gives delta/h = %g",
                    delta, cfg.h, r);
                throw std::invalid_argument(buf);
            }
        }
    }

    struct CellRef {
        size_t row;
        double s, delta;
    };
    std::vector<CellRef> cells;
    for (size_t i = 0; i < cfg.s_list.size(); ++i)
        for (size_t j = 0; j < cfg.delta_list.size(); ++j)
            cells.push_back({i * cfg.delta_list.size() + j, cfg.s_list[i],
                             cfg.delta_list[j]});

    ExperimentReport report;
    report.rows.resize(cells.size());
    std::vector<std::exception_ptr> failures(cells.size());

    auto work_one = [&](const CellRef& c) {
        try {
            report.rows[c.row] = run_cell(cfg, c.s, c.delta);
        } catch (const NumericalError& e) {
            failures[c.row] = std::make_exception_ptr(NumericalError(
                cell_context(cfg.example, c.s, c.delta) + e.what()));
        } catch (const std::invalid_argument& e) {
            failures[c.row] = std::make_exception_ptr(std::invalid_argument(
                cell_context(cfg.example, c.s, c.delta) + e.what()));
        } catch (const std::exception& e) {
            failures[c.row] = std::make_exception_ptr(std::runtime_error(
                cell_context(cfg.example, c.s, c.delta) + e.what()));
        }
    };

    size_t workers = std::min<size_t>(std::max(1, cfg.threads), cells.size());
    if (workers <= 1) {
        for (const CellRef& c : cells) work_one(c);
    } else {
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (size_t k = next.fetch_add(1); k < cells.size();
                 k = next.fetch_add(1))
                work_one(cells[k]);
        };
        std::vector<std::thread> pool;
        for (size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    for (std::exception_ptr& ep : failures)
        if (ep) std::rethrow_exception(ep);

    // Fitted rate per s, oriented so decaying errors are positive.
    bool to_infinity = cfg.example == ExampleId::Ex3_Ndelta ||
                       cfg.example == ExampleId::Ex3_NdeltaHat;
    if (cfg.delta_list.size() >= 2) {
        for (size_t i = 0; i < cfg.s_list.size(); ++i) {
            std::vector<std::pair<double, double>> pts;
            bool fittable = true;
            for (size_t j = 0; j < cfg.delta_list.size() && fittable; ++j) {
                double err = report.rows[i * cfg.delta_list.size() + j].l2_error;
                fittable = err > 0.0;
                pts.emplace_back(cfg.delta_list[j], err);
            }
            if (!fittable) continue;
            RateFit fit = fit_rate(pts);
            report.rates.push_back(
                {cfg.s_list[i], to_infinity ? -fit.rate : fit.rate, fit.r2});
        }
    }
    return report;
}

}  // namespace nonlocal
