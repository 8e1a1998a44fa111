#include "nonlocal/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <limits>

namespace nonlocal {

const GaussRule& gauss_rule(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Legendre P_n(x) and derivative by three-term recurrence.
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = -p1 / dp;
            x += dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        r.x[i] = -x;
        r.x[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.w[i] = w;
        r.w[n - 1 - i] = w;
    }
    return cache.emplace(n, std::move(r)).first->second;
}

namespace {

double gauss_panel(const Fn1& f, double lo, double hi, const GaussRule& r) {
    double c = 0.5 * (lo + hi), hl = 0.5 * (hi - lo);
    double sum = 0.0;
    for (size_t i = 0; i < r.x.size(); ++i) sum += r.w[i] * f(c + hl * r.x[i]);
    return hl * sum;
}

struct AdaptCtx {
    const Fn1& f;
    const GaussRule& rule;
    int max_depth;
    long calls = 0;   // global refinement budget: integrands whose values
                      // carry noise above the tolerance would otherwise
                      // bisect forever (error and tolerance both halve)
    double bad_error = 0.0;  // accumulated error of panels accepted early
};

constexpr long kMaxAdaptCalls = 1000;

double adapt(AdaptCtx& ctx, double lo, double hi, double whole, double tol,
             int depth) {
    ++ctx.calls;
    double mid = 0.5 * (lo + hi);
    double left = gauss_panel(ctx.f, lo, mid, ctx.rule);
    double right = gauss_panel(ctx.f, mid, hi, ctx.rule);
    double err = std::fabs(left + right - whole);
    if (err <= tol || mid <= lo || mid >= hi) return left + right;
    if (depth <= 0 || ctx.calls > kMaxAdaptCalls) {
        ctx.bad_error += err;
        return left + right;
    }
    return adapt(ctx, lo, mid, left, 0.5 * tol, depth - 1) +
           adapt(ctx, mid, hi, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate_composite(const Fn1& f, double lo, double hi, int panels,
                           int order) {
    const GaussRule& r = gauss_rule(order);
    double sum = 0.0;
    for (int i = 0; i < panels; ++i) {
        double a = lo + (hi - lo) * i / panels;
        double b = lo + (hi - lo) * (i + 1) / panels;
        sum += gauss_panel(f, a, b, r);
    }
    return sum;
}

double integrate(const Fn1& f, double lo, double hi, const QuadratureSpec& q) {
    if (hi <= lo) return 0.0;
    if (q.scheme == 1) return integrate_composite(f, lo, hi, 64, 40);
    const GaussRule& rule = gauss_rule(15);
    double whole = gauss_panel(f, lo, hi, rule);
    double tol = std::max(q.abs_tol, q.rel_tol * std::fabs(whole));
    AdaptCtx ctx{f, rule, q.max_subdiv};
    double v = adapt(ctx, lo, hi, whole, tol, q.max_subdiv);
    double final_tol = std::max(q.abs_tol, q.rel_tol * std::fabs(v));
    if (ctx.bad_error > 50.0 * final_tol)
        throw NumericalError("quadrature budget exhausted without meeting tolerance");
    return v;
}

double integrate_graded(const Fn1& f, double lo, double hi, double toward,
                        const QuadratureSpec& q) {
    if (hi <= lo) return 0.0;
    bool at_lo = toward <= 0.5 * (lo + hi);
    if (q.min_offset > 0.0) {  // drop the sub-noise-floor sliver
        // For edges of magnitude ~1 an offset below ulp(edge) would round
        // away entirely, letting nodes round onto (or half an ulp past) the
        // edge; widen it so the shaved edge clears the original by margin.
        double edge = at_lo ? lo : hi;
        double off = std::max(
            q.min_offset,
            4.0 * std::fabs(edge) * std::numeric_limits<double>::epsilon());
        if (at_lo)
            lo += off;
        else
            hi -= off;
        if (hi <= lo) return 0.0;
    }
    const double sing = at_lo ? lo : hi;
    const double far = at_lo ? hi : lo;
    int levels = q.scheme == 1 ? 75 : 110;
    double ratio = q.scheme == 1 ? 1.0 / 3.0 : 0.5;
    const GaussRule& rule = gauss_rule(q.scheme == 1 ? 40 : 15);
    double len = hi - lo;
    // Offsets below one ulp of |sing| are not representable in absolute
    // coordinates; nodes that round onto the endpoint are nudged one ulp in.
    Fn1 fg = [&f, sing, far](double z) {
        if (z == sing) z = std::nextafter(sing, far);
        return f(z);
    };
    double sum = 0.0;
    double t = 1.0;  // panel edges at offsets len * ratio^k from `sing`
    double prev_panel = 0.0;
    for (int k = 0; k < levels && t > 0.0; ++k) {
        double t2 = (k == levels - 1) ? 0.0 : t * ratio;
        double outer = at_lo ? lo + len * t : hi - len * t;
        double inner = at_lo ? lo + len * t2 : hi - len * t2;
        if (inner == outer || inner == sing) {
            // representability exhausted: fold the rest into a final panel
            inner = sing;
            t2 = 0.0;
        }
        double a = at_lo ? inner : outer;
        double b = at_lo ? outer : inner;
        if (b > a) {
            double p = gauss_panel(fg, a, b, rule);
            sum += p;
            // Panel masses decay geometrically (ratio^{1+alpha} for a
            // z^alpha endpoint singularity); once the geometric estimate of
            // the remaining mass is far below tolerance, stop descending.
            if (k >= 8) {
                double ap = std::fabs(p), aprev = std::fabs(prev_panel);
                double budget = 1e-3 * (q.abs_tol + q.rel_tol * std::fabs(sum));
                if (ap == 0.0 && aprev == 0.0) break;
                if (ap > 0.0 && ap < aprev) {
                    double r = ap / aprev;
                    if (r < 0.95 && ap * r / (1.0 - r) <= budget) break;
                }
            }
            prev_panel = p;
        }
        t = t2;
    }
    return sum;
}

double integrate_singular(const Fn1& f, double lo, double hi, double xi,
                          const QuadratureSpec& q) {
    if (hi <= lo) return 0.0;
    if (xi <= lo) return integrate_graded(f, lo, hi, lo, q);
    if (xi >= hi) return integrate_graded(f, lo, hi, hi, q);
    return integrate_graded(f, lo, xi, xi, q) +
           integrate_graded(f, xi, hi, xi, q);
}

double integrate_power_endpoint(const Fn1& f, double lo, double hi,
                                bool singular_at_lo, double alpha,
                                const QuadratureSpec& q) {
    double c = singular_at_lo ? lo : hi;
    double r0 = std::max(
        {1e-10, q.min_offset,
         4.0 * std::fabs(c) * std::numeric_limits<double>::epsilon()});
    QuadratureSpec qm = q;
    qm.min_offset = r0;
    double main = integrate_graded(f, lo, hi, c, qm);
    if (hi - lo <= 8.0 * r0) return main;
    double sgn = singular_at_lo ? 1.0 : -1.0;
    double F1 = f(c + sgn * r0);
    double sliver;
    if (alpha >= 1.0) {
        sliver = F1 * r0;  // integrand smooth or vanishing at the endpoint
    } else {
        double F2 = f(c + sgn * 2.0 * r0);
        bool logb = std::fabs(alpha) < 1e-12;
        double p1 = logb ? std::log(r0) : std::pow(r0, alpha);
        double p2 = logb ? std::log(2.0 * r0) : std::pow(2.0 * r0, alpha);
        double A = (F1 - F2) / (p1 - p2);
        double B = F1 - A * p1;
        sliver = logb
                     ? A * r0 * (std::log(r0) - 1.0) + B * r0
                     : A * std::pow(r0, 1.0 + alpha) / (1.0 + alpha) + B * r0;
    }
    return main + sliver;
}

double integrate_with_breakpoints(const Fn1& f, double lo, double hi,
                                  std::vector<double> breakpoints,
                                  const QuadratureSpec& q) {
    if (hi <= lo) return 0.0;
    breakpoints.push_back(lo);
    breakpoints.push_back(hi);
    std::sort(breakpoints.begin(), breakpoints.end());
    double sum = 0.0, prev = lo;
    for (double p : breakpoints) {
        if (p <= prev || p > hi) continue;
        if (p > lo) {
            sum += integrate(f, prev, p, q);
            prev = p;
        }
    }
    if (prev < hi) sum += integrate(f, prev, hi, q);
    return sum;
}

}  // namespace nonlocal
