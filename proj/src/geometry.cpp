#include "nonlocal/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace nonlocal {

namespace {

std::string fmt_interval(double lo, double hi) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "(%g, %g)", lo, hi);
    return buf;
}

long snap_index(double x, double origin, double h, const char* what) {
    double t = (x - origin) / h;
    double rt = std::round(t);
    if (std::fabs(t - rt) > 1e-12 * std::max(1.0, std::fabs(t))) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "build_mesh: %s %.6g is not node-aligned",
                      what, x);
        throw std::invalid_argument(buf);
    }
    return static_cast<long>(rt);
}

}  // namespace

std::pair<Interval, Interval> build_layers(const Interval& omega, double delta) {
    if (delta <= 0.0) throw std::invalid_argument("build_layers: delta must be positive");
    return {{omega.lo - delta, omega.lo}, {omega.hi, omega.hi + delta}};
}

PartitionReport validate_partition(const DomainSpec& spec) {
    auto [left, right] = build_layers(spec.omega, spec.delta);
    double tol = 1e-12 * std::max({1.0, spec.delta, std::fabs(left.lo),
                                   std::fabs(right.hi)});
    std::string msg;
    auto complain = [&](const std::string& s) {
        if (!msg.empty()) msg += "; ";
        msg += s;
    };

    struct Item {
        double lo, hi;
        size_t idx;
    };
    std::vector<Item> comp[2];
    for (size_t i = 0; i < spec.pieces.size(); ++i) {
        const Interval& iv = spec.pieces[i].interval;
        if (iv.length() <= tol) {
            complain("piece " + std::to_string(i) + " has non-positive length");
            continue;
        }
        if (iv.lo >= left.lo - tol && iv.hi <= left.hi + tol)
            comp[0].push_back({iv.lo, iv.hi, i});
        else if (iv.lo >= right.lo - tol && iv.hi <= right.hi + tol)
            comp[1].push_back({iv.lo, iv.hi, i});
        else
            complain("piece " + std::to_string(i) + " " +
                     fmt_interval(iv.lo, iv.hi) + " is not inside the layer");
    }

    for (int c = 0; c < 2; ++c) {
        const Interval& comp_iv = c == 0 ? left : right;
        auto& items = comp[c];
        std::sort(items.begin(), items.end(),
                  [](const Item& x, const Item& y) { return x.lo < y.lo; });
        double cursor = comp_iv.lo;
        size_t prev_idx = static_cast<size_t>(-1);
        for (const Item& it : items) {
            if (it.lo > cursor + tol)
                complain("gap " + fmt_interval(cursor, it.lo));
            if (it.lo < cursor - tol)
                complain("overlap " + fmt_interval(it.lo, cursor) + " between piece " +
                         std::to_string(prev_idx) + " and piece " +
                         std::to_string(it.idx));
            cursor = std::max(cursor, it.hi);
            prev_idx = it.idx;
        }
        if (cursor < comp_iv.hi - tol)
            complain("gap " + fmt_interval(cursor, comp_iv.hi));
    }

    if (msg.empty()) return {true, "ok"};
    return {false, msg};
}

Mesh build_mesh(const DomainSpec& spec, double h) {
    if (h <= 0.0) throw std::invalid_argument("build_mesh: h must be positive");
    double len = spec.omega.length();
    double Mreal = len / h, rreal = spec.delta / h;
    double Mround = std::round(Mreal), rround = std::round(rreal);
    char buf[128];
    if (std::fabs(Mreal - Mround) > 1e-12 * Mreal || Mround < 1.0) {
        std::snprintf(buf, sizeof buf,
                      "build_mesh: |omega|/h = %.6g is not an integer", Mreal);
        throw std::invalid_argument(buf);
    }
    if (std::fabs(rreal - rround) > 1e-12 * rreal || rround < 1.0) {
        std::snprintf(buf, sizeof buf, "build_mesh: r = delta/h = %.6g is not an integer",
                      rreal);
        throw std::invalid_argument(buf);
    }

    Mesh m;
    m.a = spec.omega.lo;
    m.b = spec.omega.hi;
    m.h = h;
    m.delta = spec.delta;
    m.M = static_cast<long>(Mround);
    m.r = static_cast<long>(rround);

    long n = m.n_nodes();
    double origin = m.a - spec.delta;
    m.node_class.assign(n, NodeClass::Interior);
    m.node_piece.assign(n, -1);

    // Piece endpoints snapped to node indices; containment is integer logic.
    std::vector<std::pair<long, long>> bounds;
    for (const ConstraintPiece& p : spec.pieces) {
        long gl = snap_index(p.interval.lo, origin, h, "piece endpoint");
        long gh = snap_index(p.interval.hi, origin, h, "piece endpoint");
        bounds.emplace_back(gl, gh);
    }

    auto kind_class = [](PieceKind k) {
        switch (k) {
            case PieceKind::Dirichlet: return NodeClass::Dirichlet;
            case PieceKind::Neumann: return NodeClass::Neumann;
            case PieceKind::NeumannHat: return NodeClass::NeumannHat;
            case PieceKind::Robin: return NodeClass::Robin;
        }
        return NodeClass::Interior;
    };

    for (long g = 0; g < n; ++g) {
        if (g >= m.r && g <= m.r + m.M) continue;  // nodes of closed omega
        int owner = -1;
        for (size_t i = 0; i < bounds.size(); ++i)
            if (g >= bounds[i].first && g < bounds[i].second) {
                owner = static_cast<int>(i);
                break;
            }
        if (owner < 0 && g == n - 1) {
            // The outermost right node belongs to the piece ending at b+delta.
            for (size_t i = 0; i < bounds.size(); ++i)
                if (bounds[i].second == n - 1) {
                    owner = static_cast<int>(i);
                    break;
                }
        }
        if (owner < 0) {
            std::snprintf(buf, sizeof buf,
                          "build_mesh: node at %.6g lies in no constraint piece",
                          m.node(g));
            throw std::invalid_argument(buf);
        }
        m.node_class[g] = kind_class(spec.pieces[owner].kind);
        m.node_piece[g] = owner;
    }
    return m;
}

}  // namespace nonlocal
