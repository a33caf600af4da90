#pragma once

// Truncated (r, theta) tensor grid with metric quadrature weights. Cells are
// centered: r_i = r_lo + (i + 1/2) dr, theta_j = j dtheta. The pole of
// cap-smooth presets is handled by the vanishing flux weight sqrt(A(0)) = 0;
// true cone tips are excised with a Dirichlet inner face.

#include <memory>

#include "conicwave/manifold.hpp"

namespace cwave {

enum class BoundaryKind { Dirichlet, AbsorbingLayer };
enum class PoleKind { Cap, Excised };

struct GridDiscretization {
    std::shared_ptr<const ManifoldSpec> spec;
    int nr = 0, ntheta = 0;
    double r_lo = 0.0, r_hi = 0.0;
    double dr = 0.0, dtheta = 0.0;
    BoundaryKind boundary = BoundaryKind::Dirichlet;
    PoleKind pole = PoleKind::Cap;
    bool rot_symmetric = true;

    std::vector<double> r;        // nr cell centers
    std::vector<double> sqrtg;    // nr*ntheta sqrt(det g); nr entries if symmetric
    std::vector<double> A;        // angular coefficient at centers (same layout)
    std::vector<double> A_face;   // (nr+1) radial faces, symmetric case
    std::vector<double> weights;  // nr*ntheta quadrature weights

    size_t idx(int i, int j) const { return size_t(i) * size_t(ntheta) + size_t(j); }
    size_t size() const { return size_t(nr) * size_t(ntheta); }
    double theta(int j) const { return j * dtheta; }

    double sqrtg_at(int i, int j) const {
        return rot_symmetric ? sqrtg[size_t(i)] : sqrtg[idx(i, j)];
    }
    double A_at(int i, int j) const { return rot_symmetric ? A[size_t(i)] : A[idx(i, j)]; }
    double weight(int i, int j) const { return weights[idx(i, j)]; }
    double total_weight() const {
        double s = 0;
        for (double w : weights) s += w;
        return s;
    }

    Point point(int i, int j) const {
        const double rr = r[size_t(i)], th = theta(j);
        if (!spec->has_cap || in_collar_domain(*spec, rr)) return Point::collar(rr, th);
        return Point::cap(rr * std::cos(th), rr * std::sin(th));
    }
};

inline double grid_angular_coeff(const ManifoldSpec& s, double r, double theta) {
    if (s.rot_symmetric) {
        double A, dA, d2A;
        s.polar_angular(std::max(r, 1e-12), A, dA, d2A);
        return A;
    }
    if (s.has_cap && !in_collar_domain(s, r)) {
        double Q, dQ, d2Q;
        s.cap_profile(r, Q, dQ, d2Q);
        return Q * r * r;
    }
    MatN h(1);
    const double x = 1.0 / r;
    s.htilde(x, &theta, h, nullptr, nullptr);
    return r * r * h(0, 0);
}

inline std::shared_ptr<GridDiscretization> make_grid(std::shared_ptr<const ManifoldSpec> spec,
                                                     int nr, int ntheta, double r_hi,
                                                     double r_lo = 0.0,
                                                     BoundaryKind boundary = BoundaryKind::Dirichlet) {
    if (spec->n != 2) throw std::invalid_argument("make_grid: reference grids are n = 2 only");
    if (ntheta % 2 != 0) throw std::invalid_argument("make_grid: angular node count must be even");
    auto g = std::make_shared<GridDiscretization>();
    g->spec = spec;
    g->nr = nr;
    g->ntheta = ntheta;
    g->pole = spec->has_cap ? PoleKind::Cap : PoleKind::Excised;
    if (g->pole == PoleKind::Excised) r_lo = std::max(r_lo, 0.05 * r_hi);
    if (g->pole == PoleKind::Cap) r_lo = 0.0;
    g->r_lo = r_lo;
    g->r_hi = r_hi;
    g->boundary = boundary;
    g->dr = (r_hi - r_lo) / nr;
    g->dtheta = 2.0 * kPi / ntheta;
    g->rot_symmetric = spec->rot_symmetric;
    g->r.resize(size_t(nr));
    for (int i = 0; i < nr; ++i) g->r[size_t(i)] = r_lo + (i + 0.5) * g->dr;

    if (g->rot_symmetric) {
        g->A.resize(size_t(nr));
        g->sqrtg.resize(size_t(nr));
        g->A_face.resize(size_t(nr) + 1);
        for (int i = 0; i < nr; ++i) {
            g->A[size_t(i)] = grid_angular_coeff(*spec, g->r[size_t(i)], 0.0);
            if (g->A[size_t(i)] <= 0.0)
                throw std::runtime_error("make_grid: singular metric at node r = " +
                                         std::to_string(g->r[size_t(i)]));
            g->sqrtg[size_t(i)] = std::sqrt(g->A[size_t(i)]);
        }
        for (int i = 0; i <= nr; ++i) {
            const double rf = r_lo + i * g->dr;
            const double Af = rf <= 1e-14 ? 0.0 : grid_angular_coeff(*spec, rf, 0.0);
            g->A_face[size_t(i)] = std::sqrt(std::max(Af, 0.0));
        }
    } else {
        g->A.resize(g->size());
        g->sqrtg.resize(g->size());
        for (int i = 0; i < nr; ++i)
            for (int j = 0; j < ntheta; ++j) {
                const double A = grid_angular_coeff(*spec, g->r[size_t(i)], g->theta(j));
                if (A <= 0.0) throw std::runtime_error("make_grid: singular metric at a node");
                g->A[g->idx(i, j)] = A;
                g->sqrtg[g->idx(i, j)] = std::sqrt(A);
            }
    }
    g->weights.resize(g->size());
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < ntheta; ++j)
            g->weights[g->idx(i, j)] = g->sqrtg_at(i, j) * g->dr * g->dtheta;
    return g;
}

struct GridField {
    std::shared_ptr<const GridDiscretization> grid;
    std::vector<complexd> v;

    GridField() = default;
    explicit GridField(std::shared_ptr<const GridDiscretization> g)
        : grid(std::move(g)), v(grid->size(), complexd(0, 0)) {}

    complexd& at(int i, int j) { return v[grid->idx(i, j)]; }
    complexd at(int i, int j) const { return v[grid->idx(i, j)]; }

    bool finite() const {
        for (const auto& z : v)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        return true;
    }

    double norm2() const {
        double s = 0;
        for (size_t k = 0; k < v.size(); ++k) s += grid->weights[k] * std::norm(v[k]);
        return std::sqrt(s);
    }
    double norm_lr(double rexp) const {
        if (std::isinf(rexp)) return norm_inf();
        double s = 0;
        for (size_t k = 0; k < v.size(); ++k)
            s += grid->weights[k] * std::pow(std::abs(v[k]), rexp);
        return std::pow(s, 1.0 / rexp);
    }
    double norm_inf() const {
        double m = 0;
        for (const auto& z : v) m = std::max(m, std::abs(z));
        return m;
    }
};

inline complexd inner(const GridField& f, const GridField& g) {
    complexd s(0, 0);
    for (size_t k = 0; k < f.v.size(); ++k) s += f.grid->weights[k] * f.v[k] * std::conj(g.v[k]);
    return s;
}

inline GridField operator-(const GridField& a, const GridField& b) {
    GridField out = a;
    for (size_t k = 0; k < out.v.size(); ++k) out.v[k] -= b.v[k];
    return out;
}

inline GridField operator+(const GridField& a, const GridField& b) {
    GridField out = a;
    for (size_t k = 0; k < out.v.size(); ++k) out.v[k] += b.v[k];
    return out;
}

inline GridField& axpy(GridField& y, complexd alpha, const GridField& x) {
    for (size_t k = 0; k < y.v.size(); ++k) y.v[k] += alpha * x.v[k];
    return y;
}

// Pointwise multiply by a real mask/cutoff sampled on the grid.
inline GridField masked(const GridField& f, const std::vector<double>& mask) {
    GridField out = f;
    for (size_t k = 0; k < out.v.size(); ++k) out.v[k] *= mask[k];
    return out;
}

}  // namespace cwave
