#pragma once

// Compactified gauge metric on M-bar. In the collar it is
//   g-bar = dx^2/(1+x^2)^2 + h~(x,y) dy^2 / (1+x^2),
// written here in r = 1/x as dr^2/(1+r^2)^2 + A(r,y) dtheta^2/(1+r^2) with
// A the global polar angular coefficient; the same formula extends smoothly
// through radial-profile caps. Radial g-bar arclength is exactly
// d(atan r), so the distance graph is uniform in tau = atan(r).
//
// Distances are served from a cached Dijkstra solve on a 16-neighbour graph.
// Query points snap to the nearest node plus a local straight-segment
// correction, which keeps symmetry and the triangle inequality exact at the
// price of O(h) resolution. The perfectly conic closed form (hemisphere
// development) lives in the test oracles, not here.

#include <algorithm>
#include <map>
#include <memory>
#include <queue>

#include "conicwave/manifold.hpp"

namespace cwave {

class CompactifiedGauge {
  public:
    CompactifiedGauge(const ManifoldSpec& spec, int n_tau = 96, int n_theta = 128)
        : spec_(&spec), ntau_(n_tau), nth_(n_theta) {
        if (spec.n != 2)
            throw std::runtime_error("CompactifiedGauge: only n = 2 grids are built");
        const double r_lo = spec.has_cap ? 0.0 : spec.excise_r;
        tau_lo_ = std::atan(r_lo);
        tau_hi_ = kPi / 2.0;
        dtau_ = (tau_hi_ - tau_lo_) / (ntau_ - 1);
        dth_ = 2.0 * kPi / nth_;
        gbar_theta_.resize(size_t(ntau_) * size_t(nth_));
        for (int i = 0; i < ntau_; ++i)
            for (int j = 0; j < nth_; ++j)
                gbar_theta_[idx(i, j)] = angular_coeff(tau_of(i), theta_of(j));
    }

    double distance(const Point& a, const Point& b) const {
        const auto pa = to_param(a), pb = to_param(b);
        if (std::abs(pa.first - pb.first) < 1e-13 &&
            std::abs(wrap_angle(pa.second - pb.second)) < 1e-13)
            return 0.0;
        const int na = snap(pa), nb = snap(pb);
        ensure_source(na);
        const double core = dist_fields_.at(na)[size_t(nb)];
        return core + local_correction(pa, na) + local_correction(pb, nb);
    }

    // Distance field from one center to every node; used by cutoff families.
    const std::vector<double>& field_from(const Point& center) const {
        const int s = snap(to_param(center));
        ensure_source(s);
        return dist_fields_.at(s);
    }

    int snap_node(const Point& p) const { return snap(to_param(p)); }
    Point node_point(int node) const {
        const int i = node / nth_, j = node % nth_;
        const double r = r_of(tau_of(i));
        return point_from(r, theta_of(j));
    }
    int n_nodes() const { return ntau_ * nth_; }

    // g-bar length of the straight parameter segment between two points.
    double segment_length(const Point& a, const Point& b) const {
        return seg_len(to_param(a), to_param(b));
    }

  private:
    const ManifoldSpec* spec_;
    int ntau_, nth_;
    double tau_lo_, tau_hi_, dtau_, dth_;
    std::vector<double> gbar_theta_;
    mutable std::map<int, std::vector<double>> dist_fields_;

    size_t idx(int i, int j) const { return size_t(i) * size_t(nth_) + size_t(j); }
    double tau_of(int i) const { return tau_lo_ + i * dtau_; }
    double theta_of(int j) const { return j * dth_; }
    static double r_of(double tau) { return std::tan(std::min(tau, kPi / 2.0 - 1e-9)); }

    double angular_coeff(double tau, double theta) const {
        // g-bar_theta_theta = A(r, theta) / (1 + r^2); at tau = pi/2 this is
        // the boundary metric h(theta) itself.
        if (tau > kPi / 2.0 - 1e-7) {
            MatN h(1);
            s_boundary(theta, h);
            return h(0, 0);
        }
        const double r = r_of(tau);
        double A;
        if (spec_->rot_symmetric) {
            double dA, d2A;
            spec_->polar_angular(r, A, dA, d2A);
        } else {
            const double x = 1.0 / std::max(r, spec_->collar_r_min());
            MatN h(1);
            spec_->htilde(x, &theta, h, nullptr, nullptr);
            A = r * r * h(0, 0);
        }
        return A / (1.0 + r * r);
    }

    void s_boundary(double theta, MatN& h) const { spec_->boundary.eval(&theta, h, nullptr); }

    std::pair<double, double> to_param(const Point& p) const {
        const double r = radial_coordinate(*spec_, p);
        double theta;
        if (p.chart == Chart::Collar)
            theta = p.q[1];
        else
            theta = std::atan2(p.q[1], p.q[0]);
        return {std::atan(r), theta};
    }

    Point point_from(double r, double theta) const {
        if (in_collar_domain(*spec_, r) || !spec_->has_cap) return Point::collar(std::max(r, spec_->excise_r * 1.0000001), theta);
        return Point::cap(r * std::cos(theta), r * std::sin(theta));
    }

    int snap(const std::pair<double, double>& par) const {
        int i = int(std::lround((par.first - tau_lo_) / dtau_));
        i = std::clamp(i, 0, ntau_ - 1);
        int j = int(std::lround(wrap_positive(par.second) / dth_)) % nth_;
        return i * nth_ + j;
    }

    static double wrap_positive(double a) {
        a = std::fmod(a, 2.0 * kPi);
        return a < 0 ? a + 2.0 * kPi : a;
    }

    double seg_len(std::pair<double, double> a, std::pair<double, double> b) const {
        const double dta = b.first - a.first;
        const double dth = wrap_angle(b.second - a.second);
        // Two-segment midpoint quadrature of the straight parameter path.
        double len = 0.0;
        for (int s = 0; s < 2; ++s) {
            const double tm = a.first + (s + 0.5) * dta / 2.0;
            const double thm = a.second + (s + 0.5) * dth / 2.0;
            const double gt = angular_coeff(std::clamp(tm, tau_lo_, tau_hi_), thm);
            len += std::sqrt(sqr(dta / 2.0) + gt * sqr(dth / 2.0));
        }
        return len;
    }

    double local_correction(const std::pair<double, double>& par, int node) const {
        const int i = node / nth_, j = node % nth_;
        return seg_len(par, {tau_of(i), theta_of(j)});
    }

    void ensure_source(int s) const {
        if (dist_fields_.count(s)) return;
        // Dijkstra over the 16-neighbour stencil.
        static const int moves[][2] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1}, {1, 1},  {1, -1},
                                       {-1, 1}, {-1, -1}, {2, 1},  {2, -1}, {-2, 1}, {-2, -1},
                                       {1, 2},  {1, -2},  {-1, 2}, {-1, -2}};
        std::vector<double> dist(size_t(n_nodes()), kInf);
        using QE = std::pair<double, int>;
        std::priority_queue<QE, std::vector<QE>, std::greater<>> heap;
        dist[size_t(s)] = 0.0;
        heap.push({0.0, s});
        while (!heap.empty()) {
            auto [d, u] = heap.top();
            heap.pop();
            if (d > dist[size_t(u)]) continue;
            const int ui = u / nth_, uj = u % nth_;
            for (auto& mv : moves) {
                const int vi = ui + mv[0];
                if (vi < 0 || vi >= ntau_) continue;
                const int vj = ((uj + mv[1]) % nth_ + nth_) % nth_;
                const int v = vi * nth_ + vj;
                const double w =
                    seg_len({tau_of(ui), theta_of(uj)}, {tau_of(vi), theta_of(uj) + mv[1] * dth_});
                if (dist[size_t(u)] + w < dist[size_t(v)]) {
                    dist[size_t(v)] = dist[size_t(u)] + w;
                    heap.push({dist[size_t(v)], v});
                }
            }
        }
        dist_fields_[s] = std::move(dist);
    }
};

// Perfectly conic collar closed form (hemisphere development): valid while
// the developed angle rho |dtheta| stays below pi.
inline double conic_gbar_distance(double rho, double r, double theta, double rp, double thetap) {
    const double beta = rho * wrap_angle(thetap - theta);
    const double ta = std::atan(r), tb = std::atan(rp);
    const double c = std::cos(ta) * std::cos(tb) + std::sin(ta) * std::sin(tb) * std::cos(beta);
    return std::acos(std::clamp(c, -1.0, 1.0));
}

// Shared gauge cache per spec.
inline const CompactifiedGauge& gauge_for(const ManifoldSpec& spec) {
    static std::map<std::string, std::shared_ptr<CompactifiedGauge>> cache;
    const std::string key = spec.name + "#" + std::to_string(spec.n) + "#" +
                            std::to_string(spec.rho) + "#" + std::to_string(spec.delta) + "#" +
                            std::to_string(spec.eps0) + "#" + std::to_string(spec.excise_r);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, std::make_shared<CompactifiedGauge>(spec)).first;
    return *it->second;
}

inline double compactified_distance(const ManifoldSpec& spec, const Point& a, const Point& b) {
    if (!in_domain(spec, a) || !in_domain(spec, b))
        throw std::domain_error("compactified_distance: point outside chart domains");
    return gauge_for(spec).distance(a, b);
}

}  // namespace cwave
