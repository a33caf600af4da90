#pragma once

// Nested cutoff families psi^(0..4) on gauge balls covering the grid.
// Profiles are squared order-7 smoothsteps of the gauge distance, stored via
// their square roots; level j plateaus at radius r_{j-1} and vanishes past
// r_j, so the nesting identities hold exactly at plateau/support level.
// The level-0 family is normalized into a partition of unity on the grid.
// Members keep only their distance field; level masks are synthesized on
// demand.

#include "conicwave/compactified.hpp"
#include "conicwave/geodesic.hpp"
#include "conicwave/grid.hpp"

namespace cwave {

inline double cutoff_profile_sqrt(double d, double plateau, double outer) {
    if (d <= plateau) return 1.0;
    if (d >= outer) return 0.0;
    return smoothstep7((outer - d) / (outer - plateau));
}

struct CutoffFamily {
    std::shared_ptr<const GridDiscretization> grid;
    double eps = 0.0;
    std::array<double, 5> radii{};
    double plateau0 = 0.0;

    struct Member {
        Point center;
        std::vector<double> dist;       // gauge distance per grid node
        std::vector<double> partition;  // normalized psi^(0)
        double zetasign_c = kInf;
    };
    std::vector<Member> members;

    int size() const { return int(members.size()); }

    double plateau_of(int j) const { return j == 0 ? plateau0 : radii[size_t(j) - 1]; }

    std::vector<double> sqrt_level(int member, int j) const {
        const auto& d = members[size_t(member)].dist;
        std::vector<double> out(d.size());
        for (size_t k = 0; k < d.size(); ++k)
            out[k] = cutoff_profile_sqrt(d[k], plateau_of(j), radii[size_t(j)]);
        return out;
    }

    std::vector<double> level(int member, int j) const {
        auto out = sqrt_level(member, j);
        for (auto& v : out) v *= v;
        return out;
    }

    double partition_defect() const {
        double worst = 0.0;
        for (size_t k = 0; k < grid->size(); ++k) {
            double sum = 0.0;
            for (const auto& m : members) sum += m.partition[k];
            worst = std::max(worst, std::abs(sum - 1.0));
        }
        return worst;
    }

    double nesting_defect() const {
        double worst = 0.0;
        for (int a = 0; a < size(); ++a) {
            std::array<std::vector<double>, 5> lv;
            for (int j = 0; j < 5; ++j) lv[size_t(j)] = level(a, j);
            for (int j = 0; j + 1 < 5; ++j)
                for (size_t k = 0; k < grid->size(); ++k)
                    worst = std::max(worst, std::abs(lv[size_t(j)][k] * lv[size_t(j) + 1][k] -
                                                     lv[size_t(j)][k]));
        }
        return worst;
    }

    double min_zetasign() const {
        double c = kInf;
        for (const auto& m : members) c = std::min(c, m.zetasign_c);
        return c;
    }
};

struct CutoffOptions {
    double trust_eps = 0.3;  // build refuses eps above this
    int zetasign_samples = 6;
    uint64_t seed = 2024;
    int max_members = 4096;
    bool estimate_zetasign = true;
    // Level radii as fractions of eps, and the level-0 plateau as a fraction
    // of r_0. Wider plateaus trade transition sharpness for containment.
    std::array<double, 5> radii_ratios{0.40, 0.55, 0.70, 0.85, 1.00};
    double plateau0_frac = 0.5;
};

namespace detail {

inline double zetasign_estimate(const ManifoldSpec& spec, const GridDiscretization& grid,
                                const CutoffFamily& fam, const CutoffFamily::Member& m, Rng& rng,
                                int samples) {
    double cmin = kInf;
    ConnectOptions copt;
    copt.check_trust = false;
    copt.ode.rtol = copt.ode.atol = 1e-10;
    const size_t N = grid.size();
    for (int j = 0; j <= 2; ++j) {
        const double lo = fam.plateau_of(j + 1);
        const double hi = fam.radii[size_t(j) + 1];
        std::vector<size_t> ring, core;
        for (size_t q = 0; q < N; ++q) {
            if (m.dist[q] > lo * 1.05 && m.dist[q] < hi * 0.95) ring.push_back(q);
            if (m.dist[q] < fam.plateau_of(j) * 0.8) core.push_back(q);
        }
        if (ring.empty() || core.empty()) continue;
        for (int s = 0; s < samples; ++s) {
            const size_t zq = ring[size_t(rng.next_u64() % ring.size())];
            const size_t zpq = core[size_t(rng.next_u64() % core.size())];
            if (zq == zpq) continue;
            const int i = int(zq) / grid.ntheta, jj = int(zq) % grid.ntheta;
            // Wide stencil: the distance field inherits the gauge graph's
            // snapping plateaus, so narrow differences read noise.
            if (i <= 2 || i + 3 >= grid.nr) continue;
            const double ddr =
                (m.dist[grid.idx(i + 3, jj)] - m.dist[grid.idx(i - 3, jj)]) / (6.0 * grid.dr);
            const double ddt = (m.dist[grid.idx(i, (jj + 3) % grid.ntheta)] -
                                m.dist[grid.idx(i, (jj + grid.ntheta - 3) % grid.ntheta)]) /
                               (6.0 * grid.dtheta);
            GeodesicSolution sol;
            try {
                sol = connect(spec, grid.point(i, jj), grid.point(int(zpq) / grid.ntheta,
                                                                  int(zpq) % grid.ntheta),
                              copt);
            } catch (const std::exception&) {
                continue;
            }
            // Polar-frame metric at z straight from the grid coefficients.
            MatN G(2);
            G(0, 0) = 1.0;
            G(1, 1) = grid.A_at(i, jj);
            VecN p0 = sol.p0;
            if (sol.z0.chart == Chart::Cap) {
                const double rr = grid.r[size_t(i)], tt = grid.theta(jj);
                const double cc = std::cos(tt), ss = std::sin(tt);
                p0 = VecN(cc * sol.p0[0] + ss * sol.p0[1],
                          rr * (-ss * sol.p0[0] + cc * sol.p0[1]));
            }
            MatN Gi = G.inverse();
            VecN v = Gi.mul(p0);
            const double pair_dv = ddr * v[0] + ddt * v[1];
            const double vn = std::sqrt(std::max(G.quad(v), 1e-300));
            VecN gd(ddr, ddt);
            const double gn = std::sqrt(std::max(Gi.quad(gd), 1e-300));
            cmin = std::min(cmin, -pair_dv / (vn * gn));
        }
    }
    return cmin;
}

}  // namespace detail

// Single cutoff member centered at a chosen point (parametrix scenarios).
inline CutoffFamily single_cutoff(const ManifoldSpec& spec,
                                  std::shared_ptr<const GridDiscretization> grid,
                                  const Point& center, double eps, const CutoffOptions& opt = {}) {
    if (eps > opt.trust_eps)
        throw std::domain_error("single_cutoff: eps exceeds the connector trust region");
    CutoffFamily fam;
    fam.grid = grid;
    fam.eps = eps;
    for (int j = 0; j < 5; ++j) fam.radii[size_t(j)] = opt.radii_ratios[size_t(j)] * eps;
    fam.plateau0 = opt.plateau0_frac * fam.radii[0];
    const auto& gauge = gauge_for(spec);
    CutoffFamily::Member m;
    m.center = center;
    const size_t N = grid->size();
    m.dist.resize(N);
    for (int i = 0; i < grid->nr; ++i)
        for (int j = 0; j < grid->ntheta; ++j)
            m.dist[grid->idx(i, j)] = gauge.distance(center, grid->point(i, j));
    m.partition.assign(N, 0.0);
    for (size_t q = 0; q < N; ++q) {
        const double s = cutoff_profile_sqrt(m.dist[q], fam.plateau0, fam.radii[0]);
        m.partition[q] = s * s;  // unnormalized; single member
    }
    if (opt.estimate_zetasign) {
        Rng rng(opt.seed);
        m.zetasign_c = detail::zetasign_estimate(spec, *grid, fam, m, rng, opt.zetasign_samples);
    }
    fam.members.push_back(std::move(m));
    return fam;
}

inline CutoffFamily build_cutoffs(const ManifoldSpec& spec,
                                  std::shared_ptr<const GridDiscretization> grid, double eps,
                                  const CutoffOptions& opt = {}) {
    if (eps > opt.trust_eps)
        throw std::domain_error("build_cutoffs: eps " + std::to_string(eps) +
                                " exceeds the connector trust region " +
                                std::to_string(opt.trust_eps));
    CutoffFamily fam;
    fam.grid = grid;
    fam.eps = eps;
    for (int j = 0; j < 5; ++j) fam.radii[size_t(j)] = opt.radii_ratios[size_t(j)] * eps;
    fam.plateau0 = opt.plateau0_frac * fam.radii[0];
    const auto& gauge = gauge_for(spec);

    const size_t N = grid->size();
    std::vector<Point> pts(N);
    for (int i = 0; i < grid->nr; ++i)
        for (int j = 0; j < grid->ntheta; ++j) pts[grid->idx(i, j)] = grid->point(i, j);

    // Greedy cover: every node must lie in the plateau of some level-0 bump.
    const double cover_r = 0.9 * fam.plateau0;
    std::vector<uint8_t> covered(N, 0);
    for (size_t k = 0; k < N; ++k) {
        if (covered[k]) continue;
        CutoffFamily::Member m;
        m.center = pts[k];
        m.dist.resize(N);
        for (size_t q = 0; q < N; ++q) {
            m.dist[q] = gauge.distance(m.center, pts[q]);
            if (m.dist[q] <= cover_r) covered[q] = 1;
        }
        fam.members.push_back(std::move(m));
        if (int(fam.members.size()) > opt.max_members)
            throw std::runtime_error("build_cutoffs: cover did not terminate (eps too small?)");
    }

    // Partition of unity from the level-0 bumps.
    std::vector<double> sum(N, 0.0);
    for (auto& m : fam.members)
        for (size_t q = 0; q < N; ++q)
            sum[q] += sqr(cutoff_profile_sqrt(m.dist[q], fam.plateau0, fam.radii[0]));
    for (auto& m : fam.members) {
        m.partition.resize(N);
        for (size_t q = 0; q < N; ++q)
            m.partition[q] = sqr(cutoff_profile_sqrt(m.dist[q], fam.plateau0, fam.radii[0])) / sum[q];
    }

    if (opt.estimate_zetasign) {
        Rng rng(opt.seed);
        for (auto& m : fam.members)
            m.zetasign_c = detail::zetasign_estimate(spec, *grid, fam, m, rng, opt.zetasign_samples);
    }
    return fam;
}

}  // namespace cwave
