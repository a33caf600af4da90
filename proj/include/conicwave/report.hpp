#pragma once

// Geometry diagnostic table: per sampled pair/triple, the nondegeneracy and
// regularity ratios of the connector data, the conic comparison, and the
// stationarity residual. Row failures are captured per row.

#include "conicwave/geodesic.hpp"

namespace cwave {

struct GeometryRow {
    double r = 0, th = 0, rp = 0, thp = 0, rpp = 0, thpp = 0;
    double d = 0;
    double det_orth = 0;
    double grad_ratio = 0;
    double gradw_ratio = 0;
    double comparable_ratio = 0;
    double lipschitz_ratio = 0;
    double dm_conic_rel = 0;
    double id_residual = 0;
    double e_over_phi = 0, e_grad = 0, e_mixed = 0;
    std::string error;
};

struct GeometryTriple {
    Point z, zp, zpp;
    double theta = 0.5;
};

inline double covector_norm(const ManifoldSpec& s, const Point& z, const VecN& p) {
    MatN G;
    chart_metric(s, z.chart, z.q, G, nullptr);
    return std::sqrt(std::max(0.0, G.inverse().quad(p)));
}

inline GeometryRow geometry_row(const ManifoldSpec& spec, const GeometryTriple& trip,
                                const ConnectOptions& opt) {
    GeometryRow row;
    auto label = [&](const Point& p, double& r, double& th) {
        r = radial_coordinate(spec, p);
        th = p.chart == Chart::Collar ? p.q[1] : std::atan2(p.q[1], p.q[0]);
    };
    label(trip.z, row.r, row.th);
    label(trip.zp, row.rp, row.thp);
    label(trip.zpp, row.rpp, row.thpp);
    try {
        auto sol = connect(spec, trip.z, trip.zp, opt);
        auto sol_a = connect(spec, trip.zpp, trip.z, opt);
        auto sol_b = connect(spec, trip.zpp, trip.zp, opt);
        row.d = sol.d;
        row.det_orth = mixed_hessian_det_orth(spec, connect(spec, trip.z, trip.zpp, opt));

        MatN G;
        chart_metric(spec, trip.zpp.chart, trip.zpp.q, G, nullptr);
        MatN Gi = G.inverse();
        // grad: | grad_{z''}(Phi(z'',z) - Phi(z'',z')) | / d(z,z').
        VecN diff = sol_b.p0 - sol_a.p0;
        row.grad_ratio = std::sqrt(std::max(0.0, Gi.quad(diff))) / std::max(sol.d, 1e-300);
        // gradw: the theta-weighted combination against d(z'', gamma(theta)).
        VecN comb(spec.n);
        for (int i = 0; i < spec.n; ++i)
            comb[i] = -(1.0 - trip.theta) * sol_a.p0[i] - trip.theta * sol_b.p0[i];
        Point w = geodesic_point(spec, sol, trip.theta);
        const double dw = connect(spec, trip.zpp, w, opt).d;
        row.gradw_ratio = std::sqrt(std::max(0.0, Gi.quad(comb))) / std::max(dw, 1e-300);
        // comparable: <gamma(theta)> against the endpoint interpolation.
        row.comparable_ratio =
            radial_weight(spec, w) / ((1.0 - trip.theta) * radial_weight(spec, trip.z) +
                                      trip.theta * radial_weight(spec, trip.zp));
        // lipschitz: velocity difference at z'' against d(z, z').
        row.lipschitz_ratio = row.grad_ratio;  // same metric quantity at z''
        // Stationarity residual at the connector point.
        auto sol_wz = connect(spec, w, trip.z, opt);
        auto sol_wzp = connect(spec, w, trip.zp, opt);
        VecN stat(spec.n);
        for (int i = 0; i < spec.n; ++i)
            stat[i] = -(1.0 - trip.theta) * sol_wz.p0[i] - trip.theta * sol_wzp.p0[i];
        MatN Gw;
        chart_metric(spec, w.chart, w.q, Gw, nullptr);
        row.id_residual = std::sqrt(std::max(0.0, Gw.inverse().quad(stat)));

        // Conic comparison (collar pairs on round boundaries).
        if (trip.z.chart == Chart::Collar && trip.zp.chart == Chart::Collar) {
            ConeGeodesic cg = cone_connect(spec.rho, row.r, row.th, row.rp, row.thp);
            if (cg.valid && cg.d > 0) {
                row.dm_conic_rel = (sol.d - cg.d) / cg.d;
                row.e_over_phi = std::abs(sol.phase() - 0.5 * cg.d * cg.d) /
                                 std::max(sol.phase(), 1e-300);
                MatN Gz;
                chart_metric(spec, trip.z.chart, trip.z.q, Gz, nullptr);
                VecN de = sol.p0 - cg.p0;
                row.e_grad = std::sqrt(std::max(0.0, Gz.inverse().quad(de))) /
                             (radial_weight(spec, trip.z) + radial_weight(spec, trip.zp));
                row.e_mixed = std::abs(row.det_orth - 1.0);
            }
        }
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

inline std::vector<GeometryRow> geometry_report(const ManifoldSpec& spec,
                                                const std::vector<GeometryTriple>& cloud,
                                                const ConnectOptions& opt = {}) {
    std::vector<GeometryRow> rows;
    rows.reserve(cloud.size());
    for (const auto& trip : cloud) rows.push_back(geometry_row(spec, trip, opt));
    return rows;
}

// Sample triples at gauge scale eps around moderate radii.
inline std::vector<GeometryTriple> sample_triples(const ManifoldSpec& spec, int count, double eps,
                                                  uint64_t seed) {
    std::vector<GeometryTriple> out;
    Rng rng(seed);
    const double r_lo = spec.has_cap ? 1.5 : std::max(1.5, 2.0 * spec.excise_r);
    for (int k = 0; k < count; ++k) {
        const double r = rng.uniform(r_lo, 8.0);
        const double th = rng.uniform(0.0, 2.0 * kPi);
        // Offsets at gauge scale eps: radial offset in tau, angular in h.
        auto offset_point = [&](double scale) {
            const double dtau = scale * eps * rng.uniform(-1.0, 1.0);
            const double dth = scale * eps * rng.uniform(-1.0, 1.0) / spec.rho;
            const double tau = std::atan(r) + dtau;
            return Point::collar(std::tan(std::clamp(tau, 0.05, kPi / 2 - 0.02)), th + dth);
        };
        GeometryTriple t;
        t.z = Point::collar(r, th);
        t.zp = offset_point(1.0);
        t.zpp = offset_point(0.7);
        t.theta = rng.uniform(0.2, 0.8);
        out.push_back(t);
    }
    return out;
}

}  // namespace cwave
