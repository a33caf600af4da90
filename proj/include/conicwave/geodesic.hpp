#pragma once

// Hamiltonian geodesic flow on the cotangent bundle, the two-point connector,
// and the phase/amplitude data read off from it.
//
//   sigma(H) = 1/2 g^{ij}(q) p_i p_j,   qdot = g^{-1} p,   pdot_k = -1/2 p^T d_k(g^{-1}) p
//
// Geodesics are parameterized on [0,1], so the flow covector has |p|_g equal
// to the distance. Variational columns for the shooting Jacobian ride along
// in the same adaptive pass, with the right-hand side linearized by central
// directional differences.

#include <optional>

#include "conicwave/compactified.hpp"
#include "conicwave/manifold.hpp"

namespace cwave {

struct CotangentState {
    Point z;
    VecN p;  // covector, chart frame of z

    // Scattering components in the collar: nu dual to -x^2 d_x = d_r,
    // mu_j dual to x d_{y_j}.
    double nu() const { return p[0]; }
    double mu(int j) const { return p[j + 1] / z.q[0]; }
};

inline double hamiltonian(const ManifoldSpec& s, const CotangentState& st) {
    MatN G;
    chart_metric(s, st.z.chart, st.z.q, G, nullptr);
    return 0.5 * G.inverse().quad(st.p);
}

// ---------------------------------------------------------------------------
// Adaptive Dormand-Prince 5(4)
// ---------------------------------------------------------------------------

struct OdeOptions {
    double rtol = 1e-12;
    double atol = 1e-12;
    double h_init = 0.05;
    double h_min = 1e-12;
    int max_steps = 200000;
};

// System: void rhs(const double* y, double* dy), int dim.
template <class System>
bool dp45_step(const System& sys, std::vector<double>& y, double& t, double t_end, double& h,
               const OdeOptions& opt) {
    static const double A[7][6] = {
        {},
        {1.0 / 5},
        {3.0 / 40, 9.0 / 40},
        {44.0 / 45, -56.0 / 15, 32.0 / 9},
        {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
        {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
        {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
    static const double B5[7] = {35.0 / 384,     0.0,       500.0 / 1113, 125.0 / 192,
                                 -2187.0 / 6784, 11.0 / 84, 0.0};
    static const double B4[7] = {5179.0 / 57600,    0.0,          7571.0 / 16695, 393.0 / 640,
                                 -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};
    const size_t dim_z = size_t(sys.dim());
    const int dim = sys.dim();
    std::vector<double> k(7 * dim_z), yt(dim_z, 0.0), ynew(dim_z, 0.0);

    for (;;) {
        if (t + h > t_end) h = t_end - t;
        sys.rhs(y.data(), k.data());
        for (int s = 1; s < 7; ++s) {
            for (int i = 0; i < dim; ++i) {
                double acc = y[size_t(i)];
                for (int j = 0; j < s; ++j) acc += h * A[s][j] * k[size_t(j * dim + i)];
                yt[size_t(i)] = acc;
            }
            sys.rhs(yt.data(), k.data() + size_t(s) * size_t(dim));
        }
        double errnorm = 0.0;
        for (int i = 0; i < dim; ++i) {
            double y5 = y[size_t(i)], e = 0.0;
            for (int s = 0; s < 7; ++s) {
                y5 += h * B5[s] * k[size_t(s * dim + i)];
                e += h * (B5[s] - B4[s]) * k[size_t(s * dim + i)];
            }
            ynew[size_t(i)] = y5;
            const double sc = opt.atol + opt.rtol * std::max(std::abs(y[size_t(i)]), std::abs(y5));
            errnorm += sqr(e / sc);
        }
        errnorm = std::sqrt(errnorm / dim);
        if (errnorm <= 1.0 || h <= opt.h_min * 2.0) {
            t += h;
            y = ynew;
            const double fac = std::clamp(0.9 * std::pow(std::max(errnorm, 1e-10), -0.2), 0.2, 5.0);
            h *= fac;  // next step suggestion; clipped to t_end at loop entry
            return true;
        }
        h *= std::clamp(0.9 * std::pow(errnorm, -0.2), 0.1, 0.5);
        if (h < opt.h_min) return false;
    }
}

// ---------------------------------------------------------------------------
// Chart-level flow with variational columns
// ---------------------------------------------------------------------------

namespace detail {

struct ChartHamiltonSystem {
    const ManifoldSpec* spec;
    Chart chart;
    int n;
    int nvar;  // number of variational columns (0 or n)

    int dim() const { return 2 * n + nvar * 2 * n; }

    void base_rhs(const double* y, double* dy) const {
        VecN q(n), p(n);
        for (int i = 0; i < n; ++i) {
            q[i] = y[i];
            p[i] = y[n + i];
        }
        MatN G;
        std::array<MatN, 3> dG;
        chart_metric(*spec, chart, q, G, dG.data());
        MatN Gi = G.inverse();
        VecN v = Gi.mul(p);
        for (int i = 0; i < n; ++i) dy[i] = v[i];
        for (int k = 0; k < n; ++k) {
            // d_k g^{ij} = -(g^{-1} d_k g g^{-1})^{ij}
            VecN w = dG[size_t(k)].mul(v);
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += v[i] * w[i];
            dy[n + k] = 0.5 * s;
        }
    }

    void rhs(const double* y, double* dy) const {
        base_rhs(y, dy);
        if (nvar == 0) return;
        // Central directional differences of the base RHS along each column.
        const int m = 2 * n;
        std::array<double, 6> yp, ym, fp, fm;
        double scale = 0.0;
        for (int i = 0; i < m; ++i) scale = std::max(scale, std::abs(y[i]));
        for (int c = 0; c < nvar; ++c) {
            const double* V = y + m + c * m;
            double vn = 0.0;
            for (int i = 0; i < m; ++i) vn = std::max(vn, std::abs(V[i]));
            if (vn == 0.0) {
                for (int i = 0; i < m; ++i) dy[m + c * m + i] = 0.0;
                continue;
            }
            const double h = 1e-6 * (1.0 + scale) / vn;
            for (int i = 0; i < m; ++i) {
                yp[size_t(i)] = y[i] + h * V[i];
                ym[size_t(i)] = y[i] - h * V[i];
            }
            base_rhs(yp.data(), fp.data());
            base_rhs(ym.data(), fm.data());
            for (int i = 0; i < m; ++i) dy[m + c * m + i] = (fp[size_t(i)] - fm[size_t(i)]) / (2.0 * h);
        }
    }
};

}  // namespace detail

struct FlowState {
    Chart chart = Chart::Collar;
    VecN q, p;
    // Variational columns d(state)/d(p0): vq[c], vp[c].
    std::vector<VecN> vq, vp;
};

struct FlowResult {
    FlowState state;
    bool ok = true;
    std::string error;
    double energy_drift = 0.0;
};

inline FlowState make_flow_state(const ManifoldSpec& s, const Point& z, const VecN& p,
                                 bool with_variational) {
    FlowState st;
    st.chart = z.chart;
    st.q = z.q;
    st.q.n = s.n;
    st.p = p;
    st.p.n = s.n;
    if (with_variational) {
        st.vq.assign(size_t(s.n), VecN(s.n));
        st.vp.assign(size_t(s.n), VecN(s.n));
        for (int c = 0; c < s.n; ++c) st.vp[size_t(c)][c] = 1.0;
    }
    return st;
}

namespace detail {

inline void pack(const FlowState& st, int n, std::vector<double>& y) {
    const int m = 2 * n;
    const int nvar = int(st.vq.size());
    y.assign(size_t(m + nvar * m), 0.0);
    for (int i = 0; i < n; ++i) {
        y[size_t(i)] = st.q[i];
        y[size_t(n + i)] = st.p[i];
    }
    for (int c = 0; c < nvar; ++c)
        for (int i = 0; i < n; ++i) {
            y[size_t(m + c * m + i)] = st.vq[size_t(c)][i];
            y[size_t(m + c * m + n + i)] = st.vp[size_t(c)][i];
        }
}

inline void unpack(const std::vector<double>& y, int n, FlowState& st) {
    const int m = 2 * n;
    const int nvar = int(st.vq.size());
    for (int i = 0; i < n; ++i) {
        st.q[i] = y[size_t(i)];
        st.p[i] = y[size_t(n + i)];
    }
    for (int c = 0; c < nvar; ++c)
        for (int i = 0; i < n; ++i) {
            st.vq[size_t(c)][i] = y[size_t(m + c * m + i)];
            st.vp[size_t(c)][i] = y[size_t(m + c * m + n + i)];
        }
}

// Convert a full flow state (with variations) between charts by applying the
// transition map; variations transform by central differences of the map.
inline FlowState convert_chart(const ManifoldSpec& s, const FlowState& st, Chart target) {
    if (st.chart == target) return st;
    auto map_point = [&](const VecN& q, const VecN& p, VecN& qn, VecN& pn) {
        MatN T;
        if (target == Chart::Cap) {
            qn = collar_to_cap(s, q, &T);
            // p_new = T^{-T} p
            MatN Tinv = T.inverse();
            pn = VecN(s.n);
            for (int i = 0; i < s.n; ++i) {
                double acc = 0;
                for (int j = 0; j < s.n; ++j) acc += Tinv(j, i) * p[j];
                pn[i] = acc;
            }
        } else {
            MatN J;
            qn = cap_to_collar(s, q, &J);
            // J = d(collar)/d(cap); covector: p_new = J^{-T}... careful:
            // p_cap = (d collar/d cap)^T p_collar => p_collar = J^{-T} p_cap
            // with J as returned. Equivalent: p_new_i = sum_j Tc(j,i) p[j]
            // where Tc = (d cap/d collar) = J^{-1}.
            MatN Tc = J.inverse();
            pn = VecN(s.n);
            for (int i = 0; i < s.n; ++i) {
                double acc = 0;
                for (int j = 0; j < s.n; ++j) acc += Tc(j, i) * p[j];
                pn[i] = acc;
            }
        }
        qn.n = s.n;
        pn.n = s.n;
    };
    FlowState out = st;
    out.chart = target;
    map_point(st.q, st.p, out.q, out.p);
    const int nvar = int(st.vq.size());
    for (int c = 0; c < nvar; ++c) {
        const double h = 1e-7;
        VecN qp = st.q, qm = st.q, pp = st.p, pm = st.p;
        for (int i = 0; i < s.n; ++i) {
            qp[i] += h * st.vq[size_t(c)][i];
            qm[i] -= h * st.vq[size_t(c)][i];
            pp[i] += h * st.vp[size_t(c)][i];
            pm[i] -= h * st.vp[size_t(c)][i];
        }
        VecN qnp, pnp, qnm, pnm;
        map_point(qp, pp, qnp, pnp);
        map_point(qm, pm, qnm, pnm);
        for (int i = 0; i < s.n; ++i) {
            out.vq[size_t(c)][i] = (qnp[i] - qnm[i]) / (2.0 * h);
            out.vp[size_t(c)][i] = (pnp[i] - pnm[i]) / (2.0 * h);
        }
    }
    return out;
}

}  // namespace detail

// Integrate the geodesic flow for unit parameter time `t_end`, switching
// charts with hysteresis inside the overlap annulus. `escape_r`, when
// positive, stops the flow once the radial coordinate exceeds it.
inline FlowResult hamilton_flow(const ManifoldSpec& s, FlowState st, double t_end,
                                const OdeOptions& opt = {}, double escape_r = 0.0,
                                double* escape_time = nullptr) {
    FlowResult res;
    if (t_end < 0.0)
        throw std::invalid_argument("hamilton_flow: t_end must be >= 0 (reverse time = negate p)");
    const double E0 = [&] {
        MatN G;
        chart_metric(s, st.chart, st.q, G, nullptr);
        return 0.5 * G.inverse().quad(st.p);
    }();
    double t = 0.0, h = opt.h_init;
    std::vector<double> y;
    int steps = 0;
    while (t_end - t > 1e-14) {
        detail::ChartHamiltonSystem sys{&s, st.chart, s.n, int(st.vq.size())};
        detail::pack(st, s.n, y);
        double tt = t, hh = std::abs(h);
        if (!dp45_step(sys, y, tt, t_end, hh, opt)) {
            res.ok = false;
            res.error = "step size underflow (near-singular metric region)";
            detail::unpack(y, s.n, st);
            res.state = st;
            return res;
        }
        t = tt;
        h = hh;
        detail::unpack(y, s.n, st);
        if (++steps > opt.max_steps) {
            res.ok = false;
            res.error = "max step count exceeded";
            res.state = st;
            return res;
        }
        // Domain and chart management.
        if (st.chart == Chart::Collar) {
            const double r = st.q[0];
            if (s.has_cap && r < 1.25 / s.eps0) {
                st = detail::convert_chart(s, st, Chart::Cap);
            } else if (!s.has_cap && r < s.excise_r) {
                res.ok = false;
                res.error = "trajectory entered the excised cone tip";
                res.state = st;
                return res;
            }
        } else {
            const double r = st.q.norm();
            if (r > 1.6 / s.eps0) st = detail::convert_chart(s, st, Chart::Collar);
        }
        if (escape_r > 0.0) {
            const double r = st.chart == Chart::Collar ? st.q[0] : st.q.norm();
            if (r > escape_r) {
                if (escape_time) *escape_time = t;
                res.state = st;
                MatN G;
                chart_metric(s, st.chart, st.q, G, nullptr);
                res.energy_drift = std::abs(0.5 * G.inverse().quad(st.p) - E0) / (1.0 + E0);
                return res;
            }
        }
    }
    res.state = st;
    MatN G;
    chart_metric(s, st.chart, st.q, G, nullptr);
    res.energy_drift = std::abs(0.5 * G.inverse().quad(st.p) - E0) / (1.0 + E0);
    if (escape_time) *escape_time = -1.0;
    return res;
}

// Trajectory sampling at given parameter times (ascending, in [0, t_end]).
inline std::vector<FlowState> flow_samples(const ManifoldSpec& s, const FlowState& start,
                                           const std::vector<double>& times,
                                           const OdeOptions& opt = {}) {
    std::vector<FlowState> out;
    FlowState st = start;
    double t_prev = 0.0;
    for (double tk : times) {
        if (tk > t_prev) {
            FlowResult r = hamilton_flow(s, st, tk - t_prev, opt);
            if (!r.ok) throw std::runtime_error("flow_samples: " + r.error);
            st = r.state;
            t_prev = tk;
        }
        out.push_back(st);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Two-point connector (shooting Newton)
// ---------------------------------------------------------------------------

struct ConnectOptions {
    double eps_geo = 0.3;      // gauge-distance trust region
    bool check_trust = true;
    OdeOptions ode{};
    double newton_tol = 1e-11;  // endpoint residual, metric length units
    int max_newton = 60;
    int samples = 33;
};

struct GeodesicSolution {
    Point z0, z1;
    VecN p0, p1;   // endpoint covectors in each endpoint's chart frame
    double d = 0;  // distance; energy = d^2
    MatN expJ;     // d(endpoint coords)/d(p0), endpoint chart frame
    std::vector<Point> samples;
    std::vector<VecN> sample_p;
    double speed_drift = 0.0;
    double endpoint_residual = 0.0;
    int newton_iters = 0;

    double energy() const { return d * d; }
    double phase() const { return 0.5 * d * d; }
};

namespace detail {

inline VecN flat_chart_guess(const ManifoldSpec& s, const Point& z, const Point& zp) {
    // Straight-line covector guess in a shared chart.
    if (z.chart == zp.chart) {
        VecN dq = zp.q - z.q;
        if (z.chart == Chart::Collar) dq[1] = wrap_angle(dq[1]);
        MatN G;
        chart_metric(s, z.chart, z.q, G, nullptr);
        return G.mul(dq);
    }
    // Mixed charts: work in the cap chart.
    const VecN wz = z.chart == Chart::Cap ? z.q : collar_to_cap(s, z.q);
    const VecN wzp = zp.chart == Chart::Cap ? zp.q : collar_to_cap(s, zp.q);
    VecN dq = wzp - wz;
    MatN G;
    cap_metric(s, wz, G, nullptr);
    VecN p_cap = G.mul(dq);
    if (z.chart == Chart::Cap) return p_cap;
    MatN T;
    collar_to_cap(s, z.q, &T);
    VecN p(s.n);
    for (int i = 0; i < s.n; ++i) {
        double acc = 0;
        for (int j = 0; j < s.n; ++j) acc += T(j, i) * p_cap[j];
        p[i] = acc;
    }
    return p;
}

inline VecN development_guess(const ManifoldSpec& s, const Point& z, const Point& zp) {
    if (z.chart != Chart::Collar || zp.chart != Chart::Collar) return flat_chart_guess(s, z, zp);
    const double r = z.q[0], rp = zp.q[0];
    const double beta = s.boundary.distance(&z.q.v[1], &zp.q.v[1]);
    if (beta >= kPi * 0.999) return flat_chart_guess(s, z, zp);
    const double vr = rp * std::cos(beta) - r;
    const double vt_mag = rp * std::sin(beta);
    std::array<double, 2> dir{0.0, 0.0};
    if (beta > 1e-14) s.boundary.direction(&z.q.v[1], &zp.q.v[1], dir.data());
    VecN v(s.n);
    v[0] = vr;
    for (int j = 0; j < s.n - 1; ++j) v[j + 1] = vt_mag * dir[size_t(j)] / r;
    MatN G;
    collar_metric_ry(s, z.q, G, nullptr);
    return G.mul(v);
}

}  // namespace detail

inline GeodesicSolution connect(const ManifoldSpec& s, const Point& z, const Point& zp,
                                const ConnectOptions& opt = {}) {
    if (!in_domain(s, z) || !in_domain(s, zp))
        throw std::domain_error("connect: endpoint outside chart domains");
    if (opt.check_trust) {
        const double db = compactified_distance(s, z, zp);
        if (db > opt.eps_geo)
            throw std::domain_error("connect: gauge distance " + std::to_string(db) +
                                    " exceeds trust region eps_geo = " + std::to_string(opt.eps_geo));
    }

    GeodesicSolution sol;
    sol.z0 = z;
    sol.z1 = zp;

    // Degenerate pair.
    bool same = z.chart == zp.chart;
    if (same)
        for (int i = 0; i < s.n; ++i)
            same = same && std::abs(z.q[i] - zp.q[i]) < 1e-14 * (1.0 + std::abs(z.q[i]));
    if (same) {
        MatN G;
        chart_metric(s, z.chart, z.q, G, nullptr);
        sol.p0 = VecN(s.n);
        sol.p1 = VecN(s.n);
        sol.d = 0.0;
        sol.expJ = G.inverse();
        sol.samples.assign(size_t(opt.samples), z);
        sol.sample_p.assign(size_t(opt.samples), VecN(s.n));
        return sol;
    }

    MatN Gz;
    chart_metric(s, z.chart, z.q, Gz, nullptr);
    MatN Gz_inv = Gz.inverse();
    MatN Gzp;
    chart_metric(s, zp.chart, zp.q, Gzp, nullptr);

    auto residual_of = [&](const FlowState& end, VecN& R) -> bool {
        FlowState e = end;
        if (e.chart != zp.chart) {
            // Convert when possible; a far-off endpoint chart is a failure.
            const double r = e.chart == Chart::Collar ? e.q[0] : e.q.norm();
            const bool can = zp.chart == Chart::Collar ? in_collar_domain(s, r)
                                                       : (s.has_cap && r < s.cap_r_out());
            if (!can) return false;
            e = detail::convert_chart(s, e, zp.chart);
        }
        R = e.q - zp.q;
        if (zp.chart == Chart::Collar) R[1] = wrap_angle(R[1]);
        R.n = s.n;
        return true;
    };

    auto try_newton = [&](VecN p_init, GeodesicSolution& out) -> bool {
        VecN p = p_init;
        double best_res = kInf;
        for (int it = 0; it < opt.max_newton; ++it) {
            FlowState st = make_flow_state(s, z, p, true);
            FlowResult fr = hamilton_flow(s, st, 1.0, opt.ode);
            if (!fr.ok) return false;
            FlowState end = fr.state;
            if (end.chart != zp.chart) {
                const double r = end.chart == Chart::Collar ? end.q[0] : end.q.norm();
                const bool can = zp.chart == Chart::Collar ? in_collar_domain(s, r)
                                                           : (s.has_cap && r < s.cap_r_out());
                if (!can) return false;
                end = detail::convert_chart(s, end, zp.chart);
            }
            VecN R = end.q - zp.q;
            if (zp.chart == Chart::Collar) R[1] = wrap_angle(R[1]);
            R.n = s.n;
            const double rnorm = std::sqrt(Gzp.quad(R));
            const double d_now = std::sqrt(std::max(0.0, Gz_inv.quad(p)));
            if (rnorm < opt.newton_tol * (1.0 + d_now)) {
                out.p0 = p;
                out.p1 = end.p;
                out.d = d_now;
                out.endpoint_residual = rnorm;
                out.newton_iters = it;
                MatN J(s.n);
                for (int c = 0; c < s.n; ++c)
                    for (int i = 0; i < s.n; ++i) J(i, c) = end.vq[size_t(c)][i];
                out.expJ = J;
                return true;
            }
            MatN J(s.n);
            for (int c = 0; c < s.n; ++c)
                for (int i = 0; i < s.n; ++i) J(i, c) = end.vq[size_t(c)][i];
            VecN dp;
            try {
                MatN Jinv = J.inverse();
                dp = Jinv.mul(R);
            } catch (const std::exception&) {
                return false;
            }
            // Backtracking on the endpoint residual.
            double lam = 1.0;
            bool accepted = false;
            for (int bt = 0; bt < 8; ++bt, lam *= 0.5) {
                VecN ptrial = p;
                for (int i = 0; i < s.n; ++i) ptrial[i] -= lam * dp[i];
                FlowState st2 = make_flow_state(s, z, ptrial, false);
                FlowResult fr2 = hamilton_flow(s, st2, 1.0, opt.ode);
                if (!fr2.ok) continue;
                VecN R2;
                if (!residual_of(fr2.state, R2)) continue;
                const double rn2 = std::sqrt(Gzp.quad(R2));
                if (rn2 < rnorm * (1.0 - 0.25 * lam) || rn2 < opt.newton_tol) {
                    p = ptrial;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                if (rnorm < best_res * 0.999) {
                    best_res = rnorm;
                    VecN pfull = p;
                    for (int i = 0; i < s.n; ++i) pfull[i] -= dp[i];
                    p = pfull;
                    continue;
                }
                return false;
            }
            best_res = std::min(best_res, rnorm);
        }
        return false;
    };

    VecN guess = detail::development_guess(s, z, zp);
    bool ok = try_newton(guess, sol);
    if (!ok) {
        // Multistart on the initial covector sphere.
        const double scale = std::max(std::sqrt(std::max(Gz_inv.quad(guess), 0.0)), 1e-3);
        MatN L = Gz.cholesky();
        for (double mult : {1.0, 0.5, 2.0}) {
            for (int k = 0; k < 8 && !ok; ++k) {
                const double phi = 2.0 * kPi * k / 8.0;
                VecN e(s.n);
                e[0] = std::cos(phi);
                e[1] = std::sin(phi);
                // p = L e scaled: |p|_{g^{-1}} = |e| = 1.
                VecN p(s.n);
                for (int i = 0; i < s.n; ++i) {
                    double acc = 0;
                    for (int j = 0; j < s.n; ++j) acc += L(i, j) * e[j];
                    p[i] = acc * scale * mult;
                }
                ok = try_newton(p, sol);
            }
            if (ok) break;
        }
    }
    if (!ok)
        throw std::runtime_error("connect: Newton failed to converge after multistart (pair too far or non-unique?)");

    // Sample the connector.
    std::vector<double> ts(size_t(opt.samples));
    for (int k = 0; k < opt.samples; ++k) ts[size_t(k)] = double(k) / (opt.samples - 1);
    FlowState st0 = make_flow_state(s, z, sol.p0, false);
    auto states = flow_samples(s, st0, ts, opt.ode);
    sol.samples.clear();
    sol.sample_p.clear();
    double vmin = kInf, vmax = 0.0;
    for (auto& stt : states) {
        Point pt;
        pt.chart = stt.chart;
        pt.q = stt.q;
        sol.samples.push_back(pt);
        sol.sample_p.push_back(stt.p);
        MatN G;
        chart_metric(s, stt.chart, stt.q, G, nullptr);
        const double v = std::sqrt(std::max(0.0, G.inverse().quad(stt.p)));
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    sol.speed_drift = (vmax - vmin) / std::max(vmax, 1e-300);
    return sol;
}

// Point on the connector at parameter theta (nearest stored sample refined by
// one short flow).
inline Point geodesic_point(const ManifoldSpec& s, const GeodesicSolution& sol, double theta,
                            const OdeOptions& opt = {}) {
    if (sol.d == 0.0) return sol.z0;
    const int m = int(sol.samples.size()) - 1;
    int k = std::clamp(int(theta * m), 0, m);
    const double t0 = double(k) / m;
    FlowState st;
    st.chart = sol.samples[size_t(k)].chart;
    st.q = sol.samples[size_t(k)].q;
    st.p = sol.sample_p[size_t(k)];
    if (theta > t0 + 1e-15) {
        FlowResult fr = hamilton_flow(s, st, theta - t0, opt);
        if (!fr.ok) throw std::runtime_error("geodesic_point: " + fr.error);
        st = fr.state;
    }
    Point p;
    p.chart = st.chart;
    p.q = st.q;
    return p;
}

// ---------------------------------------------------------------------------
// Phase and amplitude
// ---------------------------------------------------------------------------

inline double phase(const ManifoldSpec& s, const Point& z, const Point& zp,
                    const ConnectOptions& opt = {}) {
    return connect(s, z, zp, opt).phase();
}

// (grad_z Phi, grad_{z'} Phi) as covectors in the endpoint chart frames.
inline std::pair<VecN, VecN> grad_phase(const ManifoldSpec& s, const Point& z, const Point& zp,
                                        const ConnectOptions& opt = {}) {
    GeodesicSolution sol = connect(s, z, zp, opt);
    VecN gz = sol.p0;
    for (int i = 0; i < s.n; ++i) gz[i] = -gz[i];
    return {gz, sol.p1};
}

// Eikonal defect |Phi - 1/2 |grad_{z'} Phi|^2_{g(z')}|.
inline double eikonal_residual(const ManifoldSpec& s, const GeodesicSolution& sol) {
    MatN G;
    chart_metric(s, sol.z1.chart, sol.z1.q, G, nullptr);
    const double lhs = sol.phase();
    const double rhs = 0.5 * G.inverse().quad(sol.p1);
    return std::abs(lhs - rhs);
}

// a(z,z') = det(-grad_z grad_{z'} Phi)^{1/2} det g(z)^{-1/4} det g(z')^{-1/4},
// with the mixed Hessian taken as the inverse of the exponential-map Jacobian.
inline double amplitude_from_solution(const ManifoldSpec& s, const GeodesicSolution& sol) {
    MatN M = sol.expJ.inverse();
    const double detM = M.det();
    MatN Gz, Gzp;
    chart_metric(s, sol.z0.chart, sol.z0.q, Gz, nullptr);
    chart_metric(s, sol.z1.chart, sol.z1.q, Gzp, nullptr);
    const double denom = std::sqrt(Gz.det() * Gzp.det());
    const double ratio = detM / denom;
    if (ratio <= 0.0)
        throw std::runtime_error("amplitude: nondegeneracy failure (det <= 0); pair outside the parametrix region");
    return std::sqrt(ratio);
}

inline double amplitude(const ManifoldSpec& s, const Point& z, const Point& zp,
                        const ConnectOptions& opt = {}) {
    return amplitude_from_solution(s, connect(s, z, zp, opt));
}

// det of the mixed Hessian measured in orthonormal frames at both endpoints.
inline double mixed_hessian_det_orth(const ManifoldSpec& s, const GeodesicSolution& sol) {
    MatN M = sol.expJ.inverse();
    MatN Gz, Gzp;
    chart_metric(s, sol.z0.chart, sol.z0.q, Gz, nullptr);
    chart_metric(s, sol.z1.chart, sol.z1.q, Gzp, nullptr);
    return M.det() / std::sqrt(Gz.det() * Gzp.det());
}

// Central-difference oracle for the mixed Hessian determinant (independent of
// the variational route; used by the regression checks).
inline double mixed_hessian_det_fd(const ManifoldSpec& s, const Point& z, const Point& zp,
                                   double step, const ConnectOptions& opt = {}) {
    const int n = s.n;
    MatN M(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            Point zpp = z, zpm = z, zmp = z, zmm = z;
            zpp.q[a] += step;
            zpm.q[a] += step;
            zmp.q[a] -= step;
            zmm.q[a] -= step;
            Point wpp = zp, wpm = zp, wmp = zp, wmm = zp;
            wpp.q[b] += step;
            wmp.q[b] += step;
            wpm.q[b] -= step;
            wmm.q[b] -= step;
            const double fpp = connect(s, zpp, wpp, opt).phase();
            const double fpm = connect(s, zpm, wpm, opt).phase();
            const double fmp = connect(s, zmp, wmp, opt).phase();
            const double fmm = connect(s, zmm, wmm, opt).phase();
            M(a, b) = -(fpp - fpm - fmp + fmm) / (4.0 * step * step);
        }
    MatN Gz, Gzp;
    chart_metric(s, z.chart, z.q, Gz, nullptr);
    chart_metric(s, zp.chart, zp.q, Gzp, nullptr);
    return M.det() / std::sqrt(Gz.det() * Gzp.det());
}

// Amplitude from the FD Hessian (oracle pairing for the regression tests).
inline double amplitude_fd(const ManifoldSpec& s, const Point& z, const Point& zp, double step,
                           const ConnectOptions& opt = {}) {
    const double dets = mixed_hessian_det_fd(s, z, zp, step, opt);
    if (dets <= 0.0) throw std::runtime_error("amplitude_fd: nonpositive determinant");
    return std::sqrt(dets);
}

// Central-difference evaluation of the transport operator
//   (grad^{z'} Phi . grad_{z'} + 1/2 Lap_{z'} Phi - n/2) a(z, z')
// at (z, z'); converges to zero at second order in the step.
inline double transport_residual(const ManifoldSpec& s, const Point& z, const Point& zp,
                                 double step, const ConnectOptions& opt = {}) {
    const int n = s.n;
    GeodesicSolution sol = connect(s, z, zp, opt);
    const double a0 = amplitude_from_solution(s, sol);
    MatN G;
    std::array<MatN, 3> dG;
    chart_metric(s, zp.chart, zp.q, G, dG.data());
    MatN Gi = G.inverse();
    VecN v = Gi.mul(sol.p1);

    // grad a and the divergence-form Laplacian of Phi by central differences.
    VecN da(n);
    double lap_phi = 0.0;
    const double sg0 = std::sqrt(G.det());
    for (int c = 0; c < n; ++c) {
        Point zp_p = zp, zp_m = zp;
        zp_p.q[c] += step;
        zp_m.q[c] -= step;
        GeodesicSolution sp = connect(s, z, zp_p, opt);
        GeodesicSolution sm = connect(s, z, zp_m, opt);
        da[c] = (amplitude_from_solution(s, sp) - amplitude_from_solution(s, sm)) / (2.0 * step);
        // F_c = sqrt(g) (g^{-1} p1)_c evaluated at the displaced points.
        auto Fc = [&](const Point& q, const VecN& p1) {
            MatN Gq;
            chart_metric(s, q.chart, q.q, Gq, nullptr);
            return std::sqrt(Gq.det()) * Gq.inverse().mul(p1)[c];
        };
        lap_phi += (Fc(zp_p, sp.p1) - Fc(zp_m, sm.p1)) / (2.0 * step * sg0);
    }
    double vda = 0.0;
    for (int c = 0; c < n; ++c) vda += v[c] * da[c];
    return std::abs(vda + (0.5 * lap_phi - 0.5 * n) * a0);
}

// ---------------------------------------------------------------------------
// Exact cone closed forms (planar development oracles / fast providers)
// ---------------------------------------------------------------------------

struct ConeGeodesic {
    double d = 0.0;
    VecN p0, p1;     // covectors in collar (r, theta) frame
    double detM = 0; // mixed Hessian determinant in coordinates
    bool valid = false;
};

inline ConeGeodesic cone_connect(double rho, double r, double th, double rp, double thp) {
    ConeGeodesic g;
    // wrap_angle keeps |dtheta| <= pi, so beta = rho dtheta stays inside the
    // developed sector for every rho <= 1.
    const double beta = rho * wrap_angle(thp - th);
    if (std::abs(beta) > kPi) return g;
    const double cb = std::cos(beta), sb = std::sin(beta);
    g.d = std::sqrt(std::max(0.0, r * r + rp * rp - 2.0 * r * rp * cb));
    g.p0 = VecN(rp * cb - r, rho * r * rp * sb);
    g.p1 = VecN(rp - r * cb, rho * r * rp * sb);
    g.detM = rho * rho * r * rp;
    g.valid = true;
    return g;
}

// Radial coordinate along the cone connector at parameter theta_t.
inline void cone_geodesic_sample(double rho, double r, double th, double rp, double thp,
                                 double theta_t, double& r_out, double& th_out) {
    const double beta = rho * wrap_angle(thp - th);
    const double px = (1.0 - theta_t) * r + theta_t * rp * std::cos(beta);
    const double py = theta_t * rp * std::sin(beta);
    r_out = std::hypot(px, py);
    th_out = th + std::atan2(py, px) / rho;
}

// ---------------------------------------------------------------------------
// Nontrapping probe
// ---------------------------------------------------------------------------

struct NontrappingReport {
    int total = 0;
    int escaped = 0;
    int tip_exits = 0;  // excised presets: trajectories leaving through the tip
    int failures = 0;
    double min_escape_margin = kInf;  // T - escape time, over escaping runs
    std::vector<CotangentState> trapped;  // non-escaping initial data
    // Trajectories that left the modeled region (outward or through an
    // excised tip) are not trapped; only bounded-forever runs are.
    bool no_trapping_detected() const {
        return escaped + tip_exits == total && failures == 0;
    }
};

inline NontrappingReport nontrapping_probe(const ManifoldSpec& s, int samples, double horizon_T,
                                           double escape_R, uint64_t seed = 1234) {
    NontrappingReport rep;
    Rng rng(seed);
    OdeOptions opt;
    opt.rtol = opt.atol = 1e-9;
    for (int k = 0; k < samples; ++k) {
        // Quasi-random base point in the moderate region and unit-energy covector.
        const double r = rng.uniform(std::max(1.2 * s.excise_r, 0.25 / s.eps0), 0.8 * escape_R);
        const double th = rng.uniform(0.0, 2.0 * kPi);
        Point z = in_collar_domain(s, r) || !s.has_cap
                      ? Point::collar(std::max(r, s.excise_r * 1.01), th)
                      : Point::cap(r * std::cos(th), r * std::sin(th));
        MatN G;
        chart_metric(s, z.chart, z.q, G, nullptr);
        MatN L = G.cholesky();
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        VecN e(s.n);
        e[0] = std::cos(phi);
        e[1] = std::sin(phi);
        VecN p(s.n);
        for (int i = 0; i < s.n; ++i) {
            double acc = 0;
            for (int j = 0; j < s.n; ++j) acc += L(i, j) * e[j];
            p[i] = acc;
        }
        rep.total++;
        bool esc_both = true;
        bool tip_exit = false;
        double margin = kInf;
        for (double sgn : {1.0, -1.0}) {
            VecN ps = p;
            ps *= sgn;  // backward flow = forward flow with reversed covector
            FlowState st = make_flow_state(s, z, ps, false);
            double t_esc = -1.0;
            FlowResult fr = hamilton_flow(s, st, horizon_T, opt, escape_R, &t_esc);
            if (!fr.ok) {
                if (!s.has_cap && fr.error.find("excised") != std::string::npos) {
                    tip_exit = true;
                    continue;  // left the modeled region in finite time
                }
                rep.failures++;
                esc_both = false;
                break;
            }
            if (t_esc < 0) {
                esc_both = false;
                break;
            }
            margin = std::min(margin, horizon_T - t_esc);
        }
        if (esc_both && tip_exit) {
            rep.tip_exits++;
        } else if (esc_both) {
            rep.escaped++;
            rep.min_escape_margin = std::min(rep.min_escape_margin, margin);
        } else {
            CotangentState cs;
            cs.z = z;
            cs.p = p;
            rep.trapped.push_back(cs);
        }
    }
    return rep;
}

}  // namespace cwave
