#pragma once

// Fast access to (Phi, a, grad Phi) for kernel quadrature. Grid points are
// addressed by their global polar labels (r, theta).
//
//   ConeFormProvider  — perfectly conic closed form (rho = 1 gives the plane),
//                       valid while the developed angle stays below pi.
//   TableProvider     — rotationally symmetric metrics: the connector family
//                       is solved once per (r, r', |dtheta|) triple on the
//                       grid by a radial shooting flow with analytic
//                       variational columns, warm-started in dtheta.
//   GenericProvider   — full chart-level connect per pair (reports, CLI).

#include "conicwave/geodesic.hpp"

namespace cwave {

struct PairData {
    double Phi = 0.0;
    double a = 1.0;
    double d = 0.0;
    VecN p0, p1;  // covectors at z and z' in polar (r, theta) components
    bool valid = false;
};

class PhaseProvider {
  public:
    virtual ~PhaseProvider() = default;
    virtual PairData pair(double r, double th, double rp, double thp) const = 0;
    // gamma_{z -> z'}(frac) in polar labels.
    virtual std::pair<double, double> midpoint(double r, double th, double rp, double thp,
                                               double frac) const = 0;
    virtual std::string name() const = 0;
};

class ConeFormProvider : public PhaseProvider {
  public:
    explicit ConeFormProvider(double rho) : rho_(rho) {}

    PairData pair(double r, double th, double rp, double thp) const override {
        PairData out;
        ConeGeodesic g = cone_connect(rho_, r, th, rp, thp);
        if (!g.valid) return out;
        out.valid = true;
        out.d = g.d;
        out.Phi = 0.5 * g.d * g.d;
        out.a = 1.0;
        out.p0 = g.p0;
        out.p1 = g.p1;
        return out;
    }

    std::pair<double, double> midpoint(double r, double th, double rp, double thp,
                                       double frac) const override {
        double rm, thm;
        cone_geodesic_sample(rho_, r, th, rp, thp, frac, rm, thm);
        return {rm, thm};
    }

    std::string name() const override { return "cone-form"; }

  private:
    double rho_;
};

// ---------------------------------------------------------------------------
// Radial shooting flow for rotationally symmetric metrics
// ---------------------------------------------------------------------------

namespace detail {

// State (r, theta, p_r, p_theta) plus variational columns w.r.t. (p_r0, p_th0).
struct RadialFlowSystem {
    const ManifoldSpec* spec;
    bool variational;

    int dim() const { return variational ? 12 : 4; }

    void rhs(const double* y, double* dy) const {
        double A, dA, d2A;
        spec->polar_angular(y[0], A, dA, d2A);
        const double pr = y[2], pt = y[3];
        const double invA = 1.0 / A;
        dy[0] = pr;
        dy[1] = pt * invA;
        dy[2] = 0.5 * dA * invA * invA * pt * pt;
        dy[3] = 0.0;
        if (!variational) return;
        // d(rhs)/d(state) entries that are nonzero:
        const double T_th_r = -dA * invA * invA * pt;
        const double T_th_pt = invA;
        const double T_pr_r = 0.5 * pt * pt * (d2A * invA * invA - 2.0 * dA * dA * invA * invA * invA);
        const double T_pr_pt = dA * invA * invA * pt;
        for (int c = 0; c < 2; ++c) {
            const double* V = y + 4 + 4 * c;
            double* dV = dy + 4 + 4 * c;
            dV[0] = V[2];
            dV[1] = T_th_r * V[0] + T_th_pt * V[3];
            dV[2] = T_pr_r * V[0] + T_pr_pt * V[3];
            dV[3] = 0.0;
        }
    }
};

struct RadialConnectResult {
    double d = 0, Phi = 0, a = 1;
    VecN p0, p1;
    bool ok = false;
};

// Shoot from (r, 0) to (rp, dth) for a rotationally symmetric spec.
inline RadialConnectResult radial_connect(const ManifoldSpec& spec, double r, double rp,
                                          double dth, VecN guess, double r_floor,
                                          double tol = 1e-11) {
    RadialConnectResult res;
    OdeOptions opt;
    opt.rtol = opt.atol = 1e-12;
    RadialFlowSystem sys{&spec, true};
    std::vector<double> y(12, 0.0);
    VecN p = guess;
    double A0, dA0, d2A0;
    spec.polar_angular(r, A0, dA0, d2A0);
    for (int it = 0; it < 50; ++it) {
        y.assign(12, 0.0);
        y[0] = r;
        y[1] = 0.0;
        y[2] = p[0];
        y[3] = p[1];
        y[6] = 1.0;   // dp_r/dp_r0
        y[11] = 1.0;  // dp_th/dp_th0
        double t = 0.0, h = 0.1;
        bool fail = false;
        while (t < 1.0 - 1e-14) {
            if (!dp45_step(sys, y, t, 1.0, h, opt) || y[0] < r_floor) {
                fail = true;
                break;
            }
        }
        if (fail) return res;
        const double Rr = y[0] - rp, Rt = wrap_angle(y[1] - dth);
        double Aend, dAe, d2Ae;
        spec.polar_angular(y[0], Aend, dAe, d2Ae);
        const double rnorm = std::sqrt(Rr * Rr + Aend * Rt * Rt);
        const double dnow = std::sqrt(p[0] * p[0] + p[1] * p[1] / A0);
        if (rnorm < tol * (1.0 + dnow)) {
            res.ok = true;
            res.d = dnow;
            res.Phi = 0.5 * dnow * dnow;
            res.p0 = VecN(p[0], p[1]);
            res.p1 = VecN(y[2], y[3]);
            // exp-map Jacobian J = d(endpoint)/d(p0) from columns (4..7),(8..11).
            MatN J(2);
            J(0, 0) = y[4];
            J(1, 0) = y[5];
            J(0, 1) = y[8];
            J(1, 1) = y[9];
            MatN M = J.inverse();
            const double dets = M.det() / std::sqrt(A0 * Aend);
            if (dets <= 0.0) {
                res.ok = false;
                return res;
            }
            res.a = std::sqrt(dets);
            return res;
        }
        // Newton step.
        MatN J(2);
        J(0, 0) = y[4];
        J(1, 0) = y[5];
        J(0, 1) = y[8];
        J(1, 1) = y[9];
        MatN Jinv;
        try {
            Jinv = J.inverse();
        } catch (const std::exception&) {
            return res;
        }
        p[0] -= Jinv(0, 0) * Rr + Jinv(0, 1) * Rt;
        p[1] -= Jinv(1, 0) * Rr + Jinv(1, 1) * Rt;
    }
    return res;
}

}  // namespace detail

// Table of connector data over grid labels, restricted to a radial index
// window and |dtheta| <= kmax * dtheta.
class TableProvider : public PhaseProvider {
  public:
    TableProvider(std::shared_ptr<const ManifoldSpec> spec,
                  std::shared_ptr<const GridDiscretization> grid, int i_lo, int i_hi, int kmax)
        : spec_(std::move(spec)), grid_(std::move(grid)), i_lo_(i_lo), i_hi_(i_hi), kmax_(kmax) {
        if (!spec_->rot_symmetric)
            throw std::invalid_argument("TableProvider needs a rotationally symmetric spec");
        const int span = i_hi_ - i_lo_ + 1;
        data_.resize(size_t(span) * size_t(span) * size_t(kmax_ + 1));
        const double r_floor = std::max(spec_->excise_r * 0.9, 1e-6);
        const double dth = grid_->dtheta;
        const double rho_eff = std::sqrt(grid_->A[size_t(i_lo_)]) / grid_->r[size_t(i_lo_)];
        parallel_for(worker_threads(), size_t(span), [&](size_t ii) {
            const int i = i_lo_ + int(ii);
            const double r = grid_->r[size_t(i)];
            for (int j = i_lo_; j <= i_hi_; ++j) {
                const double rp = grid_->r[size_t(j)];
                VecN p = VecN(rp - r, 0.0);
                detail::RadialConnectResult prev;
                for (int k = 0; k <= kmax_; ++k) {
                    // Development guess refreshed each k; warm start when the
                    // previous solve converged.
                    const double beta = rho_eff * k * dth;
                    VecN guess = p;
                    if (std::abs(beta) < kPi * 0.98) {
                        guess = VecN(rp * std::cos(beta) - r,
                                     r * rp * rho_eff * std::sin(beta));
                        if (prev.ok && k > 0) guess = prev.p0;
                    }
                    auto res = detail::radial_connect(*spec_, r, rp, k * dth, guess, r_floor);
                    if (!res.ok && prev.ok) {
                        // One multistart retry from the development value.
                        guess = VecN(rp * std::cos(beta) - r, r * rp * rho_eff * std::sin(beta));
                        res = detail::radial_connect(*spec_, r, rp, k * dth, guess, r_floor);
                    }
                    Entry& e = entry(i, j, k);
                    if (res.ok) {
                        e.valid = true;
                        e.Phi = res.Phi;
                        e.a = res.a;
                        e.d = res.d;
                        e.p0r = res.p0[0];
                        e.p0t = res.p0[1];
                        e.p1r = res.p1[0];
                        e.p1t = res.p1[1];
                        prev = res;
                        p = res.p0;
                    } else {
                        e.valid = false;
                        prev.ok = false;
                    }
                }
            }
        });
    }

    PairData pair(double r, double th, double rp, double thp) const override {
        PairData out;
        const int i = index_of(r), j = index_of(rp);
        if (i < i_lo_ || i > i_hi_ || j < i_lo_ || j > i_hi_) return out;
        const double dth = wrap_angle(thp - th);
        const double kf = dth / grid_->dtheta;
        const int k = int(std::lround(std::abs(kf)));
        if (std::abs(std::abs(kf) - k) > 1e-6)
            throw std::invalid_argument("TableProvider: query off the angular grid");
        if (k > kmax_) return out;
        const Entry& e = entry(i, j, k);
        if (!e.valid) return out;
        const double sgn = dth >= 0 ? 1.0 : -1.0;
        out.valid = true;
        out.Phi = e.Phi;
        out.a = e.a;
        out.d = e.d;
        out.p0 = VecN(e.p0r, sgn * e.p0t);
        out.p1 = VecN(e.p1r, sgn * e.p1t);
        return out;
    }

    std::pair<double, double> midpoint(double r, double th, double rp, double thp,
                                       double frac) const override {
        // Slow path: flow from the tabulated initial covector.
        PairData pd = pair(r, th, rp, thp);
        if (!pd.valid) throw std::runtime_error("TableProvider::midpoint: pair not tabulated");
        detail::RadialFlowSystem sys{spec_.get(), false};
        std::vector<double> y(4, 0.0);
        y[0] = r;
        y[1] = th;
        y[2] = pd.p0[0];
        y[3] = pd.p0[1];
        OdeOptions opt;
        opt.rtol = opt.atol = 1e-12;
        double t = 0.0, h = 0.05;
        while (t < frac - 1e-14) {
            if (!dp45_step(sys, y, t, frac, h, opt))
                throw std::runtime_error("TableProvider::midpoint: flow failed");
        }
        return {y[0], y[1]};
    }

    std::string name() const override { return "table[" + spec_->name + "]"; }

    int i_lo() const { return i_lo_; }
    int i_hi() const { return i_hi_; }
    int kmax() const { return kmax_; }

  private:
    struct Entry {
        double Phi = 0, a = 1, d = 0;
        double p0r = 0, p0t = 0, p1r = 0, p1t = 0;
        bool valid = false;
    };

    std::shared_ptr<const ManifoldSpec> spec_;
    std::shared_ptr<const GridDiscretization> grid_;
    int i_lo_, i_hi_, kmax_;
    std::vector<Entry> data_;

    int index_of(double r) const {
        const double fi = (r - grid_->r_lo) / grid_->dr - 0.5;
        const int i = int(std::lround(fi));
        if (std::abs(fi - i) > 1e-6)
            throw std::invalid_argument("TableProvider: query off the radial grid");
        return i;
    }

    Entry& entry(int i, int j, int k) {
        const int span = i_hi_ - i_lo_ + 1;
        return data_[(size_t(i - i_lo_) * size_t(span) + size_t(j - i_lo_)) * size_t(kmax_ + 1) +
                     size_t(k)];
    }
    const Entry& entry(int i, int j, int k) const {
        return const_cast<TableProvider*>(this)->entry(i, j, k);
    }
};

// Direct radial-shooting provider for rotationally symmetric specs at
// arbitrary points; no tabulation, each pair solved from the development
// guess. Suited to patch quadratures with a few 10^5 pairs.
class RadialShootProvider : public PhaseProvider {
  public:
    explicit RadialShootProvider(std::shared_ptr<const ManifoldSpec> spec, double tol = 1e-10)
        : spec_(std::move(spec)), tol_(tol) {
        if (!spec_->rot_symmetric)
            throw std::invalid_argument("RadialShootProvider needs a rotationally symmetric spec");
        r_floor_ = std::max(spec_->excise_r * 0.9, 1e-6);
    }

    PairData pair(double r, double th, double rp, double thp) const override {
        PairData out;
        const double dth = wrap_angle(thp - th);
        double A0, dA0, d2A0;
        spec_->polar_angular(r, A0, dA0, d2A0);
        const double rho_eff = std::sqrt(A0) / r;
        const double beta = rho_eff * dth;
        VecN guess(rp * std::cos(beta) - r, r * rp * rho_eff * std::sin(beta));
        auto res = detail::radial_connect(*spec_, r, rp, dth, guess, r_floor_, tol_);
        if (!res.ok) return out;
        out.valid = true;
        out.Phi = res.Phi;
        out.a = res.a;
        out.d = res.d;
        out.p0 = res.p0;
        out.p1 = res.p1;
        return out;
    }

    std::pair<double, double> midpoint(double r, double th, double rp, double thp,
                                       double frac) const override {
        PairData pd = pair(r, th, rp, thp);
        if (!pd.valid) throw std::runtime_error("RadialShootProvider::midpoint: no connector");
        detail::RadialFlowSystem sys{spec_.get(), false};
        std::vector<double> y(4, 0.0);
        y[0] = r;
        y[1] = th;
        y[2] = pd.p0[0];
        y[3] = pd.p0[1];
        OdeOptions opt;
        opt.rtol = opt.atol = 1e-11;
        double t = 0.0, h = 0.05;
        while (t < frac - 1e-14) {
            if (!dp45_step(sys, y, t, frac, h, opt))
                throw std::runtime_error("RadialShootProvider::midpoint: flow failed");
        }
        return {y[0], y[1]};
    }

    std::string name() const override { return "radial-shoot[" + spec_->name + "]"; }

  private:
    std::shared_ptr<const ManifoldSpec> spec_;
    double tol_;
    double r_floor_ = 1e-6;
};

// Full chart-level connect per pair; for small sample sets.
class GenericProvider : public PhaseProvider {
  public:
    GenericProvider(std::shared_ptr<const ManifoldSpec> spec, ConnectOptions opt = {})
        : spec_(std::move(spec)), opt_(opt) {
        opt_.check_trust = false;
    }

    PairData pair(double r, double th, double rp, double thp) const override {
        PairData out;
        auto sol = connect(*spec_, point_of(r, th), point_of(rp, thp), opt_);
        out.valid = true;
        out.Phi = sol.phase();
        out.d = sol.d;
        out.a = amplitude_from_solution(*spec_, sol);
        out.p0 = polar_covector(sol.z0, sol.p0);
        out.p1 = polar_covector(sol.z1, sol.p1);
        return out;
    }

    std::pair<double, double> midpoint(double r, double th, double rp, double thp,
                                       double frac) const override {
        auto sol = connect(*spec_, point_of(r, th), point_of(rp, thp), opt_);
        Point m = geodesic_point(*spec_, sol, frac);
        if (m.chart == Chart::Collar) return {m.q[0], m.q[1]};
        return {m.q.norm(), std::atan2(m.q[1], m.q[0])};
    }

    std::string name() const override { return "generic[" + spec_->name + "]"; }

  private:
    std::shared_ptr<const ManifoldSpec> spec_;
    ConnectOptions opt_;

    Point point_of(double r, double th) const {
        if (!spec_->has_cap || in_collar_domain(*spec_, r)) return Point::collar(r, th);
        return Point::cap(r * std::cos(th), r * std::sin(th));
    }

    VecN polar_covector(const Point& z, const VecN& p) const {
        if (z.chart == Chart::Collar) return p;
        // Cap chart: pull the Cartesian covector back to polar labels.
        const double r = z.q.norm(), th = std::atan2(z.q[1], z.q[0]);
        const double c = std::cos(th), s = std::sin(th);
        return VecN(c * p[0] + s * p[1], r * (-s * p[0] + c * p[1]));
    }
};

// Provider choice for a preset spec on a grid window.
inline std::shared_ptr<PhaseProvider> make_provider(std::shared_ptr<const ManifoldSpec> spec,
                                                    std::shared_ptr<const GridDiscretization> grid,
                                                    int i_lo, int i_hi, int kmax) {
    if (spec->perfectly_conic() && spec->n == 2) {
        // Plane and exact cones have the closed form everywhere.
        return std::make_shared<ConeFormProvider>(spec->rho);
    }
    (void)grid;
    return std::make_shared<TableProvider>(spec, grid, i_lo, i_hi, kmax);
}

}  // namespace cwave
