#pragma once

// Local Schrodinger integral operators on the reference grid:
//   S_b(t) f(z) = (2 pi i t)^{-n/2} Int e^{i Phi(z,z')/t} a(z,z') b(z,z',t) f(z') dg(z')
// with plain tensor quadrature under a per-cell phase guard: the phase may
// vary by at most pi/2 across a z'-cell, otherwise the apply refuses and
// names the worst cell and the smallest admissible |t|.

#include "conicwave/hamiltonian.hpp"
#include "conicwave/phase_provider.hpp"

namespace cwave {

struct ResolutionError : std::runtime_error {
    double worst_ratio;
    double min_admissible_t;
    int worst_out_node, worst_in_node;
    ResolutionError(double ratio, double tmin, int oi, int ij)
        : std::runtime_error("lsio_apply: phase guard violated (cell phase " +
                             std::to_string(ratio * kPi / 2.0) + " rad); need |t| >= " +
                             std::to_string(tmin)),
          worst_ratio(ratio),
          min_admissible_t(tmin),
          worst_out_node(oi),
          worst_in_node(ij) {}
};

// Product symbol sampled on grid nodes.
struct LsioSymbol {
    std::vector<double> bz, bzp;  // full-grid node arrays
    std::vector<int> out_nodes, in_nodes;

    static LsioSymbol from_masks(const GridDiscretization& g, std::vector<double> bz_,
                                 std::vector<double> bzp_) {
        LsioSymbol s;
        s.bz = std::move(bz_);
        s.bzp = std::move(bzp_);
        for (int k = 0; k < int(g.size()); ++k) {
            if (s.bz[size_t(k)] != 0.0) s.out_nodes.push_back(k);
            if (s.bzp[size_t(k)] != 0.0) s.in_nodes.push_back(k);
        }
        return s;
    }
};

class LsioOperator {
  public:
    LsioOperator(std::shared_ptr<const PhaseProvider> provider,
                 std::shared_ptr<const GridDiscretization> grid, LsioSymbol symbol,
                 size_t cache_pair_limit = 6'000'000)
        : prov_(std::move(provider)), grid_(std::move(grid)), sym_(std::move(symbol)) {
        const size_t pairs = sym_.out_nodes.size() * sym_.in_nodes.size();
        if (pairs > 0 && pairs <= cache_pair_limit) build_cache();
    }

    const LsioSymbol& symbol() const { return sym_; }
    const GridDiscretization& grid() const { return *grid_; }

    // S_b(t) f. Guard violations throw ResolutionError.
    GridField apply(double t, const GridField& f) const {
        GridField out(grid_);
        if (t == 0.0) {
            for (int k : sym_.out_nodes)
                out.v[size_t(k)] = sym_.bz[size_t(k)] * sym_.bzp[size_t(k)] * f.v[size_t(k)];
            return out;
        }
        const complexd pref = std::pow(complexd(0.0, 2.0 * kPi * t), -0.5 * grid_->spec->n);
        const double inv_t = 1.0 / t;
        std::vector<double> worst(sym_.out_nodes.size(), 0.0);
        parallel_for(worker_threads(), sym_.out_nodes.size(), [&](size_t io) {
            const int oi = sym_.out_nodes[io];
            complexd acc(0, 0);
            double w_ratio = 0.0;
            for (size_t ii = 0; ii < sym_.in_nodes.size(); ++ii) {
                const int ij = sym_.in_nodes[ii];
                double Phi, a, p1r, p1t;
                if (!pair_lookup(io, ii, oi, ij, Phi, a, p1r, p1t)) continue;
                const double cell_phase =
                    std::max(std::abs(p1r) * grid_->dr, std::abs(p1t) * grid_->dtheta) *
                    std::abs(inv_t);
                w_ratio = std::max(w_ratio, cell_phase / (kPi / 2.0));
                const complexd ker =
                    pref * std::polar(a * sym_.bz[size_t(oi)] * sym_.bzp[size_t(ij)], Phi * inv_t);
                acc += ker * f.v[size_t(ij)] * grid_->weights[size_t(ij)];
            }
            out.v[size_t(oi)] = acc;
            worst[io] = w_ratio;
        });
        double wr = 0.0;
        size_t wio = 0;
        for (size_t io = 0; io < worst.size(); ++io)
            if (worst[io] > wr) {
                wr = worst[io];
                wio = io;
            }
        if (wr > 1.0)
            throw ResolutionError(wr, std::abs(t) * wr, sym_.out_nodes[wio], -1);
        return out;
    }

    // Stride-subsampled quadrature (same kernel, every stride-th node per
    // direction, weights scaled): Richardson partner for error estimates.
    GridField apply_subsampled(double t, const GridField& f, int stride = 2) const {
        GridField out(grid_);
        if (t == 0.0) return apply(t, f);
        const complexd pref = std::pow(complexd(0.0, 2.0 * kPi * t), -0.5 * grid_->spec->n);
        const double inv_t = 1.0 / t;
        const int nth = grid_->ntheta;
        parallel_for(worker_threads(), sym_.out_nodes.size(), [&](size_t io) {
            const int oi = sym_.out_nodes[io];
            complexd acc(0, 0);
            for (size_t ii = 0; ii < sym_.in_nodes.size(); ++ii) {
                const int ij = sym_.in_nodes[ii];
                if ((ij / nth) % stride != 0 || (ij % nth) % stride != 0) continue;
                double Phi, a, p1r, p1t;
                if (!pair_lookup(io, ii, oi, ij, Phi, a, p1r, p1t)) continue;
                const complexd ker =
                    pref * std::polar(a * sym_.bz[size_t(oi)] * sym_.bzp[size_t(ij)], Phi * inv_t);
                acc += ker * f.v[size_t(ij)] * grid_->weights[size_t(ij)] * double(stride * stride);
            }
            out.v[size_t(oi)] = acc;
        });
        return out;
    }

    // Kernel entry (for kernel-level regression checks).
    complexd kernel(double t, int oi, int ij) const {
        PairData pd = pair_of(oi, ij);
        if (!pd.valid) return complexd(0, 0);
        const complexd pref = std::pow(complexd(0.0, 2.0 * kPi * t), -0.5 * grid_->spec->n);
        return pref * std::polar(pd.a * sym_.bz[size_t(oi)] * sym_.bzp[size_t(ij)], pd.Phi / t);
    }

    PairData pair_of(int oi, int ij) const {
        const int nth = grid_->ntheta;
        return prov_->pair(grid_->r[size_t(oi / nth)], grid_->theta(oi % nth),
                           grid_->r[size_t(ij / nth)], grid_->theta(ij % nth));
    }

  private:
    std::shared_ptr<const PhaseProvider> prov_;
    std::shared_ptr<const GridDiscretization> grid_;
    LsioSymbol sym_;
    bool cached_ = false;
    std::vector<double> cPhi_, ca_, cp1r_, cp1t_;
    std::vector<uint8_t> cvalid_;

    void build_cache() {
        const size_t no = sym_.out_nodes.size(), ni = sym_.in_nodes.size();
        cPhi_.resize(no * ni);
        ca_.resize(no * ni);
        cp1r_.resize(no * ni);
        cp1t_.resize(no * ni);
        cvalid_.assign(no * ni, 0);
        parallel_for(worker_threads(), no, [&](size_t io) {
            for (size_t ii = 0; ii < ni; ++ii) {
                PairData pd = pair_of(sym_.out_nodes[io], sym_.in_nodes[ii]);
                const size_t k = io * ni + ii;
                if (!pd.valid) continue;
                cvalid_[k] = 1;
                cPhi_[k] = pd.Phi;
                ca_[k] = pd.a;
                cp1r_[k] = pd.p1[0];
                cp1t_[k] = pd.p1[1];
            }
        });
        cached_ = true;
    }

    bool pair_lookup(size_t io, size_t ii, int oi, int ij, double& Phi, double& a, double& p1r,
                     double& p1t) const {
        if (cached_) {
            const size_t k = io * sym_.in_nodes.size() + ii;
            if (!cvalid_[k]) {
                check_support(oi, ij);
                return false;
            }
            Phi = cPhi_[k];
            a = ca_[k];
            p1r = cp1r_[k];
            p1t = cp1t_[k];
            return true;
        }
        PairData pd = pair_of(oi, ij);
        if (!pd.valid) {
            check_support(oi, ij);
            return false;
        }
        Phi = pd.Phi;
        a = pd.a;
        p1r = pd.p1[0];
        p1t = pd.p1[1];
        return true;
    }

    void check_support(int oi, int ij) const {
        if (std::abs(sym_.bz[size_t(oi)] * sym_.bzp[size_t(ij)]) > 1e-12)
            throw std::runtime_error(
                "lsio: symbol support reaches pairs outside the provider's coverage");
    }
};

// max over field pairs of |<S(t)f, g> - <f, S(-t)g>| / (|f| |g|).
inline double adjoint_defect(const LsioOperator& op, double t,
                             const std::vector<std::pair<GridField, GridField>>& pairs) {
    double worst = 0.0;
    for (const auto& [f, g] : pairs) {
        const complexd lhs = inner(op.apply(t, f), g);
        const complexd rhs = inner(f, op.apply(-t, g));
        worst = std::max(worst, std::abs(lhs - rhs) / (f.norm2() * g.norm2()));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Kernel-level residual decomposition: (d/dt + i H_{z'}) of the kernel,
// projected onto {t^-2, t^-1, t^0} by sampling at t, t/2, t/4.
// ---------------------------------------------------------------------------

struct TSplitRow {
    int out_node = 0, in_node = 0;
    double c2 = 0, c1 = 0, c0 = 0;  // fitted |coefficients|
    double eikonal = 0;             // |Phi - 1/2 |grad' Phi|^2| from the provider data
};

inline std::vector<TSplitRow> t_split_check(const PhaseProvider& prov,
                                            const DiscreteHamiltonian& H,
                                            const std::vector<std::pair<int, int>>& samples,
                                            double t) {
    const auto& g = *H.grid;
    const int nth = g.ntheta;
    std::vector<TSplitRow> rows;
    for (auto [oi, ij] : samples) {
        const double r = g.r[size_t(oi / nth)], th = g.theta(oi % nth);
        const int i0 = ij / nth, j0 = ij % nth;
        // Smooth connector data on a 5x5 z'-patch: differencing the kernel's
        // oscillation directly would swamp the cancellation being tested, so
        // H_{z'} acts through the tabulated phase gradient and amplitude.
        double Phi[5][5], aa[5][5], p1r[5][5], p1t[5][5];
        for (int di = -2; di <= 2; ++di)
            for (int dj = -2; dj <= 2; ++dj) {
                const int i = i0 + di;
                const int j = ((j0 + dj) % nth + nth) % nth;
                PairData pd = prov.pair(r, th, g.r[size_t(i)], g.theta(j));
                if (!pd.valid) throw std::runtime_error("t_split_check: pair not covered");
                Phi[di + 2][dj + 2] = pd.Phi;
                aa[di + 2][dj + 2] = pd.a;
                p1r[di + 2][dj + 2] = pd.p1[0];
                p1t[di + 2][dj + 2] = pd.p1[1];
            }
        double A, dA, d2A;
        g.spec->polar_angular(g.r[size_t(i0)], A, dA, d2A);
        double Am, dAm, d2Am, Ap, dAp, d2Ap;
        g.spec->polar_angular(g.r[size_t(i0) - 1], Am, dAm, d2Am);
        g.spec->polar_angular(g.r[size_t(i0) + 1], Ap, dAp, d2Ap);
        const double sA = std::sqrt(A);
        const double dr = g.dr, dth = g.dtheta;

        TSplitRow row;
        row.out_node = oi;
        row.in_node = ij;
        const double grad2 = p1r[2][2] * p1r[2][2] + p1t[2][2] * p1t[2][2] / A;
        row.eikonal = std::abs(Phi[2][2] - 0.5 * grad2);

        // Laplace-Beltrami of Phi and a in the orthogonal polar frame.
        const double lapPhi = ((std::sqrt(Ap) * p1r[3][2] - std::sqrt(Am) * p1r[1][2]) /
                                   (2.0 * dr) +
                               (p1t[2][3] - p1t[2][1]) / (2.0 * dth) / sA) /
                              sA;
        const double a_r = (aa[3][2] - aa[1][2]) / (2.0 * dr);
        const double a_t = (aa[2][3] - aa[2][1]) / (2.0 * dth);
        const double a_rr = (aa[3][2] - 2.0 * aa[2][2] + aa[1][2]) / (dr * dr);
        const double a_tt = (aa[2][3] - 2.0 * aa[2][2] + aa[2][1]) / (dth * dth);
        const double lap_a = a_rr + 0.5 * dA / A * a_r + a_tt / A;
        const double gradPhi_grada = p1r[2][2] * a_r + p1t[2][2] * a_t / A;

        // R(tau) = FD_t(K)/K + i (HK)/K with HK assembled from the smooth data.
        std::array<complexd, 3> R;
        std::array<double, 3> taus{t, t / 2.0, t / 4.0};
        const int n = g.spec->n;
        for (int k = 0; k < 3; ++k) {
            const double tau = taus[size_t(k)];
            const double hh = 0.002 * tau;
            auto kval = [&](double tt) {
                return std::pow(complexd(0.0, 2.0 * kPi * tt), -0.5 * n) *
                       std::polar(aa[2][2], Phi[2][2] / tt);
            };
            const complexd dK_over_K = (kval(tau + hh) - kval(tau - hh)) / (2.0 * hh) / kval(tau);
            // (H K)/K = -1/2 [ (i lapPhi/tau - grad2/tau^2) + 2i gradPhi.grad a/(a tau)
            //                  + lap a / a ].
            const complexd HK_over_K =
                -0.5 * (complexd(0.0, lapPhi / tau) - complexd(grad2 / (tau * tau), 0.0) +
                        complexd(0.0, 2.0 * gradPhi_grada / (aa[2][2] * tau)) +
                        complexd(lap_a / aa[2][2], 0.0));
            R[size_t(k)] = dK_over_K + complexd(0, 1) * HK_over_K;
        }
        // Solve R = c2/tau^2 + c1/tau + c0 exactly on the three samples.
        // Vandermonde in u = 1/tau.
        const double u0 = 1 / taus[0], u1 = 1 / taus[1], u2 = 1 / taus[2];
        auto det3 = [](double a00, double a01, double a02, double a10, double a11, double a12,
                       double a20, double a21, double a22) {
            return a00 * (a11 * a22 - a12 * a21) - a01 * (a10 * a22 - a12 * a20) +
                   a02 * (a10 * a21 - a11 * a20);
        };
        const double den = det3(u0 * u0, u0, 1, u1 * u1, u1, 1, u2 * u2, u2, 1);
        auto solve_col = [&](int col) {
            std::array<complexd, 3> rhs = R;
            // Cramer with column replaced.
            std::array<std::array<complexd, 3>, 3> M{{{u0 * u0, u0, 1.0},
                                                      {u1 * u1, u1, 1.0},
                                                      {u2 * u2, u2, 1.0}}};
            for (int rr = 0; rr < 3; ++rr) M[size_t(rr)][size_t(col)] = rhs[size_t(rr)];
            const complexd d = M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) -
                               M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
                               M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]);
            return d / den;
        };
        row.c2 = std::abs(solve_col(0));
        row.c1 = std::abs(solve_col(1));
        row.c0 = std::abs(solve_col(2));
        rows.push_back(row);
    }
    return rows;
}

// L2 operator-norm estimate of psi1 [ d/dt S(t) + i S(t) H ] psi0 applied to
// test fields, per time; the parametrix residual must stay bounded in t.
inline double residual_operator_ratio(const LsioOperator& S, const DiscreteHamiltonian& H,
                                      const std::vector<double>& psi1, double t,
                                      const GridField& f) {
    const double hh = 0.02 * t;
    GridField Sp = S.apply(t + hh, f), Sm = S.apply(t - hh, f);
    GridField Hf = H.apply(f);
    GridField SH = S.apply(t, Hf);
    GridField out = Sp;
    for (size_t k = 0; k < out.v.size(); ++k) {
        out.v[k] = psi1[k] * ((Sp.v[k] - Sm.v[k]) / (2.0 * hh) + complexd(0, 1) * SH.v[k]);
    }
    return out.norm2() / f.norm2();
}

// ---------------------------------------------------------------------------
// Patch quadrature for kernel-level composition / dispersive checks
// ---------------------------------------------------------------------------

struct PolarPatch {
    std::vector<double> r, th, w;  // flattened midpoint nodes and dg-weights

    static PolarPatch make(const ManifoldSpec& spec, double r0, double r1, double th0, double th1,
                           int mr, int mt) {
        PolarPatch p;
        const double hr = (r1 - r0) / mr, ht = (th1 - th0) / mt;
        p.r.reserve(size_t(mr) * size_t(mt));
        for (int i = 0; i < mr; ++i)
            for (int j = 0; j < mt; ++j) {
                const double rr = r0 + (i + 0.5) * hr, tt = th0 + (j + 0.5) * ht;
                p.r.push_back(rr);
                p.th.push_back(tt);
                p.w.push_back(std::sqrt(grid_angular_coeff(spec, rr, tt)) * hr * ht);
            }
        return p;
    }
    size_t size() const { return r.size(); }
};

using TwoPointSymbol = std::function<double(double, double, double, double)>;

struct ComposeSample {
    complexd K1{0, 0}, K2{0, 0};
    double E = 0.0;  // |K1 - K2| * (2 pi (t+t'))^{n/2}
    double wr = 0.0, wth = 0.0;  // the geodesic midpoint used for the symbol
};

// Kernel of S_b(t) S_b'(t') at (z, z'') by patch quadrature, against the
// composition-law kernel S_c(t+t') with c = b(z,w*) b'(w*,z'').
inline ComposeSample compose_sample(const PhaseProvider& prov, const ManifoldSpec& spec,
                                    const TwoPointSymbol& b, const TwoPointSymbol& bp, double r,
                                    double th, double rpp, double thpp, double t, double tp,
                                    const PolarPatch& patch) {
    ComposeSample out;
    const int n = spec.n;
    const complexd pref_t = std::pow(complexd(0.0, 2.0 * kPi * t), -0.5 * n);
    const complexd pref_tp = std::pow(complexd(0.0, 2.0 * kPi * tp), -0.5 * n);
    complexd acc(0, 0);
    for (size_t k = 0; k < patch.size(); ++k) {
        const double rw = patch.r[k], tw = patch.th[k];
        PairData g1 = prov.pair(r, th, rw, tw);
        PairData g2 = prov.pair(rw, tw, rpp, thpp);
        if (!g1.valid || !g2.valid) continue;
        const double bb = b(r, th, rw, tw) * bp(rw, tw, rpp, thpp);
        if (bb == 0.0) continue;
        acc += pref_t * pref_tp *
               std::polar(g1.a * g2.a * bb, g1.Phi / t + g2.Phi / tp) * patch.w[k];
    }
    out.K1 = acc;
    auto [wr, wth] = prov.midpoint(r, th, rpp, thpp, t / (t + tp));
    out.wr = wr;
    out.wth = wth;
    PairData g = prov.pair(r, th, rpp, thpp);
    const complexd pref_s = std::pow(complexd(0.0, 2.0 * kPi * (t + tp)), -0.5 * n);
    out.K2 = pref_s * std::polar(g.a * b(r, th, wr, wth) * bp(wr, wth, rpp, thpp),
                                 g.Phi / (t + tp));
    out.E = std::abs(out.K1 - out.K2) * std::pow(2.0 * kPi * (t + tp), 0.5 * n);
    return out;
}

// sup_z |[S_b(t)* S_b'(s)](z, z0)| over an evaluation set, by patch quadrature.
inline double dispersive_column_sup(const PhaseProvider& prov, const ManifoldSpec& spec,
                                    const TwoPointSymbol& b, const TwoPointSymbol& bp, double t,
                                    double s, double r0c, double th0c,
                                    const std::vector<std::pair<double, double>>& eval_pts,
                                    const PolarPatch& patch) {
    const int n = spec.n;
    const complexd pref_t = std::conj(std::pow(complexd(0.0, 2.0 * kPi * t), -0.5 * n));
    const complexd pref_s = std::pow(complexd(0.0, 2.0 * kPi * s), -0.5 * n);
    double sup = 0.0;
    for (auto& [re, the] : eval_pts) {
        complexd acc(0, 0);
        for (size_t k = 0; k < patch.size(); ++k) {
            const double rw = patch.r[k], tw = patch.th[k];
            PairData g1 = prov.pair(rw, tw, re, the);   // K_b(t, w, z)
            PairData g2 = prov.pair(rw, tw, r0c, th0c); // K_b'(s, w, z0)
            if (!g1.valid || !g2.valid) continue;
            const double bb = b(rw, tw, re, the) * bp(rw, tw, r0c, th0c);
            if (bb == 0.0) continue;
            acc += pref_t * pref_s *
                   std::polar(g1.a * g2.a * bb, -g1.Phi / t + g2.Phi / s) * patch.w[k];
        }
        sup = std::max(sup, std::abs(acc));
    }
    return sup;
}

}  // namespace cwave
