#pragma once

// Exact decomposition of the cutoff evolution:
//   psi0 u(t) = U_a(t) psi0 f
//             + Int_0^t [ -(U' + i U H)(t-s) psi0 u(s) + U(t-s) [iH, psi0] u(s) ] ds
// evaluated term by term on the grid. The time derivative of the kernel is
// central-differenced, the s-integral is Simpson on [0, t - tau_min] (the
// oscillatory quadrature needs |t - s| >= tau_min), and every quadrature
// error source is estimated by refinement and charged to the reported
// tolerance budget.

#include "conicwave/cutoffs.hpp"
#include "conicwave/lsio.hpp"
#include "conicwave/norms.hpp"

namespace cwave {

struct DuhamelReport {
    double defect = 0.0;          // |LHS - RHS|_2 at the final time
    double tol_combined = 0.0;    // quadrature tolerance budget
    double tol_lsio = 0.0, tol_prop = 0.0, tol_simpson = 0.0, tol_tail = 0.0;
    double norm_parametrix = 0.0, norm_residual = 0.0, norm_commutator = 0.0;
    double l4l4_parametrix = 0.0, l4l4_residual = 0.0, l4l4_commutator = 0.0;
    double parametrix_share = 0.0;  // |par| / (|par| + |resid| + |comm|)
};

struct DuhamelOptions {
    int s_nodes = 8;        // Simpson intervals (even)
    double tau_min = 0.05;  // smallest |t - s| the kernel quadrature accepts
    int t_nodes = 4;        // report the terms on this many times for L4 norms
    int propagate_steps = 0;  // 0: derive from the spectral step rule
};

inline GridField residual_term(const LsioOperator& U, const DiscreteHamiltonian& H, double tau,
                               const GridField& psi0_u) {
    // (U' + i U H)(tau) psi0 u; kernel-side derivative by central differences.
    const double hh = 0.02 * tau;
    GridField Sp = U.apply(tau + hh, psi0_u), Sm = U.apply(tau - hh, psi0_u);
    GridField Hf = H.apply(psi0_u);
    GridField SH = U.apply(tau, Hf);
    GridField out = Sp;
    for (size_t k = 0; k < out.v.size(); ++k)
        out.v[k] = (Sp.v[k] - Sm.v[k]) / (2.0 * hh) + complexd(0, 1) * SH.v[k];
    return out;
}

inline DuhamelReport duhamel_diagnostic(const ManifoldSpec& spec,
                                        const DiscreteHamiltonian& H, const LsioOperator& U,
                                        const CutoffFamily& fam, int member, const GridField& f0,
                                        double t, const DuhamelOptions& opt = {}) {
    DuhamelReport rep;
    auto grid = H.grid;
    const auto psi0 = fam.level(member, 0);

    // Snapshot ladder: Simpson nodes on [0, t - tau_min] for each report time
    // plus the report times themselves.
    std::vector<double> t_list;
    for (int k = 1; k <= opt.t_nodes; ++k) t_list.push_back(t * k / opt.t_nodes);
    std::vector<double> snaps;
    for (double tt : t_list) {
        snaps.push_back(tt);
        const double s_hi = std::max(tt - opt.tau_min, 0.0);
        for (int j = 0; j <= opt.s_nodes; ++j) snaps.push_back(s_hi * j / opt.s_nodes);
    }
    std::sort(snaps.begin(), snaps.end());
    snaps.erase(std::unique(snaps.begin(), snaps.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                snaps.end());

    const int steps = opt.propagate_steps > 0
                          ? opt.propagate_steps
                          : int(std::ceil(t * H.gershgorin / 0.5));
    PropagateOptions popt;
    auto run = propagate(H, f0, t, steps, popt, snaps);
    auto snapshot_at = [&](double ts) -> const GridField& {
        for (size_t k = 0; k < snaps.size(); ++k)
            if (std::abs(snaps[k] - ts) < 1e-12) return run.snapshots[k];
        throw std::logic_error("duhamel: missing snapshot");
    };
    rep.tol_prop = 0.0;
    {
        // CN step-halving estimate at the final time.
        auto run2 = propagate(H, f0, t, 2 * steps, popt, {t});
        rep.tol_prop = (run2.u - run.u).norm2() / 3.0;
    }

    std::vector<double> l4_par, l4_res, l4_com;
    for (double tt : t_list) {
        const GridField& u_t = snapshot_at(tt);
        GridField lhs = masked(u_t, psi0);
        GridField par = U.apply(tt, masked(f0, psi0));

        const double s_hi = std::max(tt - opt.tau_min, 0.0);
        GridField resid_int(grid), comm_int(grid);
        double simpson_coarse_res = 0.0, simpson_coarse_com = 0.0;
        GridField resid_int_coarse(grid), comm_int_coarse(grid);
        for (int j = 0; j <= opt.s_nodes; ++j) {
            const double s = s_hi * j / opt.s_nodes;
            const double w =
                (j == 0 || j == opt.s_nodes) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
            const double ws = w * (s_hi / opt.s_nodes) / 3.0;
            const GridField& us = snapshot_at(s);
            GridField r_term = residual_term(U, H, tt - s, masked(us, psi0));
            GridField c_term = U.apply(tt - s, H.commutator_i(psi0, us));
            axpy(resid_int, -ws, r_term);
            axpy(comm_int, ws, c_term);
            if (j % 2 == 0) {
                const double wc = (j == 0 || j == opt.s_nodes) ? 1.0 : (j % 4 == 2 ? 4.0 : 2.0);
                const double wsc = wc * (2.0 * s_hi / opt.s_nodes) / 3.0;
                axpy(resid_int_coarse, -wsc, r_term);
                axpy(comm_int_coarse, wsc, c_term);
            }
        }
        simpson_coarse_res = (resid_int - resid_int_coarse).norm2() / 15.0;
        simpson_coarse_com = (comm_int - comm_int_coarse).norm2() / 15.0;

        if (tt == t_list.back()) {
            GridField rhs = par + resid_int + comm_int;
            rep.defect = (lhs - rhs).norm2();
            rep.norm_parametrix = par.norm2();
            rep.norm_residual = resid_int.norm2();
            rep.norm_commutator = comm_int.norm2();
            rep.parametrix_share =
                rep.norm_parametrix /
                (rep.norm_parametrix + rep.norm_residual + rep.norm_commutator + 1e-300);
            rep.tol_simpson = simpson_coarse_res + simpson_coarse_com;
            // Tail of the s-integral cut at tau_min.
            GridField tail_probe =
                residual_term(U, H, opt.tau_min, masked(snapshot_at(s_hi), psi0));
            GridField tail_probe2 = U.apply(opt.tau_min, H.commutator_i(psi0, snapshot_at(s_hi)));
            rep.tol_tail = opt.tau_min * (tail_probe.norm2() + tail_probe2.norm2());
            // Oscillatory-quadrature estimate: Richardson against the
            // stride-2 subsampled application, scaled onto every term.
            GridField par_coarse = U.apply_subsampled(tt, masked(f0, psi0), 2);
            const double d_par = (par - par_coarse).norm2() / 3.0;
            const double rel = d_par / std::max(par.norm2(), 1e-300);
            rep.tol_lsio = d_par + rel * (resid_int.norm2() + comm_int.norm2());
        }
        l4_par.push_back(par.norm_lr(4.0));
        l4_res.push_back(resid_int.norm_lr(4.0));
        l4_com.push_back(comm_int.norm_lr(4.0));
    }
    auto l4t = [&](const std::vector<double>& vals) {
        double acc = 0;
        for (double v : vals) acc += (t / opt.t_nodes) * std::pow(v, 4.0);
        return std::pow(acc, 0.25);
    };
    rep.l4l4_parametrix = l4t(l4_par);
    rep.l4l4_residual = l4t(l4_res);
    rep.l4l4_commutator = l4t(l4_com);
    rep.tol_combined = rep.tol_lsio + rep.tol_prop + rep.tol_simpson + rep.tol_tail;
    return rep;
}

}  // namespace cwave
