#pragma once

// H = 1/2 nabla* nabla discretized in divergence form on the polar grid.
// Rotationally symmetric metrics get an exact angular-mode decomposition
// (the DFT block-diagonalization of the same 5-point operator), which makes
// Crank-Nicolson stepping and spectral functions of H cheap. The assembled
// sparse operator is kept alongside for commutators and the general path.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>

#include "conicwave/fft.hpp"
#include "conicwave/grid.hpp"

namespace cwave {

struct DiscreteHamiltonian {
    std::shared_ptr<const GridDiscretization> grid;
    Eigen::SparseMatrix<double> mat;  // plain-value action (weighted-symmetric)
    bool modal = false;
    // Modal radial data (rot-symmetric): H_m = tridiag(base) + s(m) * angpot.
    std::vector<double> diag_base, sub;  // nr, nr-1
    std::vector<double> angpot;          // 1/(2 A_i)
    double gershgorin = 0.0;

    int nr() const { return grid->nr; }
    int nth() const { return grid->ntheta; }

    double mode_symbol(int m) const {
        const double dth = grid->dtheta;
        return (2.0 - 2.0 * std::cos(m * dth)) / (dth * dth);
    }

    GridField apply(const GridField& f) const {
        GridField out(grid);
        const long N = long(f.v.size());
        Eigen::VectorXd xr(N), xi(N);
        for (long k = 0; k < N; ++k) {
            xr[k] = f.v[size_t(k)].real();
            xi[k] = f.v[size_t(k)].imag();
        }
        Eigen::VectorXd yr = mat * xr, yi = mat * xi;
        for (long k = 0; k < N; ++k) out.v[size_t(k)] = complexd(yr[k], yi[k]);
        return out;
    }

    // i[H, psi] f = i(H(psi f) - psi H f) for a real grid mask psi.
    GridField commutator_i(const std::vector<double>& psi, const GridField& f) const {
        GridField pf = masked(f, psi);
        GridField a = apply(pf);
        GridField b = apply(f);
        GridField out(grid);
        for (size_t k = 0; k < out.v.size(); ++k)
            out.v[k] = complexd(0, 1) * (a.v[k] - psi[k] * b.v[k]);
        return out;
    }
};

inline DiscreteHamiltonian build_hamiltonian(std::shared_ptr<const GridDiscretization> grid) {
    DiscreteHamiltonian H;
    H.grid = grid;
    const int nr = grid->nr, nth = grid->ntheta;
    const double dr = grid->dr, dth = grid->dtheta;

    auto face_w = [&](int i, int j) -> double {  // sqrt(A) at radial face i (0..nr)
        if (grid->rot_symmetric) return grid->A_face[size_t(i)];
        const double rf = grid->r_lo + i * dr;
        if (rf <= 1e-14) return 0.0;
        return std::sqrt(grid_angular_coeff(*grid->spec, rf, grid->theta(j)));
    };

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(grid->size() * 5);
    for (int i = 0; i < nr; ++i) {
        for (int j = 0; j < nth; ++j) {
            const double sg = grid->sqrtg_at(i, j);
            const double c = 1.0 / (2.0 * sg);
            double diag = 0.0;
            // Radial faces.
            const double wp = face_w(i + 1, j), wm = face_w(i, j);
            if (i + 1 < nr) {
                trip.emplace_back(int(grid->idx(i, j)), int(grid->idx(i + 1, j)),
                                  -c * wp / (dr * dr));
            }
            // Outer boundary: Dirichlet ghost at distance dr.
            diag += c * wp / (dr * dr);
            if (i > 0) {
                trip.emplace_back(int(grid->idx(i, j)), int(grid->idx(i - 1, j)),
                                  -c * wm / (dr * dr));
                diag += c * wm / (dr * dr);
            } else {
                // Innermost face: pole flux weight vanishes for cap grids;
                // excised grids get a Dirichlet face.
                diag += c * wm / (dr * dr);
            }
            // Angular faces (coefficient 1/sqrt(A) at the face).
            const double ap = grid->rot_symmetric
                                  ? 1.0 / grid->sqrtg[size_t(i)]
                                  : 2.0 / (std::sqrt(grid->A_at(i, j)) +
                                           std::sqrt(grid->A_at(i, (j + 1) % nth)));
            const double am = grid->rot_symmetric
                                  ? 1.0 / grid->sqrtg[size_t(i)]
                                  : 2.0 / (std::sqrt(grid->A_at(i, j)) +
                                           std::sqrt(grid->A_at(i, (j + nth - 1) % nth)));
            trip.emplace_back(int(grid->idx(i, j)), int(grid->idx(i, (j + 1) % nth)),
                              -c * ap / (dth * dth));
            trip.emplace_back(int(grid->idx(i, j)), int(grid->idx(i, (j + nth - 1) % nth)),
                              -c * am / (dth * dth));
            diag += c * (ap + am) / (dth * dth);
            trip.emplace_back(int(grid->idx(i, j)), int(grid->idx(i, j)), diag);
        }
    }
    H.mat.resize(int(grid->size()), int(grid->size()));
    H.mat.setFromTriplets(trip.begin(), trip.end());

    // Gershgorin bound.
    for (int k = 0; k < H.mat.outerSize(); ++k) {
        double row = 0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(H.mat, k); it; ++it)
            row += std::abs(it.value());
        H.gershgorin = std::max(H.gershgorin, row);
    }

    if (grid->rot_symmetric) {
        H.modal = true;
        H.diag_base.resize(size_t(nr));
        H.sub.resize(size_t(nr) - 1);
        H.angpot.resize(size_t(nr));
        for (int i = 0; i < nr; ++i) {
            const double sg = grid->sqrtg[size_t(i)];
            const double c = 1.0 / (2.0 * sg);
            const double wp = grid->A_face[size_t(i) + 1], wm = grid->A_face[size_t(i)];
            H.diag_base[size_t(i)] = c * (wp + wm) / (dr * dr);
            if (i + 1 < nr) H.sub[size_t(i)] = -c * wp / (dr * dr);
            H.angpot[size_t(i)] = 1.0 / (2.0 * grid->A[size_t(i)]);
        }
        // Note: sub as stored is row i's coupling to i+1; the weighted-
        // symmetric form divides by sqrtg of the neighbour row instead.
    }
    return H;
}

// --- angular mode transforms (rows of length ntheta) ------------------------

inline std::vector<std::vector<complexd>> to_modes(const GridField& f) {
    const int nr = f.grid->nr, nth = f.grid->ntheta;
    std::vector<std::vector<complexd>> modes(size_t(nth), std::vector<complexd>(size_t(nr), complexd(0, 0)));
    std::vector<complexd> row(size_t(nth), complexd(0, 0));
    for (int i = 0; i < nr; ++i) {
        for (int j = 0; j < nth; ++j) row[size_t(j)] = f.at(i, j);
        fft_inplace(row, false);
        for (int m = 0; m < nth; ++m) modes[size_t(m)][size_t(i)] = row[size_t(m)];
    }
    return modes;
}

inline GridField from_modes(std::shared_ptr<const GridDiscretization> grid,
                            const std::vector<std::vector<complexd>>& modes) {
    const int nr = grid->nr, nth = grid->ntheta;
    GridField f(grid);
    std::vector<complexd> row(size_t(nth), complexd(0, 0));
    for (int i = 0; i < nr; ++i) {
        for (int m = 0; m < nth; ++m) row[size_t(m)] = modes[size_t(m)][size_t(i)];
        fft_inplace(row, true);
        for (int j = 0; j < nth; ++j) f.at(i, j) = row[size_t(j)];
    }
    return f;
}

// Per-mode tridiagonal H_m applied to a radial vector.
inline void mode_apply(const DiscreteHamiltonian& H, int m, const std::vector<complexd>& u,
                       std::vector<complexd>& out) {
    const int nr = H.nr();
    const double s = H.mode_symbol(m);
    const auto& grid = *H.grid;
    out.resize(size_t(nr));
    for (int i = 0; i < nr; ++i) {
        complexd acc = (H.diag_base[size_t(i)] + s * H.angpot[size_t(i)]) * u[size_t(i)];
        if (i + 1 < nr) acc += H.sub[size_t(i)] * u[size_t(i) + 1];
        if (i > 0) {
            // Coupling to i-1: weighted symmetry gives -c_i * wm / dr^2 with
            // wm the shared face; equals sub[i-1] * sqrtg[i-1]/sqrtg[i].
            const double lower = H.sub[size_t(i) - 1] * grid.sqrtg[size_t(i) - 1] /
                                 grid.sqrtg[size_t(i)];
            acc += lower * u[size_t(i) - 1];
        }
        out[size_t(i)] = acc;
    }
}

// --- Crank-Nicolson propagation ---------------------------------------------

struct PropagateOptions {
    bool enforce_step_rule = true;  // steps >= ceil(t * gershgorin / 0.5)
    double absorb_strength = 1.0;
    double absorb_fraction = 0.2;  // outer fraction of the radius carrying the layer
    double absorb_abort = 0.01;    // abort when absorbed mass exceeds this of |f0|^2
};

struct PropagateResult {
    GridField u;
    double norm_drift = 0.0;    // | |u|/|f0| - 1 |
    double absorbed_mass = 0.0; // 1 - |u|^2/|f0|^2 (absorbing runs)
    std::vector<GridField> snapshots;
};

namespace detail {

// Thomas solve for complex tridiagonal (diag d, super e_i = row i -> i+1,
// sub l_i = row i+1 -> i).
inline void thomas(std::vector<complexd>& d, const std::vector<complexd>& e,
                   const std::vector<complexd>& l, std::vector<complexd>& rhs) {
    const size_t n = d.size();
    for (size_t i = 1; i < n; ++i) {
        const complexd w = l[i - 1] / d[i - 1];
        d[i] -= w * e[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= d[n - 1];
    for (size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - e[i] * rhs[i + 1]) / d[i];
}

}  // namespace detail

inline std::vector<double> absorbing_potential(const GridDiscretization& g, double strength,
                                               double fraction) {
    std::vector<double> W(size_t(g.nr), 0.0);
    const double r_a = g.r_hi - fraction * (g.r_hi - g.r_lo);
    for (int i = 0; i < g.nr; ++i) {
        const double r = g.r[size_t(i)];
        if (r > r_a) W[size_t(i)] = strength * std::pow((r - r_a) / (g.r_hi - r_a), 4);
    }
    return W;
}

// u(t) = exp(-i t H) f0 by Crank-Nicolson; optional snapshot times must be an
// ascending subset of the step grid (they are rounded to the nearest step).
inline PropagateResult propagate(const DiscreteHamiltonian& H, const GridField& f0, double t,
                                 int steps, const PropagateOptions& opt = {},
                                 const std::vector<double>& snapshot_times = {}) {
    if (steps <= 0) throw std::invalid_argument("propagate: steps must be positive");
    const int need = int(std::ceil(t * H.gershgorin / 0.5));
    if (opt.enforce_step_rule && steps < need)
        throw std::invalid_argument("propagate: steps " + std::to_string(steps) +
                                    " below the spectral step rule (need >= " +
                                    std::to_string(need) + ")");
    const auto& grid = *H.grid;
    const double dt = t / steps;
    const bool absorbing = grid.boundary == BoundaryKind::AbsorbingLayer;
    std::vector<double> W;
    if (absorbing) W = absorbing_potential(grid, opt.absorb_strength, opt.absorb_fraction);

    std::vector<size_t> snap_steps;
    for (double ts : snapshot_times)
        snap_steps.push_back(size_t(std::clamp<long long>(std::llround(ts / dt), 0, steps)));

    PropagateResult res;
    const double n0 = f0.norm2();

    if (!H.modal)
        throw std::runtime_error("propagate: general (non-symmetric) metrics use propagate_general");

    auto modes = to_modes(f0);
    const int nr = H.nr(), nth = H.nth();
    const complexd z0(0, 0);
    std::vector<complexd> dP(size_t(nr), z0), e(size_t(nr) - 1, z0), l(size_t(nr) - 1, z0),
        rhs(size_t(nr), z0), tmp(size_t(nr), z0);
    size_t next_snap = 0;
    std::vector<std::vector<std::vector<complexd>>> snap_modes;
    // Entries that round to step 0 are served from f0 directly.
    while (next_snap < snap_steps.size() && snap_steps[next_snap] == 0) ++next_snap;

    // March all modes step by step so snapshots can be assembled.
    const complexd ihalf(0.0, dt / 2.0);
    for (size_t step = 1; step <= size_t(steps); ++step) {
        for (int m = 0; m < nth; ++m) {
            auto& u = modes[size_t(m)];
            const double sym = H.mode_symbol(m);
            // rhs = (I - i dt/2 H_m - dt/2 W) u
            mode_apply(H, m, u, tmp);
            for (int i = 0; i < nr; ++i) {
                complexd val = u[size_t(i)] - ihalf * tmp[size_t(i)];
                if (absorbing) val -= (dt / 2.0) * W[size_t(i)] * u[size_t(i)];
                rhs[size_t(i)] = val;
            }
            for (int i = 0; i < nr; ++i) {
                dP[size_t(i)] = 1.0 + ihalf * (H.diag_base[size_t(i)] + sym * H.angpot[size_t(i)]);
                if (absorbing) dP[size_t(i)] += (dt / 2.0) * W[size_t(i)];
            }
            for (int i = 0; i + 1 < nr; ++i) {
                e[size_t(i)] = ihalf * H.sub[size_t(i)];
                l[size_t(i)] = ihalf * H.sub[size_t(i)] * grid.sqrtg[size_t(i)] /
                               grid.sqrtg[size_t(i) + 1];
            }
            detail::thomas(dP, e, l, rhs);
            u = rhs;
        }
        while (next_snap < snap_steps.size() && snap_steps[next_snap] == step) {
            snap_modes.push_back(modes);
            ++next_snap;
        }
    }

    res.u = from_modes(H.grid, modes);
    size_t si = 0;
    for (double ts : snapshot_times) {
        if (std::llround(ts / dt) <= 0) {
            res.snapshots.push_back(f0);
        } else if (si < snap_modes.size()) {
            res.snapshots.push_back(from_modes(H.grid, snap_modes[si]));
            ++si;
        }
    }
    const double n1 = res.u.norm2();
    res.norm_drift = std::abs(n1 / n0 - 1.0);
    res.absorbed_mass = std::max(0.0, 1.0 - (n1 * n1) / (n0 * n0));
    if (absorbing && res.absorbed_mass > opt.absorb_abort)
        throw std::runtime_error("propagate: absorbing layer captured " +
                                 std::to_string(res.absorbed_mass * 100.0) +
                                 "% of the mass; enlarge the domain or shorten t");
    return res;
}

// General (non-modal) Crank-Nicolson via BiCGSTAB; small grids only.
inline PropagateResult propagate_general(const DiscreteHamiltonian& H, const GridField& f0,
                                          double t, int steps, const PropagateOptions& opt = {}) {
    const int need = int(std::ceil(t * H.gershgorin / 0.5));
    if (opt.enforce_step_rule && steps < need)
        throw std::invalid_argument("propagate_general: steps below the spectral step rule");
    const double dt = t / steps;
    const long N = long(H.grid->size());
    Eigen::SparseMatrix<complexd> A = H.mat.cast<complexd>();
    Eigen::SparseMatrix<complexd> I(N, N);
    I.setIdentity();
    const complexd ihalf(0.0, dt / 2.0);
    Eigen::SparseMatrix<complexd> P = I + ihalf * A;
    Eigen::SparseMatrix<complexd> M = I - ihalf * A;
    Eigen::BiCGSTAB<Eigen::SparseMatrix<complexd>> solver;
    solver.setTolerance(1e-13);
    solver.compute(P);
    Eigen::VectorXcd u(N);
    for (long k = 0; k < N; ++k) u[k] = f0.v[size_t(k)];
    for (int s = 0; s < steps; ++s) {
        Eigen::VectorXcd rhs = M * u;
        u = solver.solveWithGuess(rhs, u);
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("propagate_general: linear solve failed to converge");
    }
    PropagateResult res;
    res.u = GridField(H.grid);
    for (long k = 0; k < N; ++k) res.u.v[size_t(k)] = u[k];
    res.norm_drift = std::abs(res.u.norm2() / f0.norm2() - 1.0);
    return res;
}

// --- spectral functions of H -------------------------------------------------

// Apply (1 + H)^{s/2} via the per-mode tridiagonal eigendecomposition. The
// fields must share one grid. |s| <= 2.
inline void sobolev_apply_many(const DiscreteHamiltonian& H, double s,
                               std::vector<GridField*> fields) {
    if (std::abs(s) > 2.0) throw std::invalid_argument("sobolev_apply: |s| <= 2 required");
    if (s == 0.0) return;
    if (!H.modal) {
        // Dense fallback for small general grids.
        const long N = long(H.grid->size());
        if (N > 4096)
            throw std::runtime_error("sobolev_apply: general-metric grid too large for the dense path");
        Eigen::MatrixXd D = Eigen::MatrixXd(H.mat);
        // Symmetrize w.r.t. weights: B = W^{1/2} H W^{-1/2}.
        Eigen::VectorXd w(N);
        for (long k = 0; k < N; ++k) w[k] = std::sqrt(H.grid->weights[size_t(k)]);
        for (long a = 0; a < N; ++a)
            for (long b = 0; b < N; ++b) D(a, b) *= w[a] / w[b];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
        const auto& V = es.eigenvectors();
        const auto& lam = es.eigenvalues();
        for (GridField* f : fields) {
            Eigen::VectorXcd x(N);
            for (long k = 0; k < N; ++k) x[k] = f->v[size_t(k)] * w[k];
            Eigen::VectorXcd c = V.transpose() * x;
            for (long k = 0; k < N; ++k)
                c[k] *= std::pow(std::max(1.0 + lam[k], 1e-12), s / 2.0);
            x = V * c;
            for (long k = 0; k < N; ++k) f->v[size_t(k)] = x[k] / w[k];
        }
        return;
    }
    const int nr = H.nr(), nth = H.nth();
    const auto& grid = *H.grid;
    std::vector<std::vector<std::vector<complexd>>> modes;
    modes.reserve(fields.size());
    for (GridField* f : fields) modes.push_back(to_modes(*f));

    // Weighted symmetrization of the radial operator (same for all m up to
    // the diagonal mode potential).
    Eigen::VectorXd subB(nr - 1);
    for (int i = 0; i + 1 < nr; ++i)
        subB[i] = H.sub[size_t(i)] * std::sqrt(grid.sqrtg[size_t(i)] / grid.sqrtg[size_t(i) + 1]);
    Eigen::VectorXd dsq(nr);
    for (int i = 0; i < nr; ++i) dsq[i] = std::sqrt(grid.sqrtg[size_t(i)]);

    for (int m = 0; m < nth; ++m) {
        const double sym = H.mode_symbol(m);
        Eigen::VectorXd diag(nr);
        for (int i = 0; i < nr; ++i)
            diag[i] = H.diag_base[size_t(i)] + sym * H.angpot[size_t(i)];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(diag, subB, Eigen::ComputeEigenvectors);
        const auto& V = es.eigenvectors();
        const auto& lam = es.eigenvalues();
        Eigen::VectorXd scale(nr);
        for (int k = 0; k < nr; ++k)
            scale[k] = std::pow(std::max(1.0 + lam[k], 1e-12), s / 2.0);
        for (auto& fm : modes) {
            Eigen::VectorXcd x(nr);
            for (int i = 0; i < nr; ++i) x[i] = fm[size_t(m)][size_t(i)] * dsq[i];
            Eigen::VectorXcd c = V.transpose() * x;
            for (int k = 0; k < nr; ++k) c[k] *= scale[k];
            x = V * c;
            for (int i = 0; i < nr; ++i) fm[size_t(m)][size_t(i)] = x[i] / dsq[i];
        }
    }
    for (size_t f = 0; f < fields.size(); ++f) *fields[f] = from_modes(H.grid, modes[f]);
}

inline GridField sobolev_apply(const DiscreteHamiltonian& H, double s, const GridField& f) {
    GridField out = f;
    sobolev_apply_many(H, s, {&out});
    return out;
}

// Lowest eigenpair of the m-th angular mode block (test/diagnostic helper).
inline std::pair<double, GridField> mode_ground_state(const DiscreteHamiltonian& H, int m) {
    const int nr = H.nr();
    const auto& grid = *H.grid;
    Eigen::VectorXd subB(nr - 1), diag(nr);
    for (int i = 0; i + 1 < nr; ++i)
        subB[i] = H.sub[size_t(i)] * std::sqrt(grid.sqrtg[size_t(i)] / grid.sqrtg[size_t(i) + 1]);
    const double sym = H.mode_symbol(m);
    for (int i = 0; i < nr; ++i) diag[i] = H.diag_base[size_t(i)] + sym * H.angpot[size_t(i)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, subB, Eigen::ComputeEigenvectors);
    GridField f(H.grid);
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < grid.ntheta; ++j)
            f.at(i, j) = es.eigenvectors()(i, 0) / std::sqrt(grid.sqrtg[size_t(i)]) *
                         std::polar(1.0, m * grid.theta(j));
    // Normalize in the weighted norm.
    const double n = f.norm2();
    for (auto& z : f.v) z /= n;
    return {es.eigenvalues()(0), f};
}

}  // namespace cwave
