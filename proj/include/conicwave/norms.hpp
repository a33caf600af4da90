#pragma once

// Admissible exponent pairs (exact rational check), mixed space-time norms,
// and the X norm: L2 + weighted quarter-power Sobolev term + the angular
// half-derivative surrogate acting per angular Fourier mode as the
// multiplier (x |m|)^{1/2} with a scattering-region cutoff and |m| >= 1.

#include "conicwave/hamiltonian.hpp"

namespace cwave {

struct Rational {
    long long num = 0, den = 1;
    bool inf = false;

    static Rational infinity() {
        Rational r;
        r.inf = true;
        return r;
    }
    static Rational of(long long n, long long d = 1) {
        Rational r;
        r.num = n;
        r.den = d;
        return r;
    }
    double value() const { return inf ? kInf : double(num) / double(den); }
    bool operator==(const Rational& o) const {
        if (inf || o.inf) return inf == o.inf;
        return num * o.den == o.num * den;
    }
};

enum class Admissibility { NonEndpoint, Endpoint, Inadmissible };

// Exact scaling check: 2/q + n/r = n/2, 2 <= q, r <= inf, (q,r,n) != (2,inf,2).
inline Admissibility admissible_check(const Rational& q, const Rational& r, int n) {
    auto ge2 = [](const Rational& x) { return x.inf || x.num >= 2 * x.den; };
    if (!ge2(q) || !ge2(r)) return Admissibility::Inadmissible;
    // 2/q + n/r - n/2 = 0 with exact integers: terms over common denominator
    // 2 q r (finite parts).
    long long lhs_num = 0, lhs_den = 1;
    auto add = [&](long long an, long long ad) {  // lhs += an/ad
        lhs_num = lhs_num * ad + an * lhs_den;
        lhs_den *= ad;
    };
    if (!q.inf) add(2 * q.den, q.num);
    if (!r.inf) add(static_cast<long long>(n) * r.den, r.num);
    add(-n, 2);
    if (lhs_num != 0) return Admissibility::Inadmissible;
    const bool q_is_2 = !q.inf && q.num == 2 * q.den;
    if (q_is_2 && r.inf && n == 2) return Admissibility::Inadmissible;
    return q_is_2 ? Admissibility::Endpoint : Admissibility::NonEndpoint;
}

inline Rational parse_exponent(const std::string& s) {
    if (s == "inf" || s == "Inf" || s == "INF") return Rational::infinity();
    const auto slash = s.find('/');
    if (slash == std::string::npos) return Rational::of(std::stoll(s));
    return Rational::of(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
}

// --- space-time fields -------------------------------------------------------

struct SpaceTimeField {
    std::vector<double> times;    // sample times (left edges of their cells)
    std::vector<double> wt;       // time weights
    std::vector<GridField> fields;

    static SpaceTimeField uniform(double t0, double t1, std::vector<GridField> f) {
        SpaceTimeField u;
        const size_t K = f.size();
        const double dt = (t1 - t0) / double(K);
        for (size_t k = 0; k < K; ++k) {
            u.times.push_back(t0 + double(k) * dt);
            u.wt.push_back(dt);
        }
        u.fields = std::move(f);
        return u;
    }
};

// Time-quadrature of spatial L^r norms to the q-th power; exact on
// piecewise-constant fields.
inline double mixed_norm(const SpaceTimeField& u, const Rational& q, const Rational& r) {
    if (q.inf) {
        double m = 0;
        for (const auto& f : u.fields) m = std::max(m, f.norm_lr(r.value()));
        return m;
    }
    const double qv = q.value();
    double s = 0;
    for (size_t k = 0; k < u.fields.size(); ++k)
        s += u.wt[k] * std::pow(u.fields[k].norm_lr(r.value()), qv);
    return std::pow(s, 1.0 / qv);
}

// --- X norm -------------------------------------------------------------------

struct XNormParts {
    double l2 = 0, mid = 0, ang = 0;
    double total() const { return l2 + mid + ang; }
};

struct XNormOptions {
    double eps_x = 0.1;
};

inline std::vector<XNormParts> x_norm_many(const DiscreteHamiltonian& H,
                                           const std::vector<const GridField*>& fields,
                                           const XNormOptions& opt = {}) {
    const auto& g = *H.grid;
    const auto& spec = *g.spec;
    std::vector<XNormParts> out(fields.size());
    // Quarter-power term, batched.
    std::vector<GridField> smoothed;
    smoothed.reserve(fields.size());
    for (const GridField* f : fields) smoothed.push_back(*f);
    {
        std::vector<GridField*> ptrs;
        for (auto& f : smoothed) ptrs.push_back(&f);
        sobolev_apply_many(H, 0.5, ptrs);  // (1+H)^{1/4}
    }
    for (size_t q = 0; q < fields.size(); ++q) {
        out[q].l2 = fields[q]->norm2();
        double acc = 0;
        for (int i = 0; i < g.nr; ++i) {
            const double w = std::pow(radial_weight_r(spec, g.r[size_t(i)]), -1.0 - 2.0 * opt.eps_x);
            for (int j = 0; j < g.ntheta; ++j)
                acc += g.weight(i, j) * w * std::norm(smoothed[q].at(i, j));
        }
        out[q].mid = std::sqrt(acc);
    }
    // Angular half-derivative surrogate, per mode.
    const double a_sc = 1.0 / spec.eps0, b_sc = 2.0 / spec.eps0;
    for (size_t q = 0; q < fields.size(); ++q) {
        auto modes = to_modes(*fields[q]);
        double acc = 0;
        for (int m = 0; m < g.ntheta; ++m) {
            const int ms = m <= g.ntheta / 2 ? m : m - g.ntheta;
            if (ms == 0) continue;
            for (int i = 0; i < g.nr; ++i) {
                const double r = g.r[size_t(i)];
                const double chi = smoothstep7((r - a_sc) / (b_sc - a_sc));
                if (chi == 0.0) continue;
                const double mult =
                    chi / std::sqrt(radial_weight_r(spec, r)) * std::sqrt(std::abs(ms) / r);
                const double wrad = g.sqrtg_at(i, 0) * g.dr * g.dtheta / g.ntheta;
                acc += wrad * sqr(mult) * std::norm(modes[size_t(m)][size_t(i)]);
            }
        }
        out[q].ang = std::sqrt(acc);
    }
    return out;
}

inline XNormParts x_norm(const DiscreteHamiltonian& H, const GridField& f,
                         const XNormOptions& opt = {}) {
    return x_norm_many(H, {&f}, opt)[0];
}

// sqrt of the time-quadratured squared X norm over the sample set.
inline double l2t_x_norm(const DiscreteHamiltonian& H, const SpaceTimeField& u,
                         const XNormOptions& opt = {}) {
    std::vector<const GridField*> ptrs;
    for (const auto& f : u.fields) ptrs.push_back(&f);
    auto parts = x_norm_many(H, ptrs, opt);
    double acc = 0;
    for (size_t k = 0; k < parts.size(); ++k) acc += u.wt[k] * sqr(parts[k].total());
    return std::sqrt(acc);
}

// |<f, i[H, psi] g>| / (X(f) X(g)) over supplied pairs; the bilinear
// commutator absorption constant.
inline double xsplit_bilinear_check(const DiscreteHamiltonian& H, const std::vector<double>& psi,
                                    const std::vector<std::pair<GridField, GridField>>& pairs,
                                    const XNormOptions& opt = {}) {
    double worst = 0.0;
    for (const auto& [f, g] : pairs) {
        const complexd v = inner(f, H.commutator_i(psi, g));
        const double xf = x_norm(H, f, opt).total(), xg = x_norm(H, g, opt).total();
        worst = std::max(worst, std::abs(v) / (xf * xg));
    }
    return worst;
}

}  // namespace cwave
