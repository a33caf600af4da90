#pragma once

// Asymptotically conic manifolds with two charts:
//   collar (r, y): g = dr^2 + r^2 (h_{jk}(y) + x^delta e_{jk}(x,y)) dy^j dy^k,  x = 1/r
//   cap    (w)   : g = Q(r) I + (1 - Q(r)) u u^T,  u = w/|w|  (radial-profile caps)
// delta = +inf is the perfectly conic sentinel: the perturbation is skipped
// exactly. Specs without a cap (true cone points) declare an excision radius
// below which points are out of domain.

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "conicwave/common.hpp"
#include "conicwave/expr.hpp"

namespace cwave {

enum class Chart { Collar, Cap };

struct Point {
    Chart chart = Chart::Collar;
    VecN q;  // collar: (r, y_1[, y_2]); cap: Cartesian w

    static Point collar(double r, double y0, double y1 = 0.0) {
        Point p;
        p.chart = Chart::Collar;
        p.q = VecN(r, y0, y1);
        return p;
    }
    static Point cap(double w0, double w1, double w2 = 0.0) {
        Point p;
        p.chart = Chart::Cap;
        p.q = VecN(w0, w1, w2);
        return p;
    }
};

struct MetricTensor {
    Point base;
    MatN components;  // chart frame of the base point (collar uses (x, y))
    double determinant = 0.0;
};

// Boundary metric h_{jk}(y) on the cross-section, dim = n-1.
struct BoundaryMetric {
    int dim = 1;
    // h and, when dh != nullptr, dh[k] = d h / d y_k.
    std::function<void(const double* y, MatN& h, MatN* dh)> eval;
    // Geodesic distance in (∂M, h).
    std::function<double(const double* y, const double* yp)> distance;
    // Unit (w.r.t. h) tangent at y pointing toward yp along the connecting
    // boundary geodesic. Undefined when y == yp.
    std::function<void(const double* y, const double* yp, double* dir)> direction;
};

// Scalar coefficient with (x, y)-derivatives through second order in x.
struct ScalarCoeff {
    std::function<double(double x, double y)> f, fx, fy, fxx;
};

struct ManifoldSpec {
    std::string name;
    int n = 2;           // manifold dimension
    double eps0 = 0.5;   // collar threshold, 0 < eps0 < 1
    double delta = kInf; // decay exponent of the angular perturbation
    double rho = 1.0;    // round boundary scale (circle radius / sphere scale)
    bool has_cap = true;
    bool rot_symmetric = true;  // n=2 and all coefficients independent of y
    double excise_r = 0.0;      // capless specs: domain is r > excise_r
    double collar_x_max = 0.0;  // collar chart validity: 0 < x < collar_x_max

    BoundaryMetric boundary;

    // Perturbation e_{jk}(x, y), entries as ScalarCoeff; empty when delta = inf.
    // For n = 2 a single entry e_{11}; for n = 3 a diagonal pair.
    std::vector<ScalarCoeff> perturb;

    // Cap radial profile Q(r) with Q(0) = 1, Q'(0) = 0; Q = angular coefficient
    // of the cap metric relative to flat.
    std::function<void(double r, double& Q, double& dQ, double& d2Q)> cap_profile;

    double cap_r_out() const { return 2.0 / eps0; }
    double collar_r_min() const { return 1.0 / collar_x_max; }

    bool perfectly_conic() const { return !std::isfinite(delta); }

    // --- angular coefficient h~_{jk}(x, y) = h_{jk}(y) + x^delta e_{jk}(x,y) ---

    void htilde(double x, const double* y, MatN& h, MatN* dhx, MatN* dhy) const {
        boundary.eval(y, h, dhy);
        if (dhx) {
            *dhx = MatN(n - 1);
        }
        if (perfectly_conic()) return;
        const double xd = std::pow(x, delta);
        const int d = n - 1;
        int idx = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                const ScalarCoeff& c = perturb[size_t(idx++)];
                const double e = c.f(x, y[0]);
                h(i, j) += xd * e;
                if (i != j) h(j, i) += xd * e;
                if (dhx) {
                    const double v = delta * std::pow(x, delta - 1.0) * e + xd * c.fx(x, y[0]);
                    (*dhx)(i, j) += v;
                    if (i != j) (*dhx)(j, i) += v;
                }
                if (dhy) {
                    const double v = xd * c.fy(x, y[0]);
                    dhy[0](i, j) += v;
                    if (i != j) dhy[0](j, i) += v;
                }
            }
    }

    // Rotationally symmetric scalar form: htilde(x) with two x-derivatives.
    void htilde_scalar(double x, double& h, double& hx, double& hxx) const {
        h = rho * rho;
        hx = hxx = 0.0;
        if (perfectly_conic()) return;
        const ScalarCoeff& c = perturb[0];
        const double e = c.f(x, 0.0), ex = c.fx(x, 0.0), exx = c.fxx(x, 0.0);
        const double xd = std::pow(x, delta);
        h += xd * e;
        hx = delta * std::pow(x, delta - 1.0) * e + xd * ex;
        hxx = delta * (delta - 1.0) * std::pow(x, delta - 2.0) * e +
              2.0 * delta * std::pow(x, delta - 1.0) * ex + xd * exx;
    }

    // Global polar angular coefficient A(r) = G_theta_theta (n = 2, symmetric
    // specs): collar branch r^2 htilde(1/r), cap branch Q(r) r^2.
    void polar_angular(double r, double& A, double& dA, double& d2A) const {
        const double r_switch = has_cap ? 1.0 / eps0 : 0.0;
        if (r >= r_switch || !has_cap) {
            const double x = 1.0 / r;
            double h, hx, hxx;
            htilde_scalar(x, h, hx, hxx);
            A = r * r * h;
            dA = 2.0 * r * h - hx;
            d2A = 2.0 * h - 2.0 * x * hx + x * x * hxx;
        } else {
            double Q, dQ, d2Q;
            cap_profile(r, Q, dQ, d2Q);
            A = Q * r * r;
            dA = dQ * r * r + 2.0 * r * Q;
            d2A = d2Q * r * r + 4.0 * r * dQ + 2.0 * Q;
        }
    }
};

// ---------------------------------------------------------------------------
// Chart domains and transitions
// ---------------------------------------------------------------------------

inline bool in_collar_domain(const ManifoldSpec& s, double r) {
    return r > s.collar_r_min() * (1.0 - 1e-12);
}

inline bool in_domain(const ManifoldSpec& s, const Point& p) {
    if (p.chart == Chart::Collar) return in_collar_domain(s, p.q[0]);
    if (!s.has_cap) return false;
    VecN w = p.q;
    return w.norm() < s.cap_r_out();
}

inline double radial_coordinate(const ManifoldSpec& s, const Point& p) {
    (void)s;
    if (p.chart == Chart::Collar) return p.q[0];
    return p.q.norm();
}

// Collar -> cap coordinates; jac (optional) is d w / d (r, y).
inline VecN collar_to_cap(const ManifoldSpec& s, const VecN& q, MatN* jac = nullptr) {
    const double r = q[0];
    VecN w(s.n);
    if (s.n == 2) {
        const double c = std::cos(q[1]), sn = std::sin(q[1]);
        w[0] = r * c;
        w[1] = r * sn;
        if (jac) {
            *jac = MatN(2);
            (*jac)(0, 0) = c;
            (*jac)(0, 1) = -r * sn;
            (*jac)(1, 0) = sn;
            (*jac)(1, 1) = r * c;
        }
    } else {
        const double sp = std::sin(q[1]), cp = std::cos(q[1]);
        const double sl = std::sin(q[2]), cl = std::cos(q[2]);
        w[0] = r * sp * cl;
        w[1] = r * sp * sl;
        w[2] = r * cp;
        if (jac) {
            *jac = MatN(3);
            (*jac)(0, 0) = sp * cl;
            (*jac)(0, 1) = r * cp * cl;
            (*jac)(0, 2) = -r * sp * sl;
            (*jac)(1, 0) = sp * sl;
            (*jac)(1, 1) = r * cp * sl;
            (*jac)(1, 2) = r * sp * cl;
            (*jac)(2, 0) = cp;
            (*jac)(2, 1) = -r * sp;
            (*jac)(2, 2) = 0.0;
        }
    }
    return w;
}

// Cap -> collar coordinates; jac (optional) is d (r, y) / d w.
inline VecN cap_to_collar(const ManifoldSpec& s, const VecN& w, MatN* jac = nullptr) {
    VecN q(s.n);
    if (s.n == 2) {
        const double r = std::hypot(w[0], w[1]);
        q[0] = r;
        q[1] = std::atan2(w[1], w[0]);
        if (jac) {
            *jac = MatN(2);
            (*jac)(0, 0) = w[0] / r;
            (*jac)(0, 1) = w[1] / r;
            (*jac)(1, 0) = -w[1] / (r * r);
            (*jac)(1, 1) = w[0] / (r * r);
        }
    } else {
        const double r = std::sqrt(w.norm2());
        const double rho_xy = std::hypot(w[0], w[1]);
        q[0] = r;
        q[1] = std::atan2(rho_xy, w[2]);
        q[2] = std::atan2(w[1], w[0]);
        if (jac) {
            *jac = MatN(3);
            for (int c = 0; c < 3; ++c) (*jac)(0, c) = w[c] / r;
            (*jac)(1, 0) = w[0] * w[2] / (r * r * rho_xy);
            (*jac)(1, 1) = w[1] * w[2] / (r * r * rho_xy);
            (*jac)(1, 2) = -rho_xy / (r * r);
            (*jac)(2, 0) = -w[1] / (rho_xy * rho_xy);
            (*jac)(2, 1) = w[0] / (rho_xy * rho_xy);
            (*jac)(2, 2) = 0.0;
        }
    }
    return q;
}

// ---------------------------------------------------------------------------
// Metric evaluation
// ---------------------------------------------------------------------------

// Collar metric in (r, y) frame plus coordinate derivatives dG[k] = dG/dq_k.
inline void collar_metric_ry(const ManifoldSpec& s, const VecN& q, MatN& G, MatN* dG) {
    const int n = s.n, d = n - 1;
    const double r = q[0], x = 1.0 / r;
    MatN h(d), dhx(d);
    std::array<MatN, 2> dhy;
    for (int k = 0; k < d; ++k) dhy[size_t(k)] = MatN(d);
    s.htilde(x, &q.v[1], h, dG ? &dhx : nullptr, dG ? dhy.data() : nullptr);

    G = MatN(n);
    G(0, 0) = 1.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) G(i + 1, j + 1) = r * r * h(i, j);

    if (dG) {
        dG[0] = MatN(n);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                dG[0](i + 1, j + 1) = 2.0 * r * h(i, j) - dhx(i, j);  // d/dr = -x^2 d/dx
        for (int k = 0; k < d; ++k) {
            dG[size_t(k) + 1] = MatN(n);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) dG[size_t(k) + 1](i + 1, j + 1) = r * r * dhy[size_t(k)](i, j);
        }
    }
}

// Cap metric in Cartesian w frame plus derivatives.
inline void cap_metric(const ManifoldSpec& s, const VecN& w, MatN& G, MatN* dG) {
    const int n = s.n;
    const double r = w.norm();
    if (r < 1e-12) {
        G = MatN::identity(n);
        if (dG)
            for (int c = 0; c < n; ++c) dG[size_t(c)] = MatN(n);
        return;
    }
    double Q, dQ, d2Q;
    s.cap_profile(r, Q, dQ, d2Q);
    VecN u = (1.0 / r) * w;
    G = MatN(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) G(i, j) = Q * (i == j ? 1.0 : 0.0) + (1.0 - Q) * u[i] * u[j];
    if (dG) {
        for (int c = 0; c < n; ++c) {
            dG[size_t(c)] = MatN(n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const double dua = ((i == c ? 1.0 : 0.0) - u[i] * u[c]) / r;
                    const double dub = ((j == c ? 1.0 : 0.0) - u[j] * u[c]) / r;
                    dG[size_t(c)](i, j) = dQ * u[c] * ((i == j ? 1.0 : 0.0) - u[i] * u[j]) +
                                          (1.0 - Q) * (dua * u[j] + u[i] * dub);
                }
        }
    }
}

inline void chart_metric(const ManifoldSpec& s, Chart chart, const VecN& q, MatN& G, MatN* dG) {
    if (chart == Chart::Collar)
        collar_metric_ry(s, q, G, dG);
    else
        cap_metric(s, q, G, dG);
}

// Metric in the published chart frame: collar components use (x, y).
inline MetricTensor metric_at(const ManifoldSpec& s, const Point& p) {
    if (!in_domain(s, p)) throw std::domain_error("metric_at: point outside chart domains of '" + s.name + "'");
    MetricTensor out;
    out.base = p;
    if (p.chart == Chart::Collar) {
        MatN G;
        collar_metric_ry(s, p.q, G, nullptr);
        // (r, y) -> (x, y): dr/dx = -1/x^2, so G_xx = G_rr / x^4.
        const double x = 1.0 / p.q[0];
        MatN F = G;
        F(0, 0) = G(0, 0) / (x * x * x * x);
        for (int j = 1; j < s.n; ++j) {
            F(0, j) = -G(0, j) / (x * x);
            F(j, 0) = F(0, j);
        }
        out.components = F;
    } else {
        MatN G;
        cap_metric(s, p.q, G, nullptr);
        out.components = G;
    }
    out.determinant = out.components.det();
    return out;
}

// Globally smooth radial weight <z>: equals r for x < eps0/2, monotone quintic
// ramp down to the plateau 1.6/eps0 on the compact part.
inline double radial_weight(const ManifoldSpec& s, const Point& p) {
    if (!in_domain(s, p)) throw std::domain_error("radial_weight: point outside chart domains");
    const double r = radial_coordinate(s, p);
    const double a = 1.0 / s.eps0, b = 2.0 / s.eps0;
    if (r >= b) return r;
    if (r <= a) return 1.6 / s.eps0;
    const double t = (r - a) * s.eps0;  // in [0, 1]
    const double ramp = t * t * t * t * (2.5 - 1.5 * t);  // p(1)=1, p'(1)=2.5, monotone
    return (1.6 + 0.4 * ramp) / s.eps0;
}

inline double radial_weight_r(const ManifoldSpec& s, double r) {
    const double a = 1.0 / s.eps0, b = 2.0 / s.eps0;
    if (r >= b) return r;
    if (r <= a) return 1.6 / s.eps0;
    const double t = (r - a) * s.eps0;
    const double ramp = t * t * t * t * (2.5 - 1.5 * t);
    return (1.6 + 0.4 * ramp) / s.eps0;
}

// ---------------------------------------------------------------------------
// Stock boundaries
// ---------------------------------------------------------------------------

inline BoundaryMetric circle_boundary(double rho) {
    BoundaryMetric b;
    b.dim = 1;
    b.eval = [rho](const double*, MatN& h, MatN* dh) {
        h = MatN(1);
        h(0, 0) = rho * rho;
        if (dh) dh[0] = MatN(1);
    };
    b.distance = [rho](const double* y, const double* yp) {
        return rho * std::abs(wrap_angle(yp[0] - y[0]));
    };
    b.direction = [rho](const double* y, const double* yp, double* dir) {
        dir[0] = (wrap_angle(yp[0] - y[0]) >= 0 ? 1.0 : -1.0) / rho;
    };
    return b;
}

// Round 2-sphere of scale rho in (phi, lambda) coordinates.
inline BoundaryMetric sphere_boundary(double rho) {
    BoundaryMetric b;
    b.dim = 2;
    b.eval = [rho](const double* y, MatN& h, MatN* dh) {
        const double sp = std::sin(y[0]);
        h = MatN(2);
        h(0, 0) = rho * rho;
        h(1, 1) = rho * rho * sp * sp;
        if (dh) {
            dh[0] = MatN(2);
            dh[0](1, 1) = 2.0 * rho * rho * sp * std::cos(y[0]);
            dh[1] = MatN(2);
        }
    };
    b.distance = [rho](const double* y, const double* yp) {
        const double c = std::sin(y[0]) * std::sin(yp[0]) * std::cos(yp[1] - y[1]) +
                         std::cos(y[0]) * std::cos(yp[0]);
        return rho * std::acos(std::clamp(c, -1.0, 1.0));
    };
    b.direction = [rho](const double* y, const double* yp, double* dir) {
        // Initial bearing of the great circle from y to yp.
        const double dl = yp[1] - y[1];
        const double vphi = std::cos(y[0]) * std::sin(yp[0]) * std::cos(dl) -
                            std::sin(y[0]) * std::cos(yp[0]);
        const double vlam = std::sin(yp[0]) * std::sin(dl);
        const double sp = std::sin(y[0]);
        const double nn = rho * std::sqrt(vphi * vphi + vlam * vlam / std::max(sp * sp, 1e-30) *
                                                            (sp * sp) / std::max(sp * sp, 1e-30));
        const double norm = rho * std::hypot(vphi, vlam / std::max(sp, 1e-15) * sp);
        (void)nn;
        dir[0] = vphi / std::max(norm, 1e-300);
        dir[1] = (vlam / std::max(sp * sp, 1e-30)) / std::max(norm / (rho * rho), 1e-300) /
                 (rho * rho);
        // Normalize exactly w.r.t. h = rho^2(dphi^2 + sin^2 phi dlam^2).
        const double len = rho * std::sqrt(dir[0] * dir[0] + sp * sp * dir[1] * dir[1]);
        dir[0] /= len;
        dir[1] /= len;
    };
    return b;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

inline ScalarCoeff scalar_coeff(std::function<double(double)> f, std::function<double(double)> fx,
                                std::function<double(double)> fxx) {
    ScalarCoeff c;
    c.f = [f](double x, double) { return f(x); };
    c.fx = [fx](double x, double) { return fx(x); };
    c.fy = [](double, double) { return 0.0; };
    c.fxx = [fxx](double x, double) { return fxx(x); };
    return c;
}

inline ScalarCoeff scalar_coeff_expr(const std::string& text) {
    auto c = std::make_shared<expr::Coefficient>(expr::Coefficient::compile(text));
    ScalarCoeff s;
    s.f = [c](double x, double y) { return expr::eval(c->f, x, y); };
    s.fx = [c](double x, double y) { return expr::eval(c->fx, x, y); };
    s.fy = [c](double x, double y) { return expr::eval(c->fy, x, y); };
    s.fxx = [c](double x, double y) { return expr::eval(c->fxx, x, y); };
    return s;
}

inline void flat_cap_profile(double, double& Q, double& dQ, double& d2Q) {
    Q = 1.0;
    dQ = d2Q = 0.0;
}

inline ManifoldSpec make_euclidean(int n = 2) {
    ManifoldSpec s;
    s.name = n == 2 ? "euclidean" : "euclidean3";
    s.n = n;
    s.eps0 = 0.5;
    s.delta = kInf;
    s.rho = 1.0;
    s.has_cap = true;
    s.rot_symmetric = (n == 2);
    s.collar_x_max = s.eps0;
    s.boundary = n == 2 ? circle_boundary(1.0) : sphere_boundary(1.0);
    s.cap_profile = flat_cap_profile;
    return s;
}

// Exact cone over a circle of radius rho; tip excised.
inline ManifoldSpec make_cone(double rho = 0.8, int n = 2) {
    ManifoldSpec s;
    s.name = n == 2 ? "cone" : "cone3";
    s.n = n;
    s.eps0 = 0.5;
    s.delta = kInf;
    s.rho = rho;
    s.has_cap = false;
    s.rot_symmetric = (n == 2);
    s.excise_r = 0.05;
    s.collar_x_max = 1.0 / s.excise_r;
    s.boundary = n == 2 ? circle_boundary(rho) : sphere_boundary(rho);
    return s;
}

// h~(x) = rho^2 + x * amp / (1 + x): smooth up to x = 0.
inline ManifoldSpec make_short_range_cone(double rho = 0.8, double amp = 0.6) {
    ManifoldSpec s = make_cone(rho);
    s.name = "short-range-cone";
    s.delta = 1.0;
    s.perturb.push_back(scalar_coeff([amp](double x) { return amp / (1.0 + x); },
                                     [amp](double x) { return -amp / sqr(1.0 + x); },
                                     [amp](double x) { return 2.0 * amp / (sqr(1.0 + x) * (1.0 + x)); }));
    return s;
}

// h~(x) = rho^2 + x^delta * amp / (1 + x): genuinely long range for delta < 1.
inline ManifoldSpec make_long_range_cone(double rho = 0.8, double amp = 0.5, double delta = 0.5) {
    ManifoldSpec s = make_cone(rho);
    s.name = "long-range-cone";
    s.delta = delta;
    s.perturb.push_back(scalar_coeff([amp](double x) { return amp / (1.0 + x); },
                                     [amp](double x) { return -amp / sqr(1.0 + x); },
                                     [amp](double x) { return 2.0 * amp / (sqr(1.0 + x) * (1.0 + x)); }));
    return s;
}

// Surface of revolution with an interior bump in the profile radius; the
// equator at the bump's crest is a trapped geodesic.
struct NeckParams {
    double rho = 0.8;
    double bump = 0.8;
    double s0 = 4.0;
    double width = 1.0;
};

inline double neck_m(const NeckParams& p, double s) {
    const double g = std::exp(-s * s / 4.0);
    const double q = s * s / (4.0 + s * s);
    const double b = std::exp(-sqr((s - p.s0) / p.width));
    return p.rho + (1.0 - p.rho) * g + p.bump * q * b;
}

inline double neck_m_prime(const NeckParams& p, double s) {
    const double g = std::exp(-s * s / 4.0);
    const double q = s * s / (4.0 + s * s);
    const double dq = 8.0 * s / sqr(4.0 + s * s);
    const double b = std::exp(-sqr((s - p.s0) / p.width));
    const double db = b * (-2.0 * (s - p.s0) / sqr(p.width));
    return (1.0 - p.rho) * (-s / 2.0) * g + p.bump * (dq * b + q * db);
}

inline ManifoldSpec make_neck(const NeckParams& p = {}) {
    ManifoldSpec s;
    s.name = "neck";
    s.n = 2;
    s.eps0 = 0.25;
    s.delta = 1.0;
    s.rho = p.rho;
    s.has_cap = true;
    s.rot_symmetric = true;
    s.collar_x_max = s.eps0;
    s.boundary = circle_boundary(p.rho);
    // Collar: h~(x) = m(1/x)^2, e(x) = (m(1/x)^2 - rho^2)/x.
    auto m2 = [p](double r) { return sqr(neck_m(p, r)); };
    auto e = [p, m2](double x) { return (m2(1.0 / x) - p.rho * p.rho) / x; };
    auto efd = [e](double x) { return (e(x + 1e-6) - e(x - 1e-6)) / 2e-6; };
    s.perturb.push_back(scalar_coeff(
        e, efd, [efd](double x) { return (efd(x + 1e-5) - efd(x - 1e-5)) / 2e-5; }));
    s.cap_profile = [p](double r, double& Q, double& dQ, double& d2Q) {
        const double m = neck_m(p, r), mp = neck_m_prime(p, r);
        Q = m * m;
        dQ = 2.0 * m * mp;
        const double h = 1e-5;
        d2Q = (2.0 * neck_m(p, r + h) * neck_m_prime(p, r + h) -
               2.0 * neck_m(p, r - h) * neck_m_prime(p, r - h)) /
              (2.0 * h);
    };
    return s;
}

// Coefficient expressions: angular perturbation e(x, y) from the config grammar.
inline ManifoldSpec make_from_expression(double rho, double delta, const std::string& e_expr,
                                         double eps0 = 0.5) {
    ManifoldSpec s = make_cone(rho);
    s.name = "custom";
    s.eps0 = eps0;
    s.delta = delta;
    s.rot_symmetric = false;  // conservatively; y-dependence is allowed here
    if (std::isfinite(delta)) s.perturb.push_back(scalar_coeff_expr(e_expr));
    return s;
}

inline ManifoldSpec make_preset(const std::string& name) {
    if (name == "euclidean") return make_euclidean(2);
    if (name == "euclidean3") return make_euclidean(3);
    if (name == "cone") return make_cone(0.8);
    if (name == "cone3") return make_cone(0.8, 3);
    if (name == "short-range-cone") return make_short_range_cone();
    if (name == "long-range-cone") return make_long_range_cone();
    if (name == "neck") return make_neck();
    throw std::invalid_argument("unknown manifold preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Spec diagnostics (module invariants)
// ---------------------------------------------------------------------------

struct SymbolBoundReport {
    double sup_e = 0.0;
    double sup_xdx_e = 0.0;  // finite-difference surrogate of x d/dx e
    double sup_dy_e = 0.0;
    double residual_exponent = 0.0;  // fitted decay of |x^2 G_ang - h| ~ x^delta
};

inline SymbolBoundReport symbol_bound_report(const ManifoldSpec& s, int ny = 8) {
    SymbolBoundReport rep;
    if (s.perfectly_conic()) return rep;
    std::vector<double> xs, res;
    const double x_hi = std::min(s.eps0, s.collar_x_max) * 0.9;
    for (int k = 0; k < 7; ++k) {
        const double x = x_hi / std::pow(2.0, k);
        double worst = 0.0;
        for (int j = 0; j < ny; ++j) {
            const double y = 2.0 * kPi * j / ny;
            const ScalarCoeff& c = s.perturb[0];
            rep.sup_e = std::max(rep.sup_e, std::abs(c.f(x, y)));
            const double xdx = x * (c.f(x * 1.01, y) - c.f(x * 0.99, y)) / (0.02 * x);
            rep.sup_xdx_e = std::max(rep.sup_xdx_e, std::abs(xdx));
            rep.sup_dy_e = std::max(rep.sup_dy_e, std::abs(c.fy(x, y)));
            MatN h(s.n - 1), h0(s.n - 1);
            s.htilde(x, &y, h, nullptr, nullptr);
            s.boundary.eval(&y, h0, nullptr);
            worst = std::max(worst, std::abs(h(0, 0) - h0(0, 0)));
        }
        xs.push_back(x);
        res.push_back(std::max(worst, 1e-300));
    }
    rep.residual_exponent = loglog_slope(xs, res);
    return rep;
}

// Max relative mismatch between the cap metric pulled back to collar
// coordinates and the collar metric, sampled on the overlap annulus.
inline double overlap_agreement(const ManifoldSpec& s, int samples = 32) {
    if (!s.has_cap) return 0.0;
    double worst = 0.0;
    Rng rng(7);
    for (int k = 0; k < samples; ++k) {
        const double r = rng.uniform(1.0 / s.eps0 + 1e-6, s.cap_r_out() * 0.98);
        VecN q(s.n);
        q[0] = r;
        q[1] = rng.uniform(0.0, 2.0 * kPi);
        if (s.n == 3) {
            q[1] = rng.uniform(0.4, kPi - 0.4);
            q[2] = rng.uniform(0.0, 2.0 * kPi);
        }
        MatN T;
        VecN w = collar_to_cap(s, q, &T);
        MatN Gcap;
        cap_metric(s, w, Gcap, nullptr);
        // Pull back: G_collar = T^T Gcap T.
        MatN pb(s.n);
        for (int i = 0; i < s.n; ++i)
            for (int j = 0; j < s.n; ++j) {
                double v = 0;
                for (int a = 0; a < s.n; ++a)
                    for (int b = 0; b < s.n; ++b) v += T(a, i) * Gcap(a, b) * T(b, j);
                pb(i, j) = v;
            }
        MatN Gcol;
        collar_metric_ry(s, q, Gcol, nullptr);
        for (int i = 0; i < s.n; ++i)
            for (int j = 0; j < s.n; ++j)
                worst = std::max(worst, std::abs(pb(i, j) - Gcol(i, j)) /
                                            (1.0 + std::abs(Gcol(i, j))));
    }
    return worst;
}

}  // namespace cwave
