#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cwave {

using complexd = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Small fixed-capacity vector for chart coordinates / covectors (n <= 3).
struct VecN {
    std::array<double, 3> v{0.0, 0.0, 0.0};
    int n = 0;

    VecN() = default;
    explicit VecN(int dim) : n(dim) {}
    VecN(double a, double b) : v{a, b, 0.0}, n(2) {}
    VecN(double a, double b, double c) : v{a, b, c}, n(3) {}

    double& operator[](int i) { return v[size_t(i)]; }
    double operator[](int i) const { return v[size_t(i)]; }

    VecN& operator+=(const VecN& o) {
        for (int i = 0; i < n; ++i) v[size_t(i)] += o.v[size_t(i)];
        return *this;
    }
    VecN& operator-=(const VecN& o) {
        for (int i = 0; i < n; ++i) v[size_t(i)] -= o.v[size_t(i)];
        return *this;
    }
    VecN& operator*=(double s) {
        for (int i = 0; i < n; ++i) v[size_t(i)] *= s;
        return *this;
    }
    friend VecN operator+(VecN a, const VecN& b) { return a += b; }
    friend VecN operator-(VecN a, const VecN& b) { return a -= b; }
    friend VecN operator*(double s, VecN a) { return a *= s; }

    double norm2() const {
        double s = 0;
        for (int i = 0; i < n; ++i) s += v[size_t(i)] * v[size_t(i)];
        return s;
    }
    double norm() const { return std::sqrt(norm2()); }
};

// Symmetric positive matrix in chart frame, size n x n (n <= 3), row-major.
struct MatN {
    std::array<double, 9> m{};
    int n = 0;

    MatN() = default;
    explicit MatN(int dim) : n(dim) {}

    double& operator()(int i, int j) { return m[size_t(i * n + j)]; }
    double operator()(int i, int j) const { return m[size_t(i * n + j)]; }

    static MatN identity(int dim) {
        MatN a(dim);
        for (int i = 0; i < dim; ++i) a(i, i) = 1.0;
        return a;
    }

    double det() const {
        if (n == 1) return m[0];
        if (n == 2) return m[0] * m[3] - m[1] * m[2];
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    MatN inverse() const {
        MatN r(n);
        const double d = det();
        if (d == 0.0) throw std::runtime_error("MatN::inverse: singular matrix");
        if (n == 1) {
            r.m[0] = 1.0 / d;
        } else if (n == 2) {
            r.m[0] = m[3] / d;
            r.m[1] = -m[1] / d;
            r.m[2] = -m[2] / d;
            r.m[3] = m[0] / d;
        } else {
            r(0, 0) = (m[4] * m[8] - m[5] * m[7]) / d;
            r(0, 1) = (m[2] * m[7] - m[1] * m[8]) / d;
            r(0, 2) = (m[1] * m[5] - m[2] * m[4]) / d;
            r(1, 0) = (m[5] * m[6] - m[3] * m[8]) / d;
            r(1, 1) = (m[0] * m[8] - m[2] * m[6]) / d;
            r(1, 2) = (m[2] * m[3] - m[0] * m[5]) / d;
            r(2, 0) = (m[3] * m[7] - m[4] * m[6]) / d;
            r(2, 1) = (m[1] * m[6] - m[0] * m[7]) / d;
            r(2, 2) = (m[0] * m[4] - m[1] * m[3]) / d;
        }
        return r;
    }

    VecN mul(const VecN& x) const {
        VecN y(n);
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int j = 0; j < n; ++j) s += (*this)(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

    // Quadratic form x^T M x.
    double quad(const VecN& x) const {
        double s = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) s += (*this)(i, j) * x[i] * x[j];
        return s;
    }

    double min_eigenvalue() const {
        if (n == 1) return m[0];
        if (n == 2) {
            const double tr = m[0] + m[3];
            const double dd = det();
            const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - dd));
            return tr / 2.0 - disc;
        }
        // n == 3: Jacobi sweep, plenty for sampled SPD checks.
        MatN a = *this;
        for (int sweep = 0; sweep < 32; ++sweep) {
            double off = std::abs(a(0, 1)) + std::abs(a(0, 2)) + std::abs(a(1, 2));
            if (off < 1e-15 * (std::abs(a(0, 0)) + std::abs(a(1, 1)) + std::abs(a(2, 2)) + 1e-300))
                break;
            for (int p = 0; p < 2; ++p)
                for (int q = p + 1; q < 3; ++q) {
                    if (a(p, q) == 0.0) continue;
                    const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
                    const double t = (theta >= 0 ? 1.0 : -1.0) /
                                     (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                    MatN b = a;
                    for (int k = 0; k < 3; ++k) {
                        b(p, k) = c * a(p, k) - s * a(q, k);
                        b(q, k) = s * a(p, k) + c * a(q, k);
                    }
                    a = b;
                    b = a;
                    for (int k = 0; k < 3; ++k) {
                        b(k, p) = c * a(k, p) - s * a(k, q);
                        b(k, q) = s * a(k, p) + c * a(k, q);
                    }
                    a = b;
                }
        }
        return std::min(std::min(a(0, 0), a(1, 1)), a(2, 2));
    }

    // Lower Cholesky factor (metric assumed SPD).
    MatN cholesky() const {
        MatN L(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j <= i; ++j) {
                double s = (*this)(i, j);
                for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
                if (i == j) {
                    if (s <= 0.0) throw std::runtime_error("MatN::cholesky: not positive definite");
                    L(i, i) = std::sqrt(s);
                } else {
                    L(i, j) = s / L(j, j);
                }
            }
        }
        return L;
    }
};

// Deterministic splittable RNG (splitmix64); stable across platforms/runs.
struct Rng {
    uint64_t state;
    explicit Rng(uint64_t seed = 0x9e3779b97f4a7c15ull) : state(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    // Uniform in [0,1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    // Standard normal via Box-Muller.
    double normal() {
        double u1 = std::max(uniform(), 1e-300), u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }
};

// Order-7 smoothstep on [0,1]: S(0)=0, S(1)=1, first three derivatives vanish
// at both ends.
inline double smoothstep7(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const double u4 = u * u * u * u;
    return u4 * (35.0 - 84.0 * u + 70.0 * u * u - 20.0 * u * u * u);
}

inline double smoothstep7_deriv(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    const double u3 = u * u * u;
    return u3 * (140.0 - 420.0 * u + 420.0 * u * u - 140.0 * u3);
}

// Wrap an angle difference into (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

inline double sqr(double x) { return x * x; }

// Least-squares slope of log|y| against log x; the power-law fits mandated by
// the contracts all go through here.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t m = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < m; ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(std::max(std::abs(y[i]), 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = double(m) * sxx - sx * sx;
    return (double(m) * sxy - sx * sy) / denom;
}

// Minimal deterministic parallel map: chunks [0,count) over nthreads.
// Writers touch disjoint indices, so results do not depend on scheduling.
inline void parallel_for(int nthreads, size_t count, const std::function<void(size_t)>& fn) {
    if (nthreads <= 1 || count < 2) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int nt = std::min<int>(nthreads, int(count));
    std::vector<std::thread> pool;
    pool.reserve(size_t(nt));
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&, t]() {
            for (size_t i = size_t(t); i < count; i += size_t(nt)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

// Global knob set by the CLI --threads flag; library code reads it.
inline int& worker_threads() {
    static int n = 1;
    return n;
}

}  // namespace cwave
