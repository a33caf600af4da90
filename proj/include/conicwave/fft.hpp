#pragma once

// Complex FFT: iterative radix-2 when the length is a power of two, plain
// O(N^2) DFT otherwise (angular grids are small and even, so this is never a
// bottleneck off the power-of-two path).

#include "conicwave/common.hpp"

namespace cwave {

inline bool is_pow2(size_t n) { return n && ((n & (n - 1)) == 0); }

inline void fft_inplace(std::vector<complexd>& a, bool inverse) {
    const size_t n = a.size();
    if (n <= 1) return;
    if (!is_pow2(n)) {
        std::vector<complexd> out(n, complexd(0, 0));
        const double sgn = inverse ? 1.0 : -1.0;
        for (size_t k = 0; k < n; ++k)
            for (size_t j = 0; j < n; ++j)
                out[k] += a[j] * std::polar(1.0, sgn * 2.0 * kPi * double(k * j % n) / double(n));
        a = std::move(out);
        if (inverse)
            for (auto& z : a) z /= double(n);
        return;
    }
    // Bit-reversal permutation.
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 1.0 : -1.0) * 2.0 * kPi / double(len);
        const complexd wl = std::polar(1.0, ang);
        for (size_t i = 0; i < n; i += len) {
            complexd w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                const complexd u = a[i + j], v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& z : a) z /= double(n);
}

}  // namespace cwave
