#pragma once

#include <complex>
#include <vector>

#include "ttsqa/common.hpp"

namespace ttsqa::fft {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// in-place iterative radix-2 Cooley-Tukey; size must be a power of two
inline void transform_pow2(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        fail(errc::bad_argument, "transform_pow2: size must be a power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx u = a[i + k];
                const cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (cplx& x : a) x *= inv;
    }
}

// DFT of arbitrary length via Bluestein's chirp-z when n is not a power of two
inline std::vector<cplx> transform(std::vector<cplx> a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0) fail(errc::bad_argument, "transform: empty input");
    if ((n & (n - 1)) == 0) {
        transform_pow2(a, inverse);
        return a;
    }

    const double sign = inverse ? 1.0 : -1.0;
    std::vector<cplx> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the phase argument small
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = cplx(std::cos(ang), std::sin(ang));
    }

    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<cplx> fa(m, cplx(0, 0)), fb(m, cplx(0, 0));
    for (std::size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
    fb[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) fb[k] = fb[m - k] = std::conj(chirp[k]);

    transform_pow2(fa, false);
    transform_pow2(fb, false);
    for (std::size_t k = 0; k < m; ++k) fa[k] *= fb[k];
    transform_pow2(fa, true);

    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = fa[k] * chirp[k];
    if (inverse) {
        const double invn = 1.0 / static_cast<double>(n);
        for (cplx& x : out) x *= invn;
    }
    return out;
}

// one-sided spectrum of a real signal zero-padded to nfft: bins 0 .. nfft/2
inline std::vector<cplx> rfft(const double* x, std::size_t len, std::size_t nfft) {
    std::vector<cplx> a(nfft, cplx(0, 0));
    for (std::size_t i = 0; i < len && i < nfft; ++i) a[i] = cplx(x[i], 0.0);
    a = transform(std::move(a), false);
    a.resize(nfft / 2 + 1);
    return a;
}

inline std::vector<cplx> rfft(const std::vector<double>& x, std::size_t nfft) {
    return rfft(x.data(), x.size(), nfft);
}

// inverse of rfft: reconstructs the real signal of length nfft
inline std::vector<double> irfft(const std::vector<cplx>& half, std::size_t nfft) {
    if (half.size() != nfft / 2 + 1) fail(errc::dimension_mismatch, "irfft: bin count mismatch");
    std::vector<cplx> full(nfft);
    for (std::size_t k = 0; k < half.size(); ++k) full[k] = half[k];
    for (std::size_t k = half.size(); k < nfft; ++k) full[k] = std::conj(full[nfft - k]);
    full = transform(std::move(full), true);
    std::vector<double> out(nfft);
    for (std::size_t k = 0; k < nfft; ++k) out[k] = full[k].real();
    return out;
}

// linear convolution via zero-padded pow2 FFT
inline std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) fail(errc::bad_argument, "convolve: empty input");
    const std::size_t out_len = a.size() + b.size() - 1;
    const std::size_t m = next_pow2(out_len);
    std::vector<cplx> fa(m, cplx(0, 0)), fb(m, cplx(0, 0));
    for (std::size_t i = 0; i < a.size(); ++i) fa[i] = cplx(a[i], 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) fb[i] = cplx(b[i], 0.0);
    transform_pow2(fa, false);
    transform_pow2(fb, false);
    for (std::size_t i = 0; i < m; ++i) fa[i] *= fb[i];
    transform_pow2(fa, true);
    std::vector<double> out(out_len);
    for (std::size_t i = 0; i < out_len; ++i) out[i] = fa[i].real();
    return out;
}

}  // namespace ttsqa::fft
