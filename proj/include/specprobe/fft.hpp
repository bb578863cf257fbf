#pragma once

// Self-contained FFT: iterative radix-2 for power-of-two sizes, Bluestein's
// chirp-z reduction for everything else. Forward transform is unscaled,
// inverse carries the 1/n factor. Chirp angles are reduced modulo 2n before
// the trig call so large indices lose no precision.

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace specprobe {

using cplx = std::complex<double>;

namespace fft_detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place DIT radix-2, no scaling. sign = -1 forward, +1 inverse.
inline void fft_pow2(std::vector<cplx>& a, int sign) {
  const std::size_t n = a.size();
  if (n < 2) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  std::vector<cplx> tw(n / 2);
  for (std::size_t j = 0; j < n / 2; ++j)
    tw[j] = std::polar(1.0, sign * 2.0 * M_PI * double(j) / double(n));
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const cplx u = a[i + j];
        const cplx v = a[i + j + len / 2] * tw[j * stride];
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
}

// Chirp value exp(sign * i * pi * m^2 / n) with m^2 reduced mod 2n.
inline cplx chirp(std::uint64_t m, std::uint64_t n, int sign) {
  const std::uint64_t two_n = 2 * n;
  const std::uint64_t r = (m % two_n) * (m % two_n) % two_n;
  return std::polar(1.0, sign * M_PI * double(r) / double(n));
}

inline void fft_bluestein(std::vector<cplx>& x, int sign) {
  const std::size_t n = x.size();
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  std::vector<cplx> a(m, cplx(0, 0)), b(m, cplx(0, 0));
  for (std::size_t j = 0; j < n; ++j) a[j] = x[j] * chirp(j, n, sign);
  b[0] = chirp(0, n, -sign);
  for (std::size_t j = 1; j < n; ++j) b[j] = b[m - j] = chirp(j, n, -sign);
  fft_pow2(a, -1);
  fft_pow2(b, -1);
  for (std::size_t j = 0; j < m; ++j) a[j] *= b[j];
  fft_pow2(a, +1);
  const double inv_m = 1.0 / double(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * inv_m * chirp(k, n, sign);
}

inline void transform(std::vector<cplx>& a, int sign) {
  if (a.size() > (std::size_t(1) << 26))
    throw std::length_error("fft: size exceeds supported range");
  if (is_pow2(a.size()))
    fft_pow2(a, sign);
  else
    fft_bluestein(a, sign);
}

}  // namespace fft_detail

inline void fft(std::vector<cplx>& a) { fft_detail::transform(a, -1); }

inline void ifft(std::vector<cplx>& a) {
  fft_detail::transform(a, +1);
  const double inv_n = 1.0 / double(a.size());
  for (auto& v : a) v *= inv_n;
}

// Real input -> n/2+1 non-negative-frequency bins.
inline std::vector<cplx> rfft(const std::vector<double>& x) {
  std::vector<cplx> a(x.begin(), x.end());
  fft(a);
  a.resize(x.size() / 2 + 1);
  return a;
}

// Hermitian half-spectrum -> real signal of length n. The imaginary parts of
// the DC bin and (for even n) the Nyquist bin are ignored, which makes the
// output exactly real by construction.
inline std::vector<double> irfft(const std::vector<cplx>& half, std::size_t n) {
  if (half.size() != n / 2 + 1)
    throw std::invalid_argument("irfft: half spectrum size must be n/2+1");
  std::vector<cplx> full(n);
  full[0] = cplx(half[0].real(), 0.0);
  for (std::size_t k = 1; k < half.size(); ++k) {
    if (n % 2 == 0 && k == n / 2) {
      full[k] = cplx(half[k].real(), 0.0);
    } else {
      full[k] = half[k];
      full[n - k] = std::conj(half[k]);
    }
  }
  ifft(full);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = full[i].real();
  return out;
}

// Bin centers of rfft output for sample spacing d (seconds): k/(n*d).
inline std::vector<double> rfftfreq(std::size_t n, double d) {
  std::vector<double> f(n / 2 + 1);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = double(k) / (double(n) * d);
  return f;
}

}  // namespace specprobe
