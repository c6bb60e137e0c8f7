#pragma once

#include <complex>
#include <vector>

#include "haaqinet/common.hpp"

namespace haaqi {

using cplx = std::complex<double>;

// In-place iterative radix-2 FFT. n must be a power of two.
inline void fft_inplace(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  require(n > 0 && (n & (n - 1)) == 0, "fft: size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * M_PI / double(len) * (inverse ? 1.0 : -1.0);
    cplx wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        cplx u = a[i + k];
        cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= double(n);
  }
}

// Forward FFT of a real frame; returns the n/2+1 non-redundant bins.
inline std::vector<cplx> rfft(const std::vector<double>& frame) {
  std::vector<cplx> a(frame.begin(), frame.end());
  fft_inplace(a, false);
  a.resize(frame.size() / 2 + 1);
  return a;
}

// Inverse of rfft: reconstructs a real frame of length n from n/2+1 bins.
inline std::vector<double> irfft(const std::vector<cplx>& half, std::size_t n) {
  require(half.size() == n / 2 + 1, "irfft: bin count mismatch");
  std::vector<cplx> a(n);
  for (std::size_t k = 0; k < half.size(); ++k) a[k] = half[k];
  for (std::size_t k = half.size(); k < n; ++k) a[k] = std::conj(a[n - k]);
  fft_inplace(a, true);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i].real();
  return out;
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace haaqi
