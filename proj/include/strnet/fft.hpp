#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "strnet/common.hpp"

namespace strnet::fft {

using cplx = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place. sign = -1 forward, +1 inverse
// (inverse leaves the 1/N scaling to the caller).
inline void radix2(std::vector<cplx>& x, int sign) {
  const std::size_t n = x.size();
  if (n <= 1) return;

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }

  const double pi = 3.14159265358979323846264338327950288;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = sign * 2.0 * pi / double(len);
    cplx wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        cplx u = x[i + k];
        cplx v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Direct O(n^2) DFT used for non power-of-two lengths.
inline std::vector<cplx> direct_dft(const std::vector<cplx>& x, int sign) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n, cplx(0.0, 0.0));
  const double pi = 3.14159265358979323846264338327950288;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t t = 0; t < n; ++t) {
      double ang = sign * 2.0 * pi * double(k) * double(t) / double(n);
      out[k] += x[t] * cplx(std::cos(ang), std::sin(ang));
    }
  }
  return out;
}

inline std::vector<cplx> forward(std::vector<cplx> x) {
  if (is_pow2(x.size())) {
    radix2(x, -1);
    return x;
  }
  return direct_dft(x, -1);
}

inline std::vector<cplx> inverse(std::vector<cplx> x) {
  std::vector<cplx> out;
  if (is_pow2(x.size())) {
    radix2(x, +1);
    out = std::move(x);
  } else {
    out = direct_dft(x, +1);
  }
  const double inv_n = out.empty() ? 1.0 : 1.0 / double(out.size());
  for (auto& v : out) v *= inv_n;
  return out;
}

// Spectral mask applied between the forward and inverse transforms.
enum class MaskMode { kOff, kRemoveDc, kKeepTopQ };

struct SpectralMask {
  MaskMode mode = MaskMode::kOff;
  double q = 0.5;  // fraction of bins kept in kKeepTopQ
};

// Per-bin keep weights; symmetric under k <-> n-k so the masked round-trip
// stays a real symmetric linear operator.
inline std::vector<double> mask_weights(const SpectralMask& m, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n == 0) return w;
  switch (m.mode) {
    case MaskMode::kOff:
      break;
    case MaskMode::kRemoveDc:
      w[0] = 0.0;
      break;
    case MaskMode::kKeepTopQ: {
      if (m.q < 0.0 || m.q > 1.0) throw ValueError("mask q must lie in [0, 1]");
      // keep the highest |frequency| bins first, whole conjugate pairs at a
      // time, until at least ceil(q*n) bins are kept
      std::size_t target = std::size_t(std::ceil(m.q * double(n)));
      std::fill(w.begin(), w.end(), 0.0);
      std::size_t kept = 0;
      for (std::size_t f = n / 2; f >= 1 && kept < target; --f) {
        w[f] = 1.0;
        ++kept;
        std::size_t mirror = n - f;
        if (mirror != f && mirror < n && w[mirror] == 0.0) {
          w[mirror] = 1.0;
          ++kept;
        }
      }
      if (kept < target) w[0] = 1.0;  // DC joins last
      break;
    }
  }
  return w;
}

// DFT -> mask -> inverse DFT on a real sequence; returns the real part.
inline std::vector<double> roundtrip_real(const std::vector<double>& x,
                                          const std::vector<double>& binw) {
  const std::size_t n = x.size();
  std::vector<cplx> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = cplx(x[i], 0.0);
  buf = forward(std::move(buf));
  for (std::size_t k = 0; k < n; ++k) buf[k] *= binw[k];
  buf = inverse(std::move(buf));
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real();
  return out;
}

}  // namespace strnet::fft
