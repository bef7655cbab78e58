#pragma once

#include <cmath>
#include <complex>
#include <utility>

#include "dem/quadrature.hpp"
#include "dem/types.hpp"

namespace dem {

// Continuous bath spectral function J(w) in natural units (hbar = k_B = 1,
// frequencies in units of the system scale).  Only the Lorentz-Drude form
// is implemented; the enum leaves room for other shapes.
template <typename Scalar = double>
struct SpectralFunctionT {
  enum class Kind { LorentzDrude };

  Kind kind = Kind::LorentzDrude;
  Scalar g0 = Scalar(0.1);
  Scalar gamma = Scalar(12);

  void validate() const {
    if (!(g0 > Scalar(0))) throw std::invalid_argument("spectral: g0 must be > 0");
    if (!(gamma > Scalar(0))) throw std::invalid_argument("spectral: gamma must be > 0");
  }
};

using SpectralFunction = SpectralFunctionT<double>;

template <typename Scalar = double>
struct KernelSampleT {
  Scalar t;
  std::complex<Scalar> value;
};

using KernelSample = KernelSampleT<double>;

// J(w) = (g0/pi) w gamma^2 / (gamma^2 + w^2).  The bath has positive
// frequencies only, so negative w is a domain error.
template <typename S>
S evaluate(const SpectralFunctionT<S>& sf, S omega) {
  sf.validate();
  if (omega < S(0))
    throw std::invalid_argument("spectral: J(omega) requires omega >= 0");
  const S g2 = sf.gamma * sf.gamma;
  return sf.g0 / S(M_PI) * omega * g2 / (g2 + omega * omega);
}

namespace detail {

// Derivatives of f(w) = 1/(gamma^2 + w^2) at one point, from the Leibniz
// recurrence (gamma^2+w^2) f^(k) + 2kw f^(k-1) + k(k-1) f^(k-2) = 0.
template <typename S, int N>
void lorentzian_derivatives(S gamma, S w, S (&d)[N]) {
  const S q = gamma * gamma + w * w;
  d[0] = S(1) / q;
  if (N > 1) d[1] = -S(2) * w * d[0] / q;
  for (int k = 2; k < N; ++k)
    d[k] = -(S(2 * k) * w * d[k - 1] + S(k * (k - 1)) * d[k - 2]) / q;
}

// int_W^inf sin(wt) f(w) dw by repeated integration by parts:
//   cos(Wt) f/t - sin(Wt) f'/t^2 - cos(Wt) f''/t^3 + sin(Wt) f'''/t^4 + ...
// Returns the sum and a bound on the truncation remainder; the bound is
// |f^(7)(W)|/t^8, valid because f^(7) decays monotonically past the pole
// scale (guaranteed by the caller's choice W >= 4 gamma).
template <typename S>
std::pair<S, S> oscillatory_tail(S gamma, S t, S W) {
  S d[8];
  lorentzian_derivatives(gamma, W, d);
  const S c = std::cos(W * t);
  const S s = std::sin(W * t);
  S total = S(0);
  S tp = t;
  for (int k = 0; k < 8; ++k) {
    S trig;
    switch (k & 3) {
      case 0: trig = c; break;
      case 1: trig = -s; break;
      case 2: trig = -c; break;
      default: trig = s; break;
    }
    total += trig * d[k] / tp;
    tp *= t;
  }
  return {total, std::abs(d[7]) / (tp / t)};  // tp/t = t^8 after the loop
}

}  // namespace detail

// Continuum dissipative kernel of the Lorentz-Drude bath: real part
// (g0/2) gamma e^{-gamma t} in closed form; imaginary part
// -(g0 gamma^2/pi) int_0^inf sin(wt)/(gamma^2+w^2) dw, whose sign follows
// the e^{-iwt} convention of the discrete kernel below (Im K < 0 for small
// t > 0).  The integral is cut off at W with W t ~ 100 (at most a few tens
// of oscillations, cheap for the adaptive rule) plus an integration-by-
// parts correction for the remainder; for gamma t >= 30 the whole integral
// collapses onto its inverse-power asymptotic series, accurate to ~1e-9
// relative at the crossover and improving rapidly beyond it.
template <typename S>
KernelSampleT<S> analytic_kernel(const SpectralFunctionT<S>& sf, S t,
                                 const QuadratureSpecT<S>& quad = {}) {
  sf.validate();
  if (t < S(0)) throw std::invalid_argument("spectral: kernel requires t >= 0");
  const S re = S(0.5) * sf.g0 * sf.gamma * std::exp(-sf.gamma * t);
  S im = S(0);
  if (t > S(0)) {
    const S gamma = sf.gamma;
    const S prefactor = sf.g0 * gamma * gamma / S(M_PI);
    const S a = gamma * t;
    if (a >= S(30)) {
      // sum_k (2k)!/a^{2k}, k = 0..5, in Horner form
      const S a2 = a * a;
      const S sum =
          S(1) +
          S(2) / a2 *
              (S(1) +
               S(12) / a2 *
                   (S(1) + S(30) / a2 *
                               (S(1) + S(56) / a2 * (S(1) + S(90) / a2))));
      im = -prefactor * sum / (gamma * a);  // integral ~ sum/(gamma^2 t)
    } else {
      const S tol_integral = quad.abs_tol / prefactor;
      S W = std::max(S(100) / t, S(4) * gamma);
      S tail = S(0);
      for (int attempt = 0;; ++attempt) {
        auto [value, bound] = detail::oscillatory_tail(gamma, t, W);
        if (bound <= S(0.25) * tol_integral) {
          tail = value;
          break;
        }
        if (attempt == 5)
          throw QuadratureError(
              "spectral: kernel tail correction did not reach tolerance",
              static_cast<double>(prefactor * bound));
        W *= S(2);
      }
      QuadratureSpecT<S> inner;
      inner.abs_tol = S(0.5) * tol_integral;
      inner.max_intervals = quad.max_intervals;
      S finite;
      try {
        finite = integrate_adaptive(
            [t, gamma](S w) {
              return std::sin(w * t) / (gamma * gamma + w * w);
            },
            S(0), W, inner);
      } catch (const QuadratureError& e) {
        throw QuadratureError(
            "spectral: kernel quadrature did not reach tolerance",
            static_cast<double>(prefactor) * e.achieved_error);
      }
      im = -prefactor * (finite + tail);
    }
  }
  return {t, {re, im}};
}

// Discrete-bath counterpart K(t) = sum_nu (g_nu^2/w_nu) e^{-i w_nu t}.
// Works on anything exposing `frequencies` and `couplings` vectors
// (see DiscretizedBathT).
template <typename Bath, typename S>
KernelSampleT<S> discrete_kernel(const Bath& bath, S t) {
  if (bath.frequencies.size() == 0)
    throw std::invalid_argument("spectral: discrete_kernel needs a nonempty bath");
  const auto weights =
      (bath.couplings.array().square() / bath.frequencies.array()).eval();
  const S re = (weights * (bath.frequencies.array() * t).cos()).sum();
  const S im = -(weights * (bath.frequencies.array() * t).sin()).sum();
  return {t, {re, im}};
}

}  // namespace dem
