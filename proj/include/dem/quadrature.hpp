#pragma once

#include <cmath>
#include <queue>
#include <utility>
#include <vector>

#include "dem/types.hpp"

namespace dem {

template <typename Scalar = double>
struct QuadratureSpecT {
  Scalar abs_tol = Scalar(1e-8);
  int max_intervals = 60000;
};

using QuadratureSpec = QuadratureSpecT<double>;

namespace detail {

// Gauss-Kronrod 15/7 nodes and weights on [-1, 1].  The odd-indexed
// Kronrod abscissae are the Gauss-7 nodes; the embedded Gauss rule gives
// the error estimate.
template <typename S>
struct Gk15 {
  static constexpr S xgk[8] = {
      S(0.991455371120813), S(0.949107912342759), S(0.864864423359769),
      S(0.741531185599394), S(0.586087235467691), S(0.405845151377397),
      S(0.207784955007898), S(0.0)};
  static constexpr S wgk[8] = {
      S(0.022935322010529), S(0.063092092629979), S(0.104790010322250),
      S(0.140653259715525), S(0.169004726639267), S(0.190350578064785),
      S(0.204432940075298), S(0.209482141084728)};
  static constexpr S wg[4] = {
      S(0.129484966168870), S(0.279705391489277), S(0.381830050505119),
      S(0.417959183673469)};
};

template <typename F, typename S>
std::pair<S, S> gk15_panel(F&& f, S a, S b) {
  const S c = S(0.5) * (a + b);
  const S h = S(0.5) * (b - a);
  const S fc = f(c);
  S resk = Gk15<S>::wgk[7] * fc;
  S resg = Gk15<S>::wg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const S x = h * Gk15<S>::xgk[j];
    const S f1 = f(c - x);
    const S f2 = f(c + x);
    resk += Gk15<S>::wgk[j] * (f1 + f2);
    if (j % 2 == 1) resg += Gk15<S>::wg[j / 2] * (f1 + f2);
  }
  return {resk * h, std::abs((resk - resg) * h)};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod integration of f over [a, b]:
// repeatedly bisect the interval with the largest error estimate until the
// summed estimate drops below abs_tol.  Deterministic for a given f.
// Throws QuadratureError (carrying the achieved estimate) if the interval
// budget runs out first.
template <typename F, typename S>
S integrate_adaptive(F&& f, S a, S b, const QuadratureSpecT<S>& q = {}) {
  if (!(b >= a)) throw std::invalid_argument("integrate_adaptive: b < a");
  if (a == b) return S(0);

  struct Interval {
    S a, b, value, error;
    bool operator<(const Interval& o) const { return error < o.error; }
  };

  auto [v0, e0] = detail::gk15_panel(f, a, b);
  std::priority_queue<Interval> heap;
  heap.push({a, b, v0, e0});
  S total_value = v0;
  S total_error = e0;
  int n_intervals = 1;

  while (total_error > q.abs_tol) {
    if (n_intervals >= q.max_intervals) {
      throw QuadratureError(
          "adaptive quadrature: interval budget exhausted (achieved " +
              std::to_string(static_cast<double>(total_error)) +
              ", requested " + std::to_string(static_cast<double>(q.abs_tol)) +
              ")",
          static_cast<double>(total_error));
    }
    Interval worst = heap.top();
    heap.pop();
    const S m = S(0.5) * (worst.a + worst.b);
    auto [vl, el] = detail::gk15_panel(f, worst.a, m);
    auto [vr, er] = detail::gk15_panel(f, m, worst.b);
    total_value += vl + vr - worst.value;
    total_error += el + er - worst.error;
    heap.push({worst.a, m, vl, el});
    heap.push({m, worst.b, vr, er});
    ++n_intervals;
  }
  return total_value;
}

}  // namespace dem
