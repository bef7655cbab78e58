#pragma once

#include <cmath>
#include <ostream>

#include "dem/spectral.hpp"
#include "dem/types.hpp"

namespace dem {

template <typename Scalar = double>
struct BathSpecT {
  int n_max = 250;              // top grid index; the bath has n_max+1 modes
  Scalar omega_max = Scalar(10);
  Scalar temperature = Scalar(1);  // k_B T, >= 0
  Statistics statistics = Statistics::Boson;

  void validate() const {
    if (n_max < 0) throw std::invalid_argument("bath: n_max must be >= 0");
    if (!(omega_max > Scalar(0)))
      throw std::invalid_argument("bath: omega_max must be > 0");
    if (temperature < Scalar(0))
      throw std::invalid_argument("bath: temperature must be >= 0");
  }
};

using BathSpec = BathSpecT<double>;

// Finite stand-in for the continuous environment: uniformly spaced mode
// frequencies w_nu = dw (nu + 1/2), couplings g_nu = sqrt(dw J(w_nu)), and
// initial thermal occupations.  With dw = omega_max/(n_max + 1/2) the top
// mode lands exactly at omega_max.
template <typename Scalar = double>
struct DiscretizedBathT {
  VectorX<Scalar> frequencies;
  VectorX<Scalar> couplings;
  VectorX<Scalar> occupations;
  Scalar delta_omega = Scalar(0);
  Statistics statistics = Statistics::Boson;

  int size() const { return static_cast<int>(frequencies.size()); }
};

using DiscretizedBath = DiscretizedBathT<double>;

// Initial occupancy 1/(exp(w/T) + eps), eps = -1 bosons / +1 fermions.
// T = 0 is the exact zero-occupation limit for both statistics.
template <typename S>
S thermal_occupation(S omega, S temperature, Statistics statistics) {
  if (omega <= S(0)) {
    if (statistics == Statistics::Boson && temperature > S(0))
      throw std::invalid_argument(
          "bath: bosonic occupation diverges for omega <= 0 at T > 0");
    throw std::invalid_argument("bath: thermal_occupation requires omega > 0");
  }
  if (temperature < S(0))
    throw std::invalid_argument("bath: temperature must be >= 0");
  if (temperature == S(0)) return S(0);
  const S eps = statistics == Statistics::Boson ? S(-1) : S(1);
  return S(1) / (std::exp(omega / temperature) + eps);
}

template <typename S>
DiscretizedBathT<S> discretize(const SpectralFunctionT<S>& sf,
                               const BathSpecT<S>& spec) {
  sf.validate();
  spec.validate();
  const int n_modes = spec.n_max + 1;
  const S dw = spec.omega_max / (S(spec.n_max) + S(0.5));

  DiscretizedBathT<S> bath;
  bath.delta_omega = dw;
  bath.statistics = spec.statistics;
  bath.frequencies.resize(n_modes);
  bath.couplings.resize(n_modes);
  bath.occupations.resize(n_modes);
  for (int n = 0; n < n_modes; ++n) {
    const S w = dw * (S(n) + S(0.5));
    bath.frequencies[n] = w;
    bath.couplings[n] = std::sqrt(dw * evaluate(sf, w));
    bath.occupations[n] =
        spec.temperature == S(0)
            ? S(0)
            : thermal_occupation(w, spec.temperature, spec.statistics);
  }
  return bath;
}

// Frequency shift sum_nu g_nu^2 / w_nu entering the renormalized system
// frequency; equals the discrete kernel at t = 0.
template <typename S>
S counterterm(const DiscretizedBathT<S>& bath) {
  if (bath.size() == 0)
    throw std::invalid_argument("bath: counterterm needs a nonempty bath");
  return (bath.couplings.array().square() / bath.frequencies.array()).sum();
}

template <typename Scalar = double>
struct ResolutionReportT {
  Scalar delta_tau;  // shortest resolvable time, 2 pi / omega_max
  Scalar tau_max;    // recurrence horizon of the finite bath, 2 pi / dw
};

using ResolutionReport = ResolutionReportT<double>;

template <typename S>
ResolutionReportT<S> resolution_report(const DiscretizedBathT<S>& bath) {
  if (bath.size() == 0)
    throw std::invalid_argument("bath: resolution_report needs a nonempty bath");
  const S omega_max = bath.frequencies[bath.size() - 1];
  return {S(2) * S(M_PI) / omega_max, S(2) * S(M_PI) / bath.delta_omega};
}

// CSV dump `nu,omega,g,n0`, one row per mode.
template <typename S>
void write_bath_csv(const DiscretizedBathT<S>& bath, std::ostream& out) {
  out << "nu,omega,g,n0\n";
  char buf[128];
  for (int n = 0; n < bath.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", n,
                  static_cast<double>(bath.frequencies[n]),
                  static_cast<double>(bath.couplings[n]),
                  static_cast<double>(bath.occupations[n]));
    out << buf;
  }
}

}  // namespace dem
