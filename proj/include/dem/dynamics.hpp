#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "dem/diagonalize.hpp"
#include "dem/model.hpp"
#include "dem/types.hpp"

namespace dem {

// Everything needed to evaluate observables at arbitrary times: the
// eigendecomposition of the reduced Hamiltonian plus the initial
// occupations (system levels first, bath modes after).  Immutable once
// built; evaluation at distinct times shares no mutable state.
template <typename Scalar = double>
struct PropagatorT {
  EigenDecompositionT<Scalar> eig;
  int n_system = 0;
  int n_bath = 0;
  VectorX<Scalar> initial_occupations;
  Scalar validity_horizon = Scalar(0);  // tau_max of the underlying bath

  void validate() const {
    if (initial_occupations.size() != eig.dim())
      throw std::invalid_argument(
          "dynamics: initial occupations must match the eigenbasis dimension");
    if ((initial_occupations.array() < Scalar(0)).any())
      throw std::invalid_argument("dynamics: negative initial occupation");
  }
};

using Propagator = PropagatorT<double>;

template <typename S>
PropagatorT<S> make_propagator(const SystemSpecT<S>& system,
                               const DiscretizedBathT<S>& bath) {
  const auto h = build_hamiltonian(system, bath);
  PropagatorT<S> prop;
  prop.eig = diagonalize(h);
  prop.n_system = h.n_system;
  prop.n_bath = h.n_bath;
  prop.initial_occupations.resize(h.dim());
  for (int i = 0; i < h.n_system; ++i)
    prop.initial_occupations[i] = system.levels[i].initial_occupation;
  prop.initial_occupations.segment(h.n_system, h.n_bath) = bath.occupations;
  prop.validity_horizon = resolution_report(bath).tau_max;
  prop.validate();
  return prop;
}

template <typename Scalar = double>
struct TimeGridT {
  Scalar t_start = Scalar(0);
  Scalar t_end = Scalar(0);
  int n_points = 0;

  std::vector<Scalar> times() const {
    if (n_points < 1) throw std::invalid_argument("grid: n_points must be >= 1");
    if (n_points > 1 && !(t_end > t_start))
      throw std::invalid_argument("grid: t_end must exceed t_start");
    std::vector<Scalar> ts(n_points);
    const Scalar dt =
        n_points > 1 ? (t_end - t_start) / Scalar(n_points - 1) : Scalar(0);
    for (int k = 0; k < n_points; ++k) ts[k] = t_start + dt * Scalar(k);
    return ts;
  }
};

using TimeGrid = TimeGridT<double>;

template <typename Scalar = double>
struct TrajectoryT {
  std::vector<Scalar> times;
  MatrixX<Scalar> system_occupations;          // n_points x n_system
  std::vector<MatrixXc<Scalar>> system_coherences;  // per time, n_system^2
  MatrixX<Scalar> bath_occupations;            // n_points x n_bath (optional)
  VectorX<Scalar> total_excitation;
  bool has_coherences = false;
  bool has_bath_occupations = false;
  bool beyond_resolution = false;
  std::vector<std::string> warnings;
};

using Trajectory = TrajectoryT<double>;

namespace detail {

// Real and imaginary parts of M(t) = U e^{+i L t} U^T as two real GEMMs.
template <typename S>
void m_matrix_parts(const PropagatorT<S>& prop, S t, MatrixX<S>& re,
                    MatrixX<S>& im) {
  const auto& u = prop.eig.transform;
  const auto phase = (prop.eig.frequencies.array() * t).eval();
  re.noalias() = (u * phase.cos().matrix().asDiagonal()) * u.transpose();
  im.noalias() = (u * phase.sin().matrix().asDiagonal()) * u.transpose();
}

// Only the system rows of M(t): enough for occupations and correlations of
// the small subsystem, at O(n_system N^2) instead of O(N^3).
template <typename S>
void m_system_rows(const PropagatorT<S>& prop, S t, MatrixX<S>& re,
                   MatrixX<S>& im) {
  const auto& u = prop.eig.transform;
  const auto top = u.topRows(prop.n_system);
  const auto phase = (prop.eig.frequencies.array() * t).eval();
  re.noalias() =
      (top.array().rowwise() * phase.cos().transpose()).matrix() * u.transpose();
  im.noalias() =
      (top.array().rowwise() * phase.sin().transpose()).matrix() * u.transpose();
}

}  // namespace detail

// Propagator matrix M_ab(t) = sum_alpha U_{a alpha} U_{b alpha} e^{+i W_alpha t}
// (creation-operator phase convention).  Complex symmetric and unitary.
template <typename S>
MatrixXc<S> m_matrix(const PropagatorT<S>& prop, S t) {
  MatrixX<S> re, im;
  detail::m_matrix_parts(prop, t, re, im);
  MatrixXc<S> m(re.rows(), re.cols());
  m.real() = re;
  m.imag() = im;
  return m;
}

// Occupations n_a(t) = sum_b |M_ab(t)|^2 n0_b.  Returns the system levels
// only by default; with include_bath, bath mode occupations follow.
template <typename S>
VectorX<S> occupations(const PropagatorT<S>& prop, S t,
                       bool include_bath = false) {
  MatrixX<S> re, im;
  if (include_bath) {
    detail::m_matrix_parts(prop, t, re, im);
    return (re.array().square() + im.array().square()).matrix() *
           prop.initial_occupations;
  }
  detail::m_system_rows(prop, t, re, im);
  return (re.array().square() + im.array().square()).matrix() *
         prop.initial_occupations;
}

// Two-time correlation <S_i^dag(t) S_j(t2)> = sum_b M*_{jb}(t2) n0_b M_{ib}(t)
// for diagonal (thermal, coherence-free) initial conditions.
template <typename S>
std::complex<S> two_time_correlation(const PropagatorT<S>& prop, int i, int j,
                                     S t, S t2) {
  if (i < 0 || i >= prop.n_system || j < 0 || j >= prop.n_system)
    throw std::invalid_argument("dynamics: correlation indices must address system levels");
  MatrixX<S> re_t, im_t, re_2, im_2;
  detail::m_system_rows(prop, t, re_t, im_t);
  detail::m_system_rows(prop, t2, re_2, im_2);
  const auto& n0 = prop.initial_occupations;
  std::complex<S> acc(0, 0);
  for (int b = 0; b < prop.eig.dim(); ++b) {
    const std::complex<S> mi(re_t(i, b), im_t(i, b));
    const std::complex<S> mj(re_2(j, b), -im_2(j, b));
    acc += mj * n0[b] * mi;
  }
  return acc;
}

struct RunOptions {
  bool coherences = false;
  bool bath_occupations = false;
};

// Evaluate the full observable set over a time grid.  Totals are computed
// from the numerically propagated occupations (system plus bath), so the
// conservation check downstream is a real test, not an identity.
template <typename S>
TrajectoryT<S> run(const PropagatorT<S>& prop, const TimeGridT<S>& grid,
                   const RunOptions& opt = {}) {
  prop.validate();
  TrajectoryT<S> traj;
  traj.times = grid.times();
  const int nt = static_cast<int>(traj.times.size());
  const int ns = prop.n_system;
  const int ne = prop.n_bath;

  traj.system_occupations.resize(nt, ns);
  traj.total_excitation.resize(nt);
  traj.has_coherences = opt.coherences;
  traj.has_bath_occupations = opt.bath_occupations;
  if (opt.coherences) traj.system_coherences.resize(nt);
  if (opt.bath_occupations) traj.bath_occupations.resize(nt, ne);

  if (prop.validity_horizon > S(0) &&
      traj.times.back() > prop.validity_horizon) {
    traj.beyond_resolution = true;
    traj.warnings.push_back(
        "grid extends to t = " + std::to_string(double(traj.times.back())) +
        ", beyond the bath recurrence horizon tau_max = " +
        std::to_string(double(prop.validity_horizon)) +
        "; later samples carry finite-size revivals");
  }

  MatrixX<S> re, im;
  const auto& n0 = prop.initial_occupations;
  for (int k = 0; k < nt; ++k) {
    detail::m_matrix_parts(prop, traj.times[k], re, im);
    const VectorX<S> occ =
        (re.array().square() + im.array().square()).matrix() * n0;
    traj.system_occupations.row(k) = occ.head(ns);
    traj.total_excitation[k] = occ.sum();
    if (opt.bath_occupations) traj.bath_occupations.row(k) = occ.tail(ne);
    if (opt.coherences) {
      MatrixXc<S> rows(ns, ns + ne);
      rows.real() = re.topRows(ns);
      rows.imag() = im.topRows(ns);
      const MatrixXc<S> weighted =
          rows * n0.template cast<std::complex<S>>().asDiagonal();
      traj.system_coherences[k].noalias() = weighted * rows.adjoint();
    }
  }
  return traj;
}

// Trajectory CSV: `t,n_0,...,n_{NS-1}[,re_c_ij,im_c_ij...],N_total` with
// coherence pairs i<j in row-major order when present.
template <typename S>
void write_trajectory_csv(const TrajectoryT<S>& traj, std::ostream& out) {
  const int ns = static_cast<int>(traj.system_occupations.cols());
  out << "t";
  for (int i = 0; i < ns; ++i) out << ",n_" << i;
  if (traj.has_coherences)
    for (int i = 0; i < ns; ++i)
      for (int j = i + 1; j < ns; ++j)
        out << ",re_c_" << i << j << ",im_c_" << i << j;
  out << ",N_total\n";

  char buf[64];
  auto cell = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out << buf;
  };
  for (size_t k = 0; k < traj.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", double(traj.times[k]));
    out << buf;
    for (int i = 0; i < ns; ++i) cell(double(traj.system_occupations(k, i)));
    if (traj.has_coherences)
      for (int i = 0; i < ns; ++i)
        for (int j = i + 1; j < ns; ++j) {
          cell(double(traj.system_coherences[k](i, j).real()));
          cell(double(traj.system_coherences[k](i, j).imag()));
        }
    cell(double(traj.total_excitation[k]));
    out << "\n";
  }
}

}  // namespace dem
