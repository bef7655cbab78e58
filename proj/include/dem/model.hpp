#pragma once

#include <string>
#include <vector>

#include "dem/bath.hpp"
#include "dem/types.hpp"

namespace dem {

template <typename Scalar = double>
struct LevelT {
  Scalar frequency;           // may be negative (levels below the reference)
  Scalar initial_occupation;  // in [0, 1]
};

using Level = LevelT<double>;

template <typename Scalar = double>
struct SystemSpecT {
  std::vector<LevelT<Scalar>> levels;
  bool apply_counterterm = false;
  std::string label;

  void validate() const {
    if (levels.empty())
      throw std::invalid_argument("model: system needs at least one level");
    for (const auto& l : levels)
      if (l.initial_occupation < Scalar(0) || l.initial_occupation > Scalar(1))
        throw std::invalid_argument(
            "model: initial occupations must lie in [0, 1]");
  }
};

using SystemSpec = SystemSpecT<double>;

// The coupled single-excitation Hamiltonian matrix: system levels on the
// first n_system diagonal entries (counter-term-shifted when enabled), bath
// frequencies on the rest, and the coupling vector g_nu repeated in every
// system row/column.  System-system and bath-bath off-diagonal blocks are
// zero by construction.
template <typename Scalar = double>
struct ReducedHamiltonianT {
  MatrixX<Scalar> matrix;
  int n_system = 0;
  int n_bath = 0;

  int dim() const { return n_system + n_bath; }
};

using ReducedHamiltonian = ReducedHamiltonianT<double>;

template <typename S>
ReducedHamiltonianT<S> build_hamiltonian(const SystemSpecT<S>& system,
                                         const DiscretizedBathT<S>& bath) {
  system.validate();
  const int ns = static_cast<int>(system.levels.size());
  const int ne = bath.size();
  const int n = ns + ne;

  ReducedHamiltonianT<S> h;
  h.n_system = ns;
  h.n_bath = ne;
  h.matrix = MatrixX<S>::Zero(n, n);

  const S shift = system.apply_counterterm ? counterterm(bath) : S(0);
  for (int i = 0; i < ns; ++i) {
    h.matrix(i, i) = system.levels[i].frequency + shift;
    h.matrix.row(i).segment(ns, ne) = bath.couplings.transpose();
    h.matrix.col(i).segment(ns, ne) = bath.couplings;
  }
  h.matrix.diagonal().segment(ns, ne) = bath.frequencies;
  return h;
}

// Single excited level at +Omega relaxing into the bath; the counter-term
// keeps the observable frequency at Omega despite the coupling shift.
template <typename S>
SystemSpecT<S> two_level_preset(S Omega, S n0) {
  SystemSpecT<S> sys;
  sys.levels = {{Omega, n0}};
  sys.apply_counterterm = true;
  sys.label = "two_level";
  sys.validate();
  return sys;
}

// Upper (+Omega) and lower (-Omega) levels around an intermediate reference
// state, both coupled to the bath with the same g_nu.  Level index 0 is the
// upper level, index 1 the lower.  No counter-term by default.
template <typename S>
SystemSpecT<S> three_level_preset(S Omega, S nU0, S nL0) {
  SystemSpecT<S> sys;
  sys.levels = {{Omega, nU0}, {-Omega, nL0}};
  sys.apply_counterterm = false;
  sys.label = "three_level";
  sys.validate();
  return sys;
}

}  // namespace dem
