#pragma once

#include <Eigen/Eigenvalues>

#include "dem/model.hpp"
#include "dem/types.hpp"

namespace dem {

// Eigenfrequencies (ascending) and the orthogonal transform U of the
// reduced Hamiltonian: H = U diag(freq) U^T.  Rows of U follow the original
// basis (system first), columns index eigenmodes.
template <typename Scalar = double>
struct EigenDecompositionT {
  VectorX<Scalar> frequencies;
  MatrixX<Scalar> transform;

  int dim() const { return static_cast<int>(frequencies.size()); }
};

using EigenDecomposition = EigenDecompositionT<double>;

template <typename S>
EigenDecompositionT<S> diagonalize(const ReducedHamiltonianT<S>& h) {
  const auto& m = h.matrix;
  if (m.rows() != m.cols() || m.rows() == 0)
    throw std::invalid_argument("diagonalize: matrix must be square and nonempty");
  const S scale = m.template lpNorm<Eigen::Infinity>();
  if ((m - m.transpose()).template lpNorm<Eigen::Infinity>() >
      S(1e-12) * std::max(scale, S(1)))
    throw std::invalid_argument("diagonalize: matrix is not symmetric");

  Eigen::SelfAdjointEigenSolver<MatrixX<S>> solver(m);
  if (solver.info() != Eigen::Success)
    throw NumericalError("diagonalize: eigensolver failed to converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

}  // namespace dem
