#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dem {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

enum class Statistics { Boson, Fermion };

inline const char* to_string(Statistics s) {
  return s == Statistics::Boson ? "boson" : "fermion";
}

// Base for failures of numerical procedures (as opposed to bad input).
// The CLI maps these to a distinct exit code.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Adaptive quadrature gave up before reaching the requested tolerance.
// Carries the error estimate that was actually achieved.
class QuadratureError : public NumericalError {
 public:
  QuadratureError(const std::string& msg, double achieved)
      : NumericalError(msg), achieved_error(achieved) {}
  double achieved_error;
};

// ODE propagation lost unitarity beyond the acceptable bound even after
// step refinement.
class OdeError : public NumericalError {
 public:
  OdeError(const std::string& msg, double drift)
      : NumericalError(msg), unitarity_drift(drift) {}
  double unitarity_drift;
};

}  // namespace dem
