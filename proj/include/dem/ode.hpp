#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dem/dynamics.hpp"
#include "dem/model.hpp"
#include "dem/types.hpp"

namespace dem {

enum class OdeMethod { RK4, RK8 };

template <typename Scalar = double>
struct OdeSpecT {
  Scalar step = Scalar(1e-3);
  OdeMethod method = OdeMethod::RK4;
  Scalar t_end = Scalar(0);

  void validate() const {
    if (!(step > Scalar(0))) throw std::invalid_argument("ode: step must be > 0");
    if (t_end < Scalar(0)) throw std::invalid_argument("ode: t_end must be >= 0");
  }
};

using OdeSpec = OdeSpecT<double>;

template <typename Scalar = double>
struct OdeResultT {
  std::vector<MatrixXc<Scalar>> samples;   // M at the snapped sample times
  std::vector<Scalar> sample_times;        // actual (snapped) times
  Scalar step_used = Scalar(0);
  int halvings = 0;
  Scalar max_unitarity_drift = Scalar(0);
  std::vector<std::string> warnings;
};

using OdeResult = OdeResultT<double>;

namespace detail {

// Y = H X without forming the dense product when H has the arrow shape
// (diagonal plus dense system rows/columns).  The shape is verified, not
// assumed: any nonzero outside the pattern falls back to a dense multiply,
// so the routine is exact for arbitrary symmetric input.
template <typename S>
class HamiltonianApply {
 public:
  explicit HamiltonianApply(const ReducedHamiltonianT<S>& h)
      : dense_(&h.matrix), ns_(h.n_system), ne_(h.n_bath) {
    const auto& m = h.matrix;
    arrow_ = ns_ > 0 && ne_ > 0;
    if (arrow_) {
      for (int i = 0; i < ns_ && arrow_; ++i)
        for (int j = 0; j < ns_; ++j)
          if (i != j && m(i, j) != S(0)) { arrow_ = false; break; }
      for (int i = ns_; i < ns_ + ne_ && arrow_; ++i)
        for (int j = ns_; j < ns_ + ne_; ++j)
          if (i != j && m(i, j) != S(0)) { arrow_ = false; break; }
    }
    if (arrow_) {
      diag_ = m.diagonal();
      coupling_ = m.topRightCorner(ns_, ne_);
    }
  }

  void apply(const MatrixX<S>& x, MatrixX<S>& y) const {
    if (!arrow_) {
      y.noalias() = (*dense_) * x;
      return;
    }
    y = diag_.asDiagonal() * x;
    y.topRows(ns_).noalias() += coupling_ * x.bottomRows(ne_);
    y.bottomRows(ne_).noalias() += coupling_.transpose() * x.topRows(ns_);
  }

  bool arrow() const { return arrow_; }

 private:
  const MatrixX<S>* dense_;
  bool arrow_ = false;
  int ns_, ne_;
  VectorX<S> diag_;
  MatrixX<S> coupling_;
};

// Explicit Runge-Kutta tableau acting on the pair (A, B) = (Re M, Im M)
// with A' = -H B, B' = H A (i.e. dM/dt = i H M; for M(0) = I this is the
// same discrete map as dM/dt = i M H since every stage is a polynomial in H).
template <typename S>
struct ButcherTableau {
  std::vector<std::vector<S>> a;  // strictly lower-triangular rows
  std::vector<S> b;
  int stages() const { return static_cast<int>(b.size()); }
};

template <typename S>
ButcherTableau<S> rk4_tableau() {
  return {{{}, {S(0.5)}, {S(0), S(0.5)}, {S(0), S(0), S(1)}},
          {S(1) / 6, S(1) / 3, S(1) / 3, S(1) / 6}};
}

// 12-stage 8th-order core of the Dormand-Prince 8(5,3) pair.
template <typename S>
ButcherTableau<S> rk8_tableau() {
  using V = std::vector<S>;
  ButcherTableau<S> t;
  t.a = {
      V{},
      V{5.260015195876773e-02},
      V{1.9725056984537900e-02, 5.9175170953613701e-02},
      V{2.9587585476806851e-02, 0, 8.8762756430420545e-02},
      V{2.4136513415926669e-01, 0, -8.8454947932828609e-01,
        9.2483400326179199e-01},
      V{3.7037037037037035e-02, 0, 0, 1.7082860872947386e-01,
        1.2546768756682242e-01},
      V{3.7109375e-02, 0, 0, 1.7025221101954405e-01, 6.0216538980455959e-02,
        -1.7578125e-02},
      V{3.7092000118504789e-02, 0, 0, 1.7038392571223998e-01,
        1.0726203044637328e-01, -1.5319437748624402e-02,
        8.2737891638140233e-03},
      V{6.2411095871607569e-01, 0, 0, -3.3608926294469414e+00,
        -8.6821934684172597e-01, 2.7592099699446710e+01,
        2.0154067550477894e+01, -4.3489884181069961e+01},
      V{4.7766253643826434e-01, 0, 0, -2.4881146199716677e+00,
        -5.9029082683684297e-01, 2.1230051448181193e+01,
        1.5279233632882423e+01, -3.3288210968984863e+01,
        -2.0331201708508627e-02},
      V{-9.3714243008598732e-01, 0, 0, 5.1863724288440638e+00,
        1.0914373489967295e+00, -8.1497870107469268e+00,
        -1.8520065659996959e+01, 2.2739487099350505e+01,
        2.4936055526796523e+00, -3.0467644718982196e+00},
      V{2.2733101475165380e+00, 0, 0, -1.0534495466737249e+01,
        -2.0008720582248625e+00, -1.7958931863118799e+01,
        2.7948884529419960e+01, -2.8589982771350235e+00,
        -8.8728569335306293e+00, 1.2360567175794303e+01,
        6.4339274601576357e-01}};
  t.b = V{5.4293734116568765e-02, 0, 0, 0, 0, 4.4503128927524092e+00,
          1.8915178993145003e+00, -5.8012039600105849e+00,
          3.1116436695781990e-01, -1.5216094966251609e-01,
          2.0136540080403034e-01, 4.4710615727772587e-02};
  return t;
}

template <typename S>
struct RkState {
  MatrixX<S> a, b;  // real and imaginary parts of M
};

// One explicit RK step of size h for the pair ODE above.
template <typename S>
void rk_step(const HamiltonianApply<S>& H, const ButcherTableau<S>& tab, S h,
             RkState<S>& y, std::vector<RkState<S>>& k, RkState<S>& stage) {
  const int s = tab.stages();
  for (int i = 0; i < s; ++i) {
    stage.a = y.a;
    stage.b = y.b;
    for (int j = 0; j < i; ++j) {
      const S c = h * tab.a[i][j];
      if (c == S(0)) continue;
      stage.a.noalias() += c * k[j].a;
      stage.b.noalias() += c * k[j].b;
    }
    // k_i = f(stage): A' = -H B, B' = H A
    H.apply(stage.b, k[i].a);
    k[i].a = -k[i].a;
    H.apply(stage.a, k[i].b);
  }
  for (int i = 0; i < s; ++i) {
    const S c = h * tab.b[i];
    if (c == S(0)) continue;
    y.a.noalias() += c * k[i].a;
    y.b.noalias() += c * k[i].b;
  }
}

template <typename S>
S unitarity_drift(const RkState<S>& y) {
  const int n = static_cast<int>(y.a.rows());
  MatrixX<S> re = y.a * y.a.transpose() + y.b * y.b.transpose();
  re.diagonal().array() -= S(1);
  const MatrixX<S> im = y.b * y.a.transpose() - y.a * y.b.transpose();
  return std::max(re.template lpNorm<Eigen::Infinity>(),
                  im.template lpNorm<Eigen::Infinity>());
}

}  // namespace detail

// Fixed-step RK integration of dM/dt = i M H_R from M(0) = I, sampled at
// the requested times snapped to the nearest step multiple (round half away
// from zero).  The step is auto-halved (up to 4 times) until the final
// unitarity drift is below 1e-8; a drift above 1e-6 after that is an error.
// This path never touches the eigendecomposition.
template <typename S>
OdeResultT<S> propagate_ode(const ReducedHamiltonianT<S>& h,
                            const OdeSpecT<S>& spec,
                            const std::vector<S>& sample_times) {
  spec.validate();
  const int n = h.dim();
  if (n == 0 || h.matrix.rows() != n)
    throw std::invalid_argument("ode: malformed Hamiltonian");
  for (S t : sample_times)
    if (t < S(0) || t > spec.t_end + spec.step / S(2))
      throw std::invalid_argument("ode: sample times must lie in [0, t_end]");

  const detail::HamiltonianApply<S> H(h);
  const auto tableau = spec.method == OdeMethod::RK4
                           ? detail::rk4_tableau<S>()
                           : detail::rk8_tableau<S>();

  // Gershgorin bound keeps the step-size sanity check independent of the
  // eigensolver.
  const S radius_bound = h.matrix.cwiseAbs().rowwise().sum().maxCoeff();

  OdeResultT<S> result;
  constexpr S drift_ok = S(1e-8);
  constexpr S drift_fail = S(1e-6);
  const int max_halvings = 4;

  S step = spec.step;
  for (int attempt = 0;; ++attempt) {
    result.warnings.clear();
    if (step * radius_bound >= S(0.1))
      result.warnings.push_back(
          "ode: step " + std::to_string(double(step)) +
          " times spectral-radius bound " + std::to_string(double(radius_bound)) +
          " exceeds 0.1; accuracy may suffer");

    const long n_steps = std::llround(double(spec.t_end / step));
    std::vector<long> snap(sample_times.size());
    for (size_t i = 0; i < sample_times.size(); ++i)
      snap[i] = std::clamp<long>(std::llround(double(sample_times[i] / step)),
                                 0, n_steps);

    // a handful of drift checkpoints plus the final step
    std::vector<long> checks;
    for (int i = 1; i <= 8; ++i) checks.push_back(n_steps * i / 8);

    detail::RkState<S> y{MatrixX<S>::Identity(n, n), MatrixX<S>::Zero(n, n)};
    std::vector<detail::RkState<S>> k(tableau.stages());
    for (auto& ki : k) ki = {MatrixX<S>(n, n), MatrixX<S>(n, n)};
    detail::RkState<S> stage{MatrixX<S>(n, n), MatrixX<S>(n, n)};

    result.samples.clear();
    result.sample_times.clear();
    result.max_unitarity_drift = S(0);
    result.step_used = step;
    result.halvings = attempt;

    // samples come back in caller order even when the times are unsorted
    std::vector<MatrixXc<S>> by_input(sample_times.size());
    std::vector<S> t_by_input(sample_times.size());
    auto collect = [&](long at) {
      bool needed = false;
      for (size_t i = 0; i < snap.size(); ++i)
        if (snap[i] == at) needed = true;
      if (!needed) return;
      MatrixXc<S> m(n, n);
      m.real() = y.a;
      m.imag() = y.b;
      for (size_t i = 0; i < snap.size(); ++i)
        if (snap[i] == at) {
          by_input[i] = m;
          t_by_input[i] = S(at) * step;
        }
    };

    collect(0);
    for (long s = 1; s <= n_steps; ++s) {
      detail::rk_step(H, tableau, step, y, k, stage);
      collect(s);
      if (std::find(checks.begin(), checks.end(), s) != checks.end())
        result.max_unitarity_drift =
            std::max(result.max_unitarity_drift, detail::unitarity_drift(y));
    }
    if (n_steps == 0)
      result.max_unitarity_drift = detail::unitarity_drift(y);

    result.samples.assign(by_input.begin(), by_input.end());
    result.sample_times.assign(t_by_input.begin(), t_by_input.end());

    if (result.max_unitarity_drift <= drift_ok) break;
    if (attempt < max_halvings) {
      step /= S(2);
      continue;
    }
    if (result.max_unitarity_drift > drift_fail)
      throw OdeError("ode: unitarity drift " +
                         std::to_string(double(result.max_unitarity_drift)) +
                         " exceeds 1e-6 after " +
                         std::to_string(max_halvings) + " halvings",
                     double(result.max_unitarity_drift));
    result.warnings.push_back(
        "ode: unitarity drift " +
        std::to_string(double(result.max_unitarity_drift)) +
        " above the 1e-8 target after maximum step refinement");
    break;
  }
  return result;
}

template <typename Scalar = double>
struct TimeWindowT {
  Scalar t0, t1;
};

using TimeWindow = TimeWindowT<double>;

// Least-squares slope of ln n over the window, sign-flipped.  Requires
// strictly positive, monotonically decaying samples in the window.
template <typename S>
S fit_decay_rate(const TrajectoryT<S>& traj, int level, TimeWindowT<S> window) {
  const int ns = static_cast<int>(traj.system_occupations.cols());
  if (level < 0 || level >= ns)
    throw std::invalid_argument("ode: fit level out of range");
  std::vector<S> ts, lns;
  S prev = S(0);
  bool first = true;
  for (size_t k = 0; k < traj.times.size(); ++k) {
    const S t = traj.times[k];
    if (t < window.t0 || t > window.t1) continue;
    const S v = traj.system_occupations(static_cast<int>(k), level);
    if (!(v > S(0)))
      throw std::invalid_argument(
          "ode: fit window contains non-positive occupations");
    if (!first && v > prev * (S(1) + S(1e-12)))
      throw NumericalError(
          "ode: occupation is not monotonically decaying in the fit window "
          "(t = " + std::to_string(double(t)) + ")");
    prev = v;
    first = false;
    ts.push_back(t);
    lns.push_back(std::log(v));
  }
  if (ts.size() < 3)
    throw std::invalid_argument("ode: fit window holds fewer than 3 samples");
  const S n = S(ts.size());
  S st = 0, sy = 0, stt = 0, sty = 0;
  for (size_t k = 0; k < ts.size(); ++k) {
    st += ts[k];
    sy += lns[k];
    stt += ts[k] * ts[k];
    sty += ts[k] * lns[k];
  }
  const S slope = (n * sty - st * sy) / (n * stt - st * st);
  return -slope;
}

// Time-average of one level's occupation over a late-time window (301
// uniform samples); the caller is responsible for placing the window well
// past the transient.
template <typename S>
S thermal_asymptote(const PropagatorT<S>& prop, int level,
                    TimeWindowT<S> window) {
  if (level < 0 || level >= prop.n_system)
    throw std::invalid_argument("ode: asymptote level out of range");
  if (!(window.t1 > window.t0) || window.t0 < S(0))
    throw std::invalid_argument("ode: asymptote window must be ordered and nonnegative");
  if (prop.validity_horizon > S(0) && window.t1 > prop.validity_horizon)
    throw std::invalid_argument(
        "ode: asymptote window exceeds the bath recurrence horizon tau_max");
  const int n_samples = 301;
  S acc = 0;
  for (int k = 0; k < n_samples; ++k) {
    const S t =
        window.t0 + (window.t1 - window.t0) * S(k) / S(n_samples - 1);
    acc += occupations(prop, t)[level];
  }
  return acc / S(n_samples);
}

}  // namespace dem
