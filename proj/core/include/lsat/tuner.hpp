#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "lsat/hyper.hpp"
#include "lsat/prox.hpp"

namespace lsat::tuner {

struct TunerConfig {
  double t_init = 1.0;
  std::size_t max_iter = 500;
  double epsilon = 1e-6;
  double increase_factor = 1.2;
  double decrease_factor = 0.5;

  // Throws ConfigError for out-of-range fields.
  void validate() const;
};

// psi(theta_ls(omega)) and its gradient g with respect to omega.
struct ObjectiveValue {
  double psi = 0.0;
  Vector gradient;
};

using Objective = std::function<ObjectiveValue(const HyperVector&)>;

struct TunerIteration {
  std::size_t k = 0;
  // F = psi + r at the tentative point (+inf when it could not be evaluated).
  double objective = 0.0;
  double step_size = 0.0;
  bool accepted = false;
  // Only present on accepted iterations.
  std::optional<double> stopping_metric;
};

enum class Termination { converged, max_iter, early_stopped };

const char* to_string(Termination t) noexcept;

struct TunerReport {
  std::vector<TunerIteration> iterations;
  HyperVector final_omega;
  double final_objective = 0.0;
  Vector final_gradient;
  Termination termination = Termination::max_iter;
};

// Called after every accepted update with the new iterate; returning true
// ends the run with Termination::early_stopped.
using AcceptHook = std::function<bool(const HyperVector&, const TunerIteration&)>;

// ||(omega_prev - omega_next) / t + (g_next - g_prev)||_2.
double stopping_metric(const Eigen::Ref<const Vector>& omega_prev, const Eigen::Ref<const Vector>& omega_next,
                       double t, const Eigen::Ref<const Vector>& g_prev, const Eigen::Ref<const Vector>& g_next);

// Proximal gradient method with the adaptive step rule:
//   omega_tent = prox_{t r}(omega - t g)
//   F(omega_tent) <= F(omega): accept, t *= increase_factor, then stop if the
//                              stopping metric is <= epsilon
//   otherwise:                 reject (omega unchanged), t *= decrease_factor
//
// Objective failures at tentative points (non-finite values, or a
// NumericalError thrown by the objective) count as rejections. If that keeps
// happening until t < 1e-18 the run aborts with NonFiniteObjective. The
// objective at omega0 must be finite; errors there propagate.
TunerReport run(const Objective& objective, const prox::ProxRegularizer& regularizer,
                const HyperVector& omega0, const TunerConfig& config, const AcceptHook& on_accept = {});

}  // namespace lsat::tuner
