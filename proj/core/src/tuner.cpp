#include "lsat/tuner.hpp"

#include <cmath>
#include <limits>

#include "lsat/errors.hpp"

namespace lsat::tuner {

namespace {

constexpr double kMinStep = 1e-18;

struct Evaluated {
  double f = std::numeric_limits<double>::infinity();
  ObjectiveValue value;
  bool ok = false;
};

Evaluated evaluate(const Objective& objective, const prox::ProxRegularizer& regularizer,
                   const HyperVector& omega) {
  Evaluated e;
  e.value = objective(omega);
  const double r = regularizer.value(omega.values());
  e.f = e.value.psi + r;
  e.ok = std::isfinite(e.value.psi) && e.value.gradient.size() == omega.size() && e.value.gradient.allFinite();
  if (!e.ok) e.f = std::numeric_limits<double>::infinity();
  return e;
}

}  // namespace

void TunerConfig::validate() const {
  if (!(t_init > 0.0)) throw ConfigError("tuner t_init must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("tuner epsilon must be positive");
  if (!(increase_factor > 1.0)) throw ConfigError("tuner increase_factor must exceed 1");
  if (!(decrease_factor > 0.0 && decrease_factor < 1.0)) {
    throw ConfigError("tuner decrease_factor must lie in (0, 1)");
  }
}

const char* to_string(Termination t) noexcept {
  switch (t) {
    case Termination::converged:
      return "converged";
    case Termination::max_iter:
      return "max_iter";
    case Termination::early_stopped:
      return "early_stopped";
  }
  return "unknown";
}

double stopping_metric(const Eigen::Ref<const Vector>& omega_prev, const Eigen::Ref<const Vector>& omega_next,
                       double t, const Eigen::Ref<const Vector>& g_prev, const Eigen::Ref<const Vector>& g_next) {
  if (omega_prev.size() != omega_next.size() || g_prev.size() != g_next.size() ||
      omega_prev.size() != g_prev.size()) {
    throw DimensionMismatch("stopping metric operands differ in length");
  }
  if (!(t > 0.0)) throw std::invalid_argument("stopping metric needs a positive step size");
  return ((omega_prev - omega_next) / t + (g_next - g_prev)).norm();
}

TunerReport run(const Objective& objective, const prox::ProxRegularizer& regularizer,
                const HyperVector& omega0, const TunerConfig& config, const AcceptHook& on_accept) {
  config.validate();

  Evaluated current = evaluate(objective, regularizer, omega0);
  if (!current.ok || !std::isfinite(current.f)) {
    throw NonFiniteObjective("objective is not finite at the initial hyper-parameters");
  }

  TunerReport report;
  report.final_omega = omega0;
  double t = config.t_init;

  for (std::size_t k = 1; k <= config.max_iter; ++k) {
    const Vector& omega = report.final_omega.values();
    const Vector& g = current.value.gradient;

    TunerIteration it;
    it.k = k;
    it.step_size = t;

    HyperVector tentative;
    Evaluated next;
    bool evaluated = false;
    try {
      tentative = report.final_omega.with_values(regularizer.prox(omega - t * g, t));
      next = evaluate(objective, regularizer, tentative);
      evaluated = next.ok;
    } catch (const NumericalError&) {
    } catch (const NonFiniteInput&) {
    }
    it.objective = evaluated ? next.f : std::numeric_limits<double>::infinity();

    if (evaluated && next.f <= current.f) {
      it.accepted = true;
      it.stopping_metric = stopping_metric(omega, tentative.values(), t, g, next.value.gradient);
      const bool converged = *it.stopping_metric <= config.epsilon;
      report.final_omega = std::move(tentative);
      current = std::move(next);
      t *= config.increase_factor;
      report.iterations.push_back(it);
      if (converged) {
        report.termination = Termination::converged;
        break;
      }
      if (on_accept && on_accept(report.final_omega, report.iterations.back())) {
        report.termination = Termination::early_stopped;
        break;
      }
    } else {
      t *= config.decrease_factor;
      report.iterations.push_back(it);
      if (!evaluated && t < kMinStep) {
        throw NonFiniteObjective("objective stayed non-finite until the step size underflowed");
      }
    }
  }

  report.final_objective = current.f;
  report.final_gradient = current.value.gradient;
  return report;
}

}  // namespace lsat::tuner
