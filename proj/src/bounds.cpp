#include "genadam/bounds.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "genadam/sufficient_condition.hpp"

namespace genadam {

namespace {

std::int64_t effective_horizon(const ParameterSchedule& sched, std::int64_t horizon) {
  if (sched.kind() == ParameterSchedule::Kind::Tabulated &&
      horizon > sched.horizon_hint())
    return sched.horizon_hint();
  return horizon;
}

// Constant decay can be recognized structurally for power laws; tables and
// generators are scanned.
bool has_constant_decay(const ParameterSchedule& sched, std::int64_t horizon) {
  if (const PowerLawFamily* fam = sched.family()) return fam->constant_decay();
  const double first = sched.at(1).decay;
  for (std::int64_t t = 2; t <= horizon; ++t)
    if (sched.at(t).decay != first) return false;
  return true;
}

void check_decay_range(double theta, std::int64_t t) {
  if (!(theta > 0.0 && theta < 1.0))
    throw std::domain_error("bound constants: decay outside (0,1) at t = " +
                            std::to_string(t));
}

}  // namespace

double default_theta_prime(const ParameterSchedule& sched, std::int64_t horizon) {
  if (horizon < 1) throw std::invalid_argument("default_theta_prime: horizon must be positive");
  const std::int64_t h = effective_horizon(sched, horizon);
  const double beta = sched.beta_cap();
  const double theta_h = sched.at(h).decay;
  check_decay_range(theta_h, h);
  if (theta_h <= beta * beta)
    throw std::domain_error(
        "no admissible theta_prime: decay at the horizon does not exceed beta_cap^2");
  if (has_constant_decay(sched, h)) return theta_h;
  return 0.5 * (beta * beta + theta_h);
}

ContractionPair contraction_constants(const ParameterSchedule& sched, std::int64_t horizon,
                                      double theta_prime) {
  if (horizon < 1)
    throw std::invalid_argument("contraction_constants: horizon must be positive");
  const std::int64_t h = effective_horizon(sched, horizon);
  const double beta = sched.beta_cap();
  const double theta_h = sched.at(h).decay;
  check_decay_range(theta_h, h);
  if (!(theta_prime > beta * beta && theta_prime <= theta_h))
    throw std::domain_error("theta_prime must lie in (beta_cap^2, theta_horizon]");

  // c1 = prod_{j=1}^{N} theta_j/theta_prime with N the last index whose decay
  // is still below theta_prime; empty product = 1. Accumulated in log space:
  // the product can be extremely small when the decay approaches theta_prime
  // slowly.
  double log_prod = 0.0;
  double log_c1 = 0.0;
  for (std::int64_t t = 1; t <= h; ++t) {
    const double theta = sched.at(t).decay;
    check_decay_range(theta, t);
    log_prod += std::log(theta / theta_prime);
    if (theta < theta_prime) log_c1 = log_prod;
  }
  ContractionPair out;
  out.theta_prime = theta_prime;
  out.gamma = beta * beta / theta_prime;
  out.c1 = std::exp(log_c1);
  return out;
}

BoundConstants compute_constants(const ParameterSchedule& sched, const ProblemConstants& pc,
                                 std::int64_t horizon,
                                 std::optional<double> theta_prime_override) {
  if (horizon < 1) throw std::invalid_argument("compute_constants: horizon must be positive");
  if (!(pc.g_bound > 0.0)) throw std::invalid_argument("compute_constants: G must be positive");
  if (!(pc.lipschitz >= 0.0))
    throw std::invalid_argument("compute_constants: L must be non-negative");
  if (!(pc.eps > 0.0)) throw std::invalid_argument("compute_constants: eps must be positive");
  if (pc.dim < 1) throw std::invalid_argument("compute_constants: dimension must be positive");
  if (!(pc.fn_gap >= 0.0))
    throw std::invalid_argument("compute_constants: fn_gap must be non-negative");

  const std::int64_t h = effective_horizon(sched, horizon);
  const double beta = sched.beta_cap();
  if (!(beta >= 0.0 && beta < 1.0))
    throw std::domain_error("compute_constants: momentum cap must lie in [0, 1)");

  BoundConstants bc;
  bc.problem = pc;
  bc.horizon = h;
  bc.theta_prime =
      theta_prime_override ? *theta_prime_override : default_theta_prime(sched, h);
  const ContractionPair cp = contraction_constants(sched, h, bc.theta_prime);
  bc.gamma = cp.gamma;
  bc.c1 = cp.c1;
  bc.c0 = envelope_c0(sched, h);
  if (!std::isfinite(bc.c0))
    throw std::domain_error(
        "compute_constants: normalized lr has no finite envelope over the horizon");

  const ScheduleTriple first = sched.at(1);
  bc.theta1 = first.decay;
  bc.chi1 = normalized_lr(first);

  const double g = pc.g_bound;
  const double l = pc.lipschitz;
  const double d = static_cast<double>(pc.dim);
  const double one_minus_beta = 1.0 - beta;
  const double root_gamma = std::sqrt(bc.gamma);

  bc.c2 = 2.0 * std::pow(beta / one_minus_beta / std::sqrt(bc.c1 * (1.0 - bc.gamma) * bc.theta1) + 1.0, 2);
  bc.c3 = bc.c0 / (std::sqrt(bc.c1) * (1.0 - root_gamma)) *
          (bc.c0 * bc.c0 * bc.chi1 * l / (bc.c1 * (1.0 - root_gamma) * (1.0 - root_gamma)) +
           bc.c2 * g);
  bc.c4 = pc.fn_gap;

  const double moment_term = std::sqrt(g * g + pc.eps * d);
  bc.big_c = 2.0 * bc.c0 * moment_term / one_minus_beta *
             (bc.c4 + bc.c3 * bc.c0 * d * bc.chi1 * std::log1p(g * g / (pc.eps * d)));
  bc.big_c_prime =
      2.0 * bc.c0 * bc.c0 * bc.c3 * d * moment_term / (one_minus_beta * bc.theta1);
  return bc;
}

double bound_at(const BoundConstants& bc, const ParameterSchedule& sched, std::int64_t T,
                double delta) {
  if (T < 1) throw std::invalid_argument("bound_at: T must be positive");
  if (!(delta > 0.0 && delta <= 1.0))
    throw std::invalid_argument("bound_at: delta must lie in (0, 1]");

  double sum = 0.0, comp = 0.0;
  double alpha_T = 0.0;
  for (std::int64_t t = 1; t <= T; ++t) {
    const ScheduleTriple p = sched.at(t);
    const double gap = 1.0 - p.decay;
    if (!(gap > 0.0))
      throw std::domain_error("bound_at: decay outside (0,1) at t = " + std::to_string(t));
    const double y = p.base_lr * std::sqrt(gap) - comp;
    const double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
    if (t == T) alpha_T = p.base_lr;
  }
  return (bc.big_c + bc.big_c_prime * sum) / (delta * static_cast<double>(T) * alpha_T);
}

}  // namespace genadam
