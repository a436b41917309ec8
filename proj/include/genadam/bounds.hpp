#pragma once

#include <cstdint>
#include <optional>

#include "genadam/schedule.hpp"

namespace genadam {

/// Problem-side inputs to the convergence bound.
struct ProblemConstants {
  double g_bound = 1.0;    // G, with E||g_t||^2 <= G^2
  double lipschitz = 1.0;  // L, gradient Lipschitz constant of the expected loss
  double eps = 1e-8;       // epsilon placed in v_0
  std::int64_t dim = 1;    // d
  double fn_gap = 1.0;     // f(x_1) - f*
};

/// Schedule-side auxiliary constants: any theta_prime strictly between
/// beta_cap^2 and the late decay value works; gamma = beta_cap^2/theta_prime
/// and c1 corrects the early steps whose decay sits below theta_prime.
struct ContractionPair {
  double theta_prime = 0.0;
  double gamma = 0.0;  // beta_cap^2 / theta_prime, < 1
  double c1 = 1.0;     // prod_{j<=N} theta_j/theta_prime, N = last j with theta_j < theta_prime
};

/// Midpoint (beta_cap^2 + theta_horizon)/2, except for constant-decay
/// schedules where theta itself is the canonical choice. Throws when
/// theta_horizon <= beta_cap^2 (no admissible value exists).
double default_theta_prime(const ParameterSchedule& sched, std::int64_t horizon);

ContractionPair contraction_constants(const ParameterSchedule& sched, std::int64_t horizon,
                                      double theta_prime);

/// Everything needed to evaluate the high-probability bound.
struct BoundConstants {
  double theta_prime = 0.0;
  double gamma = 0.0;
  double c0 = 1.0;  // envelope estimate of the almost-non-increasing ratio
  double c1 = 1.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;       // fn_gap
  double big_c = 0.0;       // numerator offset
  double big_c_prime = 0.0; // weight of the step-size sum
  double theta1 = 0.0;   // decay at t = 1 (enters c2, big_c_prime)
  double chi1 = 0.0;     // normalized lr at t = 1 (enters c3, big_c)
  std::int64_t horizon = 0;
  ProblemConstants problem;
};

/// Assembles every constant from the schedule and problem data.
/// theta_prime_override, when given, must lie in (beta_cap^2, theta_horizon].
BoundConstants compute_constants(const ParameterSchedule& sched, const ProblemConstants& pc,
                                 std::int64_t horizon,
                                 std::optional<double> theta_prime_override = std::nullopt);

/// (big_c + big_c_prime * sum_{t<=T} alpha_t*sqrt(1-theta_t)) / (delta*T*alpha_T),
/// by direct compensated summation. delta in (0, 1].
double bound_at(const BoundConstants& bc, const ParameterSchedule& sched, std::int64_t T,
                double delta);

}  // namespace genadam
