#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "genadam/schedule.hpp"

namespace genadam {

/// Convergence-rate class of a power-law family, decided by the exponents
/// alone: convergent iff 0 < r <= 2s < 2, with the T-dependence split on
/// r/2 + s vs 1.
struct RateClass {
  enum class Tag {
    PolyHalfR,      // O(T^(-r/2))            when r/2 + s < 1
    LogOverPoly,    // O(log T / T^(1-s))     when r/2 + s = 1
    PolyOneMinusS,  // O(T^(-(1-s)))          when r/2 + s > 1
    NotConvergent,  // r = 0 or r > 2s
  };
  Tag tag = Tag::NotConvergent;
  double exponent = 0.0;  // power of T in the decay; 0 when not convergent
};

/// Total on {r >= 0, 0 <= s < 1}. The r/2 + s = 1 boundary is decided by
/// exact floating-point comparison, so rationals representable in binary
/// (0.5, 0.25, 0.75, ...) land on it exactly.
RateClass classify_rate(const PowerLawFamily& fam);

std::string describe(const RateClass& rc);

/// Anatomy of the four-part sufficient condition for convergence:
///   1. momentum capped below 1,
///   2. decay inside (0,1) and non-decreasing,
///   3. normalized lr chi_t = alpha_t/sqrt(1-theta_t) almost non-increasing
///      (finite envelope ratio C0),
///   4. (sum_t alpha_t*sqrt(1-theta_t)) / (T*alpha_T) -> 0.
/// Conditions 1-3 are checked over [1, horizon]; condition 4 is certified
/// from the exponents for power-law schedules and trend-diagnosed from
/// geometric samples otherwise. A diagnosis is horizon-limited evidence,
/// never a certificate.
struct SCReport {
  enum class RatioVerdict { Certified, DiagnosedDecreasing, DiagnosedStalled };

  struct Momentum {
    bool pass = false;
    double max_momentum = 0.0;
    std::int64_t witness_t = 0;  // where the max (or first violation) occurs
  };
  struct DecayMonotone {
    bool pass = false;
    std::int64_t first_violation = 0;  // 0 when none
  };
  struct Envelope {
    bool pass = false;
    double c0_hat = 0.0;  // max_t chi_t / min_{i<=t} chi_i
    std::string note;
  };
  struct Ratio {
    RatioVerdict verdict = RatioVerdict::DiagnosedStalled;
    std::vector<std::pair<std::int64_t, double>> samples;  // (T', ratio), ascending
  };

  Momentum momentum_bounded;     // condition 1
  DecayMonotone decay_monotone;  // condition 2
  Envelope lr_envelope;          // condition 3
  Ratio ratio_vanishes;          // condition 4
  bool symbolic = false;         // power-law input, condition 4 decidable exactly
  std::int64_t horizon = 0;
  bool satisfied = false;

  std::string summary() const;
};

/// Evaluates all four conditions. horizon must be >= 10 (shorter diagnostics
/// are meaningless); tabulated schedules are checked over their full table if
/// it is shorter than the requested horizon.
SCReport check_sufficient_condition(const ParameterSchedule& sched, std::int64_t horizon);

/// The condition-3 estimator on its own: max_t chi_t / min_{i<=t} chi_i over
/// [1, horizon]. Always >= 1; +inf if chi is ever undefined (decay >= 1).
double envelope_c0(const ParameterSchedule& sched, std::int64_t horizon);

}  // namespace genadam
