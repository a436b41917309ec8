#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "genadam/schedule.hpp"

namespace genadam {

/// Axis-aligned feasible box. lo/hi either have the state's dimension or are
/// length-1 broadcasts.
struct BoxConstraint {
  Eigen::ArrayXd lo, hi;

  static BoxConstraint uniform(double lo, double hi);
  static BoxConstraint bounds(Eigen::ArrayXd lo, Eigen::ArrayXd hi);
};

/// Component-wise clamp; idempotent.
Eigen::ArrayXd project_box(const Eigen::ArrayXd& x, const BoxConstraint& c);

/// Iterate of the theta-form recursion:
///   v' = theta*v + (1-theta)*g^2,  m' = beta*m + (1-beta)*g,
///   x' = x - alpha * m'/sqrt(v').
/// All operations component-wise; v_0 = eps keeps every divisor positive.
struct AdamState {
  std::int64_t t = 0;
  Eigen::ArrayXd x, m, v;
};

AdamState init_state(const Eigen::ArrayXd& x1, double eps);

/// One step at t+1. Rejects NaN/Inf gradients (a broken oracle must not be
/// silently absorbed into the EMA state) and hyper-parameters outside
/// alpha > 0, 0 <= beta < 1, 0 < theta < 1. Clamps x into the box afterwards
/// when one is supplied.
void step_generic_adam(AdamState& st, const Eigen::ArrayXd& g, const ScheduleTriple& p,
                       const BoxConstraint* box = nullptr);
void step_generic_adam(AdamState& st, const Eigen::ArrayXd& g, const ParameterSchedule& sched,
                       const BoxConstraint* box = nullptr);

/// Iterate of the weight-form recursion:
///   W' = W + w,  V' = V + w*g^2,  x' = x - alpha * m'/sqrt(V'/W').
/// V and W are stored rescaled by exp(-log_scale): the weights equivalent to
/// a constant-decay schedule grow like theta^(-t) and overflow doubles long
/// before the experiment horizons, but the update only ever consumes the
/// ratio V/W, which is invariant under the shared rescale.
struct WeightedState {
  std::int64_t t = 0;
  Eigen::ArrayXd x, m;
  Eigen::ArrayXd v_scaled;  // V * exp(-log_scale)
  double w_scaled = 1.0;    // W * exp(-log_scale)
  double log_scale = 0.0;

  double cumulative_weight_log() const;  // log W
  Eigen::ArrayXd second_moment() const;  // V/W, the theta-form v twin
};

WeightedState init_weighted_state(const Eigen::ArrayXd& x1, double eps);

void step_weighted_adaema(WeightedState& st, const Eigen::ArrayXd& g, double w,
                          double alpha, double beta, const BoxConstraint* box = nullptr);
/// Same step with the weight given as log(w); use this form for weight
/// sequences that overflow linear representation.
void step_weighted_adaema_log(WeightedState& st, const Eigen::ArrayXd& g, double log_w,
                              double alpha, double beta, const BoxConstraint* box = nullptr);

/// Max-stabilized baseline: v as in the theta-form, the update divides by the
/// running component-wise max of v instead.
struct AmsGradState {
  std::int64_t t = 0;
  Eigen::ArrayXd x, m, v, v_max;
};

AmsGradState init_amsgrad_state(const Eigen::ArrayXd& x1, double eps);
void step_amsgrad(AmsGradState& st, const Eigen::ArrayXd& g, const ScheduleTriple& p,
                  const BoxConstraint* box = nullptr);
void step_amsgrad(AmsGradState& st, const Eigen::ArrayXd& g, const ParameterSchedule& sched,
                  const BoxConstraint* box = nullptr);

/// Runtime slack of the moment inequality
///   m_k^2 <= v_k / (c1*(1-gamma)*(1-theta_t)),
/// returned as min_k of (rhs - m_k^2). Non-negative (up to 1e-12) along every
/// admissible trajectory.
double lemma_margin(const Eigen::ArrayXd& m, const Eigen::ArrayXd& v, double c1,
                    double gamma, double theta_t);

/// Drives the theta-form and weight-form recursions over one shared random
/// gradient stream and returns the worst relative iterate deviation
/// max_{t,k} |x1 - x2| / (1 + |x1|). The two are algebraically identical, so
/// this measures accumulated floating-point divergence only.
double equivalence_deviation(const ParameterSchedule& sched, Eigen::Index dim,
                             std::int64_t steps, std::uint64_t seed, double eps = 1e-8);

}  // namespace genadam
