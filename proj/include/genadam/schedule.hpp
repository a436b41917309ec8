#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace genadam {

/// One step's worth of optimizer hyper-parameters.
///   base_lr  = alpha_t, the raw step size
///   momentum = beta_t, first-moment EMA factor
///   decay    = theta_t, second-moment EMA factor
struct ScheduleTriple {
  double base_lr = 0.0;
  double momentum = 0.0;
  double decay = 0.0;
};

/// alpha_t / sqrt(1 - theta_t), the compound step scale whose
/// near-monotonicity the sufficient condition tests.
double normalized_lr(const ScheduleTriple& p);

/// Power-law hyper-parameter family:
///   base_lr(t) = eta / t^s
///   decay(t)   = 1 - alpha / max(t, cutoff)^r
///   momentum(t)= beta_cap * beta_lambda^(t-1)
/// Convergence properties depend only on (r, s); see classify_rate.
struct PowerLawFamily {
  double eta = 1.0;         // base-rate scale, > 0
  double s = 0.5;           // base-rate exponent, in [0, 1)
  double alpha = 1.0;       // decay numerator, > 0
  double r = 1.0;           // decay exponent, >= 0
  std::int64_t cutoff = 1;  // index below which decay(t) is frozen ("K"), alpha/cutoff^r < 1
  double beta_cap = 0.9;    // momentum cap, in [0, 1]; 1 is representable but fails validation
  double beta_lambda = 1.0; // optional geometric momentum decay, in (0, 1]

  double base_lr(std::int64_t t) const;
  double decay(std::int64_t t) const;
  double momentum(std::int64_t t) const;
  bool constant_decay() const { return r == 0.0; }

  /// Throws std::invalid_argument when a field is out of range, in particular
  /// when alpha/cutoff^r >= 1 (decay would leave (0,1)) or s is outside [0,1).
  void validate() const;
};

/// A (base_lr, momentum, decay) sequence indexed by t >= 1. Three flavors:
/// closed-form power law, finite table, and opaque generator. Immutable and
/// cheap to copy; evaluation is pure.
class ParameterSchedule {
 public:
  enum class Kind { PowerLaw, Tabulated, Generator };

  ParameterSchedule() = default;

  static ParameterSchedule power_law(const PowerLawFamily& fam,
                                     std::int64_t horizon_hint = 1'000'000);
  /// Table rows give t = 1..rows.size(); queries past the table throw.
  static ParameterSchedule tabulated(std::vector<ScheduleTriple> rows);
  static ParameterSchedule from_generator(std::function<ScheduleTriple(std::int64_t)> fn,
                                          double beta_cap, std::int64_t horizon_hint);

  /// Evaluate at step t (1-based). Throws std::out_of_range for t < 1 or past
  /// a table's length.
  ScheduleTriple at(std::int64_t t) const;

  Kind kind() const { return kind_; }
  bool empty() const { return kind_ == Kind::Tabulated && rows_.empty() && !gen_; }
  double beta_cap() const { return beta_cap_; }
  /// Intended run length; tables are exactly this long.
  std::int64_t horizon_hint() const { return horizon_hint_; }
  /// Non-null only for power-law schedules (enables symbolic classification).
  const PowerLawFamily* family() const;

 private:
  Kind kind_ = Kind::Tabulated;
  PowerLawFamily fam_;
  std::vector<ScheduleTriple> rows_;
  std::function<ScheduleTriple(std::int64_t)> gen_;
  double beta_cap_ = 0.0;
  std::int64_t horizon_hint_ = 0;
};

/// Per-step weights w_t with cumulative sums W_t (W_0 = 1), stored in
/// log-space: the theta-form <-> weight-form conversion produces weights that
/// grow like theta^(-t) and overflow doubles near t ~ 7e5 for theta = 0.999.
/// Cumulative logs keep a compensated tail so adjacent differences (which is
/// what W_{t-1}/W_t consumers need) stay accurate to ~1 ulp even when
/// log W_t is ~1e4.
class WeightSequence {
 public:
  WeightSequence() = default;

  /// Plain positive weights. Throws on w <= 0 or non-finite w.
  static WeightSequence from_weights(std::span<const double> w);
  /// Weights given as log(w_t); any finite values.
  static WeightSequence from_log_weights(std::vector<double> log_w);

  std::int64_t size() const { return static_cast<std::int64_t>(log_w_.size()); }
  /// w_t for t in [1, size]; may overflow to +inf, by design.
  double weight(std::int64_t t) const;
  double log_weight(std::int64_t t) const;
  /// W_t for t in [0, size]; W_0 = 1.
  double cumulative(std::int64_t t) const;
  double log_cumulative(std::int64_t t) const;
  /// W_{t-1} / W_t, in (0,1); the decay factor this weight sequence encodes.
  double decay_at(std::int64_t t) const;

 private:
  friend WeightSequence to_weight_form(const ParameterSchedule&, std::int64_t);

  std::vector<double> log_w_;
  std::vector<double> log_W_hi_;  // log_W_hi_[t] + log_W_lo_[t] = log W_t
  std::vector<double> log_W_lo_;
  double acc_hi_ = 0.0;  // running compensated log W
  double acc_lo_ = 0.0;
};

/// theta-form -> weight-form: w_t = (1-theta_t) * prod_{i<=t} theta_i^{-1},
/// W_t = prod_{i<=t} theta_i^{-1}. Requires 0 < theta_t < 1 for t <= T.
WeightSequence to_weight_form(const ParameterSchedule& sched, std::int64_t T);

/// weight-form -> theta-form: theta_t = W_{t-1}/W_t as a tabulated schedule;
/// base_lr and momentum are supplied by the caller since the weights alone do
/// not determine them.
ParameterSchedule from_weight_form(const WeightSequence& w,
                                   std::function<double(std::int64_t)> base_lr,
                                   double beta);

/// Bias-corrected Adam expressed in this schedule language:
/// base_lr(t) = eta_hat(t) * sqrt(1-theta^t) / (1-beta^t), constant momentum
/// and decay. Requires 0 <= beta < 1 and 0 < theta < 1.
ParameterSchedule bias_corrected_adam_schedule(double beta, double theta,
                                               std::function<double(std::int64_t)> eta_hat,
                                               std::int64_t horizon_hint = 1'000'000);
ParameterSchedule bias_corrected_adam_schedule(double beta, double theta, double eta_hat,
                                               std::int64_t horizon_hint = 1'000'000);

// ---- Named presets -------------------------------------------------------
// The r=1 family needs cutoff 2: with cutoff 1 the first decay value would be
// 1 - alpha = 0, outside (0,1). cutoff 2 freezes decay at 1 - alpha/2^r for
// t = 1, leaving every later value untouched.

/// AdaGrad-with-EMA: base_lr = eta/sqrt(t), decay = 1 - 1/t (t >= 2).
ParameterSchedule adaema_schedule(double eta = 1.0, double beta = 0.9,
                                  std::int64_t horizon_hint = 1'000'000);
/// Same decay family with geometrically vanishing momentum.
ParameterSchedule adamnc_schedule(double eta = 1.0, double beta = 0.9,
                                  double beta_lambda = 0.99,
                                  std::int64_t horizon_hint = 1'000'000);
/// Momentum-free member (beta = 0).
ParameterSchedule rmsprop_schedule(double eta = 1.0, std::int64_t horizon_hint = 1'000'000);
/// Constant decay theta with base_lr = eta/t^s (the classical setting that
/// fails the sufficient condition).
ParameterSchedule constant_decay_schedule(double eta, double s, double theta, double beta,
                                          std::int64_t horizon_hint = 1'000'000);
/// Hyperbolic-harmonic weights w_t = t^(-r), materialized as a table.
ParameterSchedule hyperharmonic_weight_schedule(double r, double eta, double beta,
                                                std::int64_t horizon);
/// Polynomially growing weights w_t = t^(+r), materialized as a table.
ParameterSchedule polynomial_weight_schedule(double r, double eta, double beta,
                                             std::int64_t horizon);

}  // namespace genadam
