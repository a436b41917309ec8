#include "genadam/schedule.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace genadam {

namespace {

// Compensated accumulation: (hi, lo) += x with the rounding error of the
// addition captured in lo. Keeps adjacent cumulative values accurate enough
// that their differences survive exponentiation (see WeightSequence docs).
void two_sum_add(double& hi, double& lo, double x) {
  const double s = hi + x;
  const double b = s - hi;
  const double err = (hi - (s - b)) + (x - b);
  lo += err;
  const double t = s + lo;
  lo -= (t - s);
  hi = t;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

double normalized_lr(const ScheduleTriple& p) {
  const double gap = 1.0 - p.decay;
  if (!(gap > 0.0)) return std::numeric_limits<double>::infinity();
  return p.base_lr / std::sqrt(gap);
}

// ---- PowerLawFamily --------------------------------------------------------

double PowerLawFamily::base_lr(std::int64_t t) const {
  return eta * std::pow(static_cast<double>(t), -s);
}

double PowerLawFamily::decay(std::int64_t t) const {
  const double tt = static_cast<double>(t < cutoff ? cutoff : t);
  return 1.0 - alpha * std::pow(tt, -r);
}

double PowerLawFamily::momentum(std::int64_t t) const {
  if (beta_lambda == 1.0) return beta_cap;
  return beta_cap * std::pow(beta_lambda, static_cast<double>(t - 1));
}

void PowerLawFamily::validate() const {
  require(std::isfinite(eta) && eta > 0.0, "power-law schedule: eta must be positive");
  require(std::isfinite(s) && s >= 0.0 && s < 1.0,
          "power-law schedule: s must lie in [0, 1)");
  require(std::isfinite(alpha) && alpha > 0.0, "power-law schedule: alpha must be positive");
  require(std::isfinite(r) && r >= 0.0, "power-law schedule: r must be non-negative");
  require(cutoff >= 1, "power-law schedule: cutoff must be a positive integer");
  require(alpha * std::pow(static_cast<double>(cutoff), -r) < 1.0,
          "power-law schedule: alpha/cutoff^r must be < 1, decay would leave (0,1)");
  require(std::isfinite(beta_cap) && beta_cap >= 0.0 && beta_cap <= 1.0,
          "power-law schedule: beta_cap must lie in [0, 1]");
  require(std::isfinite(beta_lambda) && beta_lambda > 0.0 && beta_lambda <= 1.0,
          "power-law schedule: beta_lambda must lie in (0, 1]");
}

// ---- ParameterSchedule -----------------------------------------------------

ParameterSchedule ParameterSchedule::power_law(const PowerLawFamily& fam,
                                               std::int64_t horizon_hint) {
  fam.validate();
  require(horizon_hint >= 1, "schedule horizon hint must be positive");
  ParameterSchedule s;
  s.kind_ = Kind::PowerLaw;
  s.fam_ = fam;
  s.beta_cap_ = fam.beta_cap;
  s.horizon_hint_ = horizon_hint;
  return s;
}

ParameterSchedule ParameterSchedule::tabulated(std::vector<ScheduleTriple> rows) {
  double cap = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ScheduleTriple& p = rows[i];
    require(std::isfinite(p.base_lr) && p.base_lr > 0.0,
            "tabulated schedule: base_lr must be positive at row " + std::to_string(i + 1));
    require(std::isfinite(p.momentum) && std::isfinite(p.decay),
            "tabulated schedule: non-finite entry at row " + std::to_string(i + 1));
    if (p.momentum > cap) cap = p.momentum;
  }
  ParameterSchedule s;
  s.kind_ = Kind::Tabulated;
  s.rows_ = std::move(rows);
  s.beta_cap_ = cap;
  s.horizon_hint_ = static_cast<std::int64_t>(s.rows_.size());
  return s;
}

ParameterSchedule ParameterSchedule::from_generator(
    std::function<ScheduleTriple(std::int64_t)> fn, double beta_cap,
    std::int64_t horizon_hint) {
  require(static_cast<bool>(fn), "generator schedule: empty callable");
  require(std::isfinite(beta_cap) && beta_cap >= 0.0 && beta_cap <= 1.0,
          "generator schedule: beta_cap must lie in [0, 1]");
  require(horizon_hint >= 1, "schedule horizon hint must be positive");
  ParameterSchedule s;
  s.kind_ = Kind::Generator;
  s.gen_ = std::move(fn);
  s.beta_cap_ = beta_cap;
  s.horizon_hint_ = horizon_hint;
  return s;
}

ScheduleTriple ParameterSchedule::at(std::int64_t t) const {
  if (t < 1) throw std::out_of_range("schedule evaluated at t < 1");
  switch (kind_) {
    case Kind::PowerLaw:
      return {fam_.base_lr(t), fam_.momentum(t), fam_.decay(t)};
    case Kind::Tabulated:
      if (t > static_cast<std::int64_t>(rows_.size()))
        throw std::out_of_range("schedule evaluated past its table length (t = " +
                                std::to_string(t) + ", length " +
                                std::to_string(rows_.size()) + ")");
      return rows_[static_cast<std::size_t>(t - 1)];
    case Kind::Generator:
      return gen_(t);
  }
  throw std::logic_error("unreachable schedule kind");
}

const PowerLawFamily* ParameterSchedule::family() const {
  return kind_ == Kind::PowerLaw ? &fam_ : nullptr;
}

// ---- WeightSequence --------------------------------------------------------

WeightSequence WeightSequence::from_log_weights(std::vector<double> log_w) {
  WeightSequence ws;
  ws.log_W_hi_.push_back(0.0);
  ws.log_W_lo_.push_back(0.0);
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    const double lw = log_w[i];
    require(std::isfinite(lw),
            "weight sequence: non-finite log-weight at t = " + std::to_string(i + 1));
    // log W_t = logaddexp(log W_{t-1}, log w_t), accumulated in compensated form.
    const double cur = ws.acc_hi_ + ws.acc_lo_;
    if (lw <= cur) {
      two_sum_add(ws.acc_hi_, ws.acc_lo_, std::log1p(std::exp(lw - cur)));
    } else {
      const double rest = std::log1p(std::exp(cur - lw));
      ws.acc_hi_ = lw;
      ws.acc_lo_ = 0.0;
      two_sum_add(ws.acc_hi_, ws.acc_lo_, rest);
    }
    ws.log_W_hi_.push_back(ws.acc_hi_);
    ws.log_W_lo_.push_back(ws.acc_lo_);
  }
  ws.log_w_ = std::move(log_w);
  return ws;
}

WeightSequence WeightSequence::from_weights(std::span<const double> w) {
  std::vector<double> log_w;
  log_w.reserve(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    require(std::isfinite(w[i]) && w[i] > 0.0,
            "weight sequence: weights must be positive and finite at t = " +
                std::to_string(i + 1));
    log_w.push_back(std::log(w[i]));
  }
  return from_log_weights(std::move(log_w));
}

double WeightSequence::log_weight(std::int64_t t) const {
  if (t < 1 || t > size()) throw std::out_of_range("weight index out of range");
  return log_w_[static_cast<std::size_t>(t - 1)];
}

double WeightSequence::weight(std::int64_t t) const { return std::exp(log_weight(t)); }

double WeightSequence::log_cumulative(std::int64_t t) const {
  if (t < 0 || t > size()) throw std::out_of_range("cumulative weight index out of range");
  return log_W_hi_[static_cast<std::size_t>(t)] + log_W_lo_[static_cast<std::size_t>(t)];
}

double WeightSequence::cumulative(std::int64_t t) const {
  return std::exp(log_cumulative(t));
}

double WeightSequence::decay_at(std::int64_t t) const {
  if (t < 1 || t > size()) throw std::out_of_range("weight index out of range");
  const std::size_t i = static_cast<std::size_t>(t);
  // Difference of compensated pairs: the hi parts are close, so their
  // subtraction is exact and the lo tails carry the information.
  const double d = (log_W_hi_[i - 1] - log_W_hi_[i]) + (log_W_lo_[i - 1] - log_W_lo_[i]);
  return std::exp(d);
}

// ---- Conversions -----------------------------------------------------------

WeightSequence to_weight_form(const ParameterSchedule& sched, std::int64_t T) {
  require(T >= 1, "weight-form conversion needs a positive horizon");
  WeightSequence ws;
  ws.log_W_hi_.push_back(0.0);
  ws.log_W_lo_.push_back(0.0);
  ws.log_w_.reserve(static_cast<std::size_t>(T));
  for (std::int64_t t = 1; t <= T; ++t) {
    const double theta = sched.at(t).decay;
    if (!(theta > 0.0 && theta < 1.0))
      throw std::domain_error("weight-form conversion: decay outside (0,1) at t = " +
                              std::to_string(t));
    two_sum_add(ws.acc_hi_, ws.acc_lo_, -std::log(theta));
    ws.log_W_hi_.push_back(ws.acc_hi_);
    ws.log_W_lo_.push_back(ws.acc_lo_);
    // w_t = (1 - theta_t) * W_t
    ws.log_w_.push_back(std::log1p(-theta) + (ws.acc_hi_ + ws.acc_lo_));
  }
  return ws;
}

ParameterSchedule from_weight_form(const WeightSequence& w,
                                   std::function<double(std::int64_t)> base_lr,
                                   double beta) {
  require(w.size() >= 1, "weight-form schedule needs at least one weight");
  require(static_cast<bool>(base_lr), "weight-form schedule: empty base_lr callable");
  require(std::isfinite(beta) && beta >= 0.0 && beta <= 1.0,
          "weight-form schedule: beta must lie in [0, 1]");
  std::vector<ScheduleTriple> rows;
  rows.reserve(static_cast<std::size_t>(w.size()));
  for (std::int64_t t = 1; t <= w.size(); ++t)
    rows.push_back({base_lr(t), beta, w.decay_at(t)});
  return ParameterSchedule::tabulated(std::move(rows));
}

ParameterSchedule bias_corrected_adam_schedule(double beta, double theta,
                                               std::function<double(std::int64_t)> eta_hat,
                                               std::int64_t horizon_hint) {
  require(std::isfinite(beta) && beta >= 0.0 && beta < 1.0,
          "bias-corrected schedule: beta must lie in [0, 1)");
  require(std::isfinite(theta) && theta > 0.0 && theta < 1.0,
          "bias-corrected schedule: theta must lie in (0, 1)");
  require(static_cast<bool>(eta_hat), "bias-corrected schedule: empty base-rate callable");
  auto fn = [beta, theta, eta_hat = std::move(eta_hat)](std::int64_t t) -> ScheduleTriple {
    const double rate = eta_hat(t);
    if (!(std::isfinite(rate) && rate > 0.0))
      throw std::domain_error("bias-corrected schedule: base rate must be positive at t = " +
                              std::to_string(t));
    const double td = static_cast<double>(t);
    const double lr = rate * std::sqrt(1.0 - std::pow(theta, td)) / (1.0 - std::pow(beta, td));
    return {lr, beta, theta};
  };
  return ParameterSchedule::from_generator(std::move(fn), beta, horizon_hint);
}

ParameterSchedule bias_corrected_adam_schedule(double beta, double theta, double eta_hat,
                                               std::int64_t horizon_hint) {
  return bias_corrected_adam_schedule(
      beta, theta, [eta_hat](std::int64_t) { return eta_hat; }, horizon_hint);
}

// ---- Presets ---------------------------------------------------------------

ParameterSchedule adaema_schedule(double eta, double beta, std::int64_t horizon_hint) {
  return ParameterSchedule::power_law({eta, 0.5, 1.0, 1.0, 2, beta, 1.0}, horizon_hint);
}

ParameterSchedule adamnc_schedule(double eta, double beta, double beta_lambda,
                                  std::int64_t horizon_hint) {
  return ParameterSchedule::power_law({eta, 0.5, 1.0, 1.0, 2, beta, beta_lambda},
                                      horizon_hint);
}

ParameterSchedule rmsprop_schedule(double eta, std::int64_t horizon_hint) {
  return ParameterSchedule::power_law({eta, 0.5, 1.0, 1.0, 2, 0.0, 1.0}, horizon_hint);
}

ParameterSchedule constant_decay_schedule(double eta, double s, double theta, double beta,
                                          std::int64_t horizon_hint) {
  require(std::isfinite(theta) && theta > 0.0 && theta < 1.0,
          "constant-decay schedule: theta must lie in (0, 1)");
  return ParameterSchedule::power_law({eta, s, 1.0 - theta, 0.0, 1, beta, 1.0},
                                      horizon_hint);
}

namespace {

ParameterSchedule power_weight_schedule(double exponent, double eta, double beta,
                                        std::int64_t horizon) {
  require(horizon >= 1, "weight preset: horizon must be positive");
  require(std::isfinite(eta) && eta > 0.0, "weight preset: eta must be positive");
  std::vector<double> log_w;
  log_w.reserve(static_cast<std::size_t>(horizon));
  for (std::int64_t t = 1; t <= horizon; ++t)
    log_w.push_back(exponent * std::log(static_cast<double>(t)));
  const WeightSequence ws = WeightSequence::from_log_weights(std::move(log_w));
  return from_weight_form(
      ws, [eta](std::int64_t t) { return eta / std::sqrt(static_cast<double>(t)); }, beta);
}

}  // namespace

ParameterSchedule hyperharmonic_weight_schedule(double r, double eta, double beta,
                                                std::int64_t horizon) {
  require(std::isfinite(r) && r >= 0.0, "hyperharmonic weights: r must be non-negative");
  return power_weight_schedule(-r, eta, beta, horizon);
}

ParameterSchedule polynomial_weight_schedule(double r, double eta, double beta,
                                             std::int64_t horizon) {
  require(std::isfinite(r) && r >= 0.0, "polynomial weights: r must be non-negative");
  return power_weight_schedule(r, eta, beta, horizon);
}

}  // namespace genadam
