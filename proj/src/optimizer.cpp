#include "genadam/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "genadam/rng.hpp"

namespace genadam {

namespace {

void check_gradient(const Eigen::ArrayXd& g, Eigen::Index dim, std::int64_t t) {
  if (g.size() != dim)
    throw std::invalid_argument("gradient dimension " + std::to_string(g.size()) +
                                " does not match state dimension " + std::to_string(dim));
  if (!g.isFinite().all())
    throw std::domain_error("non-finite gradient at step " + std::to_string(t) +
                            " (broken oracle)");
}

void check_triple(const ScheduleTriple& p, std::int64_t t) {
  if (!(p.base_lr > 0.0) || !std::isfinite(p.base_lr))
    throw std::domain_error("step size must be positive at t = " + std::to_string(t));
  if (!(p.momentum >= 0.0 && p.momentum < 1.0))
    throw std::domain_error("momentum outside [0,1) at t = " + std::to_string(t));
  if (!(p.decay > 0.0 && p.decay < 1.0))
    throw std::domain_error("decay outside (0,1) at t = " + std::to_string(t));
}

void clamp_in_place(Eigen::ArrayXd& x, const BoxConstraint& c) {
  if (c.lo.size() == 1)
    x = x.max(c.lo[0]).min(c.hi[0]);
  else
    x = x.max(c.lo).min(c.hi);
}

}  // namespace

// ---- BoxConstraint ---------------------------------------------------------

BoxConstraint BoxConstraint::uniform(double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("box constraint: lo must not exceed hi");
  BoxConstraint c;
  c.lo = Eigen::ArrayXd::Constant(1, lo);
  c.hi = Eigen::ArrayXd::Constant(1, hi);
  return c;
}

BoxConstraint BoxConstraint::bounds(Eigen::ArrayXd lo, Eigen::ArrayXd hi) {
  if (lo.size() != hi.size())
    throw std::invalid_argument("box constraint: lo/hi dimension mismatch");
  if (!(lo <= hi).all()) throw std::invalid_argument("box constraint: lo must not exceed hi");
  BoxConstraint c;
  c.lo = std::move(lo);
  c.hi = std::move(hi);
  return c;
}

Eigen::ArrayXd project_box(const Eigen::ArrayXd& x, const BoxConstraint& c) {
  if (c.lo.size() != 1 && c.lo.size() != x.size())
    throw std::invalid_argument("box constraint dimension does not match x");
  Eigen::ArrayXd out = x;
  clamp_in_place(out, c);
  return out;
}

// ---- theta form ------------------------------------------------------------

AdamState init_state(const Eigen::ArrayXd& x1, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("init_state: eps must be positive");
  AdamState st;
  st.x = x1;
  st.m = Eigen::ArrayXd::Zero(x1.size());
  st.v = Eigen::ArrayXd::Constant(x1.size(), eps);
  return st;
}

void step_generic_adam(AdamState& st, const Eigen::ArrayXd& g, const ScheduleTriple& p,
                       const BoxConstraint* box) {
  check_gradient(g, st.x.size(), st.t + 1);
  check_triple(p, st.t + 1);
  st.v = p.decay * st.v + (1.0 - p.decay) * g.square();
  st.m = p.momentum * st.m + (1.0 - p.momentum) * g;
  st.x -= p.base_lr * st.m / st.v.sqrt();
  if (box) clamp_in_place(st.x, *box);
  ++st.t;
}

void step_generic_adam(AdamState& st, const Eigen::ArrayXd& g, const ParameterSchedule& sched,
                       const BoxConstraint* box) {
  step_generic_adam(st, g, sched.at(st.t + 1), box);
}

// ---- weight form -----------------------------------------------------------

WeightedState init_weighted_state(const Eigen::ArrayXd& x1, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("init_weighted_state: eps must be positive");
  WeightedState st;
  st.x = x1;
  st.m = Eigen::ArrayXd::Zero(x1.size());
  st.v_scaled = Eigen::ArrayXd::Constant(x1.size(), eps);
  st.w_scaled = 1.0;
  st.log_scale = 0.0;
  return st;
}

double WeightedState::cumulative_weight_log() const {
  return log_scale + std::log(w_scaled);
}

Eigen::ArrayXd WeightedState::second_moment() const { return v_scaled / w_scaled; }

void step_weighted_adaema_log(WeightedState& st, const Eigen::ArrayXd& g, double log_w,
                              double alpha, double beta, const BoxConstraint* box) {
  check_gradient(g, st.x.size(), st.t + 1);
  if (!std::isfinite(log_w))
    throw std::domain_error("weight must be positive and finite at t = " +
                            std::to_string(st.t + 1));
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::domain_error("step size must be positive at t = " + std::to_string(st.t + 1));
  if (!(beta >= 0.0 && beta < 1.0))
    throw std::domain_error("momentum outside [0,1) at t = " + std::to_string(st.t + 1));

  double lw = log_w - st.log_scale;
  // Rescale before the increment itself would overflow, or once the stored
  // magnitudes grow large. Both V and W shrink by the same factor, so their
  // ratio moves by at most one rounding each.
  if (lw > 300.0 || st.w_scaled > 1e100) {
    const double shift = std::max(std::log(st.w_scaled), lw);
    st.log_scale += shift;
    const double f = std::exp(-shift);
    st.v_scaled *= f;
    st.w_scaled *= f;
    lw -= shift;
  }
  const double w = std::exp(lw);
  st.w_scaled += w;
  st.v_scaled += w * g.square();
  st.m = beta * st.m + (1.0 - beta) * g;
  st.x -= alpha * st.m / (st.v_scaled / st.w_scaled).sqrt();
  if (box) clamp_in_place(st.x, *box);
  ++st.t;
}

void step_weighted_adaema(WeightedState& st, const Eigen::ArrayXd& g, double w,
                          double alpha, double beta, const BoxConstraint* box) {
  if (!(w > 0.0) || !std::isfinite(w))
    throw std::domain_error("weight must be positive and finite at t = " +
                            std::to_string(st.t + 1));
  step_weighted_adaema_log(st, g, std::log(w), alpha, beta, box);
}

// ---- max-stabilized baseline ------------------------------------------------

AmsGradState init_amsgrad_state(const Eigen::ArrayXd& x1, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("init_amsgrad_state: eps must be positive");
  AmsGradState st;
  st.x = x1;
  st.m = Eigen::ArrayXd::Zero(x1.size());
  st.v = Eigen::ArrayXd::Constant(x1.size(), eps);
  st.v_max = st.v;
  return st;
}

void step_amsgrad(AmsGradState& st, const Eigen::ArrayXd& g, const ScheduleTriple& p,
                  const BoxConstraint* box) {
  check_gradient(g, st.x.size(), st.t + 1);
  check_triple(p, st.t + 1);
  st.v = p.decay * st.v + (1.0 - p.decay) * g.square();
  st.v_max = st.v_max.max(st.v);
  st.m = p.momentum * st.m + (1.0 - p.momentum) * g;
  st.x -= p.base_lr * st.m / st.v_max.sqrt();
  if (box) clamp_in_place(st.x, *box);
  ++st.t;
}

void step_amsgrad(AmsGradState& st, const Eigen::ArrayXd& g, const ParameterSchedule& sched,
                  const BoxConstraint* box) {
  step_amsgrad(st, g, sched.at(st.t + 1), box);
}

// ---- diagnostics -------------------------------------------------------------

double lemma_margin(const Eigen::ArrayXd& m, const Eigen::ArrayXd& v, double c1,
                    double gamma, double theta_t) {
  const double denom = c1 * (1.0 - gamma) * (1.0 - theta_t);
  return (v / denom - m.square()).minCoeff();
}

double equivalence_deviation(const ParameterSchedule& sched, Eigen::Index dim,
                             std::int64_t steps, std::uint64_t seed, double eps) {
  const WeightSequence ws = to_weight_form(sched, steps);
  Rng rng(seed);
  const Eigen::ArrayXd x1 = Eigen::ArrayXd::NullaryExpr(dim, [&](Eigen::Index) {
    return rng.uniform(-1.0, 1.0);
  });
  AdamState a = init_state(x1, eps);
  WeightedState b = init_weighted_state(x1, eps);

  Eigen::ArrayXd g(dim);
  double worst = 0.0;
  for (std::int64_t t = 1; t <= steps; ++t) {
    for (Eigen::Index k = 0; k < dim; ++k) g[k] = 3.0 * rng.normal();
    const ScheduleTriple p = sched.at(t);
    step_generic_adam(a, g, p);
    step_weighted_adaema_log(b, g, ws.log_weight(t), p.base_lr, p.momentum);
    const double dev =
        ((a.x - b.x).abs() / (1.0 + a.x.abs())).maxCoeff();
    worst = std::max(worst, dev);
  }
  return worst;
}

}  // namespace genadam
