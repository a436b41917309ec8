#include "genadam/optimizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "genadam/bounds.hpp"
#include "genadam/rng.hpp"

using namespace genadam;

namespace {

Eigen::ArrayXd scalar(double v) {
  Eigen::ArrayXd x(1);
  x << v;
  return x;
}

}  // namespace

TEST_CASE("state initialization") {
  SUBCASE("scalar start") {
    const AdamState st = init_state(scalar(0.0), 1e-8);
    CHECK(st.t == 0);
    CHECK(st.x[0] == 0.0);
    CHECK(st.m[0] == 0.0);
    CHECK(st.v[0] == 1e-8);
  }
  SUBCASE("vector start keeps the first moment at zero") {
    const AdamState st = init_state(Eigen::ArrayXd::Zero(3), 1e-8);
    CHECK(st.m.size() == 3);
    CHECK((st.m == 0.0).all());
    CHECK((st.v == 1e-8).all());
  }
  SUBCASE("non-positive epsilon is rejected") {
    CHECK_THROWS_AS(init_state(scalar(0.0), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(init_state(scalar(0.0), -1e-8), std::invalid_argument);
    CHECK_THROWS_AS(init_weighted_state(scalar(0.0), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(init_amsgrad_state(scalar(0.0), 0.0), std::invalid_argument);
  }
}

TEST_CASE("one hand-evaluated theta-form step") {
  AdamState st = init_state(scalar(0.0), 1e-8);
  step_generic_adam(st, scalar(2.0), ScheduleTriple{0.1, 0.5, 0.5});

  CHECK(st.t == 1);
  CHECK(st.v[0] == doctest::Approx(2.000000005).epsilon(1e-15));
  CHECK(st.m[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(st.x[0] == doctest::Approx(-0.1 / std::sqrt(2.000000005)).epsilon(1e-15));
  CHECK(st.x[0] == doctest::Approx(-0.07071067).epsilon(1e-7));
}

TEST_CASE("zero momentum keeps the first moment equal to the gradient") {
  Rng rng(5);
  AdamState st = init_state(Eigen::ArrayXd::Zero(4), 1e-8);
  for (int i = 0; i < 50; ++i) {
    Eigen::ArrayXd g(4);
    for (int k = 0; k < 4; ++k) g[k] = rng.normal();
    step_generic_adam(st, g, ScheduleTriple{0.01, 0.0, 0.9});
    CHECK((st.m == g).all());  // bit-for-bit
  }
}

TEST_CASE("zero gradient with zero first moment leaves the iterate fixed") {
  AdamState st = init_state(scalar(0.7), 1e-6);
  const double v_before = st.v[0];
  step_generic_adam(st, scalar(0.0), ScheduleTriple{0.1, 0.5, 0.25});
  CHECK(st.x[0] == 0.7);
  CHECK(st.v[0] == doctest::Approx(0.25 * v_before).epsilon(1e-15));
}

TEST_CASE("broken inputs are hard errors") {
  AdamState st = init_state(Eigen::ArrayXd::Zero(2), 1e-8);
  const ScheduleTriple ok{0.1, 0.5, 0.5};

  Eigen::ArrayXd bad(2);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(step_generic_adam(st, bad, ok), std::domain_error);
  bad[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(step_generic_adam(st, bad, ok), std::domain_error);
  CHECK_THROWS_AS(step_generic_adam(st, Eigen::ArrayXd::Zero(3), ok),
                  std::invalid_argument);

  const Eigen::ArrayXd g = Eigen::ArrayXd::Zero(2);
  CHECK_THROWS_AS(step_generic_adam(st, g, ScheduleTriple{0.0, 0.5, 0.5}),
                  std::domain_error);
  CHECK_THROWS_AS(step_generic_adam(st, g, ScheduleTriple{0.1, 1.0, 0.5}),
                  std::domain_error);
  CHECK_THROWS_AS(step_generic_adam(st, g, ScheduleTriple{0.1, -0.1, 0.5}),
                  std::domain_error);
  CHECK_THROWS_AS(step_generic_adam(st, g, ScheduleTriple{0.1, 0.5, 0.0}),
                  std::domain_error);
  CHECK_THROWS_AS(step_generic_adam(st, g, ScheduleTriple{0.1, 0.5, 1.0}),
                  std::domain_error);
  // The failed step must not have advanced the state.
  CHECK(st.t == 0);
}

TEST_CASE("second moment stays above its decayed floor") {
  Rng rng(11);
  const ParameterSchedule sched = adaema_schedule(0.1, 0.9);
  AdamState st = init_state(Eigen::ArrayXd::Zero(3), 1e-8);
  double floor_log = std::log(1e-8);
  for (std::int64_t t = 1; t <= 500; ++t) {
    Eigen::ArrayXd g(3);
    for (int k = 0; k < 3; ++k) g[k] = rng.normal();
    step_generic_adam(st, g, sched);
    floor_log += std::log(sched.at(t).decay);
    CHECK((st.v > 0.0).all());
    CHECK(st.v.minCoeff() >= std::exp(floor_log) * (1.0 - 1e-12));
  }
}

TEST_CASE("one hand-evaluated weight-form step") {
  WeightedState st = init_weighted_state(scalar(0.25), 1.0);
  // Start the accumulators at V = 1, W = 1 exactly.
  st.v_scaled = scalar(1.0);
  st.w_scaled = 1.0;
  st.log_scale = 0.0;

  step_weighted_adaema(st, scalar(1.0), 1.0, 1.0, 0.0);
  CHECK(st.t == 1);
  CHECK(st.second_moment()[0] == doctest::Approx(1.0).epsilon(1e-15));  // V/W = 2/2
  CHECK(st.m[0] == 1.0);
  CHECK(st.x[0] == doctest::Approx(0.25 - 1.0).epsilon(1e-15));
}

TEST_CASE("unit weights with zero momentum reduce to the classical accumulator") {
  // With w == 1: x' = x - alpha_t * g / sqrt((eps + sum g^2)/(t+1)); choosing
  // alpha_t = eta/sqrt(t+1) cancels the 1/(t+1) and leaves eta*g/sqrt(V).
  const double eta = 0.05;
  const double eps = 1e-8;
  Rng rng(3);

  WeightedState st = init_weighted_state(scalar(0.0), eps);
  double x_ref = 0.0, v_acc = eps;
  for (std::int64_t t = 1; t <= 200; ++t) {
    const double g = rng.normal();
    const double alpha = eta / std::sqrt(static_cast<double>(t + 1));
    step_weighted_adaema(st, scalar(g), 1.0, alpha, 0.0);
    v_acc += g * g;
    x_ref -= eta * g / std::sqrt(v_acc);
    CHECK(st.x[0] == doctest::Approx(x_ref).epsilon(1e-12));
  }
}

TEST_CASE("theta-form and weight-form produce the same iterates") {
  std::vector<ParameterSchedule> schedules;
  schedules.push_back(adaema_schedule(1.0, 0.9));
  schedules.push_back(constant_decay_schedule(0.001, 0.5, 0.999, 0.9));
  schedules.push_back(rmsprop_schedule(0.5));
  {
    PowerLawFamily fam;
    fam.eta = 0.5;
    fam.s = 0.25;
    fam.alpha = 0.7;
    fam.r = 0.6;
    fam.cutoff = 1;
    fam.beta_cap = 0.5;
    schedules.push_back(ParameterSchedule::power_law(fam));
  }

  std::uint64_t seed = 41;
  for (const ParameterSchedule& sched : schedules) {
    const double dev = equivalence_deviation(sched, 8, 10'000, seed++);
    CHECK(dev <= 1e-9);
  }
}

TEST_CASE("log-weight steps track the rescaled representation") {
  // Drive the same constant-decay stream through the theta form and the
  // log-weight form far enough that raw weights overflow a double.
  const double theta = 0.999;
  const std::int64_t steps = 20'000;
  const ParameterSchedule sched = constant_decay_schedule(0.01, 0.5, theta, 0.9);
  const WeightSequence ws = to_weight_form(sched, steps);

  Rng rng(17);
  AdamState a = init_state(scalar(0.0), 1e-8);
  WeightedState b = init_weighted_state(scalar(0.0), 1e-8);
  double worst = 0.0;
  for (std::int64_t t = 1; t <= steps; ++t) {
    const Eigen::ArrayXd g = scalar(rng.normal());
    const ScheduleTriple p = sched.at(t);
    step_generic_adam(a, g, p);
    step_weighted_adaema_log(b, g, ws.log_weight(t), p.base_lr, p.momentum);
    worst = std::max(worst,
                     std::abs(a.x[0] - b.x[0]) / (1.0 + std::abs(a.x[0])));
    // The twin second moments agree too.
    CHECK(b.second_moment()[0] == doctest::Approx(a.v[0]).epsilon(1e-9));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("max-stabilized variant") {
  SUBCASE("second step divides by the running max") {
    // theta = 0.2 with eps ~ 0: g = sqrt(20) drives v to ~4, then g = 0.5
    // drops v to ~1 while v_max stays at its first value.
    const double eps = 1e-12;
    AmsGradState st = init_amsgrad_state(scalar(0.0), eps);
    const ScheduleTriple p{1.0, 0.0, 0.2};

    const double g1 = std::sqrt(5.0 - 0.25 * eps);  // solves 0.2*eps + 0.8*g1^2 = 4
    step_amsgrad(st, scalar(g1), p);
    const double v1 = st.v[0];
    CHECK(v1 == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(st.v_max[0] == v1);

    const double x_before = st.x[0];
    step_amsgrad(st, scalar(0.5), p);
    CHECK(st.v[0] == doctest::Approx(0.2 * v1 + 0.8 * 0.25).epsilon(1e-12));
    CHECK(st.v_max[0] == v1);  // max is sticky
    // Update used sqrt(v_max) = 2, momentum-free: delta = -1.0 * 0.5 / 2.
    CHECK(st.x[0] - x_before == doctest::Approx(-0.25).epsilon(1e-9));
  }
  SUBCASE("running max never decreases") {
    Rng rng(23);
    AmsGradState st = init_amsgrad_state(Eigen::ArrayXd::Zero(2), 1e-8);
    Eigen::ArrayXd prev_max = st.v_max;
    for (std::int64_t t = 1; t <= 300; ++t) {
      Eigen::ArrayXd g(2);
      g << rng.normal(), 3.0 * rng.normal();
      step_amsgrad(st, g, ScheduleTriple{0.01, 0.9, 0.99});
      CHECK((st.v_max >= prev_max).all());
      CHECK((st.v_max >= st.v).all());
      prev_max = st.v_max;
    }
  }
  SUBCASE("coincides with the plain step while v is non-decreasing") {
    // Growing gradients keep v monotone, so max-stabilization is a no-op.
    AdamState plain = init_state(scalar(0.0), 1e-8);
    AmsGradState maxed = init_amsgrad_state(scalar(0.0), 1e-8);
    const ScheduleTriple p{0.05, 0.9, 0.9};
    for (std::int64_t t = 1; t <= 40; ++t) {
      const Eigen::ArrayXd g = scalar(0.1 * static_cast<double>(t));
      step_generic_adam(plain, g, p);
      step_amsgrad(maxed, g, p);
      CHECK(maxed.x[0] == plain.x[0]);
    }
  }
}

TEST_CASE("box projection") {
  const BoxConstraint unit = BoxConstraint::uniform(-1.0, 1.0);
  CHECK(project_box(scalar(1.5), unit)[0] == 1.0);
  CHECK(project_box(scalar(-0.3), unit)[0] == -0.3);

  Eigen::ArrayXd x(3);
  x << -2.0, 0.0, 2.0;
  const Eigen::ArrayXd clamped = project_box(x, unit);
  CHECK(clamped[0] == -1.0);
  CHECK(clamped[1] == 0.0);
  CHECK(clamped[2] == 1.0);
  CHECK((project_box(clamped, unit) == clamped).all());  // idempotent

  Eigen::ArrayXd lo(3), hi(3);
  lo << -1.0, 0.5, -3.0;
  hi << 1.0, 0.6, -2.0;
  const Eigen::ArrayXd boxed = project_box(x, BoxConstraint::bounds(lo, hi));
  CHECK(boxed[0] == -1.0);
  CHECK(boxed[1] == 0.5);
  CHECK(boxed[2] == -2.0);

  CHECK_THROWS_AS(BoxConstraint::bounds(hi, lo), std::invalid_argument);
}

TEST_CASE("projection hook clamps the iterate after each step") {
  const BoxConstraint unit = BoxConstraint::uniform(-1.0, 1.0);
  AdamState st = init_state(scalar(0.9), 1e-8);
  // A large positive gradient pushes x below -1 without the box.
  step_generic_adam(st, scalar(100.0), ScheduleTriple{5.0, 0.0, 0.5}, &unit);
  CHECK(st.x[0] == -1.0);

  WeightedState ws = init_weighted_state(scalar(-0.9), 1e-8);
  step_weighted_adaema(ws, scalar(-10.0), 1.0, 5.0, 0.0, &unit);
  CHECK(ws.x[0] == 1.0);
}

TEST_CASE("moment-inequality margin") {
  SUBCASE("hand values") {
    // rhs = v / (c1*(1-gamma)*(1-theta)) = 1/(1*1*0.5) = 2; margin = 2 - m^2.
    CHECK(lemma_margin(scalar(1.0), scalar(1.0), 1.0, 0.0, 0.5) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(lemma_margin(scalar(2.0), scalar(1.0), 1.0, 0.0, 0.5) ==
          doctest::Approx(-2.0).epsilon(1e-15));
  }
  SUBCASE("worst component wins") {
    Eigen::ArrayXd m(2), v(2);
    m << 0.1, 1.0;
    v << 1.0, 1.0;
    CHECK(lemma_margin(m, v, 1.0, 0.0, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("non-negative along admissible trajectories") {
    const ParameterSchedule sched = adaema_schedule(0.5, 0.9);
    const std::int64_t horizon = 2'000;
    const ContractionPair cp =
        contraction_constants(sched, horizon, default_theta_prime(sched, horizon));

    Rng rng(29);
    AdamState st = init_state(Eigen::ArrayXd::Zero(4), 1e-8);
    for (std::int64_t t = 1; t <= horizon; ++t) {
      Eigen::ArrayXd g(4);
      for (int k = 0; k < 4; ++k) g[k] = rng.normal() * (1.0 + 0.5 * std::cos(t));
      step_generic_adam(st, g, sched);
      CHECK(lemma_margin(st.m, st.v, cp.c1, cp.gamma, sched.at(t).decay) >= -1e-12);
    }
  }
}

TEST_CASE("per-step displacement respects the compound-rate bound") {
  const ParameterSchedule sched = adaema_schedule(0.5, 0.9);
  const std::int64_t horizon = 1'000;
  const ContractionPair cp =
      contraction_constants(sched, horizon, default_theta_prime(sched, horizon));
  const double coarse_scale = 1.0 / std::sqrt(cp.c1 * (1.0 - cp.gamma));

  Rng rng(31);
  AdamState st = init_state(Eigen::ArrayXd::Zero(2), 1e-8);
  for (std::int64_t t = 1; t <= horizon; ++t) {
    Eigen::ArrayXd g(2);
    g << rng.normal(), rng.normal();
    const Eigen::ArrayXd x_before = st.x;
    const Eigen::ArrayXd m_before = st.m;
    const ScheduleTriple p = sched.at(t);
    step_generic_adam(st, g, p);

    const Eigen::ArrayXd delta = (st.x - x_before).abs();
    // Coarse bound: |delta| <= chi_t / sqrt(c1*(1-gamma)).
    CHECK(delta.maxCoeff() <= normalized_lr(p) * coarse_scale * (1.0 + 1e-12));
    // Sharper bound wherever the fresh gradient is non-zero:
    // v' >= (1-theta)*g^2, so |delta| <= alpha*|m'|/sqrt((1-theta)*g^2).
    const Eigen::ArrayXd m_after = p.momentum * m_before + (1.0 - p.momentum) * g;
    for (int k = 0; k < 2; ++k) {
      if (g[k] == 0.0) continue;
      const double cap = p.base_lr * std::abs(m_after[k]) /
                         std::sqrt((1.0 - p.decay) * g[k] * g[k]);
      CHECK(delta[k] <= cap * (1.0 + 1e-12));
    }
  }
}
