#include "genadam/problems.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "genadam/rng.hpp"

using namespace genadam;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("counterexample draw kernel") {
  const CounterexampleProblem cp;
  cp.validate();

  SUBCASE("branch selection is u < rare_prob") {
    CHECK(cp.draw_from(0.005, 1.0).slope == 1010.0);
    CHECK(cp.draw_from(0.0, 1.0).slope == 1010.0);
    CHECK(cp.draw_from(0.01, 1.0).slope == -10.0);  // boundary goes common
    CHECK(cp.draw_from(0.5, 1.0).slope == -10.0);
    CHECK(cp.draw_from(0.999, 1.0).slope == -10.0);
  }
  SUBCASE("loss and gradient of a linear loss") {
    const auto d = cp.draw_from(0.5, 0.25);
    CHECK(d.loss == -10.0 * 0.25);
    CHECK(d.grad == -10.0);
    CHECK(d.grad == d.slope);
  }
  SUBCASE("sample replays the kernel on the same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 200; ++i) {
      const auto s = cp.sample(0.3, a);
      const auto k = cp.draw_from(b.uniform01(), 0.3);
      CHECK(s.slope == k.slope);
      CHECK(s.loss == k.loss);
    }
  }
}

TEST_CASE("counterexample closed-form moments") {
  const CounterexampleProblem cp;
  CHECK(cp.expected_slope() == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(cp.mean_square_slope() == doctest::Approx(10300.0).epsilon(1e-14));
  CHECK(cp.expected_loss(0.5) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(cp.expected_loss_min() == doctest::Approx(-0.2).epsilon(1e-12));

  // Variant with the common slope flipped positive.
  CounterexampleProblem pos = cp;
  pos.common_slope = 10.0;
  CHECK(pos.expected_slope() == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(pos.mean_square_slope() == doctest::Approx(10300.0).epsilon(1e-14));

  // Negative expected slope pushes the minimizer to the right edge.
  CounterexampleProblem neg;
  neg.rare_slope = 1.0;
  neg.common_slope = -3.0;
  neg.rare_prob = 0.5;
  CHECK(neg.expected_slope() == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(neg.expected_loss_min() == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("counterexample parameter validation") {
  CounterexampleProblem cp;
  cp.rare_prob = 0.0;
  CHECK_THROWS_AS(cp.validate(), std::invalid_argument);
  cp.rare_prob = 1.0;
  CHECK_THROWS_AS(cp.validate(), std::invalid_argument);
  cp = CounterexampleProblem{};
  cp.rare_slope = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(cp.validate(), std::invalid_argument);
  cp = CounterexampleProblem{};
  cp.box_lo = 1.0;
  cp.box_hi = 1.0;
  CHECK_THROWS_AS(cp.validate(), std::invalid_argument);
}

TEST_CASE("counterexample empirical moments over a long stream") {
  const CounterexampleProblem cp;
  Rng rng(97);
  const int n = 1'000'000;
  std::int64_t rare = 0;
  double slope_mean = 0.0, sq_mean = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto d = cp.sample(0.0, rng);
    if (d.slope == cp.rare_slope) ++rare;
    slope_mean += d.slope;
    sq_mean += d.slope * d.slope;
  }
  slope_mean /= n;
  sq_mean /= n;
  const double rare_frac = static_cast<double>(rare) / n;
  CHECK(std::abs(rare_frac - 0.01) <= 0.001);
  // Three-sigma envelopes of the two sample means.
  CHECK(std::abs(slope_mean - 0.2) <= 305.0 / 1000.0);
  CHECK(std::abs(sq_mean - 10300.0) <= 305.0);
}

TEST_CASE("regret ledger hand values") {
  SUBCASE("sitting on the wrong side of two like slopes") {
    RegretLedger led;
    led.record(10.0, 1.0);
    led.record(10.0, 1.0);
    CHECK(led.count == 2);
    CHECK(led.average_regret() == doctest::Approx(20.0).epsilon(1e-15));
  }
  SUBCASE("sitting at the origin against a rare spike") {
    RegretLedger led;
    led.record(10.0, 0.0);
    led.record(1010.0, 0.0);
    CHECK(led.average_regret() == doctest::Approx(510.0).epsilon(1e-15));
  }
  SUBCASE("matching the comparator leaves zero regret") {
    RegretLedger led;
    led.record(3.0, -1.0);
    led.record(7.0, -1.0);
    CHECK(led.average_regret() == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  }
  SUBCASE("empty ledger refuses to average") {
    RegretLedger led;
    CHECK_THROWS_AS(led.average_regret(), std::logic_error);
  }
}

TEST_CASE("regret comparator equals a dense grid search") {
  // The best fixed point in [-1,1] of x * sum(c) sits at an endpoint, and the
  // endpoints belong to the millistep grid, so the two answers coincide.
  Rng rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    RegretLedger led;
    double realized = 0.0, slope_sum = 0.0;
    const int n = 50;
    for (int t = 0; t < n; ++t) {
      const double c = rng.uniform(-20.0, 20.0);
      const double x = rng.uniform(-1.0, 1.0);
      led.record(c, x);
      realized += c * x;
      slope_sum += c;
    }
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 2000; ++k) {
      const double x = -1.0 + 0.001 * k;
      best = std::min(best, x * slope_sum);
    }
    const double expect = (realized - best) / n;
    CHECK(led.average_regret() == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("quadratic oracle") {
  SUBCASE("identity matrix hand values") {
    auto q = quadratic_oracle(Eigen::MatrixXd::Identity(2, 2), 0.0);
    CHECK(q->dim() == 2);
    Eigen::ArrayXd x(2);
    x << 1.0, 1.0;
    CHECK(q->full_loss(x) == 1.0);
    const Eigen::ArrayXd g = q->full_gradient(x);
    CHECK(g[0] == 1.0);
    CHECK(g[1] == 1.0);
    const auto kc = q->known_constants();
    REQUIRE(kc.lipschitz.has_value());
    REQUIRE(kc.f_star.has_value());
    CHECK(*kc.lipschitz == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*kc.f_star == 0.0);
    CHECK_FALSE(kc.g_bound.has_value());
  }
  SUBCASE("diagonal curvature sets the smoothness constant") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
    for (int i = 0; i < 4; ++i) a(i, i) = i + 1.0;
    auto q = quadratic_oracle(a, 0.0);
    CHECK(*q->known_constants().lipschitz == doctest::Approx(4.0).epsilon(1e-12));
    Eigen::ArrayXd x(4);
    x << 1.0, -1.0, 0.5, 2.0;
    const Eigen::ArrayXd g = q->full_gradient(x);
    CHECK(g[0] == 1.0);
    CHECK(g[1] == -2.0);
    CHECK(g[2] == 1.5);
    CHECK(g[3] == 8.0);
  }
  SUBCASE("noise stays inside its box") {
    auto q = quadratic_oracle(Eigen::MatrixXd::Identity(3, 3), 0.5);
    Eigen::ArrayXd x(3);
    x << 1.0, -2.0, 0.0;
    const Eigen::ArrayXd g = q->full_gradient(x);
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
      const auto s = q->sample(x, rng);
      for (int k = 0; k < 3; ++k) {
        CHECK(s.grad[k] >= g[k] - 0.5);
        CHECK(s.grad[k] <= g[k] + 0.5);
      }
      CHECK(s.loss == q->full_loss(x));
    }
  }
  SUBCASE("matrix validation") {
    CHECK_THROWS_AS(quadratic_oracle(Eigen::MatrixXd::Zero(2, 3), 0.0),
                    std::invalid_argument);
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, 0.0, 1.0;
    CHECK_THROWS_AS(quadratic_oracle(asym, 0.0), std::invalid_argument);
    Eigen::MatrixXd indef(2, 2);
    indef << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS_AS(quadratic_oracle(indef, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(quadratic_oracle(Eigen::MatrixXd::Identity(2, 2), -0.1),
                    std::invalid_argument);
  }
}

TEST_CASE("blob generator") {
  const Dataset d = make_blobs(10, 4, 3);
  CHECK(d.size() == 10);
  CHECK(d.feature_dim() == 4);
  CHECK(d.num_classes() == 2);
  int zeros = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    CHECK(d.labels[i] == static_cast<int>(i % 2));
    zeros += d.labels[i] == 0 ? 1 : 0;
  }
  CHECK(zeros == 5);

  SUBCASE("same seed, same data") {
    const Dataset e = make_blobs(10, 4, 3);
    CHECK((d.features - e.features).cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index i = 0; i < d.size(); ++i) CHECK(d.labels[i] == e.labels[i]);
  }
  SUBCASE("class means straddle the origin at +-2/sqrt(dim)") {
    const Dataset big = make_blobs(4000, 2, 11);
    const double offset = 2.0 / std::sqrt(2.0);
    Eigen::ArrayXd mean0 = Eigen::ArrayXd::Zero(2), mean1 = Eigen::ArrayXd::Zero(2);
    for (Eigen::Index i = 0; i < big.size(); ++i) {
      if (big.labels[i] == 0)
        mean0 += big.features.row(i).transpose().array();
      else
        mean1 += big.features.row(i).transpose().array();
    }
    mean0 /= 2000.0;
    mean1 /= 2000.0;
    for (int k = 0; k < 2; ++k) {
      CHECK(std::abs(mean0[k] - offset) < 0.15);
      CHECK(std::abs(mean1[k] + offset) < 0.15);
    }
  }
  SUBCASE("degenerate sizes are rejected") {
    CHECK_THROWS_AS(make_blobs(0, 3, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_blobs(3, 0, 1), std::invalid_argument);
  }
}

TEST_CASE("dataset csv round trip") {
  const std::string path = temp_path("genadam_unit_blobs.csv");
  const Dataset d = make_blobs(7, 3, 29);
  save_dataset_csv(d, path);
  const Dataset back = load_dataset_csv(path);
  REQUIRE(back.size() == d.size());
  REQUIRE(back.feature_dim() == d.feature_dim());
  CHECK((back.features - d.features).cwiseAbs().maxCoeff() == 0.0);  // %.17g exact
  for (Eigen::Index i = 0; i < d.size(); ++i) CHECK(back.labels[i] == d.labels[i]);
  std::filesystem::remove(path);
}

TEST_CASE("dataset csv rejects malformed files") {
  const std::string path = temp_path("genadam_unit_bad.csv");
  write_text(path, "1.0,2.0,0\n1.0,1\n");
  CHECK_THROWS_AS(load_dataset_csv(path), std::invalid_argument);  // ragged
  write_text(path, "1.0,0.5\n");
  CHECK_THROWS_AS(load_dataset_csv(path), std::invalid_argument);  // fractional label
  write_text(path, "1.0,-1\n");
  CHECK_THROWS_AS(load_dataset_csv(path), std::invalid_argument);  // negative label
  write_text(path, "abc,1\n");
  CHECK_THROWS_AS(load_dataset_csv(path), std::invalid_argument);  // non-numeric
  write_text(path, "5\n");
  CHECK_THROWS_AS(load_dataset_csv(path), std::invalid_argument);  // label only
  write_text(path, "");
  CHECK_THROWS_AS(load_dataset_csv(path), std::invalid_argument);  // empty
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_dataset_csv(temp_path("genadam_unit_missing.csv")),
                  std::invalid_argument);
}

TEST_CASE("logistic oracle") {
  SUBCASE("loss at the origin is log 2 regardless of the data") {
    auto o = logistic_oracle(make_blobs(40, 5, 2), 4);
    CHECK(o->full_loss(Eigen::ArrayXd::Zero(5)) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }
  SUBCASE("single-example hand gradient") {
    Dataset d;
    d.features.resize(1, 2);
    d.features << 2.0, 0.0;
    d.labels.resize(1);
    d.labels << 0;
    auto o = logistic_oracle(d, 1);
    Eigen::ArrayXd w(2);
    w << 0.5, 1.0;
    CHECK(o->full_loss(w) == doctest::Approx(std::log1p(std::exp(1.0))).epsilon(1e-15));
    const Eigen::ArrayXd g = o->full_gradient(w);
    const double sig = 1.0 / (1.0 + std::exp(-1.0));
    CHECK(g[0] == doctest::Approx(2.0 * sig).epsilon(1e-15));
    CHECK(g[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  }
  SUBCASE("interpolating weights drive the gradient to zero") {
    Dataset d;
    d.features.resize(1, 3);
    d.features << 1.0, -2.0, 0.5;
    d.labels.resize(1);
    d.labels << 1;
    auto o = logistic_oracle(d, 1);
    const double sq = d.features.row(0).squaredNorm();
    const Eigen::ArrayXd w = 40.0 / sq * d.features.row(0).transpose().array();
    CHECK(std::sqrt(o->full_gradient(w).square().sum()) < 1e-6);
  }
  SUBCASE("known constants from the data") {
    Dataset d;
    d.features.resize(2, 2);
    d.features << 2.0, 0.0, 0.0, 3.0;
    d.labels.resize(2);
    d.labels << 0, 1;
    const auto kc = logistic_oracle(d, 1)->known_constants();
    REQUIRE(kc.g_bound.has_value());
    REQUIRE(kc.lipschitz.has_value());
    CHECK(*kc.g_bound == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(*kc.lipschitz == doctest::Approx(1.125).epsilon(1e-12));
  }
  SUBCASE("input validation") {
    Dataset d = make_blobs(6, 2, 1);
    d.labels[2] = 2;
    CHECK_THROWS_AS(logistic_oracle(d, 1), std::invalid_argument);
    const Dataset ok = make_blobs(6, 2, 1);
    CHECK_THROWS_AS(logistic_oracle(ok, 0), std::invalid_argument);
    CHECK_THROWS_AS(logistic_oracle(ok, 7), std::invalid_argument);
    auto o = logistic_oracle(ok, 2);
    CHECK_THROWS_AS(o->full_loss(Eigen::ArrayXd::Zero(3)), std::invalid_argument);
    Rng rng(1);
    CHECK_THROWS_AS(o->sample(Eigen::ArrayXd::Zero(3), rng), std::invalid_argument);
  }
}

TEST_CASE("two-layer network oracle") {
  SUBCASE("parameter counting") {
    CHECK(mlp_param_count(16, 8, 2) == 154);
    CHECK(mlp_param_count(4, 3, 2) == 23);
    auto o = mlp_oracle(3, make_blobs(12, 4, 6), 2);
    CHECK(o->dim() == mlp_param_count(4, 3, 2));
    CHECK(o->dim() == 23);
  }
  SUBCASE("zero parameters give a uniform softmax") {
    auto o = mlp_oracle(5, make_blobs(20, 4, 6), 4);
    const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(o->dim());
    CHECK(o->full_loss(zero) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // Balanced labels + zero hidden activations: the gradient vanishes exactly.
    CHECK(o->full_gradient(zero).abs().maxCoeff() == 0.0);
  }
  SUBCASE("three classes") {
    Dataset d;
    d.features.resize(3, 2);
    d.features << 1.0, 0.0, 0.0, 1.0, -1.0, -1.0;
    d.labels.resize(3);
    d.labels << 0, 1, 2;
    auto o = mlp_oracle(2, d, 1);
    CHECK(o->dim() == mlp_param_count(2, 2, 3));
    CHECK(o->full_loss(Eigen::ArrayXd::Zero(o->dim())) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }
  SUBCASE("input validation") {
    Dataset single;
    single.features = Eigen::MatrixXd::Ones(3, 2);
    single.labels = Eigen::VectorXi::Zero(3);
    CHECK_THROWS_AS(mlp_oracle(2, single, 1), std::invalid_argument);  // one class
    const Dataset d = make_blobs(6, 2, 1);
    CHECK_THROWS_AS(mlp_oracle(0, d, 1), std::invalid_argument);
    CHECK_THROWS_AS(mlp_oracle(2, d, 0), std::invalid_argument);
    CHECK_THROWS_AS(mlp_oracle(2, d, 7), std::invalid_argument);
    auto o = mlp_oracle(2, d, 1);
    CHECK_THROWS_AS(o->full_loss(Eigen::ArrayXd::Zero(1)), std::invalid_argument);
  }
}

TEST_CASE("stochastic gradients are unbiased") {
  // Mean of many single draws should approach the full gradient; the gap is
  // checked against four standard errors estimated from the same stream.
  auto check_unbiased = [](const GradientOracle& oracle, const Eigen::ArrayXd& x,
                           std::uint64_t seed) {
    Rng rng(seed);
    const int n = 100'000;
    Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(oracle.dim());
    Eigen::ArrayXd sumsq = Eigen::ArrayXd::Zero(oracle.dim());
    for (int i = 0; i < n; ++i) {
      const auto s = oracle.sample(x, rng);
      sum += s.grad;
      sumsq += s.grad.square();
    }
    const Eigen::ArrayXd mean = sum / n;
    const Eigen::ArrayXd var = (sumsq / n - mean.square()).max(0.0);
    const Eigen::ArrayXd se = (var / n).sqrt();
    const Eigen::ArrayXd full = oracle.full_gradient(x);
    for (Eigen::Index k = 0; k < full.size(); ++k)
      CHECK(std::abs(mean[k] - full[k]) <= 4.0 * se[k] + 1e-12);
  };

  SUBCASE("quadratic with bounded noise") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
    a.diagonal() << 1.0, 2.0, 3.0;
    Eigen::ArrayXd x(3);
    x << 1.0, -1.0, 2.0;
    check_unbiased(*quadratic_oracle(a, 0.5), x, 301);
  }
  SUBCASE("logistic minibatch of one") {
    check_unbiased(*logistic_oracle(make_blobs(8, 2, 4), 1),
                   random_init(2, 0.7, 3), 302);
  }
  SUBCASE("network minibatch of one") {
    auto o = mlp_oracle(2, make_blobs(16, 3, 5), 1);
    check_unbiased(*o, random_init(o->dim(), 0.4, 11), 303);
  }
}

TEST_CASE("finite differences agree with analytic gradients") {
  Rng rng(777);
  SUBCASE("quadratic") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(5, 5);
    for (int i = 0; i < 5; ++i) a(i, i) = i + 1.0;
    auto q = quadratic_oracle(a, 0.0);
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::ArrayXd x(5);
      for (int k = 0; k < 5; ++k) x[k] = rng.uniform(-2.0, 2.0);
      CHECK(finite_diff_check(*q, x, 1e-5) <= 1e-8);
    }
  }
  SUBCASE("logistic") {
    auto o = logistic_oracle(make_blobs(40, 5, 2), 4);
    for (int trial = 0; trial < 5; ++trial)
      CHECK(finite_diff_check(*o, random_init(5, 0.5, 100 + trial), 1e-5) <= 1e-6);
  }
  SUBCASE("two-layer network") {
    auto o = mlp_oracle(5, make_blobs(30, 4, 9), 3);
    for (int trial = 0; trial < 5; ++trial)
      CHECK(finite_diff_check(*o, random_init(o->dim(), 0.5, 200 + trial), 1e-5) <= 1e-6);
  }
  SUBCASE("input validation") {
    auto q = quadratic_oracle(Eigen::MatrixXd::Identity(2, 2), 0.0);
    CHECK_THROWS_AS(finite_diff_check(*q, Eigen::ArrayXd::Zero(2), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(finite_diff_check(*q, Eigen::ArrayXd::Zero(3), 1e-5),
                    std::invalid_argument);
  }
}

TEST_CASE("deterministic parameter initialization") {
  const Eigen::ArrayXd a = random_init(6, 1.0, 9);
  const Eigen::ArrayXd b = random_init(6, 1.0, 9);
  CHECK((a - b).abs().maxCoeff() == 0.0);
  const Eigen::ArrayXd doubled = random_init(6, 2.0, 9);
  CHECK((doubled - 2.0 * a).abs().maxCoeff() == 0.0);
  CHECK(random_init(4, 0.0, 1).abs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(random_init(0, 1.0, 1), std::invalid_argument);

  // Sample moments of a long standard-normal draw.
  const Eigen::ArrayXd big = random_init(10'000, 1.0, 17);
  CHECK(std::abs(big.mean()) < 0.05);
  const double var = (big - big.mean()).square().mean();
  CHECK(std::abs(std::sqrt(var) - 1.0) < 0.05);
}
