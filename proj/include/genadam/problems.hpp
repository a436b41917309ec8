#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "genadam/rng.hpp"

namespace genadam {

struct OracleSample {
  double loss = 0.0;
  Eigen::ArrayXd grad;
};

/// Problem-side constants when they are known in closed form.
struct OracleConstants {
  std::optional<double> g_bound;    // G with E||g||^2 <= G^2
  std::optional<double> lipschitz;  // gradient Lipschitz constant
  std::optional<double> f_star;     // infimum of the expected/full loss
};

/// A stochastic first-order oracle: sample() returns an unbiased gradient of
/// the full loss at x (checked empirically in the test suite).
class GradientOracle {
 public:
  virtual ~GradientOracle() = default;
  virtual Eigen::Index dim() const = 0;
  virtual OracleSample sample(const Eigen::ArrayXd& x, Rng& rng) const = 0;
  virtual double full_loss(const Eigen::ArrayXd& x) const = 0;
  virtual Eigen::ArrayXd full_gradient(const Eigen::ArrayXd& x) const = 0;
  virtual OracleConstants known_constants() const { return {}; }
};

/// One-dimensional online linear losses f_t(x) = c_t * x on [box_lo, box_hi]:
/// a rare large positive slope against frequent small negative ones. The
/// expected slope stays positive, so the constrained minimizer of the
/// expected loss sits at the left edge, yet short-memory second-moment decay
/// damps the rare slope's pull far more than the frequent ones', which drags
/// the iterate the wrong way.
struct CounterexampleProblem {
  double rare_slope = 1010.0;
  double common_slope = -10.0;
  double rare_prob = 0.01;
  double box_lo = -1.0;
  double box_hi = 1.0;

  struct Draw {
    double loss;
    double grad;
    double slope;
  };

  void validate() const;
  /// Deterministic kernel: u in [0,1) picks the branch (u < rare_prob =>
  /// rare). sample() feeds it one uniform draw.
  Draw draw_from(double u, double x) const;
  Draw sample(double x, Rng& rng) const;
  double expected_slope() const;     // rare_prob*rare + (1-rare_prob)*common
  double mean_square_slope() const;  // E[c^2]
  double expected_loss(double x) const { return expected_slope() * x; }
  /// min over the box of expected_slope * x.
  double expected_loss_min() const;
};

/// Accumulates realized losses and slopes; the comparator of the regret is
/// minimized in closed form: min over x in [-1,1] of x*sum(c) = -|sum(c)|.
struct RegretLedger {
  double realized = 0.0;   // sum of c_t * x_t (compensated)
  double slope_sum = 0.0;  // sum of c_t (compensated)
  std::int64_t count = 0;

  void record(double slope, double x);
  double average_regret() const;  // requires count >= 1

 private:
  double realized_comp_ = 0.0;
  double slope_comp_ = 0.0;
};

/// loss = x'Ax/2, gradient A*x plus bounded zero-mean noise, uniform in
/// [-noise_scale, noise_scale] per component. A must be symmetric PSD.
std::unique_ptr<GradientOracle> quadratic_oracle(Eigen::MatrixXd a, double noise_scale);

/// Rows of features with an integer class label per row.
struct Dataset {
  Eigen::MatrixXd features;  // n x d
  Eigen::VectorXi labels;    // n, values in [0, classes)

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index feature_dim() const { return features.cols(); }
  int num_classes() const;
};

/// Two spherical Gaussian clusters at +/- 2/sqrt(dim) per coordinate,
/// alternating labels (exactly balanced for even n).
Dataset make_blobs(Eigen::Index n, Eigen::Index dim, std::uint64_t seed);

/// CSV, one row per example, label last.
Dataset load_dataset_csv(const std::string& path);
void save_dataset_csv(const Dataset& data, const std::string& path);

/// Binary logistic regression (labels must be 0/1); minibatch sampled
/// uniformly with replacement.
std::unique_ptr<GradientOracle> logistic_oracle(Dataset data, Eigen::Index minibatch);

/// Two-layer network: tanh hidden layer, softmax cross-entropy output, all
/// gradients in closed form. Parameter vector layout: [W1 (hidden x in,
/// column-major), b1, W2 (classes x hidden), b2].
std::unique_ptr<GradientOracle> mlp_oracle(Eigen::Index hidden, Dataset data,
                                           Eigen::Index minibatch);

/// Number of parameters of the two-layer network above.
Eigen::Index mlp_param_count(Eigen::Index input, Eigen::Index hidden, Eigen::Index classes);

/// Central finite differences of full_loss against full_gradient; returns the
/// worst per-coordinate error |fd_k - g_k| / max(1, |g_k|).
double finite_diff_check(const GradientOracle& oracle, const Eigen::ArrayXd& x, double h);

/// Deterministic Gaussian parameter vector, scale * N(0,1) per component.
Eigen::ArrayXd random_init(Eigen::Index dim, double scale, std::uint64_t seed);

}  // namespace genadam
