#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "genadam/config.hpp"
#include "genadam/schedule.hpp"

namespace genadam {

enum class OptimizerKind { GenericAdam, WeightedAdaema, AmsGrad };

OptimizerKind parse_optimizer(const std::string& name);
std::string optimizer_name(OptimizerKind kind);

/// A full experiment: problem x optimizer x schedule, flat key = value
/// surface with CLI overrides of the same names.
struct ExperimentConfig {
  std::string problem = "counterexample";  // counterexample|quadratic|logistic|mlp
  std::string optimizer = "generic_adam";  // generic_adam|weighted_adaema|amsgrad

  // Schedule selector: power_law, adaema, adamnc, rmsprop, constant,
  // bias_corrected, nosadam_hh, poly_weights, or table:<path> (CSV rows
  // base_lr,momentum,decay in step order).
  std::string schedule = "power_law";
  double eta = 0.5;
  double s = 0.5;
  double alpha = 1.0;
  double r = 1.0;
  std::int64_t cutoff = 0;  // power-law K; 0 = smallest K with alpha/K^r < 1
  double beta = 0.9;
  double beta_lambda = 0.99;  // momentum shrink factor (adamnc)
  double theta = 0.999;       // constant-decay / bias-corrected presets

  std::int64_t steps = 1'000'000;  // T
  std::uint64_t seed = 7;
  std::int64_t record_stride = 1000;
  bool invariant_checks = true;
  std::string output;  // CSV path; empty = keep in memory only

  double x0 = 0.0;  // initial scalar (counterexample, quadratic broadcast)
  std::int64_t dim = 1;
  double eps = 1e-8;

  double noise_scale = 0.1;    // quadratic gradient noise
  std::int64_t minibatch = 32;
  std::int64_t hidden = 8;     // MLP hidden width
  std::string data;            // dataset CSV; empty = synthetic blobs
  std::int64_t blobs_n = 2000;
  std::int64_t blobs_dim = 16;
  double init_scale = 0.1;        // data-problem parameter init
  double sweep_theta_bar = 0.99;  // numerator baseline for r-sweeps

  static ExperimentConfig from_map(const ConfigMap& cfg);
  static ExperimentConfig from_file(const std::string& path);

  /// Canonical echo of every key, values rendered with 17 significant digits.
  ConfigMap to_map() const;

  /// Basic admissibility: base_lr > 0, momentum in [0, cap] with cap < 1,
  /// decay in (0,1), plus range checks on the plumbing. Throws on violation.
  void validate() const;

  ParameterSchedule build_schedule() const;
};

/// Smallest integer K >= 1 with alpha / K^r < 1; throws when none exists
/// (alpha >= 1 and r <= 0).
std::int64_t minimal_cutoff(double alpha, double r);

/// One recorded step. Columns stay empty when not applicable: avg_regret is
/// online-only, loss and min_grad_sq are data-only, lemma_margin needs
/// invariant checks on and computable contraction constants.
struct TrajectoryPoint {
  std::int64_t t = 0;
  double x0 = 0.0;  // first coordinate of the iterate after step t
  std::optional<double> avg_regret;
  std::optional<double> loss;      // full-batch loss
  std::optional<double> grad_norm;  // sampled gradient at step t
  std::optional<double> min_grad_sq;  // running min of full-batch ||grad||^2
  std::optional<double> lemma_margin;
};

struct TrajectoryRecord {
  std::vector<std::pair<std::string, std::string>> header;  // config + constants
  std::vector<TrajectoryPoint> rows;

  const std::string* header_value(const std::string& key) const;
};

/// Runs the configured experiment. Recording happens at every multiple of
/// record_stride and at t = T; steps = 0 yields a header-only record.
/// Deterministic per (config, seed). With invariant_checks on, a violated
/// moment inequality aborts with the offending step and component.
TrajectoryRecord run_experiment(const ExperimentConfig& cfg);

/// How the decay numerator moves with r in a sweep: Scaled keeps the r = 0
/// endpoint at constant decay theta_bar (alpha = (1-theta_bar) + theta_bar*r),
/// Fixed pins alpha = 1-theta_bar for every r.
enum class NumeratorRule { Scaled, Fixed };

double sweep_numerator(NumeratorRule rule, double r, double theta_bar);

struct SweepCell {
  double r = 0.0;
  double s = 0.0;
  TrajectoryRecord record;
  double final_x = 0.0;
  std::optional<double> final_avg_regret;
  double wall_ms = 0.0;
};

/// Cartesian grid over r_values x s_values with a shared seed; cells run
/// concurrently and are returned in grid order (r-major), never completion
/// order. base.schedule must be power_law.
std::vector<SweepCell> sweep(const ExperimentConfig& base, const std::vector<double>& r_values,
                             const std::vector<double>& s_values,
                             NumeratorRule rule = NumeratorRule::Scaled);

std::string summary_table(const std::vector<SweepCell>& cells);

/// Least-squares slope of log(value) against log(t) over the trailing
/// `window` fraction of the series. Needs >= 10 points in the window, all
/// values > 0.
double fit_rate(const std::vector<std::pair<double, double>>& series, double window);

/// CSV schema: `# key = value` header lines, then the fixed column header
/// t,x0,avg_regret,loss,grad_norm,min_grad_sq,lemma_margin with empty fields
/// for inapplicable columns. 17-significant-digit decimal rendering.
std::string render_csv(const TrajectoryRecord& record);
void export_csv(const TrajectoryRecord& record, const std::string& path);
TrajectoryRecord parse_csv(const std::string& text);
TrajectoryRecord load_csv(const std::string& path);

/// Throws with a line number on any schema violation (bad column header,
/// wrong field count, unparsable numbers, non-increasing t).
void validate_csv_text(const std::string& text);

/// Plot layouts: TwoByThree arranges average-regret panels over iterate
/// panels in three columns; OneByThree is a single row of loss, gradient
/// norm, and min-gradient panels.
enum class PlotLayout { TwoByThree, OneByThree };

/// Writes a standalone matplotlib script reading the given CSVs. Errors on an
/// empty list; nothing is written in that case.
void emit_plot_script(const std::vector<std::string>& csv_paths, PlotLayout layout,
                      const std::string& out_path);

}  // namespace genadam
