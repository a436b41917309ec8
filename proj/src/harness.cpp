#include "genadam/harness.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "genadam/bounds.hpp"
#include "genadam/optimizer.hpp"
#include "genadam/problems.hpp"
#include "genadam/rng.hpp"

namespace genadam {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Synthetic datasets are pinned to one seed so that the run seed only moves
// the minibatch stream, never the data.
constexpr std::uint64_t kBlobsSeed = 1729;

constexpr const char* kColumnHeader =
    "t,x0,avg_regret,loss,grad_norm,min_grad_sq,lemma_margin";

}  // namespace

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "generic_adam") return OptimizerKind::GenericAdam;
  if (name == "weighted_adaema") return OptimizerKind::WeightedAdaema;
  if (name == "amsgrad") return OptimizerKind::AmsGrad;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

std::string optimizer_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::GenericAdam: return "generic_adam";
    case OptimizerKind::WeightedAdaema: return "weighted_adaema";
    case OptimizerKind::AmsGrad: return "amsgrad";
  }
  return "?";
}

std::int64_t minimal_cutoff(double alpha, double r) {
  require(alpha > 0.0 && std::isfinite(alpha), "alpha must be positive");
  if (alpha < 1.0) return 1;
  require(r > 0.0, "no cutoff admits alpha >= 1 when r <= 0");
  auto k = static_cast<std::int64_t>(std::floor(std::pow(alpha, 1.0 / r))) + 1;
  while (alpha / std::pow(static_cast<double>(k), r) >= 1.0) ++k;
  return k;
}

double sweep_numerator(NumeratorRule rule, double r, double theta_bar) {
  require(theta_bar > 0.0 && theta_bar < 1.0, "theta_bar must lie in (0,1)");
  require(r >= 0.0, "r must be >= 0");
  if (rule == NumeratorRule::Fixed) return 1.0 - theta_bar;
  return (1.0 - theta_bar) + theta_bar * r;
}

// ---------------------------------------------------------------------------
// ExperimentConfig

namespace {

const std::vector<std::string> kKnownKeys = {
    "problem",    "optimizer",   "schedule",    "eta",        "s",
    "alpha",      "r",           "K",           "beta",       "beta_lambda",
    "theta",      "T",           "seed",        "record_stride",
    "invariant_checks",          "output",      "x0",         "dim",
    "eps",        "noise_scale", "minibatch",   "hidden",     "data",
    "blobs_n",    "blobs_dim",   "init_scale",  "sweep_theta_bar"};

std::uint64_t config_seed(const ConfigMap& cfg, std::uint64_t fallback) {
  auto it = cfg.find("seed");
  if (it == cfg.end()) return fallback;
  char* end = nullptr;
  std::uint64_t v = std::strtoull(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0')
    throw std::invalid_argument("config key 'seed': cannot parse '" + it->second +
                                "' as an unsigned integer");
  return v;
}

std::vector<ScheduleTriple> load_schedule_table(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open schedule table: " + path);
  std::vector<ScheduleTriple> rows;
  std::string line;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::vector<double> fields;
    std::size_t pos = 0;
    bool numeric = true;
    while (pos <= line.size()) {
      auto comma = line.find(',', pos);
      std::string field = line.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      char* end = nullptr;
      double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str()) {
        numeric = false;
        break;
      }
      fields.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (!numeric && rows.empty()) continue;  // tolerate one header line
    require(numeric, "schedule table: non-numeric row");
    require(fields.size() == 3, "schedule table rows are base_lr,momentum,decay");
    rows.push_back({fields[0], fields[1], fields[2]});
  }
  require(!rows.empty(), "schedule table is empty: " + path);
  return rows;
}

void check_admissible(const ParameterSchedule& sched, std::int64_t steps) {
  require(sched.beta_cap() >= 0.0 && sched.beta_cap() < 1.0,
          "momentum cap must lie in [0,1)");
  std::int64_t limit = std::max<std::int64_t>(steps, 1);
  if (sched.kind() != ParameterSchedule::Kind::Tabulated)
    limit = std::min<std::int64_t>(limit, 1024);  // closed forms: spot-check
  else if (steps >= 1) {
    try {
      (void)sched.at(steps);
    } catch (const std::out_of_range&) {
      throw std::invalid_argument("schedule table shorter than T");
    }
  }
  if (sched.kind() == ParameterSchedule::Kind::Tabulated)
    limit = std::min<std::int64_t>(limit, sched.horizon_hint());
  for (std::int64_t t = 1; t <= limit; ++t) {
    ScheduleTriple p = sched.at(t);
    if (!(p.base_lr > 0.0) || !std::isfinite(p.base_lr))
      throw std::invalid_argument("base_lr must be positive and finite at t=" +
                                  std::to_string(t));
    if (!(p.momentum >= 0.0 && p.momentum < 1.0))
      throw std::invalid_argument("momentum must lie in [0,1) at t=" + std::to_string(t));
    if (!(p.decay > 0.0 && p.decay < 1.0))
      throw std::invalid_argument("decay must lie in (0,1) at t=" + std::to_string(t));
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_map(const ConfigMap& cfg) {
  require_known_keys(cfg, kKnownKeys);
  ExperimentConfig out;
  out.problem = config_string(cfg, "problem", out.problem);
  out.optimizer = config_string(cfg, "optimizer", out.optimizer);
  out.schedule = config_string(cfg, "schedule", out.schedule);
  out.eta = config_double(cfg, "eta", out.eta);
  out.s = config_double(cfg, "s", out.s);
  out.alpha = config_double(cfg, "alpha", out.alpha);
  out.r = config_double(cfg, "r", out.r);
  out.cutoff = config_int(cfg, "K", out.cutoff);
  out.beta = config_double(cfg, "beta", out.beta);
  out.beta_lambda = config_double(cfg, "beta_lambda", out.beta_lambda);
  out.theta = config_double(cfg, "theta", out.theta);
  out.steps = config_int(cfg, "T", out.steps);
  out.seed = config_seed(cfg, out.seed);
  out.record_stride = config_int(cfg, "record_stride", out.record_stride);
  out.invariant_checks = config_bool(cfg, "invariant_checks", out.invariant_checks);
  out.output = config_string(cfg, "output", out.output);
  out.x0 = config_double(cfg, "x0", out.x0);
  out.dim = config_int(cfg, "dim", out.dim);
  out.eps = config_double(cfg, "eps", out.eps);
  out.noise_scale = config_double(cfg, "noise_scale", out.noise_scale);
  out.minibatch = config_int(cfg, "minibatch", out.minibatch);
  out.hidden = config_int(cfg, "hidden", out.hidden);
  out.data = config_string(cfg, "data", out.data);
  out.blobs_n = config_int(cfg, "blobs_n", out.blobs_n);
  out.blobs_dim = config_int(cfg, "blobs_dim", out.blobs_dim);
  out.init_scale = config_double(cfg, "init_scale", out.init_scale);
  out.sweep_theta_bar = config_double(cfg, "sweep_theta_bar", out.sweep_theta_bar);
  return out;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_map(load_config_file(path));
}

ConfigMap ExperimentConfig::to_map() const {
  ConfigMap m;
  m["problem"] = problem;
  m["optimizer"] = optimizer;
  m["schedule"] = schedule;
  m["eta"] = fmt17(eta);
  m["s"] = fmt17(s);
  m["alpha"] = fmt17(alpha);
  m["r"] = fmt17(r);
  m["K"] = std::to_string(cutoff);
  m["beta"] = fmt17(beta);
  m["beta_lambda"] = fmt17(beta_lambda);
  m["theta"] = fmt17(theta);
  m["T"] = std::to_string(steps);
  m["seed"] = std::to_string(seed);
  m["record_stride"] = std::to_string(record_stride);
  m["invariant_checks"] = invariant_checks ? "true" : "false";
  m["output"] = output;
  m["x0"] = fmt17(x0);
  m["dim"] = std::to_string(dim);
  m["eps"] = fmt17(eps);
  m["noise_scale"] = fmt17(noise_scale);
  m["minibatch"] = std::to_string(minibatch);
  m["hidden"] = std::to_string(hidden);
  m["data"] = data;
  m["blobs_n"] = std::to_string(blobs_n);
  m["blobs_dim"] = std::to_string(blobs_dim);
  m["init_scale"] = fmt17(init_scale);
  m["sweep_theta_bar"] = fmt17(sweep_theta_bar);
  return m;
}

void ExperimentConfig::validate() const {
  require(problem == "counterexample" || problem == "quadratic" ||
              problem == "logistic" || problem == "mlp",
          "unknown problem '" + problem + "'");
  (void)parse_optimizer(optimizer);
  require(steps >= 0, "T must be >= 0");
  require(record_stride >= 1, "record_stride must be >= 1");
  require(dim >= 1, "dim must be >= 1");
  require(eps > 0.0 && std::isfinite(eps), "eps must be positive");
  require(std::isfinite(x0), "x0 must be finite");
  if (problem == "counterexample")
    require(x0 >= -1.0 && x0 <= 1.0, "x0 must start inside [-1,1]");
  require(noise_scale >= 0.0 && std::isfinite(noise_scale), "noise_scale must be >= 0");
  require(minibatch >= 1, "minibatch must be >= 1");
  require(hidden >= 1, "hidden must be >= 1");
  require(blobs_n >= 2 && blobs_dim >= 1, "blobs need n >= 2, dim >= 1");
  require(std::isfinite(init_scale), "init_scale must be finite");
  require(sweep_theta_bar > 0.0 && sweep_theta_bar < 1.0,
          "sweep_theta_bar must lie in (0,1)");
  check_admissible(build_schedule(), steps);
}

ParameterSchedule ExperimentConfig::build_schedule() const {
  std::int64_t hint = std::max<std::int64_t>(steps, 2);
  if (schedule == "power_law") {
    PowerLawFamily fam;
    fam.eta = eta;
    fam.s = s;
    fam.alpha = alpha;
    fam.r = r;
    fam.cutoff = cutoff > 0 ? cutoff : minimal_cutoff(alpha, r);
    fam.beta_cap = beta;
    fam.beta_lambda = 1.0;
    return ParameterSchedule::power_law(fam, hint);
  }
  if (schedule == "adaema") return adaema_schedule(eta, beta, hint);
  if (schedule == "adamnc") return adamnc_schedule(eta, beta, beta_lambda, hint);
  if (schedule == "rmsprop") return rmsprop_schedule(eta, hint);
  if (schedule == "constant") return constant_decay_schedule(eta, s, theta, beta, hint);
  if (schedule == "bias_corrected")
    return bias_corrected_adam_schedule(beta, theta, eta, hint);
  if (schedule == "nosadam_hh") return hyperharmonic_weight_schedule(r, eta, beta, hint);
  if (schedule == "poly_weights") return polynomial_weight_schedule(r, eta, beta, hint);
  if (schedule.rfind("table:", 0) == 0)
    return ParameterSchedule::tabulated(load_schedule_table(schedule.substr(6)));
  throw std::invalid_argument("unknown schedule '" + schedule + "'");
}

// ---------------------------------------------------------------------------
// Running

namespace {

// Uniform face over the three update rules so the run loop is written once.
class Runner {
 public:
  virtual ~Runner() = default;
  virtual void step(const Eigen::ArrayXd& g, const ScheduleTriple& p,
                    const BoxConstraint* box) = 0;
  virtual const Eigen::ArrayXd& x() const = 0;
  virtual const Eigen::ArrayXd& m() const = 0;
  virtual Eigen::ArrayXd v() const = 0;
};

class ThetaRunner final : public Runner {
 public:
  ThetaRunner(const Eigen::ArrayXd& x1, double eps) : st_(init_state(x1, eps)) {}
  void step(const Eigen::ArrayXd& g, const ScheduleTriple& p,
            const BoxConstraint* box) override {
    step_generic_adam(st_, g, p, box);
  }
  const Eigen::ArrayXd& x() const override { return st_.x; }
  const Eigen::ArrayXd& m() const override { return st_.m; }
  Eigen::ArrayXd v() const override { return st_.v; }

 private:
  AdamState st_;
};

class WeightRunner final : public Runner {
 public:
  WeightRunner(const Eigen::ArrayXd& x1, double eps, const ParameterSchedule& sched,
               std::int64_t steps)
      : st_(init_weighted_state(x1, eps)),
        weights_(to_weight_form(sched, std::max<std::int64_t>(steps, 1))) {}
  void step(const Eigen::ArrayXd& g, const ScheduleTriple& p,
            const BoxConstraint* box) override {
    step_weighted_adaema_log(st_, g, weights_.log_weight(st_.t + 1), p.base_lr,
                             p.momentum, box);
  }
  const Eigen::ArrayXd& x() const override { return st_.x; }
  const Eigen::ArrayXd& m() const override { return st_.m; }
  Eigen::ArrayXd v() const override { return st_.second_moment(); }

 private:
  WeightedState st_;
  WeightSequence weights_;
};

class AmsRunner final : public Runner {
 public:
  AmsRunner(const Eigen::ArrayXd& x1, double eps) : st_(init_amsgrad_state(x1, eps)) {}
  void step(const Eigen::ArrayXd& g, const ScheduleTriple& p,
            const BoxConstraint* box) override {
    step_amsgrad(st_, g, p, box);
  }
  const Eigen::ArrayXd& x() const override { return st_.x; }
  const Eigen::ArrayXd& m() const override { return st_.m; }
  Eigen::ArrayXd v() const override { return st_.v; }

 private:
  AmsGradState st_;
};

std::unique_ptr<Runner> make_runner(const ExperimentConfig& cfg,
                                    const ParameterSchedule& sched,
                                    const Eigen::ArrayXd& x1) {
  switch (parse_optimizer(cfg.optimizer)) {
    case OptimizerKind::GenericAdam:
      return std::make_unique<ThetaRunner>(x1, cfg.eps);
    case OptimizerKind::WeightedAdaema:
      return std::make_unique<WeightRunner>(x1, cfg.eps, sched, cfg.steps);
    case OptimizerKind::AmsGrad:
      return std::make_unique<AmsRunner>(x1, cfg.eps);
  }
  throw std::logic_error("unreachable");
}

std::vector<std::pair<std::string, std::string>> build_header(
    const ExperimentConfig& cfg, const ParameterSchedule& sched,
    const std::optional<ContractionPair>& cp) {
  std::vector<std::pair<std::string, std::string>> header;
  for (const auto& [key, value] : cfg.to_map()) header.emplace_back(key, value);
  header.emplace_back("beta_cap", fmt17(sched.beta_cap()));
  if (cp) {
    header.emplace_back("theta_prime", fmt17(cp->theta_prime));
    header.emplace_back("gamma", fmt17(cp->gamma));
    header.emplace_back("c1", fmt17(cp->c1));
  }
  return header;
}

// Moment-inequality slack at the current state; aborts when enforced and the
// slack dips below -1e-12.
double margin_check(const Runner& run, const ContractionPair& cp, double theta_t,
                    std::int64_t step, bool enforce) {
  double denom = cp.c1 * (1.0 - cp.gamma) * (1.0 - theta_t);
  Eigen::Index k = 0;
  double margin = (run.v() / denom - run.m().square()).minCoeff(&k);
  if (enforce && !(margin >= -1e-12))
    throw std::runtime_error("moment inequality violated at step " +
                             std::to_string(step) + ", component " + std::to_string(k) +
                             ": margin = " + fmt17(margin));
  return margin;
}

bool record_due(std::int64_t t, std::int64_t stride, std::int64_t total) {
  return t % stride == 0 || t == total;
}

std::optional<ContractionPair> try_contraction(const ParameterSchedule& sched,
                                               std::int64_t steps) {
  try {
    std::int64_t horizon = std::max<std::int64_t>(steps, 1);
    double tp = default_theta_prime(sched, horizon);
    return contraction_constants(sched, horizon, tp);
  } catch (const std::exception&) {
    return std::nullopt;  // no admissible theta_prime; margin column stays empty
  }
}

TrajectoryRecord run_counterexample(const ExperimentConfig& cfg,
                                    const ParameterSchedule& sched) {
  CounterexampleProblem prob;
  prob.validate();
  auto cp = try_contraction(sched, cfg.steps);
  TrajectoryRecord rec;
  rec.header = build_header(cfg, sched, cp);

  Rng rng(cfg.seed);
  BoxConstraint box = BoxConstraint::uniform(prob.box_lo, prob.box_hi);
  Eigen::ArrayXd x1(1);
  x1[0] = cfg.x0;
  auto runner = make_runner(cfg, sched, x1);
  RegretLedger ledger;

  for (std::int64_t t = 1; t <= cfg.steps; ++t) {
    ScheduleTriple p = sched.at(t);
    // Online protocol: the loss at step t is charged against the pre-update
    // iterate, then the slope is revealed as the gradient.
    auto draw = prob.sample(runner->x()[0], rng);
    ledger.record(draw.slope, runner->x()[0]);
    Eigen::ArrayXd g(1);
    g[0] = draw.grad;
    runner->step(g, p, &box);

    double margin = 0.0;
    if (cp) margin = margin_check(*runner, *cp, p.decay, t, cfg.invariant_checks);
    if (record_due(t, cfg.record_stride, cfg.steps)) {
      TrajectoryPoint row;
      row.t = t;
      row.x0 = runner->x()[0];
      row.avg_regret = ledger.average_regret();
      row.grad_norm = std::abs(draw.grad);
      if (cp && cfg.invariant_checks) row.lemma_margin = margin;
      rec.rows.push_back(row);
    }
  }
  return rec;
}

std::unique_ptr<GradientOracle> build_oracle(const ExperimentConfig& cfg) {
  if (cfg.problem == "quadratic") {
    // Diagonal spectrum 1/dim, 2/dim, ..., 1: exercises per-coordinate
    // adaptivity while keeping f* = 0 and the minimizer at the origin.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(cfg.dim, cfg.dim);
    for (std::int64_t i = 0; i < cfg.dim; ++i)
      a(i, i) = static_cast<double>(i + 1) / static_cast<double>(cfg.dim);
    return quadratic_oracle(a, cfg.noise_scale);
  }
  Dataset ds = cfg.data.empty() ? make_blobs(cfg.blobs_n, cfg.blobs_dim, kBlobsSeed)
                                : load_dataset_csv(cfg.data);
  if (cfg.problem == "logistic") return logistic_oracle(std::move(ds), cfg.minibatch);
  return mlp_oracle(cfg.hidden, std::move(ds), cfg.minibatch);
}

TrajectoryRecord run_data_problem(const ExperimentConfig& cfg,
                                  const ParameterSchedule& sched) {
  auto oracle = build_oracle(cfg);
  auto cp = try_contraction(sched, cfg.steps);
  TrajectoryRecord rec;
  rec.header = build_header(cfg, sched, cp);

  Rng rng(cfg.seed);
  Eigen::ArrayXd x1(oracle->dim());
  if (cfg.problem == "quadratic") {
    x1.setConstant(cfg.x0);
  } else {
    // Data problems draw their parameter init from the run stream, ahead of
    // any minibatch sampling.
    for (Eigen::Index k = 0; k < x1.size(); ++k) x1[k] = cfg.init_scale * rng.normal();
  }
  auto runner = make_runner(cfg, sched, x1);
  double min_gsq = std::numeric_limits<double>::infinity();

  for (std::int64_t t = 1; t <= cfg.steps; ++t) {
    ScheduleTriple p = sched.at(t);
    OracleSample smp;
    try {
      smp = oracle->sample(runner->x(), rng);
    } catch (const std::exception& e) {
      throw std::runtime_error("oracle failure at step " + std::to_string(t) + ": " +
                               e.what());
    }
    runner->step(smp.grad, p, nullptr);

    double margin = 0.0;
    if (cp) margin = margin_check(*runner, *cp, p.decay, t, cfg.invariant_checks);
    if (record_due(t, cfg.record_stride, cfg.steps)) {
      TrajectoryPoint row;
      row.t = t;
      row.x0 = runner->x()[0];
      row.loss = oracle->full_loss(runner->x());
      row.grad_norm = std::sqrt(smp.grad.square().sum());
      min_gsq = std::min(min_gsq, oracle->full_gradient(runner->x()).square().sum());
      row.min_grad_sq = min_gsq;
      if (cp && cfg.invariant_checks) row.lemma_margin = margin;
      rec.rows.push_back(row);
    }
  }
  return rec;
}

}  // namespace

const std::string* TrajectoryRecord::header_value(const std::string& key) const {
  for (const auto& [k, v] : header)
    if (k == key) return &v;
  return nullptr;
}

TrajectoryRecord run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ParameterSchedule sched = cfg.build_schedule();
  TrajectoryRecord rec = cfg.problem == "counterexample"
                             ? run_counterexample(cfg, sched)
                             : run_data_problem(cfg, sched);
  if (!cfg.output.empty()) export_csv(rec, cfg.output);
  return rec;
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

std::string cell_output_path(const std::string& base, double r, double s) {
  if (base.empty()) return {};
  char suffix[64];
  std::snprintf(suffix, sizeof suffix, "_r%g_s%g", r, s);
  auto dot = base.find_last_of('.');
  auto slash = base.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return base + suffix;
  return base.substr(0, dot) + suffix + base.substr(dot);
}

}  // namespace

std::vector<SweepCell> sweep(const ExperimentConfig& base,
                             const std::vector<double>& r_values,
                             const std::vector<double>& s_values, NumeratorRule rule) {
  require(!r_values.empty() && !s_values.empty(), "sweep lists must be non-empty");
  require(base.schedule == "power_law", "sweep varies power-law exponents");

  std::vector<std::future<SweepCell>> futures;
  for (double r : r_values) {
    for (double s : s_values) {
      ExperimentConfig cfg = base;
      cfg.r = r;
      cfg.s = s;
      cfg.alpha = sweep_numerator(rule, r, base.sweep_theta_bar);
      cfg.cutoff = 0;  // per-cell minimal cutoff
      cfg.output = cell_output_path(base.output, r, s);
      futures.push_back(std::async(std::launch::async, [cfg, r, s]() {
        auto start = std::chrono::steady_clock::now();
        SweepCell cell;
        cell.r = r;
        cell.s = s;
        cell.record = run_experiment(cfg);
        cell.final_x = cell.record.rows.empty() ? cfg.x0 : cell.record.rows.back().x0;
        if (!cell.record.rows.empty())
          cell.final_avg_regret = cell.record.rows.back().avg_regret;
        cell.wall_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
        return cell;
      }));
    }
  }
  std::vector<SweepCell> cells;
  cells.reserve(futures.size());
  for (auto& f : futures) cells.push_back(f.get());  // grid order, not completion order
  return cells;
}

std::string summary_table(const std::vector<SweepCell>& cells) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%8s %8s %18s %14s %10s", "r", "s",
                "final_avg_regret", "final_x", "wall_ms");
  out << line << '\n';
  for (const auto& c : cells) {
    char regret[32];
    if (c.final_avg_regret)
      std::snprintf(regret, sizeof regret, "%.8g", *c.final_avg_regret);
    else
      std::snprintf(regret, sizeof regret, "-");
    std::snprintf(line, sizeof line, "%8g %8g %18s %14.8g %10.1f", c.r, c.s, regret,
                  c.final_x, c.wall_ms);
    out << line << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Rate fitting

double fit_rate(const std::vector<std::pair<double, double>>& series, double window) {
  require(window > 0.0 && window <= 1.0, "window must be a fraction in (0,1]");
  auto n = static_cast<std::int64_t>(series.size());
  auto take = static_cast<std::int64_t>(std::ceil(window * static_cast<double>(n)));
  require(take >= 10, "window must cover at least 10 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double t_lo = std::numeric_limits<double>::infinity(), t_hi = 0.0;
  for (std::int64_t i = n - take; i < n; ++i) {
    auto [t, v] = series[static_cast<std::size_t>(i)];
    require(t > 0.0 && v > 0.0, "fit_rate needs positive t and values");
    t_lo = std::min(t_lo, t);
    t_hi = std::max(t_hi, t);
    double lx = std::log(t), ly = std::log(v);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  require(t_hi > t_lo, "fit_rate needs distinct t values");
  double k = static_cast<double>(take);
  double var = sxx - sx * sx / k;
  require(var > 0.0, "fit_rate needs distinct t values");
  return (sxy - sx * sy / k) / var;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string render_field(const std::optional<double>& v) {
  return v ? fmt17(*v) : std::string();
}

[[noreturn]] void csv_error(int line, const std::string& what) {
  throw std::invalid_argument("csv line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::string render_csv(const TrajectoryRecord& record) {
  std::ostringstream out;
  for (const auto& [key, value] : record.header) out << "# " << key << " = " << value << '\n';
  out << kColumnHeader << '\n';
  for (const auto& row : record.rows) {
    out << row.t << ',' << fmt17(row.x0) << ',' << render_field(row.avg_regret) << ','
        << render_field(row.loss) << ',' << render_field(row.grad_norm) << ','
        << render_field(row.min_grad_sq) << ',' << render_field(row.lemma_margin)
        << '\n';
  }
  return out.str();
}

void export_csv(const TrajectoryRecord& record, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw std::runtime_error("cannot open for writing: " + path);
  out << render_csv(record);
  out.flush();
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

TrajectoryRecord parse_csv(const std::string& text) {
  TrajectoryRecord rec;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool saw_columns = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (saw_columns) csv_error(lineno, "comment after data began");
      std::string body = line.substr(1);
      auto eq = body.find('=');
      if (eq == std::string::npos) csv_error(lineno, "header comment without '='");
      auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t");
        auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      rec.header.emplace_back(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
      continue;
    }
    if (!saw_columns) {
      if (line != kColumnHeader) csv_error(lineno, "unexpected column header");
      saw_columns = true;
      continue;
    }
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      auto comma = line.find(',', pos);
      fields.push_back(line.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != 7) csv_error(lineno, "expected 7 fields");
    auto parse_num = [&](const std::string& f) {
      char* end = nullptr;
      double v = std::strtod(f.c_str(), &end);
      if (end == f.c_str() || *end != '\0') csv_error(lineno, "bad number '" + f + "'");
      return v;
    };
    auto parse_opt = [&](const std::string& f) -> std::optional<double> {
      if (f.empty()) return std::nullopt;
      return parse_num(f);
    };
    TrajectoryPoint row;
    char* end = nullptr;
    row.t = std::strtoll(fields[0].c_str(), &end, 10);
    if (end == fields[0].c_str() || *end != '\0')
      csv_error(lineno, "bad step index '" + fields[0] + "'");
    row.x0 = parse_num(fields[1]);
    row.avg_regret = parse_opt(fields[2]);
    row.loss = parse_opt(fields[3]);
    row.grad_norm = parse_opt(fields[4]);
    row.min_grad_sq = parse_opt(fields[5]);
    row.lemma_margin = parse_opt(fields[6]);
    rec.rows.push_back(row);
  }
  if (!saw_columns) throw std::invalid_argument("csv: column header missing");
  return rec;
}

TrajectoryRecord load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

void validate_csv_text(const std::string& text) {
  TrajectoryRecord rec = parse_csv(text);
  std::int64_t prev = 0;
  for (std::size_t i = 0; i < rec.rows.size(); ++i) {
    const auto& row = rec.rows[i];
    if (row.t <= prev)
      throw std::invalid_argument("csv row " + std::to_string(i + 1) +
                                  ": t not strictly increasing");
    prev = row.t;
    if (row.lemma_margin && !(*row.lemma_margin >= -1e-12))
      throw std::invalid_argument("csv row " + std::to_string(i + 1) +
                                  ": lemma margin below -1e-12");
  }
}

// ---------------------------------------------------------------------------
// Plot script emission

namespace {

std::string python_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '\\' || c == '"') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

void emit_plot_script(const std::vector<std::string>& csv_paths, PlotLayout layout,
                      const std::string& out_path) {
  if (csv_paths.empty())
    throw std::invalid_argument("emit_plot_script: no CSV files given");

  std::string image = out_path;
  auto dot = image.find_last_of('.');
  auto slash = image.find_last_of('/');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash))
    image = image.substr(0, dot);
  image += ".png";

  std::ostringstream py;
  py << "#!/usr/bin/env python3\n"
     << "# Renders recorded trajectories from the CSVs listed below.\n"
     << "import csv\n"
     << "import matplotlib\n"
     << "matplotlib.use(\"Agg\")\n"
     << "import matplotlib.pyplot as plt\n\n"
     << "FILES = [\n";
  for (const auto& p : csv_paths) py << "    " << python_string(p) << ",\n";
  py << "]\n"
     << "OUT = " << python_string(image) << "\n\n"
     << "COLS = [\"x0\", \"avg_regret\", \"loss\", \"grad_norm\", \"min_grad_sq\","
        " \"lemma_margin\"]\n\n"
     << "def load(path):\n"
     << "    ts, cols = [], {c: [] for c in COLS}\n"
     << "    with open(path) as fh:\n"
     << "        rows = csv.reader(line for line in fh if not line.startswith(\"#\"))\n"
     << "        header = next(rows)\n"
     << "        for row in rows:\n"
     << "            ts.append(float(row[0]))\n"
     << "            for name, field in zip(COLS, row[1:]):\n"
     << "                cols[name].append(float(field) if field else None)\n"
     << "    return ts, cols\n\n"
     << "def series(ts, values):\n"
     << "    pairs = [(t, v) for t, v in zip(ts, values) if v is not None]\n"
     << "    return [p[0] for p in pairs], [p[1] for p in pairs]\n\n";

  if (layout == PlotLayout::TwoByThree) {
    py << "fig, axes = plt.subplots(2, 3, figsize=(15, 8))\n"
       << "for i, path in enumerate(FILES):\n"
       << "    ts, cols = load(path)\n"
       << "    col = i % 3\n"
       << "    label = path.rsplit(\"/\", 1)[-1]\n"
       << "    t, v = series(ts, cols[\"avg_regret\"])\n"
       << "    if t:\n"
       << "        axes[0][col].loglog(t, [abs(x) + 1e-300 for x in v], label=label)\n"
       << "    t, v = series(ts, cols[\"x0\"])\n"
       << "    axes[1][col].semilogx(t, v, label=label)\n"
       << "for col in range(3):\n"
       << "    axes[0][col].set_xlabel(\"t\")\n"
       << "    axes[0][col].set_ylabel(\"average regret\")\n"
       << "    axes[1][col].set_xlabel(\"t\")\n"
       << "    axes[1][col].set_ylabel(\"x\")\n"
       << "    axes[0][col].legend(fontsize=7)\n"
       << "    axes[1][col].legend(fontsize=7)\n";
  } else {
    py << "fig, axes = plt.subplots(1, 3, figsize=(15, 4))\n"
       << "PANELS = [\"loss\", \"grad_norm\", \"min_grad_sq\"]\n"
       << "for path in FILES:\n"
       << "    ts, cols = load(path)\n"
       << "    label = path.rsplit(\"/\", 1)[-1]\n"
       << "    for k, name in enumerate(PANELS):\n"
       << "        t, v = series(ts, cols[name])\n"
       << "        if t:\n"
       << "            axes[k].loglog(t, v, label=label)\n"
       << "for k, name in enumerate(PANELS):\n"
       << "    axes[k].set_xlabel(\"t\")\n"
       << "    axes[k].set_ylabel(name)\n"
       << "    axes[k].legend(fontsize=7)\n";
  }
  py << "\nfig.tight_layout()\nfig.savefig(OUT, dpi=120)\nprint(\"wrote\", OUT)\n";

  std::ofstream out(out_path, std::ios::binary);
  if (!out.good()) throw std::runtime_error("cannot open for writing: " + out_path);
  out << py.str();
  out.flush();
  if (!out.good()) throw std::runtime_error("write failed: " + out_path);
}

}  // namespace genadam
