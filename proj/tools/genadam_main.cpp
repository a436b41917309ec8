// Command-line front end: schedule checking, single runs, parameter sweeps,
// decay-exponent fits, and plot-script emission over the recorded CSVs.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "genadam/harness.hpp"
#include "genadam/sufficient_condition.hpp"

namespace {

using genadam::ConfigMap;

// Every config key doubles as a CLI flag of the same name.
const std::vector<std::string> kOverrideKeys = {
    "problem",    "optimizer",   "schedule",    "eta",        "s",
    "alpha",      "r",           "K",           "beta",       "beta_lambda",
    "theta",      "T",           "seed",        "record_stride",
    "invariant_checks",          "output",      "x0",         "dim",
    "eps",        "noise_scale", "minibatch",   "hidden",     "data",
    "blobs_n",    "blobs_dim",   "init_scale",  "sweep_theta_bar"};

struct Overrides {
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd, const std::vector<std::string>& skip = {}) {
    for (const auto& key : kOverrideKeys) {
      if (std::find(skip.begin(), skip.end(), key) != skip.end()) continue;
      cmd->add_option("--" + key, values[key], "config key '" + key + "'");
    }
  }

  void merge_into(const CLI::App* cmd, ConfigMap& base) const {
    for (const auto& [key, value] : values)
      if (cmd->count("--" + key) > 0) base[key] = value;
  }
};

bool file_exists(const std::string& path) {
  std::ifstream probe(path);
  return probe.good();
}

// Relative outputs land in GENADAM_OUTPUT_DIR when it is set.
std::string resolve_output(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* dir = std::getenv("GENADAM_OUTPUT_DIR");
  if (dir == nullptr || *dir == '\0') return path;
  std::string out = dir;
  if (out.back() != '/') out += '/';
  return out + path;
}

genadam::ExperimentConfig assemble(const std::string& config_path, const CLI::App* cmd,
                                   const Overrides& over) {
  ConfigMap base;
  if (!config_path.empty()) base = genadam::load_config_file(config_path);
  over.merge_into(cmd, base);
  auto cfg = genadam::ExperimentConfig::from_map(base);
  cfg.output = resolve_output(cfg.output);
  return cfg;
}

int do_check(const std::string& spec, const CLI::App* cmd, const Overrides& over) {
  ConfigMap base;
  if (file_exists(spec) && spec.rfind("table:", 0) != 0)
    base = genadam::load_config_file(spec);
  else
    base["schedule"] = spec;
  over.merge_into(cmd, base);
  auto cfg = genadam::ExperimentConfig::from_map(base);
  auto sched = cfg.build_schedule();
  auto horizon = std::max<std::int64_t>(cfg.steps, 10);
  auto report = genadam::check_sufficient_condition(sched, horizon);
  std::cout << report.summary();
  if (const auto* fam = sched.family())
    std::cout << "rate: " << genadam::describe(genadam::classify_rate(*fam)) << '\n';
  return report.satisfied ? 0 : 1;
}

int do_run(const std::string& config_path, const CLI::App* cmd, const Overrides& over) {
  auto cfg = assemble(config_path, cmd, over);
  auto rec = genadam::run_experiment(cfg);
  std::cout << "steps: " << cfg.steps << ", recorded rows: " << rec.rows.size() << '\n';
  if (!rec.rows.empty()) {
    const auto& last = rec.rows.back();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", last.x0);
    std::cout << "final: t=" << last.t << " x0=" << buf;
    if (last.avg_regret) {
      std::snprintf(buf, sizeof buf, "%.10g", *last.avg_regret);
      std::cout << " avg_regret=" << buf;
    }
    if (last.loss) {
      std::snprintf(buf, sizeof buf, "%.10g", *last.loss);
      std::cout << " loss=" << buf;
    }
    std::cout << '\n';
  }
  if (!cfg.output.empty()) std::cout << "csv: " << cfg.output << '\n';
  return 0;
}

int do_sweep(const std::string& config_path, const CLI::App* cmd, const Overrides& over,
             const std::string& r_list, const std::string& s_list, bool fixed_numerator) {
  auto cfg = assemble(config_path, cmd, over);
  auto r_values = genadam::parse_double_list(r_list);
  auto s_values = genadam::parse_double_list(s_list);
  auto rule = fixed_numerator ? genadam::NumeratorRule::Fixed
                              : genadam::NumeratorRule::Scaled;
  auto cells = genadam::sweep(cfg, r_values, s_values, rule);
  std::cout << genadam::summary_table(cells);
  return 0;
}

int do_fit(const std::string& csv_path, const std::string& column, double window) {
  auto rec = genadam::load_csv(csv_path);
  std::vector<std::pair<double, double>> series;
  for (const auto& row : rec.rows) {
    std::optional<double> v;
    if (column == "x0")
      v = row.x0;
    else if (column == "avg_regret")
      v = row.avg_regret;
    else if (column == "loss")
      v = row.loss;
    else if (column == "grad_norm")
      v = row.grad_norm;
    else if (column == "min_grad_sq")
      v = row.min_grad_sq;
    else
      throw std::invalid_argument("unknown column '" + column + "'");
    if (v) series.emplace_back(static_cast<double>(row.t), *v);
  }
  double exponent = genadam::fit_rate(series, window);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", exponent);
  std::cout << "exponent: " << buf << " (column " << column << ", trailing " << window
            << " of " << series.size() << " points)\n";
  return 0;
}

int do_export(const std::vector<std::string>& csvs, const std::string& layout,
              const std::string& out) {
  genadam::PlotLayout pl;
  if (layout == "2x3")
    pl = genadam::PlotLayout::TwoByThree;
  else if (layout == "1x3")
    pl = genadam::PlotLayout::OneByThree;
  else
    throw std::invalid_argument("layout must be 2x3 or 1x3");
  std::string path = resolve_output(out);
  genadam::emit_plot_script(csvs, pl, path);
  std::cout << "script: " << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generic Adam / weighted AdaEMA experiment harness"};
  app.require_subcommand(1);

  auto* check = app.add_subcommand(
      "check", "Evaluate the sufficient condition for a schedule (exit 0 = satisfied)");
  std::string check_spec;
  check->add_option("spec", check_spec, "preset name, table:<path>, or config file")
      ->required();
  Overrides check_over;
  check_over.attach(check);

  auto* run = app.add_subcommand("run", "Run one configured experiment");
  std::string run_config;
  run->add_option("config", run_config, "config file (key = value lines)");
  Overrides run_over;
  run_over.attach(run);

  auto* sw = app.add_subcommand("sweep", "Run a grid over power-law exponents");
  std::string sweep_config;
  sw->add_option("config", sweep_config, "base config file");
  std::string r_list = "0,0.25,0.5,0.75,1";
  std::string s_list = "0.5";
  bool fixed_numerator = false;
  sw->add_option("--r", r_list, "comma-separated r values");
  sw->add_option("--s", s_list, "comma-separated s values");
  sw->add_flag("--fixed-numerator", fixed_numerator,
               "pin the decay numerator at 1 - sweep_theta_bar");
  Overrides sweep_over;
  sweep_over.attach(sw, {"r", "s", "alpha", "K"});

  auto* fit = app.add_subcommand("fit", "Fit a log-log decay exponent from a CSV");
  std::string fit_csv;
  fit->add_option("csv", fit_csv, "trajectory CSV")->required();
  std::string fit_column = "avg_regret";
  fit->add_option("--column", fit_column, "x0|avg_regret|loss|grad_norm|min_grad_sq");
  double fit_window = 0.5;
  fit->add_option("--window", fit_window, "trailing fraction of points");

  auto* ex = app.add_subcommand("export", "Emit a matplotlib script over CSVs");
  std::vector<std::string> export_csvs;
  ex->add_option("csv", export_csvs, "trajectory CSVs")->required();
  std::string layout = "2x3";
  ex->add_option("--layout", layout, "2x3 (regret over iterates) or 1x3 (loss panels)");
  std::string out = "plot.py";
  ex->add_option("--out", out, "script path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*check) return do_check(check_spec, check, check_over);
    if (*run) return do_run(run_config, run, run_over);
    if (*sw)
      return do_sweep(sweep_config, sw, sweep_over, r_list, s_list, fixed_numerator);
    if (*fit) return do_fit(fit_csv, fit_column, fit_window);
    if (*ex) return do_export(export_csvs, layout, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
