#include "genadam/problems.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace genadam {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Kahan-compensated accumulation: sum += x with carried correction.
void kahan_add(double& sum, double& comp, double x) {
  double y = x - comp;
  double t = sum + y;
  comp = (t - sum) - y;
  sum = t;
}

double stable_log1p_exp(double u) {
  // log(1 + e^u) without overflow for large |u|.
  if (u > 0.0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Counterexample

void CounterexampleProblem::validate() const {
  require(rare_prob > 0.0 && rare_prob < 1.0, "rare_prob must lie in (0,1)");
  require(std::isfinite(rare_slope) && std::isfinite(common_slope),
          "slopes must be finite");
  require(box_lo < box_hi, "box must be a nonempty interval");
}

CounterexampleProblem::Draw CounterexampleProblem::draw_from(double u, double x) const {
  double c = (u < rare_prob) ? rare_slope : common_slope;
  return Draw{c * x, c, c};
}

CounterexampleProblem::Draw CounterexampleProblem::sample(double x, Rng& rng) const {
  return draw_from(rng.uniform01(), x);
}

double CounterexampleProblem::expected_slope() const {
  return rare_prob * rare_slope + (1.0 - rare_prob) * common_slope;
}

double CounterexampleProblem::mean_square_slope() const {
  return rare_prob * rare_slope * rare_slope +
         (1.0 - rare_prob) * common_slope * common_slope;
}

double CounterexampleProblem::expected_loss_min() const {
  double s = expected_slope();
  return s >= 0.0 ? s * box_lo : s * box_hi;
}

// ---------------------------------------------------------------------------
// Regret

void RegretLedger::record(double slope, double x) {
  kahan_add(realized, realized_comp_, slope * x);
  kahan_add(slope_sum, slope_comp_, slope);
  ++count;
}

double RegretLedger::average_regret() const {
  if (count < 1) throw std::logic_error("average_regret needs at least one step");
  // Comparator minimized exactly: min over [-1,1] of x * sum(c) = -|sum(c)|.
  return (realized + std::abs(slope_sum)) / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Quadratic

namespace {

class QuadraticOracle final : public GradientOracle {
 public:
  QuadraticOracle(Eigen::MatrixXd a, double noise_scale)
      : a_(std::move(a)), noise_(noise_scale) {
    require(a_.rows() == a_.cols() && a_.rows() >= 1, "A must be square");
    double scale = std::max(1.0, a_.cwiseAbs().maxCoeff());
    require((a_ - a_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
            "A must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a_, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -1e-10 * scale,
            "A must be positive semi-definite");
    lipschitz_ = es.eigenvalues().maxCoeff();
    require(noise_ >= 0.0 && std::isfinite(noise_), "noise_scale must be >= 0");
  }

  Eigen::Index dim() const override { return a_.rows(); }

  OracleSample sample(const Eigen::ArrayXd& x, Rng& rng) const override {
    Eigen::ArrayXd g = full_gradient(x);
    for (Eigen::Index k = 0; k < g.size(); ++k) g[k] += rng.uniform(-noise_, noise_);
    return {full_loss(x), std::move(g)};
  }

  double full_loss(const Eigen::ArrayXd& x) const override {
    Eigen::VectorXd v = x.matrix();
    return 0.5 * v.dot(a_ * v);
  }

  Eigen::ArrayXd full_gradient(const Eigen::ArrayXd& x) const override {
    return (a_ * x.matrix()).array();
  }

  OracleConstants known_constants() const override {
    OracleConstants c;
    c.lipschitz = lipschitz_;
    c.f_star = 0.0;
    return c;
  }

 private:
  Eigen::MatrixXd a_;
  double noise_;
  double lipschitz_;
};

}  // namespace

std::unique_ptr<GradientOracle> quadratic_oracle(Eigen::MatrixXd a, double noise_scale) {
  return std::make_unique<QuadraticOracle>(std::move(a), noise_scale);
}

// ---------------------------------------------------------------------------
// Datasets

int Dataset::num_classes() const {
  require(labels.size() == features.rows(), "labels/features row mismatch");
  int max_label = -1;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0, "labels must be non-negative");
    max_label = std::max(max_label, labels[i]);
  }
  return max_label + 1;
}

Dataset make_blobs(Eigen::Index n, Eigen::Index dim, std::uint64_t seed) {
  require(n >= 1 && dim >= 1, "make_blobs needs n >= 1, dim >= 1");
  Rng rng(seed);
  double offset = 2.0 / std::sqrt(static_cast<double>(dim));
  Dataset out;
  out.features.resize(n, dim);
  out.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    int label = static_cast<int>(i % 2);
    double center = label == 0 ? offset : -offset;
    for (Eigen::Index j = 0; j < dim; ++j) out.features(i, j) = center + rng.normal();
    out.labels[i] = label;
  }
  return out;
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open dataset file");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      std::string field = line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                      : comma - pos);
      char* end = nullptr;
      double v = std::strtod(field.c_str(), &end);
      require(end != field.c_str(), "malformed dataset field");
      row.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    require(row.size() >= 2, "dataset rows need at least one feature and a label");
    if (!rows.empty()) require(row.size() == rows.front().size(), "ragged dataset rows");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "empty dataset file");
  Dataset out;
  Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Eigen::Index d = static_cast<Eigen::Index>(rows.front().size()) - 1;
  out.features.resize(n, d);
  out.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out.features(i, j) = rows[i][j];
    double raw = rows[i][d];
    int label = static_cast<int>(raw);
    require(raw == static_cast<double>(label) && label >= 0,
            "label column must hold non-negative integers");
    out.labels[i] = label;
  }
  return out;
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
  require(data.features.rows() == data.labels.size(), "labels/features row mismatch");
  std::ofstream out(path);
  require(out.good(), "cannot open dataset file for writing");
  char buf[64];
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(i, j));
      out << buf << ',';
    }
    out << data.labels[i] << '\n';
  }
  require(out.good(), "dataset write failed");
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

class LogisticOracle final : public GradientOracle {
 public:
  LogisticOracle(Dataset data, Eigen::Index minibatch)
      : data_(std::move(data)), batch_(minibatch) {
    require(data_.size() >= 1, "empty data");
    require(data_.labels.size() == data_.size(), "labels/features row mismatch");
    for (Eigen::Index i = 0; i < data_.size(); ++i)
      require(data_.labels[i] == 0 || data_.labels[i] == 1,
              "logistic labels must be 0 or 1");
    require(batch_ >= 1 && batch_ <= data_.size(),
            "minibatch must lie in [1, dataset size]");
    g_bound_ = data_.features.rowwise().norm().maxCoeff();
    // Per-example Hessian is at most x x^T / 4.
    lipschitz_ =
        0.25 * (data_.features.transpose() * data_.features / double(data_.size()))
                   .selfadjointView<Eigen::Lower>()
                   .eigenvalues()
                   .maxCoeff();
  }

  Eigen::Index dim() const override { return data_.feature_dim(); }

  OracleSample sample(const Eigen::ArrayXd& x, Rng& rng) const override {
    check_dim(x);
    OracleSample s;
    s.grad = Eigen::ArrayXd::Zero(dim());
    for (Eigen::Index b = 0; b < batch_; ++b) {
      Eigen::Index i = static_cast<Eigen::Index>(rng.uniform_below(
          static_cast<std::uint64_t>(data_.size())));
      accumulate(x, i, s.loss, s.grad);
    }
    s.loss /= static_cast<double>(batch_);
    s.grad /= static_cast<double>(batch_);
    return s;
  }

  double full_loss(const Eigen::ArrayXd& x) const override {
    check_dim(x);
    double loss = 0.0;
    Eigen::ArrayXd unused = Eigen::ArrayXd::Zero(dim());
    for (Eigen::Index i = 0; i < data_.size(); ++i) accumulate(x, i, loss, unused);
    return loss / static_cast<double>(data_.size());
  }

  Eigen::ArrayXd full_gradient(const Eigen::ArrayXd& x) const override {
    check_dim(x);
    double unused = 0.0;
    Eigen::ArrayXd g = Eigen::ArrayXd::Zero(dim());
    for (Eigen::Index i = 0; i < data_.size(); ++i) accumulate(x, i, unused, g);
    return g / static_cast<double>(data_.size());
  }

  OracleConstants known_constants() const override {
    OracleConstants c;
    c.g_bound = g_bound_;
    c.lipschitz = lipschitz_;
    return c;
  }

 private:
  void check_dim(const Eigen::ArrayXd& x) const {
    require(x.size() == dim(), "parameter dimension mismatch");
  }

  // Adds example i's loss and gradient (sign label y in {-1,+1}):
  //   loss = log(1 + exp(-y z)),  dloss/dw = -y sigmoid(-y z) x_i.
  void accumulate(const Eigen::ArrayXd& w, Eigen::Index i, double& loss,
                  Eigen::ArrayXd& grad) const {
    double y = data_.labels[i] == 1 ? 1.0 : -1.0;
    double z = (data_.features.row(i).transpose().array() * w).sum();
    loss += stable_log1p_exp(-y * z);
    grad += (-y * sigmoid(-y * z)) * data_.features.row(i).transpose().array();
  }

  Dataset data_;
  Eigen::Index batch_;
  double g_bound_;
  double lipschitz_;
};

}  // namespace

std::unique_ptr<GradientOracle> logistic_oracle(Dataset data, Eigen::Index minibatch) {
  return std::make_unique<LogisticOracle>(std::move(data), minibatch);
}

// ---------------------------------------------------------------------------
// Two-layer network

Eigen::Index mlp_param_count(Eigen::Index input, Eigen::Index hidden, Eigen::Index classes) {
  return hidden * input + hidden + classes * hidden + classes;
}

namespace {

class MlpOracle final : public GradientOracle {
 public:
  MlpOracle(Eigen::Index hidden, Dataset data, Eigen::Index minibatch)
      : data_(std::move(data)), hidden_(hidden), batch_(minibatch) {
    require(data_.size() >= 1, "empty data");
    require(hidden_ >= 1, "hidden width must be >= 1");
    require(batch_ >= 1 && batch_ <= data_.size(),
            "minibatch must lie in [1, dataset size]");
    classes_ = data_.num_classes();
    require(classes_ >= 2, "need at least two classes");
    input_ = data_.feature_dim();
  }

  Eigen::Index dim() const override {
    return mlp_param_count(input_, hidden_, classes_);
  }

  OracleSample sample(const Eigen::ArrayXd& x, Rng& rng) const override {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(batch_));
    for (auto& i : idx)
      i = static_cast<Eigen::Index>(rng.uniform_below(
          static_cast<std::uint64_t>(data_.size())));
    OracleSample s;
    s.grad.resize(dim());
    s.loss = batch_eval(x, idx, &s.grad);
    return s;
  }

  double full_loss(const Eigen::ArrayXd& x) const override {
    return batch_eval(x, all_indices(), nullptr);
  }

  Eigen::ArrayXd full_gradient(const Eigen::ArrayXd& x) const override {
    Eigen::ArrayXd g(dim());
    batch_eval(x, all_indices(), &g);
    return g;
  }

 private:
  std::vector<Eigen::Index> all_indices() const {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(data_.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Eigen::Index>(i);
    return idx;
  }

  // Forward + backward over the given rows; mean loss, mean gradient.
  // Parameter layout: [W1 (h x d), b1 (h), W2 (c x h), b2 (c)], column-major.
  double batch_eval(const Eigen::ArrayXd& p, const std::vector<Eigen::Index>& idx,
                    Eigen::ArrayXd* grad_out) const {
    require(p.size() == dim(), "parameter dimension mismatch");
    const Eigen::Index d = input_, h = hidden_, c = classes_;
    const double* base = p.data();
    Eigen::Map<const Eigen::MatrixXd> w1(base, h, d);
    Eigen::Map<const Eigen::VectorXd> b1(base + h * d, h);
    Eigen::Map<const Eigen::MatrixXd> w2(base + h * d + h, c, h);
    Eigen::Map<const Eigen::VectorXd> b2(base + h * d + h + c * h, c);

    const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd xb(n, d);
    for (Eigen::Index i = 0; i < n; ++i) xb.row(i) = data_.features.row(idx[size_t(i)]);

    Eigen::MatrixXd a1 = ((xb * w1.transpose()).rowwise() + b1.transpose())
                             .array()
                             .tanh()
                             .matrix();                       // n x h
    Eigen::MatrixXd z2 = (a1 * w2.transpose()).rowwise() + b2.transpose();  // n x c

    Eigen::VectorXd row_max = z2.rowwise().maxCoeff();
    Eigen::MatrixXd shifted = z2.colwise() - row_max;
    Eigen::MatrixXd expz = shifted.array().exp().matrix();
    Eigen::VectorXd denom = expz.rowwise().sum();

    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int y = data_.labels[idx[size_t(i)]];
      loss += std::log(denom[i]) - shifted(i, y);
    }
    loss /= static_cast<double>(n);

    if (grad_out != nullptr) {
      Eigen::MatrixXd d2 = expz.array().colwise() / denom.array();  // softmax rows
      for (Eigen::Index i = 0; i < n; ++i) d2(i, data_.labels[idx[size_t(i)]]) -= 1.0;
      d2 /= static_cast<double>(n);
      Eigen::MatrixXd d1 =
          ((d2 * w2).array() * (1.0 - a1.array().square())).matrix();  // n x h

      grad_out->resize(dim());
      double* gbase = grad_out->data();
      Eigen::Map<Eigen::MatrixXd>(gbase, h, d) = d1.transpose() * xb;
      Eigen::Map<Eigen::VectorXd>(gbase + h * d, h) = d1.colwise().sum();
      Eigen::Map<Eigen::MatrixXd>(gbase + h * d + h, c, h) = d2.transpose() * a1;
      Eigen::Map<Eigen::VectorXd>(gbase + h * d + h + c * h, c) = d2.colwise().sum();
    }
    return loss;
  }

  Dataset data_;
  Eigen::Index hidden_;
  Eigen::Index batch_;
  Eigen::Index input_ = 0;
  int classes_ = 0;
};

}  // namespace

std::unique_ptr<GradientOracle> mlp_oracle(Eigen::Index hidden, Dataset data,
                                           Eigen::Index minibatch) {
  return std::make_unique<MlpOracle>(hidden, std::move(data), minibatch);
}

// ---------------------------------------------------------------------------
// Verification helpers

double finite_diff_check(const GradientOracle& oracle, const Eigen::ArrayXd& x, double h) {
  require(h > 0.0 && std::isfinite(h), "step size must be positive");
  require(x.size() == oracle.dim(), "parameter dimension mismatch");
  Eigen::ArrayXd g = oracle.full_gradient(x);
  Eigen::ArrayXd probe = x;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + h;
    double hi = oracle.full_loss(probe);
    probe[k] = x[k] - h;
    double lo = oracle.full_loss(probe);
    probe[k] = x[k];
    double fd = (hi - lo) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g[k]) / std::max(1.0, std::abs(g[k])));
  }
  return worst;
}

Eigen::ArrayXd random_init(Eigen::Index dim, double scale, std::uint64_t seed) {
  require(dim >= 1, "dim must be >= 1");
  Rng rng(seed);
  Eigen::ArrayXd x(dim);
  for (Eigen::Index k = 0; k < dim; ++k) x[k] = scale * rng.normal();
  return x;
}

}  // namespace genadam
