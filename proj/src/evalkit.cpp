#include "dvfsflow/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dvfsflow/errors.hpp"

namespace dvfsflow {

int CorrelationMatrix::zero_variance_count() const {
  return int(std::count(zero_variance.begin(), zero_variance.end(), true));
}

CorrelationMatrix pearson_matrix(const Matrix& data, std::vector<std::string> labels) {
  if (data.rows() < 2) throw InsufficientDataError("correlation needs at least two samples");
  const Eigen::Index d = data.cols();
  if (labels.empty()) {
    for (Eigen::Index j = 0; j < d; ++j) labels.push_back("x" + std::to_string(j));
  }
  if (Eigen::Index(labels.size()) != d) throw DomainError("label count does not match columns");

  const Matrix centered = data.rowwise() - data.colwise().mean();
  const Matrix cross = centered.transpose() * centered;
  const Vector norms = cross.diagonal().cwiseSqrt();

  CorrelationMatrix out;
  out.labels = std::move(labels);
  out.zero_variance.assign(std::size_t(d), false);
  out.values.resize(d, d);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index j = 0; j < d; ++j) {
    // relative cut-off so constant columns with rounding noise still count as constant
    const double scale = std::max(1.0, data.col(j).cwiseAbs().maxCoeff());
    out.zero_variance[std::size_t(j)] = norms(j) <= 1e-12 * scale * std::sqrt(double(data.rows()));
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (out.zero_variance[std::size_t(i)] || out.zero_variance[std::size_t(j)]) {
        out.values(i, j) = nan;
      } else if (i == j) {
        out.values(i, j) = 1.0;
      } else {
        out.values(i, j) = std::clamp(cross(i, j) / (norms(i) * norms(j)), -1.0, 1.0);
      }
    }
  }
  return out;
}

CorrGap corr_gap(const CorrelationMatrix& real, const CorrelationMatrix& synth) {
  if (real.labels != synth.labels) throw DomainError("correlation matrices have different labels");
  CorrGap gap;
  double sum = 0.0;
  const Eigen::Index d = real.values.rows();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double a = real.values(i, j), b = synth.values(i, j);
      if (std::isnan(a) || std::isnan(b)) {
        ++gap.pairs_excluded;
        continue;
      }
      sum += std::abs(a - b);
      ++gap.pairs_used;
    }
  }
  gap.value = gap.pairs_used > 0 ? sum / gap.pairs_used : 0.0;
  return gap;
}

double wasserstein1(const Vector& a, const Vector& b) {
  if (a.size() == 0 || b.size() == 0) throw InsufficientDataError("wasserstein1 needs samples");
  std::vector<double> x(a.data(), a.data() + a.size());
  std::vector<double> y(b.data(), b.data() + b.size());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());

  // Walk the merged breakpoints of the two empirical quantile functions.
  const double nx = double(x.size()), ny = double(y.size());
  std::size_t i = 0, j = 0;
  double u = 0.0, total = 0.0;
  while (i < x.size() && j < y.size()) {
    const double next_x = double(i + 1) / nx;
    const double next_y = double(j + 1) / ny;
    const double next = std::min(next_x, next_y);
    total += (next - u) * std::abs(x[i] - y[j]);
    u = next;
    if (next_x <= next) ++i;
    if (next_y <= next) ++j;
  }
  return total;
}

Vector column_std(const Matrix& data) {
  if (data.rows() < 1) throw InsufficientDataError("std of empty data");
  const Matrix centered = data.rowwise() - data.colwise().mean();
  return (centered.array().square().colwise().sum() / double(data.rows())).sqrt().transpose();
}

DistributionComparison compare_distributions(const Matrix& real, const Matrix& synth,
                                             std::vector<std::string> labels) {
  if (real.cols() != synth.cols()) throw DomainError("feature count mismatch");
  const Eigen::Index d = real.cols();
  if (labels.empty())
    for (Eigen::Index j = 0; j < d; ++j) labels.push_back("x" + std::to_string(j));
  DistributionComparison out;
  out.labels = std::move(labels);
  out.wasserstein.resize(d);
  out.std_ratio.resize(d);
  const Vector rs = column_std(real), ss = column_std(synth);
  for (Eigen::Index j = 0; j < d; ++j) {
    out.wasserstein(j) = wasserstein1(real.col(j), synth.col(j));
    out.std_ratio(j) = rs(j) > 0.0 ? ss(j) / rs(j) : std::numeric_limits<double>::infinity();
  }
  return out;
}

std::vector<double> empirical_regret(const RunLog& log, const EnvConfig& env) {
  if (!(log.setup.env == env)) throw ConfigError("env", "run log was produced under a different simulator config");
  std::vector<double> trace;
  trace.reserve(log.steps.size());
  double acc = 0.0;
  for (const StepRecord& r : log.steps) {
    acc += regret_oracle(env, r.state) - r.reward;
    trace.push_back(acc);
  }
  return trace;
}

double early_fps_gain(const RunLog& a, const RunLog& b, int window) {
  if (window < 1) throw DomainError("window must be positive");
  if (a.steps.size() < std::size_t(window) || b.steps.size() < std::size_t(window))
    throw InsufficientDataError("run log shorter than the fps window");
  double sa = 0.0, sb = 0.0;
  for (int i = 0; i < window; ++i) {
    sa += a.steps[std::size_t(i)].state.fps;
    sb += b.steps[std::size_t(i)].state.fps;
  }
  if (!(sb > 0.0)) throw DomainError("reference run has zero mean fps");
  return sa / sb;
}

double qvalue_stability(const RunLog& log, double last_fraction) {
  if (log.steps.size() < 8) throw InsufficientDataError("q-value stability needs at least 8 steps");
  if (!(last_fraction > 0.0 && last_fraction <= 1.0)) throw DomainError("fraction must lie in (0, 1]");
  const std::size_t n = log.steps.size();
  const std::size_t tail = std::max<std::size_t>(1, std::size_t(std::floor(double(n) * last_fraction)));
  double mean = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) mean += log.steps[i].max_q;
  mean /= double(tail);
  double var = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) var += std::pow(log.steps[i].max_q - mean, 2);
  return std::sqrt(var / double(tail));
}

double median(std::vector<double> v) {
  if (v.empty()) throw InsufficientDataError("median of nothing");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace dvfsflow
