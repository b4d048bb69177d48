#pragma once

#include <string>
#include <vector>

#include "dvfsflow/orchestrator.hpp"
#include "dvfsflow/types.hpp"

namespace dvfsflow {

struct CorrelationMatrix {
  Matrix values;  // NaN rows/columns for zero-variance features
  std::vector<std::string> labels;
  std::vector<bool> zero_variance;

  int zero_variance_count() const;
};

/// Pearson correlation between every pair of columns of `data` (n x d).
CorrelationMatrix pearson_matrix(const Matrix& data, std::vector<std::string> labels = {});

struct CorrGap {
  double value = 0.0;      // mean |real - synth| over usable off-diagonal pairs
  int pairs_used = 0;
  int pairs_excluded = 0;  // pairs where either matrix is NaN
};

CorrGap corr_gap(const CorrelationMatrix& real, const CorrelationMatrix& synth);

/// 1-D earth mover's distance: integral over u of |F_a^-1(u) - F_b^-1(u)|.
double wasserstein1(const Vector& a, const Vector& b);

Vector column_std(const Matrix& data);

struct DistributionComparison {
  std::vector<std::string> labels;
  Vector wasserstein;  // per feature
  Vector std_ratio;    // synthetic std / real std (inf if real std is zero)
};

DistributionComparison compare_distributions(const Matrix& real, const Matrix& synth,
                                             std::vector<std::string> labels = {});

/// Cumulative sum of mu*(s_t) - r_t, with mu* from regret_oracle under `env`.
std::vector<double> empirical_regret(const RunLog& log, const EnvConfig& env);

/// Mean fps over the first `window` steps of a divided by that of b.
double early_fps_gain(const RunLog& a, const RunLog& b, int window = 50);

/// Population std of max-Q over the last `last_fraction` of the log.
double qvalue_stability(const RunLog& log, double last_fraction = 0.25);

double median(std::vector<double> values);

}  // namespace dvfsflow
