#pragma once

#include <cstdint>
#include <vector>

#include "dvfsflow/agent.hpp"
#include "dvfsflow/types.hpp"

namespace dvfsflow {

struct ForestConfig {
  int n_trees = 50;
  int max_depth = 6;
  int min_leaf = 5;
  int max_features = 0;  // features tried per split; 0 means floor(sqrt(d))

  bool operator==(const ForestConfig&) const = default;
};

void validate(const ForestConfig& config);

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;     // mean target of the samples reaching this node
  int samples = 0;
  double impurity = 0.0;  // target variance at this node
  int depth = 0;

  bool is_leaf() const { return feature < 0; }
};

// CART regression tree; nodes[0] is the root.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(const Eigen::Ref<const Vector>& x) const;
  int depth() const;
  int leaves() const;
};

struct Forest {
  std::vector<RegressionTree> trees;
  std::vector<std::uint64_t> seeds;
  int n_features = 0;
  // Per-feature weighted impurity decrease, averaged over trees (unnormalized).
  Vector importances;
};

/// Bagged regression trees. X is n x d (one sample per row). Each tree sees a
/// bootstrap resample and considers a random feature subset per split; splits
/// maximize variance reduction.
Forest fit_forest(const Matrix& X, const Vector& y, const ForestConfig& config, Rng& rng);

double forest_predict(const Forest& forest, const Vector& x);

/// Importances normalized to sum to one; uniform when every importance is zero.
Vector normalized_importances(const Forest& forest);

/// Weights over the 11-wide flattened transition (s, a, s', r, done) derived
/// from forests predicting each next-state field from (s, a).
Vector transition_feature_weights(const ReplayMemory& memory, const ForestConfig& config,
                                  Rng& rng);

/// Input-side weights (s0..s3, a) before mirroring onto the full layout.
Vector transition_input_weights(const ReplayMemory& memory, const ForestConfig& config, Rng& rng);

/// Maps input-side weights onto the full layout: state weights mirrored onto
/// next-state fields, reward and done get the mean state weight, renormalized.
Vector expand_input_weights(const Vector& input_weights);

inline constexpr std::size_t kMinForestTransitions = 50;

}  // namespace dvfsflow
