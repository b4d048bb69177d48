#include "dvfsflow/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dvfsflow/errors.hpp"

namespace dvfsflow {

void validate(const ForestConfig& c) {
  if (c.n_trees < 1) throw ConfigError("n_trees", "must be at least 1");
  if (c.max_depth < 0) throw ConfigError("max_depth", "must be non-negative");
  if (c.min_leaf < 1) throw ConfigError("min_leaf", "must be at least 1");
  if (c.max_features < 0) throw ConfigError("max_features", "must be non-negative");
}

double RegressionTree::predict(const Eigen::Ref<const Vector>& x) const {
  int i = 0;
  while (!nodes[i].is_leaf()) {
    i = x(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  }
  return nodes[i].value;
}

int RegressionTree::depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth);
  return d;
}

int RegressionTree::leaves() const {
  return int(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // reduction of the sum of squared errors
  std::size_t left_count = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const Vector& y, const ForestConfig& c, Rng& rng,
              Vector& importance)
      : X_(X), y_(y), c_(c), rng_(rng), importance_(importance) {
    const int d = int(X.cols());
    mtry_ = c.max_features > 0 ? std::min(c.max_features, d)
                               : std::max(1, int(std::floor(std::sqrt(double(d)))));
  }

  RegressionTree build(std::vector<std::size_t> rows) {
    total_ = double(rows.size());
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> rows, int depth) {
    const int id = int(tree_.nodes.size());
    tree_.nodes.emplace_back();

    double sum = 0.0, sumsq = 0.0;
    for (auto r : rows) {
      sum += y_(r);
      sumsq += y_(r) * y_(r);
    }
    const double n = double(rows.size());
    const double mean = sum / n;
    const double sse = std::max(0.0, sumsq - sum * mean);
    {
      TreeNode& node = tree_.nodes[id];
      node.value = mean;
      node.samples = int(rows.size());
      node.impurity = sse / n;
      node.depth = depth;
    }

    if (depth >= c_.max_depth || rows.size() < 2 * std::size_t(c_.min_leaf) || sse <= 1e-12 * n)
      return id;

    const Split best = find_split(rows, sse);
    if (best.feature < 0) return id;

    importance_(best.feature) += best.gain / total_;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (X_(r, best.feature) <= best.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& node = tree_.nodes[id];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  Split find_split(const std::vector<std::size_t>& rows, double parent_sse) {
    const int d = int(X_.cols());
    std::vector<int> features(d);
    std::iota(features.begin(), features.end(), 0);
    for (int i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<int> pick(i, d - 1);
      std::swap(features[i], features[pick(rng_)]);
    }

    Split best;
    std::vector<std::size_t> order = rows;
    const std::size_t n = rows.size();
    const std::size_t min_leaf = std::size_t(c_.min_leaf);
    for (int k = 0; k < mtry_; ++k) {
      const int f = features[k];
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return X_(a, f) < X_(b, f); });
      double total_sum = 0.0, total_sq = 0.0;
      for (auto r : order) {
        total_sum += y_(r);
        total_sq += y_(r) * y_(r);
      }
      double left_sum = 0.0, left_sq = 0.0;
      for (std::size_t p = 1; p < n; ++p) {
        const double v = y_(order[p - 1]);
        left_sum += v;
        left_sq += v * v;
        if (p < min_leaf || n - p < min_leaf) continue;
        const double lo = X_(order[p - 1], f);
        const double hi = X_(order[p], f);
        if (!(lo < hi)) continue;
        const double nl = double(p), nr = double(n - p);
        const double right_sum = total_sum - left_sum;
        const double right_sq = total_sq - left_sq;
        const double sse_l = std::max(0.0, left_sq - left_sum * left_sum / nl);
        const double sse_r = std::max(0.0, right_sq - right_sum * right_sum / nr);
        const double gain = parent_sse - sse_l - sse_r;
        if (gain > best.gain + 1e-12) {
          best.feature = f;
          best.threshold = 0.5 * (lo + hi);
          best.gain = gain;
          best.left_count = p;
        }
      }
    }
    return best;
  }

  const Matrix& X_;
  const Vector& y_;
  const ForestConfig& c_;
  Rng& rng_;
  Vector& importance_;
  int mtry_ = 1;
  double total_ = 1.0;
  RegressionTree tree_;
};

}  // namespace

Forest fit_forest(const Matrix& X, const Vector& y, const ForestConfig& config, Rng& rng) {
  validate(config);
  if (X.rows() != y.size()) throw DomainError("X and y disagree on sample count");
  if (X.rows() < 2 * config.min_leaf) {
    throw InsufficientDataError("forest needs at least 2*min_leaf samples");
  }
  if (!X.allFinite() || !y.allFinite()) throw NumericError("non-finite forest training data");

  Forest forest;
  forest.n_features = int(X.cols());
  forest.importances = Vector::Zero(X.cols());
  for (int t = 0; t < config.n_trees; ++t) forest.seeds.push_back(split_seed(rng));

  const auto n = std::size_t(X.rows());
  for (int t = 0; t < config.n_trees; ++t) {
    Rng tree_rng(forest.seeds[t]);
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = draw(tree_rng);

    Vector tree_importance = Vector::Zero(X.cols());
    TreeBuilder builder(X, y, config, tree_rng, tree_importance);
    forest.trees.push_back(builder.build(std::move(rows)));
    forest.importances += tree_importance;
  }
  forest.importances /= double(config.n_trees);
  return forest;
}

double forest_predict(const Forest& forest, const Vector& x) {
  if (x.size() != forest.n_features) throw DomainError("forest input dimension mismatch");
  double sum = 0.0;
  for (const auto& tree : forest.trees) sum += tree.predict(x);
  return sum / double(forest.trees.size());
}

Vector normalized_importances(const Forest& forest) {
  const double total = forest.importances.sum();
  if (!(total > 0.0)) return Vector::Constant(forest.n_features, 1.0 / forest.n_features);
  return forest.importances / total;
}

Vector transition_input_weights(const ReplayMemory& memory, const ForestConfig& config, Rng& rng) {
  if (memory.size() < kMinForestTransitions) {
    throw InsufficientDataError("feature weighting needs at least " +
                                std::to_string(kMinForestTransitions) + " transitions, have " +
                                std::to_string(memory.size()));
  }
  const auto n = Eigen::Index(memory.size());
  Matrix X(n, 5);
  Matrix next(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = memory[std::size_t(i)];
    X.row(i) << t.state.fps, t.state.freq, t.state.power, t.state.temp, double(t.action);
    next.row(i) << t.next.fps, t.next.freq, t.next.power, t.next.temp;
  }
  Vector acc = Vector::Zero(5);
  for (int j = 0; j < 4; ++j) {
    const Forest f = fit_forest(X, next.col(j), config, rng);
    acc += normalized_importances(f);
  }
  return acc / acc.sum();
}

Vector expand_input_weights(const Vector& w) {
  if (w.size() != 5) throw DomainError("expected five input weights");
  const double state_mean = w.head(4).mean();
  Vector lambda(11);
  lambda << w.head(4), w(4), w.head(4), state_mean, state_mean;
  return lambda / lambda.sum();
}

Vector transition_feature_weights(const ReplayMemory& memory, const ForestConfig& config,
                                  Rng& rng) {
  return expand_input_weights(transition_input_weights(memory, config, rng));
}

}  // namespace dvfsflow
