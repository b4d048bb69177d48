#include "dvfsflow/flowgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dvfsflow/errors.hpp"

namespace dvfsflow {

const std::array<std::string, kTransitionDim>& transition_columns() {
  static const std::array<std::string, kTransitionDim> names = {
      "fps",      "freq",      "power",      "temp",   "action", "next_fps",
      "next_freq", "next_power", "next_temp", "reward", "done"};
  return names;
}

Vector flatten(const Transition& t, int num_actions) {
  Vector x(kTransitionDim);
  x << t.state.fps, t.state.freq, t.state.power, t.state.temp,
      encode_action(t.action, num_actions), t.next.fps, t.next.freq, t.next.power,
      t.next.temp, t.reward, t.done ? 1.0 : 0.0;
  return x;
}

Transition unflatten(const Vector& x, int num_actions, Origin origin) {
  if (x.size() != kTransitionDim) {
    throw DomainError("flattened transition has " + std::to_string(x.size()) + " entries, expected " +
                      std::to_string(kTransitionDim));
  }
  Transition t;
  t.state = {x(0), x(1), x(2), x(3)};
  const double a = std::round(x(kActionColumn) * (num_actions - 1));
  t.action = int(std::clamp(a, 0.0, double(num_actions - 1)));
  t.next = {x(5), x(6), x(7), x(8)};
  t.reward = x(kRewardColumn);
  t.done = x(kDoneColumn) >= 0.5;
  t.origin = origin;
  return t;
}

namespace {

constexpr double kMinPower = 1e-3;

ProcessorState clamp_state(ProcessorState s, double ambient) {
  s.fps = std::max(0.0, s.fps);
  s.freq = std::clamp(s.freq, 0.0, 1.0);
  s.power = std::max(kMinPower, s.power);
  s.temp = std::max(ambient, s.temp);
  return s;
}

}  // namespace

Transition decode_generated(const Vector& x, const TransitionLayout& layout) {
  Transition t = unflatten(x, layout.num_actions, Origin::synthetic);
  t.state = clamp_state(t.state, layout.ambient);
  t.next = clamp_state(t.next, layout.ambient);
  return t;
}

Matrix transitions_to_matrix(const std::vector<Transition>& ts, int num_actions) {
  Matrix m(Eigen::Index(ts.size()), kTransitionDim);
  for (std::size_t i = 0; i < ts.size(); ++i) m.row(Eigen::Index(i)) = flatten(ts[i], num_actions);
  return m;
}

Matrix memory_to_matrix(const ReplayMemory& memory, int num_actions) {
  return transitions_to_matrix({memory.items().begin(), memory.items().end()}, num_actions);
}

Normalizer Normalizer::fit(const Matrix& rows) {
  if (rows.rows() < 1) throw InsufficientDataError("cannot fit a normalizer on no rows");
  Normalizer n;
  n.mean = rows.colwise().mean().transpose();
  const Matrix centered = rows.rowwise() - n.mean.transpose();
  n.std = (centered.array().square().colwise().sum() / double(rows.rows())).sqrt().transpose();
  n.std = n.std.cwiseMax(1e-6);
  return n;
}

Matrix Normalizer::normalize(const Matrix& rows) const {
  return ((rows.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array()).matrix();
}

Matrix Normalizer::denormalize(const Matrix& rows) const {
  return ((rows.array().rowwise() * std.transpose().array()).rowwise() + mean.transpose().array())
      .matrix();
}

void validate(const FlowConfig& c) {
  if (c.hidden.empty()) throw ConfigError("hidden", "needs at least one hidden layer");
  for (int h : c.hidden)
    if (h < 1) throw ConfigError("hidden", "layer sizes must be positive");
  if (c.epochs < 0) throw ConfigError("epochs", "must be non-negative");
  if (c.batch_size < 1) throw ConfigError("batch_size", "must be at least 1");
  if (!(c.learning_rate >= 0.0)) throw ConfigError("learning_rate", "must be non-negative");
  if (!(c.sigma_min >= 0.0 && c.sigma_min < 1.0)) throw ConfigError("sigma_min", "must lie in [0, 1)");
  if (c.bootstrap < 1) throw ConfigError("bootstrap", "must be at least 1");
  if (c.ode_steps < 1) throw ConfigError("ode_steps", "must be at least 1");
  if (c.train_start < 1) throw ConfigError("train_start", "must be at least 1");
}

std::vector<Matrix> bootstrap_latents(const Matrix& pool, int replicates, Rng& rng) {
  if (pool.rows() < 1) throw InsufficientDataError("empty latent pool");
  if (replicates < 1) throw DomainError("need at least one bootstrap replicate");
  std::uniform_int_distribution<Eigen::Index> draw(0, pool.rows() - 1);
  std::vector<Matrix> out;
  out.reserve(std::size_t(replicates));
  for (int b = 0; b < replicates; ++b) {
    Matrix rep(pool.rows(), pool.cols());
    for (Eigen::Index i = 0; i < pool.rows(); ++i) rep.row(i) = pool.row(draw(rng));
    out.push_back(std::move(rep));
  }
  return out;
}

CfmBatch cfm_pairs(const Matrix& x0, const Matrix& x1, const Vector& t, double sigma_min) {
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols() || t.size() != x0.rows())
    throw DomainError("flow-matching pairs disagree in shape");
  const Eigen::Index n = x0.rows(), d = x0.cols();
  CfmBatch b;
  b.inputs.resize(d + 1, n);
  b.targets.resize(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double tj = t(j);
    b.inputs.col(j).head(d) =
        ((1.0 - (1.0 - sigma_min) * tj) * x0.row(j) + tj * x1.row(j)).transpose();
    b.inputs(d, j) = tj;
    b.targets.col(j) = (x1.row(j) - (1.0 - sigma_min) * x0.row(j)).transpose();
  }
  return b;
}

CfmBatch draw_cfm_batch(const Matrix& x1, double sigma_min, int replicates, Rng& rng) {
  if (x1.rows() < 1) throw InsufficientDataError("empty flow-matching batch");
  if (!x1.allFinite()) throw NumericError("non-finite value in flow-matching batch");
  const Eigen::Index m = x1.rows(), d = x1.cols();

  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix pool(m, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < m; ++i) pool(i, j) = gauss(rng);

  const auto reps = bootstrap_latents(pool, replicates, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));

  CfmBatch out;
  out.inputs.resize(d + 1, m * replicates);
  out.targets.resize(d, m * replicates);
  for (int b = 0; b < replicates; ++b) {
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix paired(m, d);
    for (Eigen::Index i = 0; i < m; ++i) paired.row(i) = x1.row(perm[std::size_t(i)]);
    Vector t(m);
    for (Eigen::Index i = 0; i < m; ++i) t(i) = unit(rng);
    CfmBatch part = cfm_pairs(reps[std::size_t(b)], paired, t, sigma_min);
    out.inputs.middleCols(b * m, m) = part.inputs;
    out.targets.middleCols(b * m, m) = part.targets;
  }
  return out;
}

nn::LossAndGrad<double> cfm_loss(const nn::MlpD& field, const CfmBatch& batch,
                                 const Vector& lambda) {
  // Every replicate contributes the same number of pairs, so the mean over all
  // columns equals the mean over replicates of the per-replicate means.
  return nn::weighted_squared_loss(field, batch.inputs, batch.targets, lambda);
}

namespace {

void check_lambda(const Vector& lambda, Eigen::Index d) {
  if (lambda.size() != d) throw DomainError("feature weights do not match data dimension");
  if ((lambda.array() < 0.0).any() || std::abs(lambda.sum() - 1.0) > 1e-9)
    throw DomainError("feature weights must be non-negative and sum to one");
}

}  // namespace

FlowModel train_flow(const Matrix& data, const Vector& lambda, const FlowConfig& config,
                     Rng& rng) {
  validate(config);
  if (data.rows() < config.train_start) {
    throw InsufficientDataError("flow model needs at least " + std::to_string(config.train_start) +
                                " rows, have " + std::to_string(data.rows()));
  }
  if (!data.allFinite()) throw NumericError("non-finite value in flow training data");
  const Eigen::Index d = data.cols();
  check_lambda(lambda, d);

  FlowModel model;
  model.normalizer = Normalizer::fit(data);
  model.lambda = lambda;
  model.sigma_min = config.sigma_min;
  model.bootstrap = config.bootstrap;
  model.ode_steps = config.ode_steps;

  std::vector<int> sizes{int(d) + 1};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(int(d));
  model.field = nn::init_mlp(sizes, nn::Activation::tanh, split_seed(rng));
  auto adam = nn::make_adam(model.field, config.learning_rate);

  const Matrix x = model.normalizer.normalize(data);
  const auto n = std::size_t(x.rows());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto bs = std::size_t(config.batch_size);

  model.epoch_losses.reserve(std::size_t(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t stop = std::min(n, start + bs);
      Matrix x1(Eigen::Index(stop - start), d);
      for (std::size_t i = start; i < stop; ++i) x1.row(Eigen::Index(i - start)) = x.row(order[i]);
      const CfmBatch batch = draw_cfm_batch(x1, config.sigma_min, config.bootstrap, rng);
      loss_sum += nn::train_step(model.field, adam, batch.inputs, batch.targets, lambda);
      ++batches;
    }
    model.epoch_losses.push_back(loss_sum / std::max(1, batches));
  }
  model.trained = true;
  return model;
}

FlowModel train_flow_model(const ReplayMemory& memory, const Vector& lambda,
                           const FlowConfig& config, const TransitionLayout& layout, Rng& rng) {
  FlowModel model = train_flow(memory_to_matrix(memory, layout.num_actions), lambda, config, rng);
  model.layout = layout;
  return model;
}

Matrix sample_flow(const FlowModel& model, int n, Rng& rng, int steps) {
  if (!model.trained) throw StateError("flow model has not been trained");
  if (n < 0) throw DomainError("negative sample count");
  const Eigen::Index d = model.dim();
  if (n == 0) return Matrix(0, d);
  const int k = steps > 0 ? steps : model.ode_steps;

  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix state(d + 1, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < d; ++i) state(i, j) = gauss(rng);

  const double dt = 1.0 / k;
  for (int step = 0; step < k; ++step) {
    state.row(d).setConstant(step * dt);
    state.topRows(d) += dt * nn::forward_batch(model.field, state);
  }
  return model.normalizer.denormalize(state.topRows(d).transpose());
}

std::vector<Transition> generate_transitions(const FlowModel& model, int n, Rng& rng) {
  if (model.dim() != kTransitionDim) throw DomainError("flow model is not over transitions");
  const Matrix rows = sample_flow(model, n, rng);
  std::vector<Transition> out;
  out.reserve(std::size_t(n));
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    out.push_back(decode_generated(rows.row(i).transpose(), model.layout));
  return out;
}

}  // namespace dvfsflow
