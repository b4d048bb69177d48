#include "dvfsflow/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dvfsflow/errors.hpp"

namespace dvfsflow {

ReplayMemory::ReplayMemory(std::size_t capacity, Origin accepts)
    : capacity_(capacity), accepts_(accepts) {
  if (capacity == 0) throw ConfigError("capacity", "must be positive");
}

void ReplayMemory::push(const Transition& t) {
  if (t.origin != accepts_) {
    throw StateError(accepts_ == Origin::real ? "synthetic transition pushed into real memory"
                                              : "real transition pushed into synthetic memory");
  }
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(t);
  ++inserted_;
}

std::vector<Transition> ReplayMemory::sample(std::size_t n, Rng& rng) const {
  if (n > items_.size()) {
    throw InsufficientDataError("requested " + std::to_string(n) + " transitions from a memory of " +
                                std::to_string(items_.size()));
  }
  std::vector<std::size_t> idx(items_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<Transition> out;
  out.reserve(n);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
    out.push_back(items_[idx[i]]);
  }
  return out;
}

void validate(const AgentConfig& c) {
  if (!(c.discount > 0.0 && c.discount < 1.0)) throw ConfigError("discount", "must lie in (0, 1)");
  if (!(c.epsilon_initial >= 0.0 && c.epsilon_initial <= 1.0))
    throw ConfigError("epsilon_initial", "must lie in [0, 1]");
  if (!(c.epsilon_decay > 0.0 && c.epsilon_decay <= 1.0))
    throw ConfigError("epsilon_decay", "must lie in (0, 1]");
  if (!(c.epsilon_floor >= 0.0 && c.epsilon_floor <= c.epsilon_initial))
    throw ConfigError("epsilon_floor", "must lie in [0, epsilon_initial]");
  if (!(c.learning_rate >= 0.0 && std::isfinite(c.learning_rate)))
    throw ConfigError("learning_rate", "must be non-negative");
  if (c.batch_size < 1) throw ConfigError("batch_size", "must be at least 1");
  if (c.target_sync_period < 1) throw ConfigError("target_sync_period", "must be at least 1");
  for (int h : c.hidden)
    if (h < 1) throw ConfigError("hidden", "layer sizes must be positive");
}

QBatch make_qbatch(const std::vector<Transition>& ts, const StateEncoder& encoder) {
  QBatch b;
  const auto n = Eigen::Index(ts.size());
  b.states.resize(4, n);
  b.next_states.resize(4, n);
  b.rewards.resize(n);
  b.actions.resize(ts.size());
  b.done.resize(ts.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = ts[j];
    b.states.col(j) = encoder(t.state);
    b.next_states.col(j) = encoder(t.next);
    b.rewards(j) = t.reward;
    b.actions[j] = t.action;
    b.done[j] = t.done;
  }
  return b;
}

int greedy_action(const Vector& q) {
  Eigen::Index best = 0;
  for (Eigen::Index a = 1; a < q.size(); ++a)
    if (q(a) > q(best)) best = a;
  return int(best);
}

int select_action(const nn::MlpD& qnet, const Vector& features, double epsilon, Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<int> any(0, qnet.output_size() - 1);
    return any(rng);
  }
  return greedy_action(nn::forward(qnet, features));
}

Vector q_targets(const nn::MlpD& target_net, const QBatch& batch, double discount) {
  const Matrix next_q = nn::forward_batch(target_net, batch.next_states);
  Vector y(batch.size());
  for (Eigen::Index j = 0; j < batch.size(); ++j) {
    y(j) = batch.done[j] ? batch.rewards(j) : batch.rewards(j) + discount * next_q.col(j).maxCoeff();
  }
  return y;
}

double train_q_step(nn::MlpD& qnet, const nn::MlpD& target_net, const QBatch& batch,
                    double discount, nn::AdamD& adam) {
  if (batch.size() == 0) throw InsufficientDataError("empty Q-learning batch");
  const Vector y = q_targets(target_net, batch, discount);
  if (!y.allFinite()) throw NumericError("non-finite Q-learning target");

  // Non-taken outputs carry zero weight, so their targets are irrelevant; fill
  // them with y to keep the matrix finite.
  Matrix targets = y.transpose().replicate(qnet.output_size(), 1);
  Matrix mask = Matrix::Zero(qnet.output_size(), batch.size());
  for (Eigen::Index j = 0; j < batch.size(); ++j) {
    const int a = batch.actions[j];
    if (a < 0 || a >= qnet.output_size()) throw DomainError("action outside network outputs");
    mask(a, j) = 1.0;
  }
  return nn::train_step(qnet, adam, batch.states, targets, mask);
}

double decay_epsilon(double epsilon, const AgentConfig& c) {
  return std::max(c.epsilon_floor, epsilon * c.epsilon_decay);
}

namespace {

std::vector<int> q_layers(const AgentConfig& c, int num_actions) {
  std::vector<int> sizes{4};
  sizes.insert(sizes.end(), c.hidden.begin(), c.hidden.end());
  sizes.push_back(num_actions);
  return sizes;
}

}  // namespace

DqnAgent::DqnAgent(const AgentConfig& config, const EnvConfig& env, std::uint64_t seed)
    : config_(config),
      encoder_(env),
      qnet_(nn::init_mlp(q_layers(config, env.num_actions), nn::Activation::tanh, seed)),
      target_(qnet_),
      adam_(nn::make_adam(qnet_, config.learning_rate)),
      epsilon_(config.epsilon_initial) {
  validate(config_);
}

Vector DqnAgent::q_values(const ProcessorState& state) const {
  return nn::forward(qnet_, Vector(encoder_(state)));
}

int DqnAgent::act(const ProcessorState& state, Rng& rng) const {
  return select_action(qnet_, Vector(encoder_(state)), epsilon_, rng);
}

double DqnAgent::train(const std::vector<Transition>& batch) {
  const double loss =
      train_q_step(qnet_, target_, make_qbatch(batch, encoder_), config_.discount, adam_);
  ++train_steps_;
  if (train_steps_ % config_.target_sync_period == 0) {
    target_ = sync_target(qnet_);
    ++target_syncs_;
  }
  return loss;
}

void DqnAgent::decay() { epsilon_ = decay_epsilon(epsilon_, config_); }

void DqnAgent::reset_optimizer() { nn::reset_adam(adam_, config_.learning_rate); }

}  // namespace dvfsflow
