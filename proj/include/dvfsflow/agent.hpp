#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "dvfsflow/nn.hpp"
#include "dvfsflow/sim_env.hpp"
#include "dvfsflow/types.hpp"

namespace dvfsflow {

enum class Origin { real, synthetic };

struct Transition {
  ProcessorState state;
  int action = 0;
  double reward = 0.0;
  ProcessorState next;
  bool done = false;
  Origin origin = Origin::real;

  bool operator==(const Transition&) const = default;
};

// Bounded FIFO of transitions with a lifetime insertion counter. A memory
// accepts a single origin; pushing the other kind is a StateError.
class ReplayMemory {
 public:
  ReplayMemory(std::size_t capacity, Origin accepts);

  void push(const Transition& t);

  // Uniform without replacement within one call.
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  std::uint64_t inserted() const { return inserted_; }
  Origin accepts() const { return accepts_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  const std::deque<Transition>& items() const { return items_; }

 private:
  std::size_t capacity_;
  Origin accepts_;
  std::deque<Transition> items_;
  std::uint64_t inserted_ = 0;
};

struct AgentConfig {
  double discount = 0.99;
  double epsilon_initial = 1.0;
  double epsilon_decay = 0.99;
  double epsilon_floor = 0.05;
  double learning_rate = 0.05;
  int batch_size = 32;
  int target_sync_period = 20;
  std::vector<int> hidden = {6, 6};

  bool operator==(const AgentConfig&) const = default;
};

void validate(const AgentConfig& config);

/// Feature-space batch for Q-learning. States are columns.
struct QBatch {
  Matrix states;
  std::vector<int> actions;
  Vector rewards;
  Matrix next_states;
  std::vector<bool> done;

  Eigen::Index size() const { return states.cols(); }
};

QBatch make_qbatch(const std::vector<Transition>& transitions, const StateEncoder& encoder);

/// epsilon-greedy: uniform action with probability epsilon, otherwise the
/// lowest-index argmax of Q(s, .).
int select_action(const nn::MlpD& qnet, const Vector& features, double epsilon, Rng& rng);

int greedy_action(const Vector& q_values);

/// y = r for terminal transitions, r + discount * max_a' Q(s', a'; target) otherwise.
Vector q_targets(const nn::MlpD& target_net, const QBatch& batch, double discount);

/// One Adam step on the mean squared TD error of the taken actions only.
double train_q_step(nn::MlpD& qnet, const nn::MlpD& target_net, const QBatch& batch,
                    double discount, nn::AdamD& adam);

double decay_epsilon(double epsilon, const AgentConfig& config);

inline nn::MlpD sync_target(const nn::MlpD& qnet) { return qnet; }

// DQN with target network, epsilon schedule and periodic optimizer resets.
class DqnAgent {
 public:
  DqnAgent(const AgentConfig& config, const EnvConfig& env, std::uint64_t seed);

  int act(const ProcessorState& state, Rng& rng) const;
  Vector q_values(const ProcessorState& state) const;
  double max_q(const ProcessorState& state) const { return q_values(state).maxCoeff(); }

  double train(const std::vector<Transition>& batch);
  void decay();

  // Zeroes the Adam moments and restores the initial learning rate.
  void reset_optimizer();

  double epsilon() const { return epsilon_; }
  long train_steps() const { return train_steps_; }
  long target_syncs() const { return target_syncs_; }
  const nn::MlpD& qnet() const { return qnet_; }
  const nn::MlpD& target_net() const { return target_; }
  const nn::AdamD& optimizer() const { return adam_; }
  const AgentConfig& config() const { return config_; }

 private:
  AgentConfig config_;
  StateEncoder encoder_;
  nn::MlpD qnet_;
  nn::MlpD target_;
  nn::AdamD adam_;
  double epsilon_;
  long train_steps_ = 0;
  long target_syncs_ = 0;
};

}  // namespace dvfsflow
