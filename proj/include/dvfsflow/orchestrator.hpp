#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dvfsflow/agent.hpp"
#include "dvfsflow/flowgen.hpp"
#include "dvfsflow/forest.hpp"
#include "dvfsflow/sim_env.hpp"

namespace dvfsflow {

// dfm: bootstrapped, feature-weighted flow matching; pure_fm: plain
// conditional flow matching; model_based: learned transition predictor;
// model_free: real data only; random: uniform policy, no learning (regret
// reference).
enum class Method { dfm, pure_fm, model_based, model_free, random };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct ScheduleConfig {
  int exploit_threshold = 100;   // agent trains once phi_M + phi_M' exceeds this
  int model_period = 50;         // generator (re)training period in steps
  int planning_breadth = 1000;   // synthetic transitions per generator training
  std::size_t real_capacity = 10000;
  std::size_t synthetic_capacity = 10000;
  double real_fraction = 0.5;    // share of each agent batch drawn from M
  int lr_reset_period = 100;     // agent training steps between optimizer resets

  bool operator==(const ScheduleConfig&) const = default;
};

// Dense (s, a) -> (s', r, done) regressor for the model-based baseline.
struct PredictorConfig {
  std::vector<int> hidden = {32, 32};
  int epochs = 400;
  int batch_size = 32;
  double learning_rate = 2e-3;

  bool operator==(const PredictorConfig&) const = default;
};

struct ExperimentSetup {
  EnvConfig env;
  AgentConfig agent;
  ScheduleConfig schedule;
  FlowConfig flow;
  ForestConfig forest;
  PredictorConfig predictor;

  bool operator==(const ExperimentSetup&) const = default;
};

// Throws ConfigError before any simulation work.
void validate(const ExperimentSetup& setup);

inline constexpr double kNotTrained = std::numeric_limits<double>::quiet_NaN();

struct StepRecord {
  int t = 0;
  ProcessorState state;  // state the action was taken from
  int action = 0;
  double reward = 0.0;
  double epsilon = 0.0;
  double max_q = 0.0;
  double agent_loss = kNotTrained;
  double model_loss = kNotTrained;  // generator or predictor loss, final epoch
  std::uint64_t phi_real = 0;
  std::uint64_t phi_synthetic = 0;
  bool model_trained = false;
  bool agent_trained = false;
};

struct RunLog {
  Method method = Method::dfm;
  std::uint64_t seed = 0;
  ExperimentSetup setup;
  std::vector<StepRecord> steps;

  std::vector<int> model_train_steps;
  std::vector<std::vector<double>> model_loss_curves;
  Vector lambda;  // feature weights of the last generator training
  long agent_train_steps = 0;
  long target_syncs = 0;
  long optimizer_resets = 0;
  double final_epsilon = 0.0;

  std::vector<Transition> real;               // final contents of M
  std::vector<Transition> last_synthetic;     // most recent planning batch
};

struct TransitionPredictor {
  nn::MlpD net;  // 5 -> ... -> 6
  Normalizer inputs;
  Normalizer outputs;
  TransitionLayout layout;
  std::vector<double> epoch_losses;
};

TransitionPredictor train_predictor(const ReplayMemory& memory, const PredictorConfig& config,
                                    const TransitionLayout& layout, Rng& rng);

Transition predict_transition(const TransitionPredictor& predictor, const ProcessorState& state,
                              int action);

/// Planning: seeds are real (s, a) pairs drawn without replacement, reshuffling
/// whenever the memory is exhausted.
std::vector<Transition> plan_with_predictor(const TransitionPredictor& predictor,
                                            const ReplayMemory& memory, int n, Rng& rng);

/// Resets the agent's optimizer when its training-step count hits a multiple
/// of `period`. Returns whether a reset happened.
bool learning_rate_reset(DqnAgent& agent, int period);

/// Best noise-free one-step reward over all actions from `state`.
double regret_oracle(const EnvConfig& env, const ProcessorState& state);

RunLog run_experiment(Method method, const ExperimentSetup& setup, std::uint64_t seed);

}  // namespace dvfsflow
