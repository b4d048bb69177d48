#pragma once

#include <array>
#include <string>
#include <vector>

#include "dvfsflow/agent.hpp"
#include "dvfsflow/nn.hpp"
#include "dvfsflow/types.hpp"

namespace dvfsflow {

// Flattened transition: s (4), a (1), s' (4), r (1), done (1).
inline constexpr int kTransitionDim = 11;
inline constexpr int kActionColumn = 4;
inline constexpr int kRewardColumn = 9;
inline constexpr int kDoneColumn = 10;

const std::array<std::string, kTransitionDim>& transition_columns();

struct TransitionLayout {
  int num_actions = 12;
  double ambient = 25.0;

  bool operator==(const TransitionLayout&) const = default;
};

/// Action level scaled to [0, 1]; 0 when there is a single level.
inline double encode_action(int action, int num_actions) {
  return num_actions > 1 ? double(action) / double(num_actions - 1) : 0.0;
}

/// Action is encoded as a/(k-1), done as 0/1.
Vector flatten(const Transition& t, int num_actions);

/// Inverse of flatten: action rounded and clamped, done thresholded at 0.5.
Transition unflatten(const Vector& x, int num_actions, Origin origin = Origin::real);

/// unflatten plus clamping of the state fields to their physical ranges.
Transition decode_generated(const Vector& x, const TransitionLayout& layout);

/// n x 11 matrix, one flattened transition per row.
Matrix transitions_to_matrix(const std::vector<Transition>& ts, int num_actions);
Matrix memory_to_matrix(const ReplayMemory& memory, int num_actions);

struct Normalizer {
  Vector mean;
  Vector std;

  static Normalizer fit(const Matrix& rows);
  Matrix normalize(const Matrix& rows) const;
  Matrix denormalize(const Matrix& rows) const;
};

struct FlowConfig {
  std::vector<int> hidden = {64, 64};
  int epochs = 400;
  int batch_size = 32;
  double learning_rate = 2e-3;
  double sigma_min = 0.01;
  int bootstrap = 8;
  int ode_steps = 100;
  int train_start = 32;

  bool operator==(const FlowConfig&) const = default;
};

void validate(const FlowConfig& config);

struct FlowModel {
  nn::MlpD field;  // input (x, t), output velocity
  Normalizer normalizer;
  Vector lambda;
  double sigma_min = 0.01;
  int bootstrap = 1;
  int ode_steps = 100;
  TransitionLayout layout;
  bool trained = false;
  std::vector<double> epoch_losses;

  int dim() const { return int(lambda.size()); }
};

/// B replicates of `pool` (m x d), each m rows drawn with replacement.
std::vector<Matrix> bootstrap_latents(const Matrix& pool, int replicates, Rng& rng);

/// Network inputs and regression targets for one conditional flow-matching
/// evaluation, one column per (latent, data, t) pair.
struct CfmBatch {
  Matrix inputs;   // (d + 1) x N: x(t) stacked over t
  Matrix targets;  // d x N: x1 - (1 - sigma_min) x0
};

/// Latent pool x0 ~ N(0, I) with the batch's shape, B bootstrap replicates of
/// it, each paired with a fresh shuffle of x1 and its own t ~ U[0, 1].
CfmBatch draw_cfm_batch(const Matrix& x1, double sigma_min, int replicates, Rng& rng);

/// Builds the straight conditional path for explicit (x0, x1, t) triples; rows
/// of x0 and x1 are paired in order.
CfmBatch cfm_pairs(const Matrix& x0, const Matrix& x1, const Vector& t, double sigma_min);

/// Feature-weighted flow-matching loss averaged over replicates and pairs,
/// with its parameter gradient.
nn::LossAndGrad<double> cfm_loss(const nn::MlpD& field, const CfmBatch& batch,
                                 const Vector& lambda);

/// Trains on generic rows (n x d); `lambda` must be non-negative and sum to one.
FlowModel train_flow(const Matrix& data, const Vector& lambda, const FlowConfig& config,
                     Rng& rng);

/// Fits the normalizer and vector field on every transition in `memory`.
FlowModel train_flow_model(const ReplayMemory& memory, const Vector& lambda,
                           const FlowConfig& config, const TransitionLayout& layout, Rng& rng);

/// Euler integration of dx/dt = v(x, t) from N(0, I) at t = 0 to t = 1;
/// returns n denormalized rows. `steps` overrides the model's ODE step count.
Matrix sample_flow(const FlowModel& model, int n, Rng& rng, int steps = 0);

std::vector<Transition> generate_transitions(const FlowModel& model, int n, Rng& rng);

}  // namespace dvfsflow
