#pragma once

#include <cstdint>
#include <optional>

#include "dvfsflow/types.hpp"

namespace dvfsflow {

// One DVFS observation.
struct ProcessorState {
  double fps = 0.0;    // frames per second
  double freq = 0.0;   // normalized frequency in [0, 1]
  double power = 0.0;  // watts
  double temp = 0.0;   // degrees Celsius

  bool operator==(const ProcessorState&) const = default;
};

struct EnvConfig {
  int num_actions = 12;
  double eta = 3.0;                   // dynamic power exponent, f^eta
  double dyn_coeff = 6.0;             // W at f = 1
  double static_coeff = 0.08;         // W per degree C
  double thermal_capacitance = 1.7;   // W*step per degree C
  double thermal_resistance = 4.0;    // degree C per W
  double ambient = 25.0;
  double min_freq = 0.2;
  double fps_slope = 120.0;           // fps per unit normalized frequency
  double fps_cap = 120.0;
  double target_fps = 60.0;
  double target_temp = 50.0;
  double reward_scale = 2.0;
  double noise_std_fps = 1.2;         // 1% of fps_cap
  double noise_std_temp = 0.5;        // 1% of target_temp
  int horizon = 200;
  std::uint64_t seed = 0;

  bool operator==(const EnvConfig&) const = default;
};

// Throws ConfigError naming the first invalid field.
void validate(const EnvConfig& config);

// Normalized frequency of a discrete level, uniformly spaced in [min_freq, 1].
double frequency_level(const EnvConfig& config, int action);

// fps multiplier applied once the die runs at or above the target temperature.
double throttle_factor(const EnvConfig& config, double temp);

// Initial state: middle level, die at ambient, noise-free observation.
ProcessorState initial_state(const EnvConfig& config);

// One transition of the RC thermal / power / fps model. Observation noise is
// drawn from rng only when the corresponding std is positive.
ProcessorState dynamics(const ProcessorState& state, int action, const EnvConfig& config,
                        Rng& rng);

// Noise-free variant; identical to dynamics() with zero noise.
ProcessorState dynamics_noise_free(const ProcessorState& state, int action,
                                   const EnvConfig& config);

struct RewardComponents {
  double fps_term = 0.0;    // u
  double temp_term = 0.0;   // v
  double power_term = 0.0;  // beta / rho
  double total = 0.0;
};

RewardComponents reward_components(const ProcessorState& state, const EnvConfig& config);

// Steady-state temperature for a held action, from the closed form of the
// RC fixed point.
double thermal_fixed_point(const EnvConfig& config, int action);

struct StepResult {
  ProcessorState next;
  double reward = 0.0;
  bool done = false;
};

// Episodic wrapper owning its RNG and step counter.
class DvfsSimulator {
 public:
  explicit DvfsSimulator(EnvConfig config);

  const ProcessorState& reset(std::uint64_t seed);
  StepResult step(int action);

  const ProcessorState& state() const { return state_; }
  const EnvConfig& config() const { return config_; }
  int steps_taken() const { return steps_; }
  bool finished() const { return steps_ >= config_.horizon; }

 private:
  EnvConfig config_;
  Rng rng_;
  ProcessorState state_;
  int steps_ = 0;
};

// Scales a state into the roughly unit-range features fed to the Q-network.
class StateEncoder {
 public:
  explicit StateEncoder(const EnvConfig& config);

  Vector4 operator()(const ProcessorState& state) const;

 private:
  double fps_scale_;
  double power_scale_;
  double ambient_;
  double temp_span_;
};

}  // namespace dvfsflow
