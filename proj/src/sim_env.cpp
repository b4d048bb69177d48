#include "dvfsflow/sim_env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dvfsflow/errors.hpp"

namespace dvfsflow {

namespace {

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void validate(const EnvConfig& c) {
  require(c.num_actions >= 1, "num_actions", "must be at least 1");
  require(std::isfinite(c.eta) && c.eta > 2.0, "eta", "must be greater than 2");
  require(finite_positive(c.dyn_coeff), "dyn_coeff", "must be positive");
  require(finite_positive(c.static_coeff), "static_coeff", "must be positive");
  require(finite_positive(c.thermal_capacitance), "thermal_capacitance", "must be positive");
  require(finite_positive(c.thermal_resistance), "thermal_resistance", "must be positive");
  require(std::isfinite(c.ambient), "ambient", "must be finite");
  require(finite_positive(c.min_freq) && c.min_freq < 1.0, "min_freq", "must lie in (0, 1)");
  require(finite_positive(c.fps_slope), "fps_slope", "must be positive");
  require(finite_positive(c.fps_cap), "fps_cap", "must be positive");
  require(finite_positive(c.target_fps), "target_fps", "must be positive");
  require(c.fps_cap >= c.target_fps, "fps_cap", "must be at least target_fps");
  require(std::isfinite(c.target_temp) && c.target_temp > c.ambient, "target_temp",
          "must exceed ambient");
  require(finite_positive(c.reward_scale), "reward_scale", "must be positive");
  require(std::isfinite(c.noise_std_fps) && c.noise_std_fps >= 0.0, "noise_std_fps",
          "must be non-negative");
  require(std::isfinite(c.noise_std_temp) && c.noise_std_temp >= 0.0, "noise_std_temp",
          "must be non-negative");
  require(c.horizon >= 1, "horizon", "must be at least 1");

  // theta' = theta + (1/C)(rho - (theta - amb)/R). The fixed point exists iff
  // c_s R < 1 and the iteration is a monotone contraction iff
  // 0 < (1/R - c_s)/C <= 1.
  require(c.static_coeff * c.thermal_resistance < 1.0, "static_coeff",
          "times thermal_resistance must be below 1 (thermal runaway)");
  const double rate = (1.0 / c.thermal_resistance - c.static_coeff) / c.thermal_capacitance;
  require(rate <= 1.0, "thermal_capacitance",
          "too small: (1/R_th - c_s)/C must not exceed 1 for a monotone thermal response");
}

double frequency_level(const EnvConfig& c, int action) {
  if (action < 0 || action >= c.num_actions) {
    throw DomainError("action " + std::to_string(action) + " outside 0.." +
                      std::to_string(c.num_actions - 1));
  }
  if (c.num_actions == 1) return 1.0;
  return c.min_freq + (1.0 - c.min_freq) * action / (c.num_actions - 1);
}

double throttle_factor(const EnvConfig& c, double temp) {
  if (temp < c.target_temp) return 1.0;
  return 1.0 / (1.0 + 0.1 * (temp - c.target_temp));
}

ProcessorState initial_state(const EnvConfig& c) {
  validate(c);
  ProcessorState s;
  s.freq = frequency_level(c, c.num_actions / 2);
  s.temp = c.ambient;
  s.power = c.dyn_coeff * std::pow(s.freq, c.eta) + c.static_coeff * s.temp;
  s.fps = std::min(c.fps_cap, c.fps_slope * s.freq) * throttle_factor(c, s.temp);
  return s;
}

namespace {

ProcessorState advance(const ProcessorState& s, int action, const EnvConfig& c) {
  ProcessorState next;
  next.freq = frequency_level(c, action);
  const double dynamic = c.dyn_coeff * std::pow(next.freq, c.eta);
  const double leakage = c.static_coeff * s.temp;
  next.power = dynamic + leakage;
  next.temp = s.temp + (next.power - (s.temp - c.ambient) / c.thermal_resistance) /
                           c.thermal_capacitance;
  next.fps = std::min(c.fps_cap, c.fps_slope * next.freq) * throttle_factor(c, next.temp);
  return next;
}

}  // namespace

ProcessorState dynamics(const ProcessorState& s, int action, const EnvConfig& c, Rng& rng) {
  ProcessorState next = advance(s, action, c);
  if (c.noise_std_fps > 0.0) {
    std::normal_distribution<double> noise(0.0, c.noise_std_fps);
    next.fps += noise(rng);
  }
  if (c.noise_std_temp > 0.0) {
    std::normal_distribution<double> noise(0.0, c.noise_std_temp);
    next.temp += noise(rng);
  }
  next.fps = std::max(0.0, next.fps);
  next.temp = std::max(c.ambient, next.temp);
  return next;
}

ProcessorState dynamics_noise_free(const ProcessorState& s, int action, const EnvConfig& c) {
  ProcessorState next = advance(s, action, c);
  next.fps = std::max(0.0, next.fps);
  next.temp = std::max(c.ambient, next.temp);
  return next;
}

RewardComponents reward_components(const ProcessorState& s, const EnvConfig& c) {
  if (!(s.power > 0.0)) throw DomainError("reward requires positive power");
  RewardComponents r;
  r.fps_term = s.fps >= c.target_fps ? 1.0 : s.fps / c.target_fps;
  r.temp_term = s.temp < c.target_temp ? 0.2 * std::tanh(c.target_temp - s.temp) : -2.0;
  r.power_term = c.reward_scale / s.power;
  r.total = r.fps_term + r.temp_term + r.power_term;
  return r;
}

double thermal_fixed_point(const EnvConfig& c, int action) {
  const double f = frequency_level(c, action);
  const double dynamic = c.dyn_coeff * std::pow(f, c.eta);
  return (c.ambient + c.thermal_resistance * dynamic) /
         (1.0 - c.thermal_resistance * c.static_coeff);
}

DvfsSimulator::DvfsSimulator(EnvConfig config) : config_(std::move(config)) {
  validate(config_);
  reset(config_.seed);
}

const ProcessorState& DvfsSimulator::reset(std::uint64_t seed) {
  rng_.seed(seed);
  state_ = initial_state(config_);
  steps_ = 0;
  return state_;
}

StepResult DvfsSimulator::step(int action) {
  if (finished()) throw StateError("episode already reached its horizon");
  StepResult out;
  out.next = dynamics(state_, action, config_, rng_);
  out.reward = reward_components(out.next, config_).total;
  ++steps_;
  out.done = finished();
  state_ = out.next;
  return out;
}

StateEncoder::StateEncoder(const EnvConfig& c)
    : fps_scale_(c.fps_cap),
      power_scale_(c.dyn_coeff + c.static_coeff * c.target_temp),
      ambient_(c.ambient),
      temp_span_(c.target_temp - c.ambient) {}

Vector4 StateEncoder::operator()(const ProcessorState& s) const {
  return {s.fps / fps_scale_, s.freq, s.power / power_scale_, (s.temp - ambient_) / temp_span_};
}

}  // namespace dvfsflow
