#include "dvfsflow/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dvfsflow/errors.hpp"

namespace dvfsflow {

std::string to_string(Method m) {
  switch (m) {
    case Method::dfm: return "dfm";
    case Method::pure_fm: return "pure_fm";
    case Method::model_based: return "model_based";
    case Method::model_free: return "model_free";
    case Method::random: return "random";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  for (Method m : {Method::dfm, Method::pure_fm, Method::model_based, Method::model_free,
                   Method::random}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("methods", "unknown method '" + name + "'");
}

void validate(const ExperimentSetup& s) {
  validate(s.env);
  validate(s.agent);
  validate(s.flow);
  validate(s.forest);
  const auto& c = s.schedule;
  if (c.exploit_threshold < 0) throw ConfigError("exploit_threshold", "must be non-negative");
  if (c.model_period < 1) throw ConfigError("model_period", "must be at least 1");
  if (c.planning_breadth < 1) throw ConfigError("planning_breadth", "must be at least 1");
  if (c.real_capacity < 1) throw ConfigError("real_capacity", "must be positive");
  if (c.synthetic_capacity < std::size_t(c.planning_breadth))
    throw ConfigError("synthetic_capacity", "must hold at least planning_breadth transitions");
  if (!(c.real_fraction >= 0.0 && c.real_fraction <= 1.0))
    throw ConfigError("real_fraction", "must lie in [0, 1]");
  if (c.lr_reset_period < 0) throw ConfigError("lr_reset_period", "must be non-negative");
  const auto& p = s.predictor;
  for (int h : p.hidden)
    if (h < 1) throw ConfigError("predictor.hidden", "layer sizes must be positive");
  if (p.epochs < 0) throw ConfigError("predictor.epochs", "must be non-negative");
  if (p.batch_size < 1) throw ConfigError("predictor.batch_size", "must be at least 1");
  if (!(p.learning_rate >= 0.0)) throw ConfigError("predictor.learning_rate", "must be non-negative");
}

namespace {

Vector predictor_input(const ProcessorState& s, int action, int num_actions) {
  Vector x(5);
  x << s.fps, s.freq, s.power, s.temp, encode_action(action, num_actions);
  return x;
}

}  // namespace

TransitionPredictor train_predictor(const ReplayMemory& memory, const PredictorConfig& config,
                                    const TransitionLayout& layout, Rng& rng) {
  if (memory.size() < 2) throw InsufficientDataError("predictor needs at least two transitions");
  const auto n = Eigen::Index(memory.size());
  Matrix in(n, 5), out(n, 6);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = memory[std::size_t(i)];
    in.row(i) = predictor_input(t.state, t.action, layout.num_actions).transpose();
    out.row(i) << t.next.fps, t.next.freq, t.next.power, t.next.temp, t.reward, t.done ? 1.0 : 0.0;
  }

  TransitionPredictor p;
  p.layout = layout;
  p.inputs = Normalizer::fit(in);
  p.outputs = Normalizer::fit(out);
  std::vector<int> sizes{5};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(6);
  p.net = nn::init_mlp(sizes, nn::Activation::tanh, split_seed(rng));
  auto adam = nn::make_adam(p.net, config.learning_rate);

  const Matrix x = p.inputs.normalize(in).transpose();
  const Matrix y = p.outputs.normalize(out).transpose();
  const Vector ones = Vector::Ones(6);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto bs = Eigen::Index(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (Eigen::Index start = 0; start < n; start += bs) {
      const Eigen::Index m = std::min(bs, n - start);
      Matrix xb(5, m), yb(6, m);
      for (Eigen::Index j = 0; j < m; ++j) {
        xb.col(j) = x.col(order[std::size_t(start + j)]);
        yb.col(j) = y.col(order[std::size_t(start + j)]);
      }
      loss_sum += nn::train_step(p.net, adam, xb, yb, ones);
      ++batches;
    }
    p.epoch_losses.push_back(loss_sum / std::max(1, batches));
  }
  return p;
}

Transition predict_transition(const TransitionPredictor& p, const ProcessorState& state,
                              int action) {
  const Matrix in = predictor_input(state, action, p.layout.num_actions).transpose();
  const Matrix z = nn::forward_batch(p.net, Matrix(p.inputs.normalize(in).transpose()));
  const Vector y = p.outputs.denormalize(z.transpose()).row(0).transpose();

  Vector flat(kTransitionDim);
  flat << state.fps, state.freq, state.power, state.temp,
      encode_action(action, p.layout.num_actions), y(0), y(1), y(2), y(3), y(4), y(5);
  return decode_generated(flat, p.layout);
}

std::vector<Transition> plan_with_predictor(const TransitionPredictor& p, const ReplayMemory& memory,
                                            int n, Rng& rng) {
  if (memory.empty()) throw InsufficientDataError("planning needs real seed transitions");
  std::vector<std::size_t> order(memory.size());
  std::size_t cursor = order.size();
  std::vector<Transition> out;
  out.reserve(std::size_t(std::max(0, n)));
  for (int i = 0; i < n; ++i) {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const Transition& seed = memory[order[cursor++]];
    out.push_back(predict_transition(p, seed.state, seed.action));
  }
  return out;
}

bool learning_rate_reset(DqnAgent& agent, int period) {
  if (period <= 0 || agent.train_steps() == 0 || agent.train_steps() % period != 0) return false;
  agent.reset_optimizer();
  return true;
}

double regret_oracle(const EnvConfig& env, const ProcessorState& state) {
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < env.num_actions; ++a) {
    best = std::max(best, reward_components(dynamics_noise_free(state, a, env), env).total);
  }
  return best;
}

namespace {

bool uses_generator(Method m) {
  return m == Method::dfm || m == Method::pure_fm || m == Method::model_based;
}

struct Streams {
  std::uint64_t sim;
  std::uint64_t agent;
  Rng policy;
  Rng replay;
  Rng model;
};

Streams make_streams(std::uint64_t seed) {
  Rng master(seed);
  Streams s{master(), master(), Rng(master()), Rng(master()), Rng(master())};
  return s;
}

}  // namespace

RunLog run_experiment(Method method, const ExperimentSetup& setup, std::uint64_t seed) {
  validate(setup);

  RunLog log;
  log.method = method;
  log.seed = seed;
  log.setup = setup;

  const EnvConfig& env = setup.env;
  const ScheduleConfig& sched = setup.schedule;
  const int beta = setup.agent.batch_size;
  const TransitionLayout layout{env.num_actions, env.ambient};

  Streams rng = make_streams(seed);
  DvfsSimulator sim(env);
  sim.reset(rng.sim);
  DqnAgent agent(setup.agent, env, rng.agent);
  ReplayMemory real(sched.real_capacity, Origin::real);
  ReplayMemory synthetic(sched.synthetic_capacity, Origin::synthetic);

  const int synth_share =
      int(std::lround(double(beta) * (1.0 - sched.real_fraction)));

  log.steps.reserve(std::size_t(env.horizon));
  for (int i = 1; i <= env.horizon; ++i) {
    StepRecord rec;
    rec.t = i;
    rec.state = sim.state();
    rec.epsilon = method == Method::random ? 1.0 : agent.epsilon();
    rec.max_q = agent.max_q(rec.state);

    if (method == Method::random) {
      std::uniform_int_distribution<int> any(0, env.num_actions - 1);
      rec.action = any(rng.policy);
    } else {
      rec.action = agent.act(rec.state, rng.policy);
    }

    // direct real-world data collection
    const StepResult res = sim.step(rec.action);
    rec.reward = res.reward;
    real.push({rec.state, rec.action, res.reward, res.next, res.done, Origin::real});

    if (method == Method::random) {
      rec.phi_real = real.inserted();
      log.steps.push_back(rec);
      continue;
    }

    // planning using synthetic data
    if (uses_generator(method) && i % sched.model_period == 0 &&
        real.inserted() > std::uint64_t(beta) && real.size() >= std::size_t(setup.flow.train_start)) {
      std::vector<Transition> batch;
      if (method == Method::model_based) {
        const auto predictor = train_predictor(real, setup.predictor, layout, rng.model);
        log.model_loss_curves.push_back(predictor.epoch_losses);
        batch = plan_with_predictor(predictor, real, sched.planning_breadth, rng.model);
      } else {
        FlowConfig fc = setup.flow;
        Vector lambda = Vector::Constant(kTransitionDim, 1.0 / kTransitionDim);
        if (method == Method::dfm) {
          // too few transitions for the forest: fall back to uniform weights
          if (real.size() >= kMinForestTransitions)
            lambda = transition_feature_weights(real, setup.forest, rng.model);
        } else {
          fc.bootstrap = 1;
        }
        log.lambda = lambda;
        const FlowModel model = train_flow_model(real, lambda, fc, layout, rng.model);
        log.model_loss_curves.push_back(model.epoch_losses);
        batch = generate_transitions(model, sched.planning_breadth, rng.model);
      }
      for (const auto& t : batch) synthetic.push(t);
      log.last_synthetic = std::move(batch);
      log.model_train_steps.push_back(i);
      rec.model_trained = true;
      rec.model_loss = log.model_loss_curves.back().empty() ? kNotTrained
                                                            : log.model_loss_curves.back().back();
    }

    if (real.inserted() + synthetic.inserted() > std::uint64_t(sched.exploit_threshold)) {
      const int n_synth =
          (method == Method::model_free || synthetic.empty()) ? 0 : synth_share;
      const int n_real = beta - n_synth;
      if (real.size() >= std::size_t(n_real) && synthetic.size() >= std::size_t(n_synth)) {
        std::vector<Transition> batch = real.sample(std::size_t(n_real), rng.replay);
        const auto extra = synthetic.sample(std::size_t(n_synth), rng.replay);
        batch.insert(batch.end(), extra.begin(), extra.end());
        rec.agent_loss = agent.train(batch);
        rec.agent_trained = true;
        if (learning_rate_reset(agent, sched.lr_reset_period)) ++log.optimizer_resets;
      }
    }
    agent.decay();

    rec.phi_real = real.inserted();
    rec.phi_synthetic = synthetic.inserted();
    log.steps.push_back(rec);
  }

  log.agent_train_steps = agent.train_steps();
  log.target_syncs = agent.target_syncs();
  log.final_epsilon = agent.epsilon();
  log.real.assign(real.items().begin(), real.items().end());
  return log;
}

}  // namespace dvfsflow
