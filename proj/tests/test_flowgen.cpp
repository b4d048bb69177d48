#include <doctest.h>

#include <set>

#include "dvfsflow/checks.hpp"
#include "dvfsflow/errors.hpp"
#include "dvfsflow/evalkit.hpp"
#include "dvfsflow/flowgen.hpp"

using namespace dvfsflow;

namespace {

ReplayMemory simulator_memory(int n, std::uint64_t seed) {
  DvfsSimulator sim(EnvConfig{});
  sim.reset(seed);
  Rng rng(seed + 100);
  std::uniform_int_distribution<int> pick(0, 11);
  ReplayMemory m(std::size_t(n), Origin::real);
  for (int i = 0; i < n; ++i) {
    if (sim.finished()) sim.reset(seed + std::uint64_t(i));
    const ProcessorState s = sim.state();
    const int a = pick(rng);
    const auto r = sim.step(a);
    m.push({s, a, r.reward, r.next, r.done, Origin::real});
  }
  return m;
}

const Vector& uniform11() {
  static const Vector u = Vector::Constant(kTransitionDim, 1.0 / kTransitionDim);
  return u;
}

// One trained model shared by several cases.
struct Trained {
  ReplayMemory memory = simulator_memory(200, 1);
  FlowModel model;
  Trained() {
    Rng rng(2);
    model = train_flow_model(memory, uniform11(), FlowConfig{}, TransitionLayout{}, rng);
  }
};

const Trained& trained() {
  static const Trained t;
  return t;
}

}  // namespace

TEST_CASE("flatten and unflatten round trip") {
  Transition t;
  t.state = {55.5, 0.6, 2.1, 41.0};
  t.next = {60.0, 1.0, 6.4, 43.5};
  t.action = 11;
  t.reward = 1.25;
  t.done = false;
  const Vector x = flatten(t, 12);
  CHECK(x.size() == kTransitionDim);
  CHECK(x(kActionColumn) == 1.0);
  CHECK(x(kDoneColumn) == 0.0);
  CHECK(unflatten(x, 12) == t);
  t.action = 4;
  t.done = true;
  CHECK(unflatten(flatten(t, 12), 12) == t);
  CHECK(transition_columns()[kRewardColumn] == "reward");
}

TEST_CASE("decode clamps generated rows to physical ranges") {
  Vector x(kTransitionDim);
  x << -5.0, 1.4, -0.2, 10.0, 1.3, 30.0, -0.1, 0.0, 12.0, 0.5, 0.7;
  const Transition t = decode_generated(x, TransitionLayout{});
  CHECK(t.state.fps == 0.0);
  CHECK(t.state.freq == 1.0);
  CHECK(t.state.power > 0.0);
  CHECK(t.state.temp == 25.0);
  CHECK(t.action == 11);
  CHECK(t.next.freq == 0.0);
  CHECK(t.next.temp == 25.0);
  CHECK(t.done);
  CHECK(t.origin == Origin::synthetic);
}

TEST_CASE("bootstrap replicates") {
  Rng rng(1);
  Matrix pool(50, 2);
  for (Eigen::Index i = 0; i < 50; ++i) pool.row(i) << double(i), -double(i);
  const auto reps = bootstrap_latents(pool, 3, rng);
  REQUIRE(reps.size() == 3);
  for (const Matrix& r : reps) {
    CHECK(r.rows() == 50);
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      const double id = r(i, 0);
      CHECK(id == std::floor(id));
      CHECK(r(i, 1) == -id);
    }
  }
  Rng a(5), b(5);
  CHECK(bootstrap_latents(pool, 1, a)[0] == bootstrap_latents(pool, 1, b)[0]);

  Rng big(7);
  const Eigen::Index m = 20000;
  const Matrix ids = Vector::LinSpaced(m, 0.0, double(m - 1));
  const Matrix r = bootstrap_latents(ids, 1, big)[0];
  std::set<double> distinct(r.data(), r.data() + r.size());
  CHECK(std::abs(double(distinct.size()) / double(m) - (1.0 - std::exp(-1.0))) < 0.02);
}

TEST_CASE("conditional flow-matching loss") {
  Rng rng(3);
  const Matrix x0 = Matrix::Random(4, 3), x1 = Matrix::Random(4, 3);
  Vector t(4);
  t << 0.1, 0.5, 0.9, 0.3;
  const CfmBatch b = cfm_pairs(x0, x1, t, 0.0);

  // Exact field: zero weights, bias set to the target (single pair keeps it constant).
  const CfmBatch one = cfm_pairs(x0.topRows(1), x1.topRows(1), t.head(1), 0.01);
  nn::MlpD exact({4, 3}, nn::Activation::tanh);
  exact.bias(0) = one.targets.col(0);
  CHECK(cfm_loss(exact, one, Vector(Vector::Constant(3, 1.0 / 3))).loss == doctest::Approx(0.0));

  // Exact on dimension 1 only, with a one-hot lambda there.
  nn::MlpD partial = exact;
  partial.bias(0)(0) += 2.0;
  partial.bias(0)(2) -= 1.0;
  Vector onehot = Vector::Zero(3);
  onehot(1) = 1.0;
  CHECK(cfm_loss(partial, one, onehot).loss == doctest::Approx(0.0));

  // Hand evaluation: sigma 0, one pair, fixed t.
  const auto net = nn::init_mlp({4, 5, 3}, nn::Activation::tanh, 4);
  const CfmBatch single = cfm_pairs(x0.topRows(1), x1.topRows(1), t.head(1), 0.0);
  Vector xt_in(4);
  const Vector xt = (1.0 - t(0)) * x0.row(0).transpose() + t(0) * x1.row(0).transpose();
  xt_in << xt, t(0);
  const Vector v = nn::forward(net, xt_in);
  Vector lambda(3);
  lambda << 0.2, 0.3, 0.5;
  const Vector diff = v - (x1.row(0) - x0.row(0)).transpose();
  const double hand = (lambda.array() * diff.array().square()).sum();
  CHECK(cfm_loss(net, single, lambda).loss == doctest::Approx(hand).epsilon(1e-12));
  CHECK(b.inputs.rows() == 4);
  CHECK(b.targets.cols() == 4);
}

TEST_CASE("uniform weights with one replicate equal the plain CFM loss") {
  const auto net = nn::init_mlp({5, 8, 4}, nn::Activation::tanh, 8);
  Rng r1(21), r2(21);
  const Matrix x1 = Matrix::Random(16, 4);
  const CfmBatch b = draw_cfm_batch(x1, 0.01, 1, r1);
  const double weighted = cfm_loss(net, b, Vector(Vector::Constant(4, 0.25))).loss;
  const Matrix pred = nn::forward_batch(net, b.inputs);
  const double plain = 0.25 * (pred - b.targets).array().square().sum() / double(b.targets.cols());
  CHECK(weighted == doctest::Approx(plain).epsilon(1e-12));
  const CfmBatch again = draw_cfm_batch(x1, 0.01, 1, r2);
  CHECK(again.inputs == b.inputs);
}

TEST_CASE("cfm gradient matches finite differences") {
  Rng rng(5);
  const auto net = nn::init_mlp({12, 64, 64, 11}, nn::Activation::tanh, 5);
  const CfmBatch b = draw_cfm_batch(Matrix::Random(10, 11), 0.01, 3, rng);
  Vector lambda = Vector::LinSpaced(11, 1.0, 2.0);
  lambda /= lambda.sum();
  const auto r = nn::grad_check(net, b.inputs, b.targets, Matrix(lambda.replicate(1, b.inputs.cols())),
                                1e-4, rng);
  CHECK(r.passed);
}

TEST_CASE("training preconditions") {
  Rng rng(1);
  const Matrix small = Matrix::Random(10, 3);
  FlowConfig c;
  CHECK_THROWS_AS(train_flow(small, Vector(Vector::Constant(3, 1.0 / 3)), c, rng),
                  InsufficientDataError);
  const Matrix data = Matrix::Random(40, 3);
  CHECK_THROWS_AS(train_flow(data, Vector(Vector::Constant(3, 0.5)), c, rng), DomainError);
  FlowModel untrained;
  CHECK_THROWS_AS(sample_flow(untrained, 3, rng), StateError);
}

TEST_CASE("training curve on simulator data flattens out") {
  const auto& losses = trained().model.epoch_losses;
  REQUIRE(losses.size() == 400);
  for (double l : losses) CHECK(std::isfinite(l));
  // 20-epoch block averages from epoch 50 on. Each epoch loss is a Monte Carlo
  // estimate over fresh (x0, t) draws, so "non-increasing" is judged up to three
  // standard errors of the block mean.
  auto block = [&](std::size_t end, double* se) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = end - 20; i < end; ++i) {
      s += losses[i];
      s2 += losses[i] * losses[i];
    }
    const double mean = s / 20.0;
    *se = std::sqrt(std::max(0.0, s2 / 20.0 - mean * mean) / 19.0);
    return mean;
  };
  double se_prev = 0.0, se = 0.0;
  double prev = block(70, &se_prev);
  const double start = prev;
  for (std::size_t end = 90; end <= losses.size(); end += 20) {
    const double cur = block(end, &se);
    CHECK(cur <= prev + 3.0 * std::hypot(se, se_prev));
    prev = cur;
    se_prev = se;
  }
  CHECK(prev < start);
}

TEST_CASE("same seed and memory give the same model") {
  const ReplayMemory m = simulator_memory(60, 4);
  FlowConfig c;
  c.epochs = 5;
  Rng r1(3), r2(3);
  const FlowModel a = train_flow_model(m, uniform11(), c, TransitionLayout{}, r1);
  const FlowModel b = train_flow_model(m, uniform11(), c, TransitionLayout{}, r2);
  CHECK(a.field == b.field);
  CHECK(a.epoch_losses == b.epoch_losses);
}

TEST_CASE("generated transitions are valid and diverse") {
  const auto& t = trained();
  Rng rng(6);
  CHECK(generate_transitions(t.model, 0, rng).empty());
  const auto synth = generate_transitions(t.model, 1000, rng);
  REQUIRE(synth.size() == 1000);
  for (const auto& s : synth) {
    CHECK(s.origin == Origin::synthetic);
    CHECK(s.state.fps >= 0.0);
    CHECK(s.state.freq >= 0.0);
    CHECK(s.state.freq <= 1.0);
    CHECK(s.state.power > 0.0);
    CHECK(s.state.temp >= 25.0);
    CHECK(s.action >= 0);
    CHECK(s.action < 12);
  }
  const Vector real_std = column_std(memory_to_matrix(t.memory, 12));
  const Vector synth_std = column_std(transitions_to_matrix(synth, 12));
  for (Eigen::Index j = 0; j < real_std.size(); ++j)
    CHECK(synth_std(j) >= 0.5 * real_std(j));
}

TEST_CASE("Euler step count barely moves first moments") {
  const auto& m = trained().model;
  Rng r1(9), r2(9);
  const Matrix coarse = m.normalizer.normalize(sample_flow(m, 2000, r1, 50));
  const Matrix fine = m.normalizer.normalize(sample_flow(m, 2000, r2, 200));
  const Vector shift = (coarse.colwise().mean() - fine.colwise().mean()).transpose();
  CHECK(shift.cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("two-dimensional Gaussian moments are recovered") {
  const auto r = checks::check_flow_moments(0);
  CHECK(r.passed);
}
