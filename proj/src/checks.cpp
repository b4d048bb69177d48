#include "dvfsflow/checks.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "dvfsflow/agent.hpp"
#include "dvfsflow/evalkit.hpp"
#include "dvfsflow/flowgen.hpp"
#include "dvfsflow/nn.hpp"

namespace dvfsflow::checks {

std::array<std::array<double, 2>, 2> value_iteration(const TabularMdp& mdp) {
  std::array<std::array<double, 2>, 2> q{};
  for (int iter = 0; iter < 100000; ++iter) {
    double delta = 0.0;
    auto next = q;
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) {
        const int sn = mdp.next_state[s][a];
        next[s][a] = mdp.reward[s][a] + mdp.discount * std::max(q[sn][0], q[sn][1]);
        delta = std::max(delta, std::abs(next[s][a] - q[s][a]));
      }
    }
    q = next;
    if (delta < 1e-12) break;
  }
  return q;
}

TabularDqnResult tabular_dqn(const TabularMdp& mdp, int updates, double bound, std::uint64_t seed) {
  const auto q_star = value_iteration(mdp);

  QBatch batch;
  batch.states = Matrix::Zero(2, 4);
  batch.next_states = Matrix::Zero(2, 4);
  batch.rewards.resize(4);
  for (int s = 0, j = 0; s < 2; ++s) {
    for (int a = 0; a < 2; ++a, ++j) {
      batch.states(s, j) = 1.0;
      batch.next_states(mdp.next_state[s][a], j) = 1.0;
      batch.rewards(j) = mdp.reward[s][a];
      batch.actions.push_back(a);
      batch.done.push_back(false);
    }
  }

  nn::MlpD qnet = nn::init_mlp({2, 2}, nn::Activation::tanh, seed);
  nn::MlpD target = qnet;
  auto adam = nn::make_adam(qnet, 0.02);
  constexpr int kSyncPeriod = 10;

  auto error = [&] {
    const Matrix q = nn::forward_batch(qnet, Matrix(Matrix::Identity(2, 2)));
    double e = 0.0;
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) e = std::max(e, std::abs(q(a, s) - q_star[s][a]));
    return e;
  };

  TabularDqnResult out;
  for (int u = 1; u <= updates; ++u) {
    train_q_step(qnet, target, batch, mdp.discount, adam);
    if (u % kSyncPeriod == 0) target = sync_target(qnet);
    if (out.first_within < 0 && error() < bound) out.first_within = u;
  }
  out.updates = updates;
  out.max_error = error();
  return out;
}

Matrix brute_force_pearson(const Matrix& data) {
  const Eigen::Index n = data.rows(), d = data.cols();
  Matrix out(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      double mi = 0.0, mj = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        mi += data(k, i);
        mj += data(k, j);
      }
      mi /= double(n);
      mj /= double(n);
      double num = 0.0, si = 0.0, sj = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        num += (data(k, i) - mi) * (data(k, j) - mj);
        si += (data(k, i) - mi) * (data(k, i) - mi);
        sj += (data(k, j) - mj) * (data(k, j) - mj);
      }
      out(i, j) = num / (std::sqrt(si) * std::sqrt(sj));
    }
  }
  return out;
}

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  return m;
}

std::string fmt(double x) {
  std::ostringstream ss;
  ss.precision(4);
  ss << x;
  return ss.str();
}

}  // namespace

CheckResult check_gradients(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  std::string detail;
  auto run = [&](const char* name, const std::vector<int>& sizes, nn::Activation act,
                 const Matrix& weights) {
    const nn::MlpD net = nn::init_mlp(sizes, act, split_seed(rng));
    const Matrix x = gaussian(sizes.front(), weights.cols(), rng);
    const Matrix y = gaussian(sizes.back(), weights.cols(), rng);
    const auto r = nn::grad_check(net, x, y, weights, 1e-4, rng, 80);
    worst = std::max(worst, r.max_relative_error);
    detail += std::string(name) + "=" + fmt(r.max_relative_error) + " ";
  };

  // Q-network: loss restricted to the taken action.
  Matrix mask = Matrix::Zero(12, 16);
  for (int j = 0; j < 16; ++j) mask(j % 12, j) = 1.0;
  run("qnet", {4, 6, 6, 12}, nn::Activation::tanh, mask);

  // Vector field with non-uniform feature weights.
  Vector lambda = Vector::LinSpaced(11, 1.0, 3.0);
  lambda /= lambda.sum();
  run("field", {12, 64, 64, 11}, nn::Activation::tanh, lambda.replicate(1, 8));
  run("predictor", {5, 32, 32, 6}, nn::Activation::tanh, Matrix::Ones(6, 8));
  run("relu", {3, 7, 2}, nn::Activation::relu, Matrix::Ones(2, 5));

  return {"gradient check (backprop vs central differences)", worst < 1e-4, worst, 1e-4, detail};
}

CheckResult check_pearson(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    Matrix data = gaussian(50, 11, rng);
    data.col(3) = 2.0 * data.col(1) + 0.3 * data.col(3);  // some real structure
    const Matrix fast = pearson_matrix(data).values;
    const Matrix slow = brute_force_pearson(data);
    worst = std::max(worst, (fast - slow).cwiseAbs().maxCoeff());
  }
  return {"pearson matrix vs brute-force loop", worst < 1e-12, worst, 1e-12, ""};
}

CheckResult check_bootstrap_fraction(std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Index m = 20000;
  Matrix pool(m, 1);
  for (Eigen::Index i = 0; i < m; ++i) pool(i, 0) = double(i);
  const auto reps = bootstrap_latents(pool, 4, rng);
  double mean_fraction = 0.0;
  for (const auto& rep : reps) {
    std::set<double> distinct(rep.data(), rep.data() + rep.size());
    mean_fraction += double(distinct.size()) / double(m);
  }
  mean_fraction /= double(reps.size());
  const double expected = 1.0 - std::exp(-1.0);
  const double err = std::abs(mean_fraction - expected);
  return {"bootstrap distinct fraction ~ 1 - 1/e", err < 0.02, mean_fraction, 0.02,
          "|" + fmt(mean_fraction) + " - 0.632| = " + fmt(err)};
}

CheckResult check_wasserstein_uniform(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u1(0.0, 1.0), u2(0.0, 2.0);
  Vector a(10000), b(10000);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = u1(rng);
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = u2(rng);
  const double w = wasserstein1(a, b);
  return {"W1(U[0,1], U[0,2]) ~ 0.5", std::abs(w - 0.5) < 0.03, w, 0.03, ""};
}

CheckResult check_tabular_convergence(std::uint64_t seed) {
  const auto r = tabular_dqn(TabularMdp{}, 5000, 0.05, seed);
  return {"tabular DQN vs value iteration (2 states, 2 actions)", r.max_error < 0.05, r.max_error,
          0.05, "first below bound at update " + std::to_string(r.first_within)};
}

CheckResult check_flow_moments(std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gx(3.0, 0.5), gy(-1.0, 0.5);
  Matrix data(1000, 2);
  for (Eigen::Index i = 0; i < data.rows(); ++i) data.row(i) << gx(rng), gy(rng);

  FlowConfig cfg;
  cfg.hidden = {64, 64};
  cfg.epochs = 400;
  cfg.batch_size = 64;
  cfg.learning_rate = 2e-3;
  cfg.bootstrap = 1;
  const FlowModel model = train_flow(data, Vector::Constant(2, 0.5), cfg, rng);
  const Matrix samples = sample_flow(model, 1000, rng);

  const Vector mean = samples.colwise().mean().transpose();
  const Vector sd = column_std(samples);
  const double mean_err = std::max(std::abs(mean(0) - 3.0), std::abs(mean(1) + 1.0));
  const double std_err = std::max(std::abs(sd(0) - 0.5), std::abs(sd(1) - 0.5));
  const bool ok = mean_err < 0.15 && std_err < 0.1;
  // value is the mean error; the std error is bounded separately in `detail`.
  return {"flow matching 2-D Gaussian moments", ok, mean_err, 0.15,
          "mean=(" + fmt(mean(0)) + "," + fmt(mean(1)) + ") std=(" + fmt(sd(0)) + "," +
              fmt(sd(1)) + ") std error " + fmt(std_err) + " (bound 0.1)"};
}

std::vector<CheckResult> run_all(std::uint64_t seed) {
  return {check_gradients(seed),          check_pearson(seed),
          check_bootstrap_fraction(seed), check_wasserstein_uniform(seed),
          check_tabular_convergence(seed), check_flow_moments(seed)};
}

}  // namespace dvfsflow::checks
