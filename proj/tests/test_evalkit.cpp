#include <doctest.h>

#include <cmath>

#include "dvfsflow/checks.hpp"
#include "dvfsflow/errors.hpp"
#include "dvfsflow/evalkit.hpp"

using namespace dvfsflow;

namespace {

RunLog log_from(const std::vector<double>& fps, const std::vector<double>& max_q = {}) {
  RunLog log;
  for (std::size_t i = 0; i < fps.size(); ++i) {
    StepRecord r;
    r.t = int(i) + 1;
    r.state = {fps[i], 0.5, 2.0, 30.0};
    r.max_q = max_q.empty() ? 0.0 : max_q[i];
    log.steps.push_back(r);
  }
  return log;
}

}  // namespace

TEST_CASE("pearson on hand-checked columns") {
  Matrix d(3, 4);
  d << 1, 1, 1, -1,
       2, 2, 2, -2,
       3, 4, 3, -3;
  const auto c = pearson_matrix(d);
  CHECK(c.values(0, 1) == doctest::Approx(3.0 / std::sqrt(2.0 * 42.0 / 9.0)));
  CHECK(c.values(0, 1) == doctest::Approx(0.982).epsilon(1e-3));
  CHECK(c.values(0, 2) == doctest::Approx(1.0));
  CHECK(c.values(0, 3) == doctest::Approx(-1.0));
  CHECK(c.values(2, 2) == 1.0);
  CHECK(c.zero_variance_count() == 0);
}

TEST_CASE("zero-variance columns are NaN and excluded from the gap") {
  Matrix d(4, 3);
  d << 1, 5, 2, 2, 5, 1, 3, 5, 4, 4, 5, 3;
  const auto c = pearson_matrix(d, {"a", "b", "c"});
  CHECK(c.zero_variance_count() == 1);
  CHECK(std::isnan(c.values(0, 1)));
  CHECK(std::isnan(c.values(1, 1)));
  const auto g = corr_gap(c, c);
  CHECK(g.value == 0.0);
  CHECK(g.pairs_used == 1);
  CHECK(g.pairs_excluded == 2);
}

TEST_CASE("corr gap bounds and symmetry") {
  Matrix x(4, 2), y(4, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8;
  y << 1, -2, 2, -4, 3, -6, 4, -8;
  const auto a = pearson_matrix(x), b = pearson_matrix(y);
  CHECK(corr_gap(a, a).value == 0.0);
  CHECK(corr_gap(a, b).value == doctest::Approx(2.0));
  CHECK(corr_gap(a, b).value == corr_gap(b, a).value);
  CHECK_THROWS_AS(corr_gap(pearson_matrix(x, {"p", "q"}), pearson_matrix(y, {"p", "r"})), DomainError);
}

TEST_CASE("pearson agrees with the brute-force loop") {
  CHECK(checks::check_pearson(1).passed);
  Rng rng(2);
  std::normal_distribution<double> g;
  Matrix m(50, 11);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  CHECK((pearson_matrix(m).values - checks::brute_force_pearson(m)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("wasserstein distance") {
  const Vector a = Vector::LinSpaced(100, 0.0, 1.0);
  CHECK(wasserstein1(a, a) == 0.0);
  CHECK(wasserstein1(a, (a.array() + 2.5).matrix()) == doctest::Approx(2.5));
  CHECK(wasserstein1(a, (a.array() - 0.7).matrix()) == doctest::Approx(0.7));
  // unequal sample sizes
  Vector two(2);
  two << 0.0, 1.0;
  Vector three(3);
  three << 0.0, 0.5, 1.0;
  CHECK(wasserstein1(two, three) == doctest::Approx(1.0 / 6.0));
  CHECK(checks::check_wasserstein_uniform(0).passed);
}

TEST_CASE("distribution comparison ratios") {
  Matrix r(4, 2), s(4, 2);
  r << 0, 1, 1, 1, 2, 1, 3, 1;
  s << 0, 1, 2, 2, 4, 3, 6, 4;
  const auto cmp = compare_distributions(r, s, {"x", "y"});
  CHECK(cmp.std_ratio(0) == doctest::Approx(2.0));
  CHECK(std::isinf(cmp.std_ratio(1)));
  CHECK(cmp.wasserstein(0) == doctest::Approx(1.5));
}

TEST_CASE("empirical regret") {
  EnvConfig env;
  env.noise_std_fps = env.noise_std_temp = 0.0;
  // Greedy oracle policy in the noise-free simulator accrues no regret.
  RunLog log;
  log.setup.env = env;
  DvfsSimulator sim(env);
  sim.reset(0);
  for (int t = 1; t <= 50; ++t) {
    StepRecord r;
    r.t = t;
    r.state = sim.state();
    double best = -1e9;
    for (int a = 0; a < env.num_actions; ++a) {
      const double v = reward_components(dynamics_noise_free(r.state, a, env), env).total;
      if (v > best) {
        best = v;
        r.action = a;
      }
    }
    r.reward = sim.step(r.action).reward;
    log.steps.push_back(r);
  }
  const auto regret = empirical_regret(log, env);
  REQUIRE(regret.size() == 50);
  CHECK(std::abs(regret.back()) < 1e-9);

  // A fixed poor action: per-step regret >= 0, so the trace is non-decreasing.
  RunLog bad;
  bad.setup.env = env;
  sim.reset(0);
  for (int t = 1; t <= 50; ++t) {
    StepRecord r;
    r.t = t;
    r.state = sim.state();
    r.action = 11;
    r.reward = sim.step(11).reward;
    bad.steps.push_back(r);
  }
  const auto trace = empirical_regret(bad, env);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-12);
  CHECK(trace.back() > 0.0);

  EnvConfig other = env;
  other.target_fps = 30.0;
  CHECK_THROWS_AS(empirical_regret(bad, other), ConfigError);
}

TEST_CASE("early fps gain") {
  const std::vector<double> fps{10, 20, 30, 40};
  const RunLog a = log_from(fps);
  CHECK(early_fps_gain(a, a, 4) == 1.0);
  std::vector<double> doubled;
  for (double f : fps) doubled.push_back(2 * f);
  CHECK(early_fps_gain(log_from(doubled), a, 4) == doctest::Approx(2.0));
  CHECK(early_fps_gain(log_from(doubled), a, 2) == doctest::Approx(2.0));
}

TEST_CASE("q-value stability") {
  std::vector<double> fps(40, 60.0), constant(40, 3.0), alternating(40);
  for (std::size_t i = 0; i < 40; ++i) alternating[i] = i % 2 ? 1.0 : -1.0;
  CHECK(qvalue_stability(log_from(fps, constant)) == 0.0);
  CHECK(qvalue_stability(log_from(fps, alternating)) == doctest::Approx(1.0));
  std::vector<double> shifted;
  for (double q : alternating) shifted.push_back(q + 10.0);
  CHECK(qvalue_stability(log_from(fps, shifted)) ==
        doctest::Approx(qvalue_stability(log_from(fps, alternating))));
  CHECK_THROWS(qvalue_stability(log_from({1, 2}, {1, 2})));
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
}
