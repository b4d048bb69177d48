#include <doctest.h>

#include "dvfsflow/errors.hpp"
#include "dvfsflow/nn.hpp"

using namespace dvfsflow;
using nn::Activation;

TEST_CASE("init is seeded, biases start at zero, shapes follow layer sizes") {
  const auto a = nn::init_mlp({4, 6, 6, 12}, Activation::tanh, 1);
  const auto b = nn::init_mlp({4, 6, 6, 12}, Activation::tanh, 1);
  CHECK(a == b);
  CHECK_FALSE(a == nn::init_mlp({4, 6, 6, 12}, Activation::tanh, 2));
  for (int l = 0; l < a.num_layers(); ++l) CHECK(a.bias(l).isZero());

  const auto c = nn::init_mlp({2, 3, 1}, Activation::tanh, 0);
  CHECK(c.weight(0).rows() == 3);
  CHECK(c.weight(0).cols() == 2);
  CHECK(c.weight(1).rows() == 1);
  CHECK(c.weight(1).cols() == 3);
  CHECK(c.parameters().size() == 3 * 2 + 3 + 1 * 3 + 1);

  CHECK_THROWS_AS(nn::MlpD({4}, Activation::tanh), ConfigError);
  CHECK_THROWS_AS(nn::MlpD({4, 0, 2}, Activation::tanh), ConfigError);
}

TEST_CASE("forward edge cases") {
  const nn::MlpD zero({3, 5, 2}, Activation::tanh);
  CHECK(nn::forward(zero, Vector(Vector::Random(3))).isZero());

  nn::MlpD id({3, 3}, Activation::tanh);
  id.weight(0) = Matrix::Identity(3, 3);
  const Vector x = Vector::LinSpaced(3, -2.0, 5.0);
  CHECK(nn::forward(id, x).isApprox(x));

  CHECK_THROWS_AS(nn::forward(id, Vector(Vector::Zero(4))), DomainError);

  // |output| <= ||W_last||_1-row * 1 + |b| when hidden units are tanh
  auto net = nn::init_mlp({2, 8, 1}, Activation::tanh, 3);
  const double bound = net.weight(1).cwiseAbs().sum() + net.bias(1).cwiseAbs().sum();
  const Matrix big = 1e3 * Matrix::Random(2, 100);
  CHECK(nn::forward_batch(net, big).cwiseAbs().maxCoeff() <= bound + 1e-12);
}

TEST_CASE("loss weighting") {
  auto net = nn::init_mlp({2, 4, 2}, Activation::tanh, 5);
  const Matrix x = Matrix::Random(2, 6);
  const Matrix y = nn::forward_batch(net, x);
  const auto exact = nn::weighted_squared_loss(net, x, y, Vector(Vector::Ones(2)));
  CHECK(exact.loss == 0.0);
  CHECK(exact.grad.isZero());

  Matrix y2 = y;
  y2.row(1).array() += 1.0;  // error only in the second output
  const Vector first_only = (Vector(2) << 1.0, 0.0).finished();
  CHECK(nn::weighted_squared_loss(net, x, y2, first_only).loss == 0.0);

  const Matrix y3 = Matrix::Random(2, 6);
  const double mse = (nn::forward_batch(net, x) - y3).array().square().sum() / 6.0;
  CHECK(nn::weighted_squared_loss(net, x, y3, Vector(Vector::Ones(2))).loss == doctest::Approx(mse));
  CHECK_THROWS_AS(nn::weighted_squared_loss(net, x, y3, Vector(Vector::Constant(2, -1.0))),
                  DomainError);
}

TEST_CASE("first Adam step moves by about -lr * sign(g)") {
  nn::MlpD net({1, 1}, Activation::tanh);
  net.parameters() << 0.5, 0.0;  // w, b
  auto adam = nn::make_adam(net, 0.01);
  Vector g(2);
  g << 3.7, -0.2;
  nn::adam_update(net, adam, g);
  CHECK(net.parameters()(0) == doctest::Approx(0.5 - 0.01).epsilon(1e-6));
  CHECK(net.parameters()(1) == doctest::Approx(0.0 + 0.01).epsilon(1e-6));

  auto frozen = nn::make_adam(net, 0.0);
  const Vector before = net.parameters();
  nn::adam_update(net, frozen, g);
  CHECK(net.parameters() == before);

  nn::reset_adam(adam, 0.02);
  CHECK(adam.m.isZero());
  CHECK(adam.v.isZero());
  CHECK(adam.step == 0);
}

TEST_CASE("gradient check on every architecture in use") {
  Rng rng(9);
  struct Arch {
    std::vector<int> sizes;
    Activation act;
  };
  for (const Arch& a : {Arch{{4, 6, 6, 12}, Activation::tanh}, Arch{{12, 64, 64, 11}, Activation::tanh},
                        Arch{{5, 32, 32, 6}, Activation::tanh}, Arch{{3, 7, 2}, Activation::relu},
                        Arch{{2, 2}, Activation::tanh}}) {
    const auto net = nn::init_mlp(a.sizes, a.act, 17);
    const Matrix x = Matrix::Random(a.sizes.front(), 9);
    const Matrix y = Matrix::Random(a.sizes.back(), 9);
    const Matrix w = Matrix::Random(a.sizes.back(), 9).cwiseAbs();
    const auto r = nn::grad_check(net, x, y, w, 1e-4, rng);
    CHECK(r.passed);
    CHECK(r.parameters_checked >= std::min<int>(50, int(net.parameters().size())));
  }
}

TEST_CASE("single linear parameter: closed-form gradient") {
  // y_hat = w x, loss = (1/n) sum (w x - y)^2, dL/dw = (2/n) sum x (w x - y)
  nn::MlpD net({1, 1}, Activation::tanh);
  net.parameters() << 1.5, 0.0;
  Matrix x(1, 3), y(1, 3);
  x << 1.0, -2.0, 0.5;
  y << 0.0, 1.0, 2.0;
  const Matrix w = Matrix::Ones(1, 3);
  const double expected = (2.0 / 3.0) * ((1.5 - 0.0) * 1.0 + (-3.0 - 1.0) * -2.0 + (0.75 - 2.0) * 0.5);
  CHECK(nn::weighted_squared_loss(net, x, y, w).grad(0) == doctest::Approx(expected));
  Rng rng(0);
  CHECK(nn::grad_check(net, x, y, w, 1e-6, rng).passed);
}

TEST_CASE("train_step rejects non-finite batches") {
  auto net = nn::init_mlp({2, 3, 1}, Activation::tanh, 0);
  auto adam = nn::make_adam(net, 0.01);
  Matrix x = Matrix::Zero(2, 2);
  x(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(nn::train_step(net, adam, x, Matrix(Matrix::Zero(1, 2)), Vector(Vector::Ones(1))),
                  NumericError);
}

TEST_CASE("single precision instantiation trains") {
  auto net = nn::init_mlp<float>({1, 8, 1}, Activation::tanh, 4);
  auto adam = nn::make_adam(net, 0.01f);
  const Eigen::MatrixXf x = Eigen::RowVectorXf::LinSpaced(32, -1.f, 1.f);
  const Eigen::MatrixXf y = 0.5f * x;
  const Eigen::VectorXf ones = Eigen::VectorXf::Ones(1);
  float first = 0.f, last = 0.f;
  for (int i = 0; i < 300; ++i) {
    last = nn::train_step(net, adam, x, y, ones);
    if (i == 0) first = last;
  }
  CHECK(last < 0.1f * first);
}
