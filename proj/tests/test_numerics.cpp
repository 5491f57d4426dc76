#include <doctest.h>

#include <cmath>
#include <random>

#include "dbnmix/autodiff.hpp"
#include "dbnmix/errors.hpp"
#include "dbnmix/optim.hpp"
#include "dbnmix/tensor.hpp"
#include "oracles.hpp"

using namespace dbnmix;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t({r, c});
  for (double& v : t.data()) v = n(rng);
  return t;
}

}  // namespace

TEST_CASE("tensor shape invariant") {
  CHECK(Tensor({3, 4}).size() == 12);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor::vector({1, 2}).rows(), DimensionError);
  CHECK_THROWS_AS(require_finite(Tensor::vector({1.0, NAN}), "x"), NumericError);
}

TEST_CASE("forward_linear") {
  SUBCASE("identity-like weight") {
    const Tensor out = linear_forward(Tensor::matrix({{1, 0}}), Tensor::matrix({{2, 0}, {0, 3}}), Tensor::vector({0, 0}));
    CHECK(out == Tensor::matrix({{2, 0}}));
  }
  SUBCASE("zero input gives the bias on every row") {
    std::mt19937_64 rng(1);
    const Tensor b = Tensor::vector({0.5, -1.5, 2.0});
    const Tensor out = linear_forward(Tensor({4, 5}), random_matrix(5, 3, rng), b);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t h = 0; h < 3; ++h) CHECK(out(r, h) == b[h]);
  }
  SUBCASE("matches a triple-loop oracle") {
    std::mt19937_64 rng(7);
    const Tensor x = random_matrix(3, 4, rng);
    const Tensor w = random_matrix(4, 2, rng);
    const Tensor b = Tensor::vector({0.25, -0.75});
    const Tensor out = linear_forward(x, w, b);
    const auto expected = oracle::matmul(oracle::to_rows(x), oracle::to_rows(w));
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(out(i, j) == doctest::Approx(expected[i][j] + b[j]).epsilon(1e-14));
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(linear_forward(Tensor({2, 3}), Tensor({4, 2}), Tensor({2})), DimensionError);
    CHECK_THROWS_AS(linear_forward(Tensor({2, 3}), Tensor({3, 2}), Tensor({3})), DimensionError);
  }
}

TEST_CASE("backward on simple losses") {
  ParamStore store;
  Parameter& w = store.add("w", Tensor::vector({1.5, -2.0, 0.25}));

  SUBCASE("sum gives all-ones") {
    Tape tape;
    tape.backward(sum(tape.parameter(w)));
    CHECK(w.grad == Tensor::vector({1, 1, 1}));
  }
  SUBCASE("half squared norm gives w") {
    Tape tape;
    tape.backward(scale(sum_squares(tape.parameter(w)), 0.5));
    CHECK(w.grad == w.value);
  }
  SUBCASE("non-scalar loss is a contract error") {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(tape.parameter(w)), ContractError);
  }
  SUBCASE("gradients accumulate across backward calls until zeroed") {
    Tape t1, t2;
    t1.backward(sum(t1.parameter(w)));
    t2.backward(sum(t2.parameter(w)));
    CHECK(w.grad == Tensor::vector({2, 2, 2}));
    const Tensor before_value = w.value;
    const Tensor before_momentum = w.momentum;
    store.zero_grad();
    CHECK(w.grad == Tensor::vector({0, 0, 0}));
    CHECK(w.value == before_value);
    CHECK(w.momentum == before_momentum);
  }
}

TEST_CASE("three-layer MLP gradients match central differences") {
  std::mt19937_64 rng(42);
  ParamStore store;
  store.add("w1", random_matrix(3, 5, rng, 0.8));
  store.add("b1", random_matrix(1, 5, rng, 0.3));
  store.add("w2", random_matrix(5, 4, rng, 0.8));
  store.add("b2", random_matrix(1, 4, rng, 0.3));
  store.add("w3", random_matrix(4, 3, rng, 0.8));
  store.add("b3", random_matrix(1, 3, rng, 0.3));
  for (auto& p : store) {
    if (p.value.rank() == 2 && p.value.rows() == 1) p.value = Tensor({p.value.cols()}, std::vector<double>(p.value.data().begin(), p.value.data().end()));
    p.grad = Tensor::zeros_like(p.value);
    p.momentum = Tensor::zeros_like(p.value);
  }
  const Tensor x = random_matrix(6, 3, rng);
  Tensor y({6, 3});
  for (std::size_t i = 0; i < 6; ++i) y(i, i % 3) = 1.0;

  auto build = [&](Tape& tape) {
    Var h = relu(linear(tape.constant(x), tape.parameter(store.at("w1")), tape.parameter(store.at("b1"))));
    h = relu(linear(h, tape.parameter(store.at("w2")), tape.parameter(store.at("b2"))));
    Var z = linear(h, tape.parameter(store.at("w3")), tape.parameter(store.at("b3")));
    return soft_cross_entropy(log_softmax(z), y);
  };
  {
    Tape tape;
    tape.backward(build(tape));
  }
  auto loss = [&] {
    Tape tape;
    return build(tape).value().item();
  };
  for (auto& p : store) {
    const auto numeric = oracle::central_difference(p.value.data(), loss);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      CHECK(oracle::relative_error(p.grad[i], numeric[i]) < 1e-4);
    }
  }
}

TEST_CASE("backward is linear in the loss scale") {
  std::mt19937_64 rng(3);
  ParamStore a, b;
  const Tensor w0 = random_matrix(4, 3, rng);
  const Tensor x = random_matrix(5, 4, rng);
  a.add("w", w0);
  b.add("w", w0);
  const double factor = -2.75;
  {
    Tape t;
    t.backward(sum_squares(relu(linear(t.constant(x), t.parameter(a.at("w")), t.constant(Tensor({3}))))));
  }
  {
    Tape t;
    t.backward(scale(sum_squares(relu(linear(t.constant(x), t.parameter(b.at("w")), t.constant(Tensor({3}))))), factor));
  }
  for (std::size_t i = 0; i < w0.size(); ++i) CHECK(b.at("w").grad[i] == doctest::Approx(factor * a.at("w").grad[i]).epsilon(1e-14));
}

TEST_CASE("ops reject non-finite results") {
  ParamStore store;
  Parameter& w = store.add("w", Tensor::vector({1e308, 1e308}));
  Tape tape;
  CHECK_THROWS_AS(sum(tape.parameter(w)), NumericError);
}

TEST_CASE("sgd step") {
  SUBCASE("plain gradient descent") {
    ParamStore s;
    Parameter& p = s.add("p", Tensor::vector({1.0, -2.0}));
    p.grad = Tensor::vector({0.5, 0.25});
    SgdConfig c;
    c.learning_rate = 1.0;
    c.momentum = 0.0;
    c.weight_decay = 0.0;
    sgd_step(s, c, 0);
    CHECK(p.value == Tensor::vector({0.5, -2.25}));
  }
  SUBCASE("step decay schedule") {
    SgdConfig c;
    c.learning_rate = 0.1;
    c.decay_epochs = {120, 160};
    c.decay_factor = 0.1;
    CHECK(c.learning_rate_at(0) == 0.1);
    CHECK(c.learning_rate_at(119) == 0.1);
    CHECK(c.learning_rate_at(130) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(c.learning_rate_at(170) == doctest::Approx(0.001).epsilon(1e-15));
  }
  SUBCASE("two momentum steps on a fixed gradient move lr * 2.9 * g") {
    // v1 = g, v2 = 0.9 g + g: displacement lr (1 + 1.9) g.
    ParamStore s;
    Parameter& p = s.add("p", Tensor::vector({0.0, 0.0}));
    const Tensor g = Tensor::vector({1.0, -3.0});
    SgdConfig c;
    c.learning_rate = 0.05;
    c.momentum = 0.9;
    c.weight_decay = 0.0;
    for (int i = 0; i < 2; ++i) {
      p.grad = g;
      sgd_step(s, c, 0);
    }
    for (std::size_t i = 0; i < 2; ++i) CHECK(p.value[i] == doctest::Approx(-0.05 * 2.9 * g[i]).epsilon(1e-14));
  }
  SUBCASE("weight decay enters the velocity") {
    ParamStore s;
    Parameter& p = s.add("p", Tensor::vector({2.0}));
    SgdConfig c;
    c.learning_rate = 0.5;
    c.momentum = 0.0;
    c.weight_decay = 0.1;
    sgd_step(s, c, 0);
    CHECK(p.value[0] == doctest::Approx(2.0 - 0.5 * 0.2));
  }
  SUBCASE("config validation") {
    SgdConfig c;
    c.decay_epochs = {160, 120};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SgdConfig{};
    c.momentum = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SgdConfig{};
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
}
