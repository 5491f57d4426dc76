#include <doctest.h>

#include <sstream>

#include "dbnmix/errors.hpp"
#include "dbnmix/eval.hpp"

using namespace dbnmix;

namespace {

Dataset grid_points(const std::vector<std::uint32_t>& labels, std::size_t k, std::size_t dim = 2) {
  Tensor x({labels.size(), dim});
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = 0; j < dim; ++j) x(i, j) = static_cast<double>(i) * 0.1 - static_cast<double>(j) * 0.7;
  return make_dataset(std::move(x), labels, k);
}

// Network whose output is class 0 everywhere: all weights zero, head bias favours 0.
Network constant_network(std::size_t d, std::size_t k) {
  NetworkConfig c;
  c.input_dim = d;
  c.num_classes = k;
  c.hidden = {4};
  Network m(c, 1);
  for (auto& p : m.params()) p.value.fill(0.0);
  m.params().at("head_c.0.bias").value[0] = 1.0;
  m.params().at("head_r.0.bias").value[0] = 1.0;
  return m;
}

}  // namespace

TEST_CASE("grouped accuracy") {
  const std::vector<std::size_t> train_counts{500, 50, 5};
  const std::vector<std::uint32_t> labels{0, 0, 1, 1, 2, 2};
  SUBCASE("perfect") {
    const std::vector<std::size_t> pred{0, 0, 1, 1, 2, 2};
    const auto a = grouped_accuracy(pred, labels, train_counts);
    CHECK(a.all == 1.0);
    CHECK(*a.many == 1.0);
    CHECK(*a.medium == 1.0);
    CHECK(*a.few == 1.0);
  }
  SUBCASE("constant class 0 on balanced K-class test") {
    const std::vector<std::size_t> pred(6, 0);
    const auto a = grouped_accuracy(pred, labels, train_counts);
    CHECK(a.all == doctest::Approx(1.0 / 3.0));
    CHECK(a.balanced() == doctest::Approx(a.all).epsilon(1e-15));
    CHECK(*a.many == 1.0);
    CHECK(*a.few == 0.0);
  }
  SUBCASE("empty groups stay unset") {
    const std::vector<std::size_t> pred{0, 1, 0, 1};
    const auto a = grouped_accuracy(pred, std::vector<std::uint32_t>{0, 0, 1, 1}, std::vector<std::size_t>{200, 150});
    CHECK(a.many.has_value());
    CHECK(!a.medium.has_value());
    CHECK(!a.few.has_value());
    std::ostringstream os;
    write_grouped_accuracy_csv(a, os);
    CHECK(os.str() == "name,accuracy\nclass_0,0.5\nclass_1,0.5\nall,0.5\nmany,0.5\nmedium,\nfew,\n");
  }
  SUBCASE("balanced equals all on balanced tests for arbitrary predictions") {
    const std::vector<std::size_t> pred{2, 0, 1, 0, 2, 1};
    const auto a = grouped_accuracy(pred, labels, train_counts);
    CHECK(a.balanced() == doctest::Approx(a.all).epsilon(1e-15));
  }
}

TEST_CASE("argmax ties go to the lowest index") {
  const auto p = argmax_rows(Tensor::matrix({{1, 3, 3}, {5, 5, 0}, {-1, -2, 0}}));
  CHECK(p == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("evaluate") {
  SUBCASE("constant network on a balanced test") {
    const Dataset test = grid_points({0, 1, 2, 3, 0, 1, 2, 3}, 4);
    const auto a = evaluate(constant_network(2, 4), test, EvalMode::Fused, std::vector<std::size_t>{400, 100, 30, 4});
    CHECK(a.all == 0.25);
    CHECK(a.per_class == std::vector<double>{1.0, 0.0, 0.0, 0.0});
  }
  SUBCASE("fused accuracy agrees with averaged-logit argmax") {
    NetworkConfig c;
    c.input_dim = 2;
    c.num_classes = 3;
    c.hidden = {8, 8};
    Network m(c, 17);
    std::vector<std::uint32_t> labels;
    for (std::uint32_t i = 0; i < 60; ++i) labels.push_back(i % 3);
    const Dataset test = grid_points(labels, 3);
    const Tensor zc = m.branch_logits(test.features, Branch::Conventional);
    const Tensor zr = m.branch_logits(test.features, Branch::Rebalancing);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < 3; ++k)
        if (zc(i, k) + zr(i, k) > zc(i, best) + zr(i, best)) best = k;
      correct += best == test.labels[i];
    }
    const auto a = evaluate(m, test, EvalMode::Fused, std::vector<std::size_t>{100, 30, 3});
    CHECK(a.all == doctest::Approx(static_cast<double>(correct) / 60.0).epsilon(1e-15));
    const auto conv = evaluate(m, test, EvalMode::Conventional, std::vector<std::size_t>{100, 30, 3});
    const auto pred = argmax_rows(zc);
    std::size_t conv_correct = 0;
    for (std::size_t i = 0; i < 60; ++i) conv_correct += pred[i] == test.labels[i];
    CHECK(conv.all == doctest::Approx(static_cast<double>(conv_correct) / 60.0).epsilon(1e-15));
  }
  SUBCASE("class count mismatch") {
    const Dataset test = grid_points({0, 1, 2}, 3);
    CHECK_THROWS_AS(evaluate(constant_network(2, 4), test, EvalMode::Fused, std::vector<std::size_t>{4, 3, 2, 1}), DimensionError);
  }
  SUBCASE("mode names") {
    CHECK(parse_eval_mode("fused") == EvalMode::Fused);
    CHECK(parse_eval_mode("conventional") == EvalMode::Conventional);
    CHECK(parse_eval_mode("rebalancing") == EvalMode::Rebalancing);
    CHECK_THROWS_AS(parse_eval_mode("other"), ConfigError);
  }
}

TEST_CASE("boundary grid") {
  NetworkConfig c;
  c.input_dim = 2;
  c.num_classes = 2;
  c.hidden = {8};
  Network m(c, 4);
  const Dataset ds = grid_points({0, 1, 0, 1, 0}, 2);
  SUBCASE("2x2 gives four rows with dataset corners at margin 0") {
    const auto g = boundary_grid(m, ds, 2, 2, 0.0);
    REQUIRE(g.cells.size() == 4);
    CHECK(g.cells[0].x == 0.0);
    CHECK(g.cells[0].y == -0.7);
    CHECK(g.cells[3].x == ds.features(4, 0));
    CHECK(g.cells[3].y == ds.features(4, 1));
    std::ostringstream os;
    write_boundary_csv(g, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "x,y,pred,p0");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 4);
  }
  SUBCASE("margin pads the box") {
    const auto g = boundary_grid(m, ds, 3, 4, 0.5);
    CHECK(g.x_min == -0.5);
    CHECK(g.y_max == doctest::Approx(ds.features(4, 1) + 0.5));
    CHECK(g.cells.size() == 12);
    CHECK(g.cells.back().x == g.x_max);
    CHECK(g.cells.back().y == g.y_max);
  }
  SUBCASE("each cell agrees with infer") {
    const auto g = boundary_grid(m, ds, 7, 5, 1.0);
    Tensor pts({g.cells.size(), 2});
    for (std::size_t i = 0; i < g.cells.size(); ++i) {
      pts(i, 0) = g.cells[i].x;
      pts(i, 1) = g.cells[i].y;
    }
    const auto out = infer(m, pts);
    const auto pred = argmax_rows(out.logits);
    for (std::size_t i = 0; i < g.cells.size(); ++i) {
      CHECK(g.cells[i].predicted == pred[i]);
      CHECK(g.cells[i].p0 == out.probabilities(i, 0));
    }
  }
  SUBCASE("non-2-D data") {
    NetworkConfig c3 = c;
    c3.input_dim = 3;
    CHECK_THROWS_AS(boundary_grid(Network(c3, 1), grid_points({0, 1}, 2, 3), 2, 2), UnsupportedDimensionError);
  }
}
