#include "dbnmix/eval.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "binary_io.hpp"
#include "dbnmix/errors.hpp"

namespace dbnmix {

EvalMode parse_eval_mode(std::string_view text) {
  if (text == "fused") return EvalMode::Fused;
  if (text == "conventional" || text == "conventional-branch") return EvalMode::Conventional;
  if (text == "rebalancing" || text == "rebalancing-branch") return EvalMode::Rebalancing;
  throw ConfigError("unknown evaluation mode '" + std::string(text) + "'");
}

double GroupedAccuracy::balanced() const {
  if (per_class.empty()) return 0.0;
  return std::accumulate(per_class.begin(), per_class.end(), 0.0) / static_cast<double>(per_class.size());
}

std::vector<std::size_t> argmax_rows(const Tensor& scores) {
  std::vector<std::size_t> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto row = scores.row(r);
    out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Tensor evaluation_logits(const Network& model, const Tensor& x, EvalMode mode) {
  switch (mode) {
    case EvalMode::Fused: return infer(model, x).logits;
    case EvalMode::Conventional: return model.branch_logits(x, Branch::Conventional);
    case EvalMode::Rebalancing: return model.branch_logits(x, Branch::Rebalancing);
  }
  throw ContractError("bad evaluation mode");
}

GroupedAccuracy grouped_accuracy(std::span<const std::size_t> predictions, std::span<const std::uint32_t> labels,
                                 std::span<const std::size_t> train_counts) {
  if (predictions.size() != labels.size()) throw DimensionError("predictions and labels differ in length");
  const std::size_t k = train_counts.size();
  std::vector<std::size_t> hits(k, 0), totals(k, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k) throw DimensionError("test label outside the model's classes");
    ++totals[labels[i]];
    if (predictions[i] == labels[i]) {
      ++hits[labels[i]];
      ++correct;
    }
  }
  GroupedAccuracy acc;
  acc.all = labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
  acc.per_class.resize(k);
  double sums[3] = {0, 0, 0};
  std::size_t members[3] = {0, 0, 0};
  for (std::size_t c = 0; c < k; ++c) {
    acc.per_class[c] = totals[c] ? static_cast<double>(hits[c]) / static_cast<double>(totals[c]) : 0.0;
    if (totals[c] == 0) continue;
    const auto g = static_cast<std::size_t>(group_for_count(train_counts[c]));
    sums[g] += acc.per_class[c];
    ++members[g];
  }
  auto mean = [&](Group g) -> std::optional<double> {
    const auto i = static_cast<std::size_t>(g);
    if (members[i] == 0) return std::nullopt;
    return sums[i] / static_cast<double>(members[i]);
  };
  acc.many = mean(Group::Many);
  acc.medium = mean(Group::Medium);
  acc.few = mean(Group::Few);
  return acc;
}

GroupedAccuracy evaluate(const Network& model, const Dataset& test, EvalMode mode,
                         std::span<const std::size_t> train_counts) {
  if (test.num_classes() != model.config().num_classes || train_counts.size() != model.config().num_classes) {
    throw DimensionError("model has " + std::to_string(model.config().num_classes) + " classes, test set " +
                         std::to_string(test.num_classes()));
  }
  const auto predictions = argmax_rows(evaluation_logits(model, test.features, mode));
  return grouped_accuracy(predictions, test.labels, train_counts);
}

void write_grouped_accuracy_csv(const GroupedAccuracy& acc, std::ostream& os) {
  os << "name,accuracy\n";
  for (std::size_t c = 0; c < acc.per_class.size(); ++c) {
    os << "class_" << c << ',' << detail::format_double(acc.per_class[c]) << '\n';
  }
  os << "all," << detail::format_double(acc.all) << '\n';
  auto opt = [&](const char* name, const std::optional<double>& v) {
    os << name << ',';
    if (v) os << detail::format_double(*v);
    os << '\n';
  };
  opt("many", acc.many);
  opt("medium", acc.medium);
  opt("few", acc.few);
}

namespace {

double grid_coord(double lo, double hi, std::size_t i, std::size_t n) {
  if (n == 1) return lo;
  if (i + 1 == n) return hi;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

}  // namespace

BoundaryGrid boundary_grid(const Network& model, const Dataset& dataset, std::size_t resolution_x,
                           std::size_t resolution_y, double margin) {
  if (dataset.dim() != 2) {
    throw UnsupportedDimensionError("boundary export needs 2-D features, dataset has " +
                                    std::to_string(dataset.dim()));
  }
  if (resolution_x == 0 || resolution_y == 0) throw ConfigError("grid resolution must be positive");
  if (dataset.size() == 0) throw InvalidDatasetError("boundary export over an empty dataset");
  BoundaryGrid grid;
  grid.x_min = grid.y_min = std::numeric_limits<double>::infinity();
  grid.x_max = grid.y_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    grid.x_min = std::min(grid.x_min, dataset.features(i, 0));
    grid.x_max = std::max(grid.x_max, dataset.features(i, 0));
    grid.y_min = std::min(grid.y_min, dataset.features(i, 1));
    grid.y_max = std::max(grid.y_max, dataset.features(i, 1));
  }
  grid.x_min -= margin;
  grid.x_max += margin;
  grid.y_min -= margin;
  grid.y_max += margin;
  grid.resolution_x = resolution_x;
  grid.resolution_y = resolution_y;

  Tensor points({resolution_x * resolution_y, 2});
  for (std::size_t j = 0; j < resolution_y; ++j) {
    for (std::size_t i = 0; i < resolution_x; ++i) {
      points(j * resolution_x + i, 0) = grid_coord(grid.x_min, grid.x_max, i, resolution_x);
      points(j * resolution_x + i, 1) = grid_coord(grid.y_min, grid.y_max, j, resolution_y);
    }
  }
  const Inference out = infer(model, points);
  const auto predicted = argmax_rows(out.logits);
  grid.cells.reserve(points.rows());
  for (std::size_t r = 0; r < points.rows(); ++r) {
    grid.cells.push_back(BoundaryCell{points(r, 0), points(r, 1), predicted[r], out.probabilities(r, 0)});
  }
  return grid;
}

void write_boundary_csv(const BoundaryGrid& grid, std::ostream& os) {
  os << "x,y,pred,p0\n";
  for (const auto& c : grid.cells) {
    os << detail::format_double(c.x) << ',' << detail::format_double(c.y) << ',' << c.predicted << ','
       << detail::format_double(c.p0) << '\n';
  }
}

void export_boundary(const Network& model, const Dataset& dataset, std::size_t resolution, double margin,
                     const std::filesystem::path& path) {
  const BoundaryGrid grid = boundary_grid(model, dataset, resolution, resolution, margin);
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_boundary_csv(grid, os);
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace dbnmix
