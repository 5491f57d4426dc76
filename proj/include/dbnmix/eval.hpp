#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "dbnmix/datasets.hpp"
#include "dbnmix/model.hpp"

namespace dbnmix {

enum class EvalMode { Fused, Conventional, Rebalancing };

EvalMode parse_eval_mode(std::string_view text);

struct GroupedAccuracy {
  double all = 0.0;  // top-1 over all test samples
  // Mean per-class accuracy over member classes; empty when the group has none.
  std::optional<double> many;
  std::optional<double> medium;
  std::optional<double> few;
  std::vector<double> per_class;

  // Unweighted mean of per_class (equals `all` on a balanced test set).
  double balanced() const;
};

// Predicted class per row (ties resolve to the lowest index).
std::vector<std::size_t> argmax_rows(const Tensor& scores);

// Logits used for prediction: fused (averaged heads) or one head alone, never
// temperature scaled.
Tensor evaluation_logits(const Network& model, const Tensor& x, EvalMode mode);

// Groups come from `train_counts` (Many/Medium/Few thresholds on training sizes).
GroupedAccuracy evaluate(const Network& model, const Dataset& test, EvalMode mode,
                         std::span<const std::size_t> train_counts);
GroupedAccuracy grouped_accuracy(std::span<const std::size_t> predictions, std::span<const std::uint32_t> labels,
                                 std::span<const std::size_t> train_counts);

// Header `name,accuracy`; rows class_0..class_{K-1}, then all, many, medium,
// few (empty accuracy for a group without classes).
void write_grouped_accuracy_csv(const GroupedAccuracy& acc, std::ostream& os);

struct BoundaryCell {
  double x = 0.0;
  double y = 0.0;
  std::size_t predicted = 0;
  double p0 = 0.0;  // fused probability of class 0
};

struct BoundaryGrid {
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
  std::size_t resolution_x = 0, resolution_y = 0;
  std::vector<BoundaryCell> cells;  // y-major: row j holds resolution_x cells
};

// Regular grid over the dataset bounding box padded by `margin` on each side,
// including both edges. Throws UnsupportedDimensionError unless D == 2.
BoundaryGrid boundary_grid(const Network& model, const Dataset& dataset, std::size_t resolution_x,
                           std::size_t resolution_y, double margin = 0.0);

// Header `x,y,pred,p0`.
void write_boundary_csv(const BoundaryGrid& grid, std::ostream& os);
void export_boundary(const Network& model, const Dataset& dataset, std::size_t resolution, double margin,
                     const std::filesystem::path& path);

}  // namespace dbnmix
