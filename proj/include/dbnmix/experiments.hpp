#pragma once

// Desk-scale experiment presets: the two-half-moon toy study and the
// Gaussian long-tail ablation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dbnmix/datasets.hpp"
#include "dbnmix/eval.hpp"
#include "dbnmix/train.hpp"

namespace dbnmix {

struct DatasetPair {
  Dataset train;
  Dataset test;  // balanced
};

struct MoonsSetup {
  std::size_t n_majority = 1000;
  double imbalance_ratio = 100.0;
  double noise_sd = 0.25;
  std::size_t test_per_class = 500;
};

struct GaussianSetup {
  LongTailSpec spec{10, 500, 100.0, std::nullopt};
  std::size_t dim = 10;
  double class_sep = 4.0;
  std::size_t test_per_class = 100;
};

// Train and test sets use distinct streams derived from `seed`.
DatasetPair make_moons_pair(const MoonsSetup& setup, std::uint64_t seed);
DatasetPair make_gaussian_pair(const GaussianSetup& setup, std::uint64_t seed);

// Three-layer MLP (two hidden ReLU layers of 64 plus the head) for the toy study.
TrainConfig toy_config(Method method, std::uint64_t seed);

// The three toy-study learners: ERM, classic mixup, and single-branch
// bilateral mixup (uniform + class-balanced batches, no temperature scaling).
std::vector<TrainConfig> toy_study_configs(std::uint64_t seed);
std::string_view toy_label(const TrainConfig& config);

struct ToyRun {
  std::string label;
  std::uint64_t seed = 0;
  double majority_recall = 0.0;
  double minority_recall = 0.0;
  BoundaryGrid grid;
};

std::vector<ToyRun> run_toy_study(std::span<const std::uint64_t> seeds, const MoonsSetup& setup,
                                  std::size_t grid_resolution, double grid_margin, std::size_t jobs = 1);

// Writes boundary_<label>_seed<s>.csv per run and summary.csv
// (method,seed,majority_recall,minority_recall). With `write_points`, also
// points_seed<s>.csv holding each seed's training set.
std::vector<ToyRun> reproduce_fig1(const std::filesystem::path& output_dir, std::span<const std::uint64_t> seeds,
                                   const MoonsSetup& setup = {}, std::size_t grid_resolution = 100,
                                   bool write_points = false, std::size_t jobs = 1);

// Dual-branch ablation cell on the Gaussian long tail.
TrainConfig ablation_config(bool bilateral_mixup, bool temperature_scaling, std::uint64_t seed);

}  // namespace dbnmix
