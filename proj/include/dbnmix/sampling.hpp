#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dbnmix/datasets.hpp"
#include "dbnmix/rng.hpp"
#include "dbnmix/tensor.hpp"

namespace dbnmix {

// Exponent of the re-balanced sampler. Infinity is a distinguished value so
// the class-balanced case is exact rather than a large float.
class Gamma {
 public:
  static Gamma finite(double value);
  static Gamma infinity() { return Gamma(); }
  // Accepts a decimal number or the literal "inf".
  static Gamma parse(std::string_view text);

  bool is_infinite() const noexcept { return !value_; }
  double value() const;
  std::string to_string() const;

  friend bool operator==(const Gamma&, const Gamma&) = default;

 private:
  Gamma() = default;
  std::optional<double> value_;
};

// P_k = w_k / sum_j w_j with w_k = (N_max / N_k)^(1/gamma); uniform for gamma = inf.
std::vector<double> sampler_distribution(Gamma gamma, std::span<const std::size_t> counts);

struct BatchSpec {
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  bool drop_last = false;

  // ceil(N/B) batches, or floor(N/B) (at least one) with drop_last.
  std::size_t batches_per_epoch(std::size_t n) const;
  // Size of batch `index` within an epoch over n samples.
  std::size_t batch_size_at(std::size_t index, std::size_t n) const;
};

struct Batch {
  Tensor x;  // B x D
  Tensor y;  // B x K one-hot
  std::vector<std::uint32_t> labels;
  std::vector<std::size_t> indices;
};

Batch gather_batch(const Dataset& dataset, std::span<const std::size_t> indices);

// Each index drawn i.i.d. with probability 1/N.
class UniformSampler {
 public:
  UniformSampler(const Dataset& dataset, std::uint64_t seed);

  std::vector<std::size_t> draw_indices(std::size_t count);
  Batch next_batch(std::size_t size) { return gather_batch(*dataset_, draw_indices(size)); }

 private:
  const Dataset* dataset_;
  Rng rng_;
  std::uniform_int_distribution<std::size_t> pick_;
};

// Class k with probability P_k, then an instance uniformly within the class.
class RebalancedSampler {
 public:
  RebalancedSampler(const Dataset& dataset, Gamma gamma, std::uint64_t seed);

  const std::vector<double>& class_probabilities() const noexcept { return probabilities_; }
  std::size_t draw_class();
  std::vector<std::size_t> draw_indices(std::size_t count);
  Batch next_batch(std::size_t size) { return gather_batch(*dataset_, draw_indices(size)); }

 private:
  const Dataset* dataset_;
  std::vector<std::vector<std::size_t>> by_class_;
  std::vector<double> probabilities_;
  Rng rng_;
  std::discrete_distribution<std::size_t> class_dist_;
};

// One epoch of batches from each sampler.
std::vector<Batch> uniform_batches(const Dataset& dataset, const BatchSpec& spec);
std::vector<Batch> rebalanced_batches(const Dataset& dataset, Gamma gamma, const BatchSpec& spec);

}  // namespace dbnmix
