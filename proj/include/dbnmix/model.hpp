#pragma once

// Shared-backbone classifier with one (single-branch) or two (dual-branch)
// heads, class-wise temperature scaling for training, and fused inference.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dbnmix/autodiff.hpp"
#include "dbnmix/tensor.hpp"

namespace dbnmix {

enum class Branch { Conventional, Rebalancing };

std::string_view branch_name(Branch b);

struct NetworkConfig {
  std::size_t input_dim = 2;
  std::size_t num_classes = 2;
  std::vector<std::size_t> hidden{64, 64};  // backbone widths, ReLU after each
  std::size_t head_depth = 1;               // linear layers per head
  std::size_t head_hidden = 64;             // width of inner head layers when head_depth > 1
  bool dual_branch = true;

  void validate() const;
};

class Network {
 public:
  // Kaiming-uniform weights (bound sqrt(6 / fan_in)) on ReLU-fed layers,
  // bound 1/sqrt(fan_in) on head output layers, zero biases.
  Network(NetworkConfig config, std::uint64_t seed);
  // Wraps existing parameters (checkpoint loading); names must match the layout.
  Network(NetworkConfig config, ParamStore params);

  const NetworkConfig& config() const noexcept { return config_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }
  std::size_t num_branches() const noexcept { return config_.dual_branch ? 2 : 1; }

  // Taped passes for training.
  Var backbone(Tape& tape, Var x);
  Var head(Tape& tape, Var features, Branch branch);

  // Untaped evaluation, read-only.
  Tensor features(const Tensor& x) const;
  Tensor head_logits(const Tensor& features, Branch branch) const;
  Tensor branch_logits(const Tensor& x, Branch branch) const { return head_logits(features(x), branch); }

  // Names of the layer parameters in creation order.
  static std::vector<std::pair<std::string, std::vector<std::size_t>>> layout(const NetworkConfig& config);

 private:
  std::string head_prefix(Branch branch) const;

  NetworkConfig config_;
  ParamStore params_;
};

// Per-class temperatures:
//   B_k = eps * N_k / N_max + (1 - eps),  T_k = (max_j B_j / B_k)^(1/eta).
struct TemperatureSchedule {
  double eta = 1.0;
  double epsilon = 0.0;
  std::vector<std::size_t> class_counts;
  std::vector<double> balance;       // B_k
  std::vector<double> temperatures;  // T_k

  // All-ones schedule for K classes (scaling disabled).
  static TemperatureSchedule identity(std::size_t num_classes);
};

// Throws ConfigError unless eta > 0, 0 < epsilon <= 1 and counts are positive.
TemperatureSchedule temperatures(double eta, double epsilon, std::span<const std::size_t> class_counts);

// Row-wise softmax of z_k / T_k, stabilized by the row max of the scaled logits.
Tensor scaled_softmax(const Tensor& logits, const TemperatureSchedule& schedule);
Tensor softmax(const Tensor& logits);

// Batch mean of -sum_k y_k log p_k.
double cross_entropy(const Tensor& probabilities, const Tensor& targets);
// 0.5 * CE(p_c, y_c) + 0.5 * CE(p_r, y_r)
double dbn_loss(const Tensor& p_c, const Tensor& y_c, const Tensor& p_r, const Tensor& y_r);

struct BranchLogits {
  Var conventional;
  Var rebalancing;
};

// z_c from the conventional head on x_c, z_r from the re-balancing head on x_r;
// both pass through the same backbone parameters.
BranchLogits forward_train(Network& model, Tape& tape, const Tensor& x_c, const Tensor& x_r);

// Taped mean soft-label cross entropy of temperature-scaled logits.
Var scaled_cross_entropy(Var logits, const Tensor& targets, const TemperatureSchedule& schedule);

// 0.5 * L(p_c, y_c) + 0.5 * L(p_r, y_r) on the tape.
Var dbn_loss(Var z_c, const Tensor& y_c, Var z_r, const Tensor& y_r, const TemperatureSchedule& schedule);

struct SbnForward {
  Var logits;
  Var loss;
  Tensor probabilities;  // temperature-scaled, training mode
};

SbnForward sbn_forward_train(Network& model, Tape& tape, const Tensor& x, const Tensor& y,
                             const TemperatureSchedule& schedule);

struct Inference {
  Tensor logits;         // 0.5 * (z_c + z_r) for dual-branch, z for single-branch
  Tensor probabilities;  // plain softmax, no temperature
};

Inference infer(const Network& model, const Tensor& x);

// Checkpoint: "DBNM", u16 version, u32-length config echo text, the network
// shape, then every parameter (name, shape, f64 data). Little-endian.
void save_checkpoint(const Network& model, const std::string& config_echo,
                     std::span<const std::size_t> class_counts, const std::filesystem::path& path);

struct Checkpoint {
  Network model;
  std::string config_echo;
  std::vector<std::size_t> class_counts;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dbnmix
