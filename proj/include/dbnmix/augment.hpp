#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dbnmix/rng.hpp"
#include "dbnmix/sampling.hpp"
#include "dbnmix/tensor.hpp"

namespace dbnmix {

struct MixupConfig {
  double alpha = 1.0;      // symmetric Beta(alpha, alpha) shape
  bool per_batch = false;  // one lambda for the whole batch instead of per example

  void validate() const;
};

struct MixCoefficients {
  double lambda = 1.0;
  double lambda_c = 1.0;  // max(lambda, 1 - lambda)
  double lambda_r = 0.0;  // min(lambda, 1 - lambda)

  static MixCoefficients from_lambda(double lambda);
};

struct MixedBatch {
  Tensor x;  // B x D
  Tensor y;  // B x K soft labels
};

double draw_lambda(const MixupConfig& config, Rng& rng);
MixCoefficients draw_coefficients(const MixupConfig& config, Rng& rng);

// One lambda per row (or one repeated B times when config.per_batch).
std::vector<double> draw_lambdas(const MixupConfig& config, std::size_t rows, Rng& rng);

// Row b: lambdas[b] * first + (1 - lambdas[b]) * second, features and labels.
// lambda 1 or 0 copies the corresponding parent row bit-exactly.
MixedBatch mix_rows(const Tensor& x_first, const Tensor& y_first, const Tensor& x_second,
                    const Tensor& y_second, std::span<const double> lambdas);

MixedBatch mixup_classic(const Batch& batch_i, const Batch& batch_j, const MixupConfig& config, Rng& rng);

struct BilateralMix {
  MixedBatch conventional;  // dominated by the uniform-sampler batch
  MixedBatch rebalancing;   // dominated by the re-balanced batch
  std::vector<MixCoefficients> coefficients;
};

BilateralMix bilateral_mix(const Batch& uniform, const Batch& rebalanced, const MixupConfig& config, Rng& rng);
BilateralMix bilateral_mix_with(const Batch& uniform, const Batch& rebalanced, std::span<const double> lambdas);

// Single combination lambda * uniform + (1 - lambda) * rebalanced, raw lambda.
MixedBatch sbn_mix(const Batch& uniform, const Batch& rebalanced, const MixupConfig& config, Rng& rng);

}  // namespace dbnmix
