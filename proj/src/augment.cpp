#include "dbnmix/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dbnmix/errors.hpp"

namespace dbnmix {

void MixupConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("mixup alpha must be positive");
}

MixCoefficients MixCoefficients::from_lambda(double lambda) {
  return MixCoefficients{lambda, std::max(lambda, 1.0 - lambda), std::min(lambda, 1.0 - lambda)};
}

double draw_lambda(const MixupConfig& config, Rng& rng) {
  config.validate();
  // Beta(a, a) as X / (X + Y) with X, Y ~ Gamma(a, 1).
  std::gamma_distribution<double> gamma(config.alpha, 1.0);
  while (true) {
    const double x = gamma(rng);
    const double y = gamma(rng);
    const double total = x + y;
    if (total > 0.0 && std::isfinite(total)) return x / total;
  }
}

MixCoefficients draw_coefficients(const MixupConfig& config, Rng& rng) {
  return MixCoefficients::from_lambda(draw_lambda(config, rng));
}

std::vector<double> draw_lambdas(const MixupConfig& config, std::size_t rows, Rng& rng) {
  if (config.per_batch) return std::vector<double>(rows, draw_lambda(config, rng));
  std::vector<double> out(rows);
  for (double& l : out) l = draw_lambda(config, rng);
  return out;
}

namespace {

void mix_into(std::span<double> out, std::span<const double> a, std::span<const double> b, double lambda) {
  if (lambda == 1.0) {
    std::copy(a.begin(), a.end(), out.begin());
  } else if (lambda == 0.0) {
    std::copy(b.begin(), b.end(), out.begin());
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = lambda * a[i] + (1.0 - lambda) * b[i];
  }
}

}  // namespace

MixedBatch mix_rows(const Tensor& x_first, const Tensor& y_first, const Tensor& x_second,
                    const Tensor& y_second, std::span<const double> lambdas) {
  if (x_first.shape() != x_second.shape() || y_first.shape() != y_second.shape() ||
      x_first.rows() != y_first.rows() || lambdas.size() != x_first.rows()) {
    throw DimensionError("mixup: batches " + shape_string(x_first.shape()) + " and " +
                         shape_string(x_second.shape()) + " with " + std::to_string(lambdas.size()) +
                         " coefficients");
  }
  MixedBatch out{Tensor(x_first.shape()), Tensor(y_first.shape())};
  for (std::size_t b = 0; b < lambdas.size(); ++b) {
    mix_into(out.x.row(b), x_first.row(b), x_second.row(b), lambdas[b]);
    mix_into(out.y.row(b), y_first.row(b), y_second.row(b), lambdas[b]);
  }
  return out;
}

MixedBatch mixup_classic(const Batch& batch_i, const Batch& batch_j, const MixupConfig& config, Rng& rng) {
  const auto lambdas = draw_lambdas(config, batch_i.x.rows(), rng);
  return mix_rows(batch_i.x, batch_i.y, batch_j.x, batch_j.y, lambdas);
}

BilateralMix bilateral_mix_with(const Batch& uniform, const Batch& rebalanced, std::span<const double> lambdas) {
  BilateralMix out;
  out.coefficients.reserve(lambdas.size());
  std::vector<double> lc, lr;
  for (double l : lambdas) {
    const auto c = MixCoefficients::from_lambda(l);
    out.coefficients.push_back(c);
    lc.push_back(c.lambda_c);
    lr.push_back(c.lambda_r);
  }
  out.conventional = mix_rows(uniform.x, uniform.y, rebalanced.x, rebalanced.y, lc);
  out.rebalancing = mix_rows(uniform.x, uniform.y, rebalanced.x, rebalanced.y, lr);
  return out;
}

BilateralMix bilateral_mix(const Batch& uniform, const Batch& rebalanced, const MixupConfig& config, Rng& rng) {
  return bilateral_mix_with(uniform, rebalanced, draw_lambdas(config, uniform.x.rows(), rng));
}

MixedBatch sbn_mix(const Batch& uniform, const Batch& rebalanced, const MixupConfig& config, Rng& rng) {
  const auto lambdas = draw_lambdas(config, uniform.x.rows(), rng);
  return mix_rows(uniform.x, uniform.y, rebalanced.x, rebalanced.y, lambdas);
}

}  // namespace dbnmix
