#pragma once

#include <vector>

#include "dbnmix/autodiff.hpp"

namespace dbnmix {

struct SgdConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 2e-4;
  std::vector<int> decay_epochs{120, 160};
  double decay_factor = 0.1;

  // Throws ConfigError on an out-of-range field.
  void validate() const;
  // Base rate times decay_factor once for every decay epoch <= epoch.
  double learning_rate_at(int epoch) const;
};

// v <- momentum * v + grad + weight_decay * param;  param <- param - lr(epoch) * v
void sgd_step(ParamStore& store, const SgdConfig& config, int epoch);

}  // namespace dbnmix
