#include "dbnmix/optim.hpp"

#include <cmath>
#include <string>

#include "dbnmix/errors.hpp"

namespace dbnmix {

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("weight decay must be non-negative");
  }
  if (!(decay_factor > 0.0)) throw ConfigError("decay factor must be positive");
  for (std::size_t i = 1; i < decay_epochs.size(); ++i) {
    if (decay_epochs[i] <= decay_epochs[i - 1]) {
      throw ConfigError("decay epochs must be strictly increasing");
    }
  }
}

double SgdConfig::learning_rate_at(int epoch) const {
  double lr = learning_rate;
  for (int e : decay_epochs) {
    if (epoch >= e) lr *= decay_factor;
  }
  return lr;
}

void sgd_step(ParamStore& store, const SgdConfig& config, int epoch) {
  const double lr = config.learning_rate_at(epoch);
  for (Parameter& p : store) {
    if (p.grad.shape() != p.value.shape() || p.momentum.shape() != p.value.shape()) {
      throw DimensionError("optimizer buffers of '" + p.name + "' do not match its shape");
    }
    auto value = p.value.data();
    auto grad = p.grad.data();
    auto velocity = p.momentum.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      velocity[i] = config.momentum * velocity[i] + grad[i] + config.weight_decay * value[i];
      value[i] -= lr * velocity[i];
    }
  }
}

}  // namespace dbnmix
