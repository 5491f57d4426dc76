#include "dbnmix/sampling.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "dbnmix/errors.hpp"

namespace dbnmix {

Gamma Gamma::finite(double value) {
  if (!(value > 0.0) || std::isnan(value)) throw ConfigError("gamma must be positive");
  Gamma g;
  if (std::isfinite(value)) g.value_ = value;
  return g;
}

Gamma Gamma::parse(std::string_view text) {
  if (text == "inf" || text == "infinity" || text == "Inf") return infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("cannot parse gamma '" + std::string(text) + "'");
  }
  return finite(v);
}

double Gamma::value() const {
  if (!value_) throw ContractError("gamma is infinite");
  return *value_;
}

std::string Gamma::to_string() const { return value_ ? detail::format_double(*value_) : "inf"; }

std::vector<double> sampler_distribution(Gamma gamma, std::span<const std::size_t> counts) {
  if (counts.empty()) throw InvalidDatasetError("no classes");
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) throw InvalidDatasetError("class " + std::to_string(k) + " is empty");
  }
  const std::size_t k_classes = counts.size();
  if (gamma.is_infinite()) return std::vector<double>(k_classes, 1.0 / static_cast<double>(k_classes));

  const double n_max = static_cast<double>(*std::max_element(counts.begin(), counts.end()));
  std::vector<double> w(k_classes);
  for (std::size_t k = 0; k < k_classes; ++k) {
    w[k] = std::pow(n_max / static_cast<double>(counts[k]), 1.0 / gamma.value());
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

std::size_t BatchSpec::batches_per_epoch(std::size_t n) const {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (drop_last) return std::max<std::size_t>(1, n / batch_size);
  return (n + batch_size - 1) / batch_size;
}

std::size_t BatchSpec::batch_size_at(std::size_t index, std::size_t n) const {
  if (drop_last || n < batch_size) return drop_last ? batch_size : n;
  const std::size_t tail = n % batch_size;
  return (index + 1 == batches_per_epoch(n) && tail != 0) ? tail : batch_size;
}

Batch gather_batch(const Dataset& dataset, std::span<const std::size_t> indices) {
  Batch b;
  const std::size_t d = dataset.dim();
  b.x = Tensor({indices.size(), d});
  b.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = dataset.features.row(indices[i]);
    std::copy(src.begin(), src.end(), b.x.row(i).begin());
    b.labels.push_back(dataset.labels[indices[i]]);
  }
  b.y = one_hot(b.labels, dataset.num_classes());
  b.indices.assign(indices.begin(), indices.end());
  return b;
}

UniformSampler::UniformSampler(const Dataset& dataset, std::uint64_t seed)
    : dataset_(&dataset), rng_(make_rng(seed, 0x756e69)) {
  if (dataset.size() == 0) throw InvalidDatasetError("uniform sampler over an empty dataset");
  pick_ = std::uniform_int_distribution<std::size_t>(0, dataset.size() - 1);
}

std::vector<std::size_t> UniformSampler::draw_indices(std::size_t count) {
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = pick_(rng_);
  return out;
}

RebalancedSampler::RebalancedSampler(const Dataset& dataset, Gamma gamma, std::uint64_t seed)
    : dataset_(&dataset),
      by_class_(dataset.indices_by_class()),
      probabilities_(sampler_distribution(gamma, dataset.class_counts)),
      rng_(make_rng(seed, 0x726562)),
      class_dist_(probabilities_.begin(), probabilities_.end()) {}

std::size_t RebalancedSampler::draw_class() { return class_dist_(rng_); }

std::vector<std::size_t> RebalancedSampler::draw_indices(std::size_t count) {
  std::vector<std::size_t> out(count);
  for (auto& i : out) {
    const auto& members = by_class_[draw_class()];
    std::uniform_int_distribution<std::size_t> within(0, members.size() - 1);
    i = members[within(rng_)];
  }
  return out;
}

std::vector<Batch> uniform_batches(const Dataset& dataset, const BatchSpec& spec) {
  UniformSampler sampler(dataset, spec.seed);
  std::vector<Batch> out;
  const std::size_t steps = spec.batches_per_epoch(dataset.size());
  for (std::size_t s = 0; s < steps; ++s) out.push_back(sampler.next_batch(spec.batch_size_at(s, dataset.size())));
  return out;
}

std::vector<Batch> rebalanced_batches(const Dataset& dataset, Gamma gamma, const BatchSpec& spec) {
  RebalancedSampler sampler(dataset, gamma, spec.seed);
  std::vector<Batch> out;
  const std::size_t steps = spec.batches_per_epoch(dataset.size());
  for (std::size_t s = 0; s < steps; ++s) out.push_back(sampler.next_batch(spec.batch_size_at(s, dataset.size())));
  return out;
}

}  // namespace dbnmix
