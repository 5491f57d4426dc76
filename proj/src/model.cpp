#include "dbnmix/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "binary_io.hpp"
#include "dbnmix/errors.hpp"
#include "dbnmix/rng.hpp"

namespace dbnmix {

namespace {

constexpr char kMagic[4] = {'D', 'B', 'N', 'M'};
constexpr std::uint16_t kVersion = 1;

std::string layer_name(const std::string& prefix, std::size_t index, const char* what) {
  return prefix + "." + std::to_string(index) + "." + what;
}

std::size_t head_layers(const NetworkConfig& c) { return c.head_depth; }

}  // namespace

std::string_view branch_name(Branch b) {
  return b == Branch::Conventional ? "conventional" : "rebalancing";
}

void NetworkConfig::validate() const {
  if (input_dim == 0) throw ConfigError("input dimension must be positive");
  if (num_classes < 2) throw ConfigError("need at least two classes");
  if (head_depth == 0) throw ConfigError("head depth must be at least 1");
  if (std::find(hidden.begin(), hidden.end(), std::size_t{0}) != hidden.end() ||
      (head_depth > 1 && head_hidden == 0)) {
    throw ConfigError("layer widths must be positive");
  }
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> Network::layout(const NetworkConfig& config) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  std::size_t width = config.input_dim;
  for (std::size_t i = 0; i < config.hidden.size(); ++i) {
    out.push_back({layer_name("backbone", i, "weight"), {width, config.hidden[i]}});
    out.push_back({layer_name("backbone", i, "bias"), {config.hidden[i]}});
    width = config.hidden[i];
  }
  const std::vector<std::string> prefixes =
      config.dual_branch ? std::vector<std::string>{"head_c", "head_r"} : std::vector<std::string>{"head"};
  for (const auto& prefix : prefixes) {
    std::size_t w = width;
    for (std::size_t i = 0; i < head_layers(config); ++i) {
      const std::size_t out_w = i + 1 == head_layers(config) ? config.num_classes : config.head_hidden;
      out.push_back({layer_name(prefix, i, "weight"), {w, out_w}});
      out.push_back({layer_name(prefix, i, "bias"), {out_w}});
      w = out_w;
    }
  }
  return out;
}

Network::Network(NetworkConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng = make_rng(seed, 0x696e6974);
  for (auto& [name, shape] : layout(config_)) {
    Tensor t(shape);
    if (shape.size() == 2) {
      const bool output_layer = name.rfind("head", 0) == 0 &&
                                name.find("." + std::to_string(config_.head_depth - 1) + ".") != std::string::npos;
      const double fan_in = static_cast<double>(shape[0]);
      const double bound = output_layer ? 1.0 / std::sqrt(fan_in) : std::sqrt(6.0 / fan_in);
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : t.data()) v = dist(rng);
    }
    params_.add(name, std::move(t));
  }
}

Network::Network(NetworkConfig config, ParamStore params) : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const auto expected = layout(config_);
  if (expected.size() != params_.size()) throw ContractError("parameter count does not match network layout");
  for (const auto& [name, shape] : expected) {
    if (!params_.contains(name) || params_.at(name).value.shape() != shape) {
      throw ContractError("parameter '" + name + "' missing or misshapen");
    }
  }
}

std::string Network::head_prefix(Branch branch) const {
  if (!config_.dual_branch) {
    if (branch != Branch::Conventional) throw ContractError("single-branch network has no re-balancing head");
    return "head";
  }
  return branch == Branch::Conventional ? "head_c" : "head_r";
}

Var Network::backbone(Tape& tape, Var x) {
  if (x.value().cols() != config_.input_dim) {
    throw DimensionError("input has " + std::to_string(x.value().cols()) + " features, network expects " +
                         std::to_string(config_.input_dim));
  }
  Var h = x;
  for (std::size_t i = 0; i < config_.hidden.size(); ++i) {
    h = relu(linear(h, tape.parameter(params_.at(layer_name("backbone", i, "weight"))),
                    tape.parameter(params_.at(layer_name("backbone", i, "bias")))));
  }
  return h;
}

Var Network::head(Tape& tape, Var features, Branch branch) {
  const std::string prefix = head_prefix(branch);
  Var h = features;
  for (std::size_t i = 0; i < config_.head_depth; ++i) {
    h = linear(h, tape.parameter(params_.at(layer_name(prefix, i, "weight"))),
               tape.parameter(params_.at(layer_name(prefix, i, "bias"))));
    if (i + 1 < config_.head_depth) h = relu(h);
  }
  return h;
}

Tensor Network::features(const Tensor& x) const {
  if (x.cols() != config_.input_dim) {
    throw DimensionError("input has " + std::to_string(x.cols()) + " features, network expects " +
                         std::to_string(config_.input_dim));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < config_.hidden.size(); ++i) {
    h = relu(linear_forward(h, params_.at(layer_name("backbone", i, "weight")).value,
                            params_.at(layer_name("backbone", i, "bias")).value));
  }
  return h;
}

Tensor Network::head_logits(const Tensor& features, Branch branch) const {
  const std::string prefix = head_prefix(branch);
  Tensor h = features;
  for (std::size_t i = 0; i < config_.head_depth; ++i) {
    h = linear_forward(h, params_.at(layer_name(prefix, i, "weight")).value,
                       params_.at(layer_name(prefix, i, "bias")).value);
    if (i + 1 < config_.head_depth) h = relu(h);
  }
  return h;
}

TemperatureSchedule TemperatureSchedule::identity(std::size_t num_classes) {
  TemperatureSchedule s;
  s.balance.assign(num_classes, 1.0);
  s.temperatures.assign(num_classes, 1.0);
  return s;
}

TemperatureSchedule temperatures(double eta, double epsilon, std::span<const std::size_t> class_counts) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be positive");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in (0, 1]");
  if (class_counts.empty()) throw ConfigError("no class counts");
  for (std::size_t c : class_counts) {
    if (c == 0) throw ConfigError("class counts must be positive");
  }
  TemperatureSchedule s;
  s.eta = eta;
  s.epsilon = epsilon;
  s.class_counts.assign(class_counts.begin(), class_counts.end());
  const double n_max = static_cast<double>(*std::max_element(class_counts.begin(), class_counts.end()));
  for (std::size_t c : class_counts) {
    s.balance.push_back(epsilon * (static_cast<double>(c) / n_max) + (1.0 - epsilon));
  }
  const double b_max = *std::max_element(s.balance.begin(), s.balance.end());
  for (double b : s.balance) s.temperatures.push_back(std::pow(b_max / b, 1.0 / eta));
  return s;
}

Tensor scaled_softmax(const Tensor& logits, const TemperatureSchedule& schedule) {
  const std::size_t k = logits.cols();
  if (schedule.temperatures.size() != k) {
    throw DimensionError("logits have " + std::to_string(k) + " classes, schedule has " +
                         std::to_string(schedule.temperatures.size()));
  }
  require_finite(logits, "logits");
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto src = logits.row(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < k; ++j) dst[j] = src[j] / schedule.temperatures[j];
    const double m = *std::max_element(dst.begin(), dst.end());
    double total = 0.0;
    for (double& v : dst) {
      v = std::exp(v - m);
      total += v;
    }
    for (double& v : dst) v /= total;
  }
  return out;
}

Tensor softmax(const Tensor& logits) {
  return scaled_softmax(logits, TemperatureSchedule::identity(logits.cols()));
}

double cross_entropy(const Tensor& probabilities, const Tensor& targets) {
  if (probabilities.shape() != targets.shape()) {
    throw DimensionError("cross entropy: probabilities " + shape_string(probabilities.shape()) + " vs targets " +
                         shape_string(targets.shape()));
  }
  const std::size_t batch = probabilities.rows();
  if (batch == 0) throw ContractError("cross entropy over an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (targets[i] == 0.0) continue;
    if (!(probabilities[i] > 0.0)) throw NumericError("cross entropy of a non-positive probability");
    total -= targets[i] * std::log(probabilities[i]);
  }
  return total / static_cast<double>(batch);
}

double dbn_loss(const Tensor& p_c, const Tensor& y_c, const Tensor& p_r, const Tensor& y_r) {
  return 0.5 * cross_entropy(p_c, y_c) + 0.5 * cross_entropy(p_r, y_r);
}

BranchLogits forward_train(Network& model, Tape& tape, const Tensor& x_c, const Tensor& x_r) {
  if (!model.config().dual_branch) throw ContractError("forward_train needs a dual-branch network");
  Var h_c = model.backbone(tape, tape.constant(x_c));
  Var h_r = model.backbone(tape, tape.constant(x_r));
  return BranchLogits{model.head(tape, h_c, Branch::Conventional), model.head(tape, h_r, Branch::Rebalancing)};
}

Var scaled_cross_entropy(Var logits, const Tensor& targets, const TemperatureSchedule& schedule) {
  return soft_cross_entropy(log_softmax(divide_columns(logits, schedule.temperatures)), targets);
}

Var dbn_loss(Var z_c, const Tensor& y_c, Var z_r, const Tensor& y_r, const TemperatureSchedule& schedule) {
  return add(scale(scaled_cross_entropy(z_c, y_c, schedule), 0.5),
             scale(scaled_cross_entropy(z_r, y_r, schedule), 0.5));
}

SbnForward sbn_forward_train(Network& model, Tape& tape, const Tensor& x, const Tensor& y,
                             const TemperatureSchedule& schedule) {
  if (model.config().dual_branch) throw ContractError("sbn_forward_train needs a single-branch network");
  Var z = model.head(tape, model.backbone(tape, tape.constant(x)), Branch::Conventional);
  Var loss = scaled_cross_entropy(z, y, schedule);
  return SbnForward{z, loss, scaled_softmax(z.value(), schedule)};
}

Inference infer(const Network& model, const Tensor& x) {
  const Tensor h = model.features(x);
  Inference out;
  if (model.config().dual_branch) {
    const Tensor z_c = model.head_logits(h, Branch::Conventional);
    const Tensor z_r = model.head_logits(h, Branch::Rebalancing);
    out.logits = Tensor(z_c.shape());
    for (std::size_t i = 0; i < z_c.size(); ++i) out.logits[i] = 0.5 * (z_c[i] + z_r[i]);
  } else {
    out.logits = model.head_logits(h, Branch::Conventional);
  }
  out.probabilities = softmax(out.logits);
  return out;
}

void save_checkpoint(const Network& model, const std::string& config_echo,
                     std::span<const std::size_t> class_counts, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  const auto& c = model.config();
  os.write(kMagic, sizeof(kMagic));
  detail::write_le<std::uint16_t>(os, kVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(config_echo.size()));
  os.write(config_echo.data(), static_cast<std::streamsize>(config_echo.size()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.input_dim));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.num_classes));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.hidden.size()));
  for (std::size_t h : c.hidden) detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(h));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.head_depth));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.head_hidden));
  detail::write_le<std::uint8_t>(os, c.dual_branch ? 1 : 0);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(class_counts.size()));
  for (std::size_t n : class_counts) detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(n));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.params().size()));
  for (const Parameter& p : model.params()) {
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (double v : p.value.data()) detail::write_f64(os, v);
  }
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

namespace {

std::string read_string(std::istream& is, std::size_t length, const char* what) {
  std::string s(length, '\0');
  if (length && !is.read(s.data(), static_cast<std::streamsize>(length))) {
    throw IoError(std::string("truncated file while reading ") + what);
  }
  return s;
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  char magic[4] = {};
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw IoError("not a checkpoint (bad magic)");
  const auto version = detail::read_le<std::uint16_t>(is, "version");
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  std::string echo = read_string(is, detail::read_le<std::uint32_t>(is, "config length"), "config");

  NetworkConfig c;
  c.input_dim = detail::read_le<std::uint32_t>(is, "input dim");
  c.num_classes = detail::read_le<std::uint32_t>(is, "classes");
  c.hidden.resize(detail::read_le<std::uint32_t>(is, "depth"));
  for (auto& h : c.hidden) h = detail::read_le<std::uint32_t>(is, "width");
  c.head_depth = detail::read_le<std::uint32_t>(is, "head depth");
  c.head_hidden = detail::read_le<std::uint32_t>(is, "head width");
  c.dual_branch = detail::read_le<std::uint8_t>(is, "branches") != 0;
  std::vector<std::size_t> counts(detail::read_le<std::uint32_t>(is, "count length"));
  for (auto& n : counts) n = detail::read_le<std::uint32_t>(is, "class counts");

  ParamStore store;
  const std::size_t n_params = detail::read_le<std::uint32_t>(is, "parameter count");
  for (std::size_t i = 0; i < n_params; ++i) {
    std::string name = read_string(is, detail::read_le<std::uint32_t>(is, "name length"), "name");
    std::vector<std::size_t> shape(detail::read_le<std::uint32_t>(is, "rank"));
    for (auto& d : shape) d = detail::read_le<std::uint32_t>(is, "shape");
    std::vector<double> data(shape_product(shape));
    for (auto& v : data) v = detail::read_f64(is, "parameter data");
    store.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return Checkpoint{Network(std::move(c), std::move(store)), std::move(echo), std::move(counts)};
}

}  // namespace dbnmix
