#include "dbnmix/train.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "binary_io.hpp"
#include "dbnmix/errors.hpp"
#include "dbnmix/rng.hpp"

namespace dbnmix {

namespace {

constexpr std::uint64_t kMixStream = 0x6d6978;

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("bad value '" + text + "' for " + key);
  }
  return v;
}

long long parse_int(const std::string& key, const std::string& text) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("bad integer '" + text + "' for " + key);
  }
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
  const long long v = parse_int(key, text);
  if (v < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  throw ConfigError("bad boolean '" + text + "' for " + key);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::ostringstream os;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) os << ',';
    os << values[i];
  }
  return os.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Erm: return "erm";
    case Method::Mixup: return "mixup";
    case Method::SbnMix: return "sbn-mix";
    case Method::Dbn: return "dbn";
    case Method::DbnMix: return "dbn-mix";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  for (Method m : {Method::Erm, Method::Mixup, Method::SbnMix, Method::Dbn, Method::DbnMix}) {
    if (method_name(m) == text) return m;
  }
  throw ConfigError("unknown method '" + std::string(text) + "'");
}

bool is_dual_branch(Method m) { return m == Method::Dbn || m == Method::DbnMix; }

bool TrainConfig::uses_bilateral_mixup() const {
  const bool method_default = method == Method::SbnMix || method == Method::DbnMix;
  return bilateral_mixup.value_or(method_default);
}

bool TrainConfig::uses_temperature_scaling() const {
  const bool method_default = method == Method::SbnMix || method == Method::DbnMix;
  return temperature_scaling.value_or(method_default);
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch.batch_size == 0) throw ConfigError("batch size must be at least 1");
  sgd.validate();
  mixup.validate();
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be positive");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in (0, 1]");
  if (head_depth == 0) throw ConfigError("head depth must be at least 1");
  const bool toggled = uses_bilateral_mixup() || uses_temperature_scaling();
  if ((method == Method::Erm || method == Method::Mixup) && toggled) {
    throw ConfigError(std::string(method_name(method)) + " does not support bilateral mixup or temperature scaling");
  }
  if (method == Method::DbnMix && !(uses_bilateral_mixup() && uses_temperature_scaling())) {
    throw ConfigError("dbn-mix always uses both bilateral mixup and temperature scaling; use method dbn for ablations");
  }
}

std::string TrainConfig::echo() const {
  std::ostringstream os;
  os << "method=" << method_name(method) << '\n'
     << "epochs=" << epochs << '\n'
     << "batch-size=" << batch.batch_size << '\n'
     << "drop-last=" << (batch.drop_last ? "true" : "false") << '\n'
     << "lr=" << detail::format_double(sgd.learning_rate) << '\n'
     << "momentum=" << detail::format_double(sgd.momentum) << '\n'
     << "weight-decay=" << detail::format_double(sgd.weight_decay) << '\n'
     << "decay-epochs=" << join(sgd.decay_epochs) << '\n'
     << "decay-factor=" << detail::format_double(sgd.decay_factor) << '\n'
     << "alpha=" << detail::format_double(mixup.alpha) << '\n'
     << "per-batch-lambda=" << (mixup.per_batch ? "true" : "false") << '\n'
     << "gamma=" << gamma.to_string() << '\n'
     << "eta=" << detail::format_double(eta) << '\n'
     << "epsilon=" << detail::format_double(epsilon) << '\n'
     << "seed=" << seed << '\n'
     << "bilateral-mixup=" << (uses_bilateral_mixup() ? "true" : "false") << '\n'
     << "temperature-scaling=" << (uses_temperature_scaling() ? "true" : "false") << '\n'
     << "hidden=" << join(hidden) << '\n'
     << "head-depth=" << head_depth << '\n';
  return os.str();
}

void apply_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "method") {
    c.method = parse_method(value);
  } else if (key == "epochs") {
    c.epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "batch-size") {
    c.batch.batch_size = parse_count(key, value);
  } else if (key == "drop-last") {
    c.batch.drop_last = parse_bool(key, value);
  } else if (key == "lr") {
    c.sgd.learning_rate = parse_double(key, value);
  } else if (key == "momentum") {
    c.sgd.momentum = parse_double(key, value);
  } else if (key == "weight-decay") {
    c.sgd.weight_decay = parse_double(key, value);
  } else if (key == "decay-epochs") {
    c.sgd.decay_epochs.clear();
    for (const auto& e : split_list(value)) c.sgd.decay_epochs.push_back(static_cast<int>(parse_int(key, e)));
  } else if (key == "decay-factor") {
    c.sgd.decay_factor = parse_double(key, value);
  } else if (key == "alpha") {
    c.mixup.alpha = parse_double(key, value);
  } else if (key == "per-batch-lambda") {
    c.mixup.per_batch = parse_bool(key, value);
  } else if (key == "gamma") {
    c.gamma = Gamma::parse(value);
  } else if (key == "eta") {
    c.eta = parse_double(key, value);
  } else if (key == "epsilon") {
    c.epsilon = parse_double(key, value);
  } else if (key == "seed") {
    const long long s = parse_int(key, value);
    if (s < 0) throw ConfigError("seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "bilateral-mixup") {
    c.bilateral_mixup = parse_bool(key, value);
  } else if (key == "temperature-scaling") {
    c.temperature_scaling = parse_bool(key, value);
  } else if (key == "hidden") {
    c.hidden.clear();
    for (const auto& h : split_list(value)) c.hidden.push_back(parse_count(key, h));
  } else if (key == "head-depth") {
    c.head_depth = parse_count(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(line_no, "empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_config_text(TrainConfig& config, const std::string& text) {
  for (const auto& [k, v] : parse_config_text(text)) apply_config_value(config, k, v);
}

bool same_results(const RunRecord& a, const RunRecord& b) {
  auto same_acc = [](const GroupedAccuracy& x, const GroupedAccuracy& y) {
    return x.all == y.all && x.many == y.many && x.medium == y.medium && x.few == y.few &&
           x.per_class == y.per_class;
  };
  auto same_opt = [&](const std::optional<GroupedAccuracy>& x, const std::optional<GroupedAccuracy>& y) {
    return x.has_value() == y.has_value() && (!x || same_acc(*x, *y));
  };
  return a.epoch_loss == b.epoch_loss && a.epoch_accuracy == b.epoch_accuracy &&
         same_acc(a.final_accuracy, b.final_accuracy) && same_opt(a.final_conventional, b.final_conventional) &&
         same_opt(a.final_rebalancing, b.final_rebalancing) && a.config_echo == b.config_echo && a.seed == b.seed;
}

NetworkConfig network_config_for(const TrainConfig& config, std::size_t input_dim, std::size_t num_classes) {
  NetworkConfig nc;
  nc.input_dim = input_dim;
  nc.num_classes = num_classes;
  nc.hidden = config.hidden;
  nc.head_depth = config.head_depth;
  nc.dual_branch = is_dual_branch(config.method);
  return nc;
}

Network initial_network(const TrainConfig& config, std::size_t input_dim, std::size_t num_classes) {
  return Network(network_config_for(config, input_dim, num_classes), config.seed);
}

namespace {

MixedBatch as_mixed(const Batch& b) { return MixedBatch{b.x, b.y}; }

Batch permuted(const Batch& b, Rng& rng) {
  std::vector<std::size_t> order(b.labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  Batch out;
  out.x = Tensor(b.x.shape());
  out.y = Tensor(b.y.shape());
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::copy(b.x.row(order[i]).begin(), b.x.row(order[i]).end(), out.x.row(i).begin());
    std::copy(b.y.row(order[i]).begin(), b.y.row(order[i]).end(), out.y.row(i).begin());
    out.labels.push_back(b.labels[order[i]]);
    out.indices.push_back(b.indices[order[i]]);
  }
  return out;
}

}  // namespace

TrainResult train_run(const TrainConfig& config, const Dataset& train, const Dataset& test,
                      const TrainHooks& hooks) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  if (train.size() == 0) throw InvalidDatasetError("empty training set");
  if (test.size() == 0) throw InvalidDatasetError("empty test set");
  if (test.num_classes() != train.num_classes() || test.dim() != train.dim()) {
    throw InvalidDatasetError("train and test sets disagree on classes or feature dimension");
  }
  const std::size_t k = train.num_classes();

  Network model = initial_network(config, train.dim(), k);
  UniformSampler uniform(train, config.seed);
  std::optional<RebalancedSampler> rebalanced;
  if (config.method == Method::SbnMix || is_dual_branch(config.method)) {
    rebalanced.emplace(train, config.gamma, config.seed);
  }
  Rng mix_rng = make_rng(config.seed, kMixStream);
  const TemperatureSchedule schedule = config.uses_temperature_scaling()
                                           ? temperatures(config.eta, config.epsilon, train.class_counts)
                                           : TemperatureSchedule::identity(k);
  if (hooks.on_schedule) hooks.on_schedule(schedule);

  RunRecord record;
  record.seed = config.seed;
  record.config_echo = config.echo();
  const std::size_t steps = config.batch.batches_per_epoch(train.size());
  std::size_t global_step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_total = 0.0;
    for (std::size_t s = 0; s < steps; ++s, ++global_step) {
      const std::size_t size = config.batch.batch_size_at(s, train.size());
      const Batch u = uniform.next_batch(size);
      Batch second;
      MixedBatch in_c, in_r;
      switch (config.method) {
        case Method::Erm:
          in_c = as_mixed(u);
          break;
        case Method::Mixup:
          second = permuted(u, mix_rng);
          in_c = mixup_classic(u, second, config.mixup, mix_rng);
          break;
        case Method::SbnMix:
          second = rebalanced->next_batch(size);
          in_c = config.uses_bilateral_mixup() ? sbn_mix(u, second, config.mixup, mix_rng) : as_mixed(u);
          break;
        case Method::Dbn:
        case Method::DbnMix:
          second = rebalanced->next_batch(size);
          if (config.uses_bilateral_mixup()) {
            BilateralMix m = bilateral_mix(u, second, config.mixup, mix_rng);
            in_c = std::move(m.conventional);
            in_r = std::move(m.rebalancing);
          } else {
            in_c = as_mixed(u);
            in_r = as_mixed(second);
          }
          break;
      }
      if (hooks.on_batches) hooks.on_batches(global_step, u, second);
      if (hooks.on_inputs) hooks.on_inputs(global_step, in_c, in_r);

      double loss_value = 0.0;
      try {
        model.params().zero_grad();
        Tape tape;
        Var loss;
        if (is_dual_branch(config.method)) {
          const BranchLogits z = forward_train(model, tape, in_c.x, in_r.x);
          loss = dbn_loss(z.conventional, in_c.y, z.rebalancing, in_r.y, schedule);
        } else {
          loss = sbn_forward_train(model, tape, in_c.x, in_c.y, schedule).loss;
        }
        loss_value = loss.value().item();
        tape.backward(loss);
        sgd_step(model.params(), config.sgd, epoch);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (method " + std::string(method_name(config.method)) +
                           ", epoch " + std::to_string(epoch) + ", step " + std::to_string(s) +
                           ", lr " + detail::format_double(config.sgd.learning_rate_at(epoch)) + ")");
      }
      if (hooks.on_loss) hooks.on_loss(global_step, loss_value);
      loss_total += loss_value;
    }
    record.epoch_loss.push_back(loss_total / static_cast<double>(steps));
    record.epoch_accuracy.push_back(evaluate(model, test, EvalMode::Fused, train.class_counts).balanced());
  }

  record.final_accuracy = evaluate(model, test, EvalMode::Fused, train.class_counts);
  if (model.config().dual_branch) {
    record.final_conventional = evaluate(model, test, EvalMode::Conventional, train.class_counts);
    record.final_rebalancing = evaluate(model, test, EvalMode::Rebalancing, train.class_counts);
  }
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return TrainResult{std::move(record), std::move(model)};
}

void write_run_record_csv(const RunRecord& record, std::ostream& os) {
  os << "epoch,train_loss,test_accuracy\n";
  for (std::size_t e = 0; e < record.epoch_loss.size(); ++e) {
    os << e << ',' << detail::format_double(record.epoch_loss[e]) << ','
       << detail::format_double(record.epoch_accuracy[e]) << '\n';
  }
}

namespace {

nlohmann::ordered_json accuracy_json(const GroupedAccuracy& acc) {
  nlohmann::ordered_json j;
  j["all"] = acc.all;
  j["balanced"] = acc.balanced();
  j["many"] = acc.many ? nlohmann::ordered_json(*acc.many) : nlohmann::ordered_json(nullptr);
  j["medium"] = acc.medium ? nlohmann::ordered_json(*acc.medium) : nlohmann::ordered_json(nullptr);
  j["few"] = acc.few ? nlohmann::ordered_json(*acc.few) : nlohmann::ordered_json(nullptr);
  j["per_class"] = acc.per_class;
  return j;
}

}  // namespace

void write_run_summary(const RunRecord& record, std::ostream& os) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : parse_config_text(record.config_echo)) cfg[k] = v;
  j["config"] = cfg;
  j["seed"] = record.seed;
  j["epochs"] = record.epoch_loss.size();
  j["final"] = accuracy_json(record.final_accuracy);
  if (record.final_conventional) j["conventional_branch"] = accuracy_json(*record.final_conventional);
  if (record.final_rebalancing) j["rebalancing_branch"] = accuracy_json(*record.final_rebalancing);
  j["epoch_loss"] = record.epoch_loss;
  j["epoch_accuracy"] = record.epoch_accuracy;
  j["wall_seconds"] = record.wall_seconds;
  os << j.dump(2) << '\n';
}

std::vector<TrainConfig> SweepGrid::cells(const TrainConfig& base) const {
  if (!eta && !epsilon && !alpha && !gamma) return {};
  const std::vector<double> etas = eta.value_or(std::vector<double>{base.eta});
  const std::vector<double> epsilons = epsilon.value_or(std::vector<double>{base.epsilon});
  const std::vector<double> alphas = alpha.value_or(std::vector<double>{base.mixup.alpha});
  const std::vector<Gamma> gammas = gamma.value_or(std::vector<Gamma>{base.gamma});
  std::vector<TrainConfig> out;
  for (double e : etas)
    for (double eps : epsilons)
      for (double a : alphas)
        for (const Gamma& g : gammas) {
          TrainConfig c = base;
          c.eta = e;
          c.epsilon = eps;
          c.mixup.alpha = a;
          c.gamma = g;
          out.push_back(std::move(c));
        }
  return out;
}

std::vector<SweepRow> sweep(const SweepGrid& grid, const TrainConfig& base, const Dataset& train,
                            const Dataset& test, std::size_t jobs) {
  std::vector<TrainConfig> cells = grid.cells(base);
  std::vector<SweepRow> rows(cells.size());
  auto run_cell = [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.config = cells[i];
    try {
      row.sampler_probabilities = sampler_distribution(row.config.gamma, train.class_counts);
      row.record = train_run(row.config, train, test).record;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
    });
  }
  for (auto& t : workers) t.join();
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
  os << "eta,epsilon,alpha,gamma,seed,accuracy,many,medium,few,final_loss,sampler_p,error\n";
  auto opt = [](const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string(); };
  for (const auto& r : rows) {
    os << detail::format_double(r.config.eta) << ',' << detail::format_double(r.config.epsilon) << ','
       << detail::format_double(r.config.mixup.alpha) << ',' << r.config.gamma.to_string() << ',' << r.config.seed
       << ',';
    if (r.record) {
      const auto& a = r.record->final_accuracy;
      os << detail::format_double(a.balanced()) << ',' << opt(a.many) << ',' << opt(a.medium) << ','
         << opt(a.few) << ','
         << (r.record->epoch_loss.empty() ? std::string() : detail::format_double(r.record->epoch_loss.back()));
    } else {
      os << ",,,,";
    }
    os << ',';
    for (std::size_t k = 0; k < r.sampler_probabilities.size(); ++k) {
      if (k) os << ';';
      os << detail::format_double(r.sampler_probabilities[k]);
    }
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << ',' << err << '\n';
  }
}

}  // namespace dbnmix
