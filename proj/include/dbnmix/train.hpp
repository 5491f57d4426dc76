#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dbnmix/augment.hpp"
#include "dbnmix/datasets.hpp"
#include "dbnmix/eval.hpp"
#include "dbnmix/model.hpp"
#include "dbnmix/optim.hpp"
#include "dbnmix/sampling.hpp"

namespace dbnmix {

enum class Method { Erm, Mixup, SbnMix, Dbn, DbnMix };

std::string_view method_name(Method m);
Method parse_method(std::string_view text);
bool is_dual_branch(Method m);

struct TrainConfig {
  Method method = Method::DbnMix;
  int epochs = 200;
  BatchSpec batch;  // sampler streams are derived from `seed`, not batch.seed
  SgdConfig sgd;
  MixupConfig mixup;
  Gamma gamma = Gamma::infinity();
  double eta = 3.0;
  double epsilon = 0.6;
  std::uint64_t seed = 0;
  // Unset means the method's default: on for sbn-mix/dbn-mix, off otherwise.
  std::optional<bool> bilateral_mixup;
  std::optional<bool> temperature_scaling;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t head_depth = 1;

  bool uses_bilateral_mixup() const;
  bool uses_temperature_scaling() const;
  // Throws ConfigError on bad values or a toggle the method cannot honour.
  void validate() const;
  // Flat key=value lines, readable by apply_config_text().
  std::string echo() const;
};

// Sets one key (CLI flag name without dashes, e.g. "batch-size").
void apply_config_value(TrainConfig& config, const std::string& key, const std::string& value);
// key=value per line; '#' starts a comment; blank lines ignored.
std::map<std::string, std::string> parse_config_text(const std::string& text);
void apply_config_text(TrainConfig& config, const std::string& text);

struct RunRecord {
  std::vector<double> epoch_loss;      // mean step loss per epoch
  std::vector<double> epoch_accuracy;  // balanced test accuracy per epoch (fused)
  GroupedAccuracy final_accuracy;
  std::optional<GroupedAccuracy> final_conventional;  // dual-branch only
  std::optional<GroupedAccuracy> final_rebalancing;
  double wall_seconds = 0.0;
  std::string config_echo;
  std::uint64_t seed = 0;
};

// Everything except wall-clock time.
bool same_results(const RunRecord& a, const RunRecord& b);

// Observation points inside the training step, for tests and diagnostics.
struct TrainHooks {
  // Sampled batches; for erm the second is empty, for mixup it is the partner batch.
  std::function<void(std::size_t step, const Batch& first, const Batch& second)> on_batches;
  // Inputs fed to the network; `rebalancing` is empty for single-branch methods.
  std::function<void(std::size_t step, const MixedBatch& conventional, const MixedBatch& rebalancing)> on_inputs;
  std::function<void(const TemperatureSchedule&)> on_schedule;
  std::function<void(std::size_t step, double loss)> on_loss;
};

struct TrainResult {
  RunRecord record;
  Network model;
};

NetworkConfig network_config_for(const TrainConfig& config, std::size_t input_dim, std::size_t num_classes);
// The exact initial network train_run() starts from.
Network initial_network(const TrainConfig& config, std::size_t input_dim, std::size_t num_classes);

TrainResult train_run(const TrainConfig& config, const Dataset& train, const Dataset& test,
                      const TrainHooks& hooks = {});

// Header `epoch,train_loss,test_accuracy`.
void write_run_record_csv(const RunRecord& record, std::ostream& os);
// JSON summary: config echo, seed, final grouped accuracies, loss curve.
void write_run_summary(const RunRecord& record, std::ostream& os);

// Axes left unset take the base config value. No axes, or an axis with an
// empty value list, means an empty grid.
struct SweepGrid {
  std::optional<std::vector<double>> eta;
  std::optional<std::vector<double>> epsilon;
  std::optional<std::vector<double>> alpha;
  std::optional<std::vector<Gamma>> gamma;

  std::vector<TrainConfig> cells(const TrainConfig& base) const;
};

struct SweepRow {
  TrainConfig config;
  std::vector<double> sampler_probabilities;
  std::optional<RunRecord> record;
  std::string error;  // non-empty when the cell failed
};

// Runs every cell (up to `jobs` at once); rows keep cell order.
std::vector<SweepRow> sweep(const SweepGrid& grid, const TrainConfig& base, const Dataset& train,
                            const Dataset& test, std::size_t jobs = 1);

// Header `eta,epsilon,alpha,gamma,seed,accuracy,many,medium,few,final_loss,sampler_p,error`;
// sampler_p lists P_k joined by ';'.
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os);

}  // namespace dbnmix
