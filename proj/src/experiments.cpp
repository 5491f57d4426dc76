#include "dbnmix/experiments.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "binary_io.hpp"
#include "dbnmix/errors.hpp"

namespace dbnmix {

namespace {

constexpr std::uint64_t kTestSeedOffset = 0x7465737400000000ULL;

}  // namespace

DatasetPair make_moons_pair(const MoonsSetup& setup, std::uint64_t seed) {
  return DatasetPair{
      make_half_moons(setup.n_majority, setup.imbalance_ratio, setup.noise_sd, seed),
      make_half_moons(setup.test_per_class, 1.0, setup.noise_sd, seed ^ kTestSeedOffset)};
}

DatasetPair make_gaussian_pair(const GaussianSetup& setup, std::uint64_t seed) {
  LongTailSpec balanced{setup.spec.counts().size(), setup.test_per_class, 1.0, std::nullopt};
  return DatasetPair{make_gaussian_longtail(setup.spec, setup.dim, setup.class_sep, seed),
                     make_gaussian_longtail(balanced, setup.dim, setup.class_sep, seed ^ kTestSeedOffset)};
}

TrainConfig toy_config(Method method, std::uint64_t seed) {
  TrainConfig c;
  c.method = method;
  c.seed = seed;
  c.epochs = 100;
  c.batch.batch_size = 128;
  c.sgd.learning_rate = 0.1;
  c.sgd.momentum = 0.9;
  c.sgd.weight_decay = 2e-4;
  c.sgd.decay_epochs = {60, 80};
  c.sgd.decay_factor = 0.1;
  c.mixup.alpha = 1.0;
  c.gamma = Gamma::infinity();
  c.hidden = {64, 64};
  c.head_depth = 1;
  return c;
}

std::vector<TrainConfig> toy_study_configs(std::uint64_t seed) {
  TrainConfig bilateral = toy_config(Method::SbnMix, seed);
  bilateral.bilateral_mixup = true;
  bilateral.temperature_scaling = false;
  return {toy_config(Method::Erm, seed), toy_config(Method::Mixup, seed), bilateral};
}

std::string_view toy_label(const TrainConfig& config) {
  switch (config.method) {
    case Method::Erm: return "erm";
    case Method::Mixup: return "mixup";
    default: return "bilateral";
  }
}

std::vector<ToyRun> run_toy_study(std::span<const std::uint64_t> seeds, const MoonsSetup& setup,
                                  std::size_t grid_resolution, double grid_margin, std::size_t jobs) {
  struct Cell {
    std::uint64_t seed;
    TrainConfig config;
  };
  std::vector<Cell> cells;
  for (std::uint64_t s : seeds) {
    for (auto& c : toy_study_configs(s)) cells.push_back({s, std::move(c)});
  }
  std::vector<ToyRun> runs(cells.size());
  auto run_cell = [&](std::size_t i) {
    const DatasetPair data = make_moons_pair(setup, cells[i].seed);
    const TrainResult result = train_run(cells[i].config, data.train, data.test);
    const auto& per_class = result.record.final_accuracy.per_class;
    runs[i] = ToyRun{std::string(toy_label(cells[i].config)), cells[i].seed, per_class[0], per_class[1],
                     boundary_grid(result.model, data.train, grid_resolution, grid_resolution, grid_margin)};
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        try {
          run_cell(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
  return runs;
}

std::vector<ToyRun> reproduce_fig1(const std::filesystem::path& output_dir, std::span<const std::uint64_t> seeds,
                                   const MoonsSetup& setup, std::size_t grid_resolution, bool write_points,
                                   std::size_t jobs) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec || !std::filesystem::is_directory(output_dir)) {
    throw IoError("cannot create output directory '" + output_dir.string() + "'");
  }
  auto open = [&](const std::string& name) {
    std::ofstream os(output_dir / name);
    if (!os) throw IoError("cannot write '" + (output_dir / name).string() + "'");
    return os;
  };
  // Fail before training if the directory is not writable.
  { auto probe = open("summary.csv"); }

  std::vector<ToyRun> runs = run_toy_study(seeds, setup, grid_resolution, 0.5, jobs);
  for (const auto& r : runs) {
    auto os = open("boundary_" + r.label + "_seed" + std::to_string(r.seed) + ".csv");
    write_boundary_csv(r.grid, os);
  }
  if (write_points) {
    for (std::uint64_t s : seeds) {
      save_dataset(make_moons_pair(setup, s).train, output_dir / ("points_seed" + std::to_string(s) + ".csv"),
                   DatasetFormat::Csv);
    }
  }
  auto summary = open("summary.csv");
  summary << "method,seed,majority_recall,minority_recall\n";
  for (const auto& r : runs) {
    summary << r.label << ',' << r.seed << ',' << detail::format_double(r.majority_recall) << ','
            << detail::format_double(r.minority_recall) << '\n';
  }
  if (!summary) throw IoError("write failed for summary.csv");
  return runs;
}

TrainConfig ablation_config(bool bilateral_mixup, bool temperature_scaling, std::uint64_t seed) {
  TrainConfig c;
  c.method = Method::Dbn;
  c.seed = seed;
  c.epochs = 60;
  c.batch.batch_size = 128;
  c.sgd.learning_rate = 0.1;
  c.sgd.momentum = 0.9;
  c.sgd.weight_decay = 2e-4;
  c.sgd.decay_epochs = {36, 48};
  c.sgd.decay_factor = 0.1;
  c.mixup.alpha = 1.0;
  c.gamma = Gamma::infinity();
  c.eta = 3.0;
  c.epsilon = 0.6;
  c.bilateral_mixup = bilateral_mixup;
  c.temperature_scaling = temperature_scaling;
  return c;
}

}  // namespace dbnmix
