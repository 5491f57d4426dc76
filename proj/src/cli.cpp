#include "dbnmix/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "dbnmix/errors.hpp"
#include "dbnmix/experiments.hpp"
#include "dbnmix/train.hpp"

namespace dbnmix {

namespace {

namespace fs = std::filesystem;

// Flags that override TrainConfig fields after any --config file.
struct TrainFlags {
  std::optional<std::string> config_file;
  std::optional<std::string> method, epochs, batch_size, lr, momentum, weight_decay, alpha, gamma, eta, epsilon,
      seed, decay_epochs, hidden, bilateral, temperature;

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "key=value config file");
    app.add_option("--method", method, "erm | mixup | sbn-mix | dbn | dbn-mix");
    app.add_option("--epochs", epochs);
    app.add_option("--batch-size", batch_size);
    app.add_option("--lr", lr, "initial learning rate");
    app.add_option("--momentum", momentum);
    app.add_option("--weight-decay", weight_decay);
    app.add_option("--decay-epochs", decay_epochs, "comma-separated epochs where lr is decayed");
    app.add_option("--alpha", alpha, "Beta(alpha, alpha) mixup shape");
    app.add_option("--gamma", gamma, "re-balanced sampler exponent, or inf");
    app.add_option("--eta", eta, "temperature exponent");
    app.add_option("--epsilon", epsilon, "temperature blend in (0, 1]");
    app.add_option("--seed", seed);
    app.add_option("--hidden", hidden, "comma-separated backbone widths");
    app.add_option("--bilateral-mixup", bilateral, "true | false");
    app.add_option("--temperature-scaling", temperature, "true | false");
  }

  TrainConfig build() const {
    TrainConfig c;
    if (config_file) {
      std::ifstream is(*config_file);
      if (!is) throw IoError("cannot read config file '" + *config_file + "'");
      std::stringstream ss;
      ss << is.rdbuf();
      apply_config_text(c, ss.str());
    }
    auto set = [&](const char* key, const std::optional<std::string>& v) {
      if (v) apply_config_value(c, key, *v);
    };
    set("method", method);
    set("epochs", epochs);
    set("batch-size", batch_size);
    set("lr", lr);
    set("momentum", momentum);
    set("weight-decay", weight_decay);
    set("decay-epochs", decay_epochs);
    set("alpha", alpha);
    set("gamma", gamma);
    set("eta", eta);
    set("epsilon", epsilon);
    set("seed", seed);
    set("hidden", hidden);
    set("bilateral-mixup", bilateral);
    set("temperature-scaling", temperature);
    c.validate();
    return c;
  }
};

// Built-in synthetic data ("moons", "gaussian") or a dataset file.
struct DataFlags {
  std::string dataset = "gaussian";
  std::optional<std::string> test;
  double imbalance = 100.0;
  std::optional<std::size_t> n_max;
  std::size_t classes = 10;
  std::size_t dim = GaussianSetup{}.dim;
  double class_sep = GaussianSetup{}.class_sep;
  double noise = MoonsSetup{}.noise_sd;
  std::optional<std::size_t> test_per_class;

  void attach(CLI::App& app) {
    app.add_option("--dataset", dataset, "moons | gaussian | path to .csv/.ltds");
    app.add_option("--test", test, "balanced test set file (required with a dataset file)");
    app.add_option("--imbalance", imbalance, "imbalance ratio of synthetic data");
    app.add_option("--n-max", n_max, "largest class size of synthetic data");
    app.add_option("--classes", classes, "classes of gaussian data");
    app.add_option("--dim", dim, "feature dimension of gaussian data");
    app.add_option("--class-sep", class_sep, "distance between nearest gaussian class centers");
    app.add_option("--noise", noise, "coordinate noise sd of moons data");
    app.add_option("--test-per-class", test_per_class);
  }

  DatasetPair build(std::uint64_t seed) const {
    if (dataset == "moons") {
      MoonsSetup s;
      s.n_majority = n_max.value_or(s.n_majority);
      s.imbalance_ratio = imbalance;
      s.noise_sd = noise;
      s.test_per_class = test_per_class.value_or(s.test_per_class);
      return make_moons_pair(s, seed);
    }
    if (dataset == "gaussian") {
      GaussianSetup s;
      s.spec = LongTailSpec{classes, n_max.value_or(s.spec.n_max), imbalance, std::nullopt};
      s.dim = dim;
      s.class_sep = class_sep;
      s.test_per_class = test_per_class.value_or(s.test_per_class);
      return make_gaussian_pair(s, seed);
    }
    if (!test) throw ConfigError("--test is required when --dataset is a file");
    Dataset train = load_dataset(dataset, format_for_path(dataset));
    Dataset test_set = load_dataset(*test, format_for_path(*test), train.num_classes());
    return DatasetPair{std::move(train), std::move(test_set)};
  }
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  return os;
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
  return fs::path(dir);
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw ConfigError("bad grid value '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<Gamma> parse_gamma_list(const std::string& text) {
  std::vector<Gamma> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(Gamma::parse(item));
  }
  return out;
}

void print_accuracy(std::ostream& out, const char* label, const GroupedAccuracy& a) {
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream os;
    if (v) {
      os << *v;
    } else {
      os << '-';
    }
    return os.str();
  };
  out << label << ": all " << a.all << "  many " << opt(a.many) << "  medium " << opt(a.medium) << "  few "
      << opt(a.few) << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-branch bilateral-mixup training for long-tailed classification", "dbnmix"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset file");
  DataFlags synth_data;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  bool synth_balanced = false;
  synth_data.attach(*synth);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out, "output .csv or .ltds file")->required();
  synth->add_flag("--balanced-test", synth_balanced, "write the balanced test split instead");

  // train
  auto* train = app.add_subcommand("train", "train one model");
  TrainFlags train_flags;
  DataFlags train_data;
  std::string train_out = "run";
  train_flags.attach(*train);
  train_data.attach(*train);
  train->add_option("--out", train_out, "output directory");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_mode = "fused";
  std::optional<std::string> eval_out;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--dataset", eval_data, "test set file")->required();
  eval->add_option("--mode", eval_mode, "fused | conventional | rebalancing");
  eval->add_option("--out", eval_out, "grouped accuracy CSV");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "grid over eta, epsilon, alpha, gamma");
  TrainFlags sweep_flags;
  DataFlags sweep_data;
  std::optional<std::string> eta_grid, epsilon_grid, alpha_grid, gamma_grid;
  std::size_t jobs = 1;
  std::string sweep_out = "sweep.csv";
  sweep_flags.attach(*sweep_cmd);
  sweep_data.attach(*sweep_cmd);
  sweep_cmd->add_option("--eta-grid", eta_grid);
  sweep_cmd->add_option("--epsilon-grid", epsilon_grid);
  sweep_cmd->add_option("--alpha-grid", alpha_grid);
  sweep_cmd->add_option("--gamma-grid", gamma_grid, "e.g. 1,2,inf");
  sweep_cmd->add_option("--jobs", jobs, "cells run in parallel");
  sweep_cmd->add_option("--out", sweep_out, "output CSV");

  // export-boundary
  auto* boundary = app.add_subcommand("export-boundary", "decision-boundary grid of a 2-D model");
  std::string b_ckpt, b_data, b_out;
  std::size_t b_res = 100;
  double b_margin = 0.5;
  boundary->add_option("--checkpoint", b_ckpt)->required();
  boundary->add_option("--dataset", b_data, "dataset whose bounding box the grid covers")->required();
  boundary->add_option("--resolution", b_res);
  boundary->add_option("--margin", b_margin);
  boundary->add_option("--out", b_out)->required();

  // reproduce-fig1
  auto* fig1 = app.add_subcommand("reproduce-fig1", "half-moon toy study: erm vs mixup vs bilateral mixup");
  std::string fig1_out = "fig1";
  std::vector<std::uint64_t> fig1_seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::size_t fig1_res = 100;
  std::size_t fig1_jobs = 1;
  bool fig1_points = false;
  fig1->add_option("--out", fig1_out, "output directory");
  fig1->add_option("--seeds", fig1_seeds, "comma-separated seeds")->delimiter(',');
  fig1->add_option("--resolution", fig1_res);
  fig1->add_option("--jobs", fig1_jobs);
  fig1->add_flag("--points", fig1_points, "also write each seed's training points");

  try {
    std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rest.begin(), rest.end());
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (synth->parsed()) {
      const DatasetPair data = synth_data.build(synth_seed);
      save_dataset(synth_balanced ? data.test : data.train, synth_out, format_for_path(synth_out));
      const Dataset& d = synth_balanced ? data.test : data.train;
      out << "wrote " << d.size() << " samples (" << d.num_classes() << " classes) to " << synth_out << '\n';
    } else if (train->parsed()) {
      const TrainConfig config = train_flags.build();
      const DatasetPair data = train_data.build(config.seed);
      const fs::path dir = ensure_dir(train_out);
      const TrainResult result = train_run(config, data.train, data.test);
      save_checkpoint(result.model, config.echo(), data.train.class_counts, dir / "checkpoint.dbnm");
      {
        auto os = open_out(dir / "run.csv");
        write_run_record_csv(result.record, os);
      }
      {
        auto os = open_out(dir / "summary.json");
        write_run_summary(result.record, os);
      }
      {
        auto os = open_out(dir / "accuracy.csv");
        write_grouped_accuracy_csv(result.record.final_accuracy, os);
      }
      out << "method " << method_name(config.method) << ", " << config.epochs << " epochs, seed " << config.seed
          << '\n';
      print_accuracy(out, "fused", result.record.final_accuracy);
      if (result.record.final_conventional) print_accuracy(out, "conventional", *result.record.final_conventional);
      if (result.record.final_rebalancing) print_accuracy(out, "rebalancing", *result.record.final_rebalancing);
      out << "outputs in " << dir.string() << '\n';
    } else if (eval->parsed()) {
      const Checkpoint ckpt = load_checkpoint(eval_ckpt);
      const Dataset test = load_dataset(eval_data, format_for_path(eval_data), ckpt.model.config().num_classes);
      const GroupedAccuracy acc = evaluate(ckpt.model, test, parse_eval_mode(eval_mode), ckpt.class_counts);
      if (eval_out) {
        auto os = open_out(*eval_out);
        write_grouped_accuracy_csv(acc, os);
      } else {
        write_grouped_accuracy_csv(acc, out);
      }
    } else if (sweep_cmd->parsed()) {
      const TrainConfig base = sweep_flags.build();
      SweepGrid grid;
      if (eta_grid) grid.eta = parse_double_list(*eta_grid);
      if (epsilon_grid) grid.epsilon = parse_double_list(*epsilon_grid);
      if (alpha_grid) grid.alpha = parse_double_list(*alpha_grid);
      if (gamma_grid) grid.gamma = parse_gamma_list(*gamma_grid);
      const DatasetPair data = sweep_data.build(base.seed);
      const auto rows = sweep(grid, base, data.train, data.test, jobs);
      auto os = open_out(sweep_out);
      write_sweep_csv(rows, os);
      std::size_t failed = 0;
      for (const auto& r : rows) failed += r.error.empty() ? 0 : 1;
      out << rows.size() << " cells (" << failed << " failed) written to " << sweep_out << '\n';
    } else if (boundary->parsed()) {
      const Checkpoint ckpt = load_checkpoint(b_ckpt);
      const Dataset d = load_dataset(b_data, format_for_path(b_data), ckpt.model.config().num_classes);
      export_boundary(ckpt.model, d, b_res, b_margin, b_out);
      out << "wrote " << b_res * b_res << " grid cells to " << b_out << '\n';
    } else if (fig1->parsed()) {
      const auto runs = reproduce_fig1(fig1_out, fig1_seeds, MoonsSetup{}, fig1_res, fig1_points, fig1_jobs);
      out << "wrote " << runs.size() << " boundary grids and summary.csv to " << fig1_out << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace dbnmix
