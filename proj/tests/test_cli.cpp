#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dbnmix/cli.hpp"
#include "dbnmix/datasets.hpp"
#include "dbnmix/model.hpp"

using namespace dbnmix;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "dbnmix");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "dbnmix_cli_tests" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string first_line(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  return line;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("exit codes") {
  const auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("reproduce-fig1") != std::string::npos);
  CHECK(run({"train", "--help"}).code == 0);
  const auto bad_gamma = run({"train", "--gamma", "-1", "--epochs", "1"});
  CHECK(bad_gamma.code == 1);
  CHECK(bad_gamma.err.find("gamma") != std::string::npos);
  CHECK(run({"train", "--no-such-flag"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"train", "--method", "erm", "--temperature-scaling", "true", "--epochs", "1"}).code == 1);
}

TEST_CASE("train dispatches the full pipeline") {
  const fs::path dir = fresh_dir("train");
  const auto r = run({"train", "--method", "dbn-mix", "--gamma", "inf", "--epochs", "2", "--classes", "4", "--n-max", "60",
                      "--imbalance", "10", "--dim", "3", "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("method dbn-mix") != std::string::npos);
  CHECK(r.out.find("rebalancing") != std::string::npos);
  for (const char* f : {"checkpoint.dbnm", "run.csv", "summary.json", "accuracy.csv"}) CHECK(fs::exists(dir / f));
  CHECK(first_line(dir / "run.csv") == "epoch,train_loss,test_accuracy");
  CHECK(line_count(dir / "run.csv") == 3);
  const Checkpoint ck = load_checkpoint(dir / "checkpoint.dbnm");
  CHECK(ck.config_echo.find("gamma=inf") != std::string::npos);
  CHECK(ck.model.config().dual_branch);
}

TEST_CASE("config file with flag overrides") {
  const fs::path dir = fresh_dir("config");
  {
    std::ofstream(dir / "run.cfg") << "# quick\nmethod=dbn\nepochs=1\nseed=5\neta=2\n";
  }
  const auto r = run({"train", "--config", (dir / "run.cfg").string(), "--seed", "8", "--classes", "3", "--n-max", "40", "--imbalance", "4",
                      "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  const Checkpoint ck = load_checkpoint(dir / "out" / "checkpoint.dbnm");
  CHECK(ck.config_echo.find("method=dbn\n") != std::string::npos);
  CHECK(ck.config_echo.find("seed=8\n") != std::string::npos);
  CHECK(ck.config_echo.find("eta=2\n") != std::string::npos);
  CHECK(run({"train", "--config", (dir / "missing.cfg").string()}).code == 1);
}

TEST_CASE("synth, eval and export-boundary") {
  const fs::path dir = fresh_dir("flow");
  REQUIRE(run({"synth", "--dataset", "moons", "--n-max", "200", "--imbalance", "10", "--out", (dir / "train.csv").string()}).code == 0);
  REQUIRE(run({"synth", "--dataset", "moons", "--test-per-class", "50", "--balanced-test", "--out", (dir / "test.ltds").string()}).code == 0);
  CHECK(load_dataset(dir / "train.csv", DatasetFormat::Csv).class_counts == std::vector<std::size_t>{200, 20});
  CHECK(load_dataset(dir / "test.ltds", DatasetFormat::PackedBinary).class_counts == std::vector<std::size_t>{50, 50});
  CHECK(run({"train", "--dataset", (dir / "train.csv").string(), "--epochs", "1"}).code == 1);
  REQUIRE(run({"train", "--dataset", (dir / "train.csv").string(), "--test", (dir / "test.ltds").string(), "--method", "erm",
               "--epochs", "2", "--out", (dir / "run").string()})
              .code == 0);
  const auto ev = run({"eval", "--checkpoint", (dir / "run" / "checkpoint.dbnm").string(), "--dataset", (dir / "test.ltds").string()});
  REQUIRE(ev.code == 0);
  CHECK(ev.out.rfind("name,accuracy\nclass_0,", 0) == 0);
  CHECK(run({"eval", "--checkpoint", (dir / "run" / "checkpoint.dbnm").string(), "--dataset", (dir / "test.ltds").string(),
             "--mode", "rebalancing"})
            .code == 1);
  const auto eb = run({"export-boundary", "--checkpoint", (dir / "run" / "checkpoint.dbnm").string(), "--dataset",
                       (dir / "train.csv").string(), "--resolution", "5", "--out", (dir / "grid.csv").string()});
  REQUIRE(eb.code == 0);
  CHECK(first_line(dir / "grid.csv") == "x,y,pred,p0");
  CHECK(line_count(dir / "grid.csv") == 26);
}

TEST_CASE("sweep command") {
  const fs::path dir = fresh_dir("sweep");
  const auto r = run({"sweep", "--method", "dbn-mix", "--epochs", "1", "--classes", "2", "--n-max", "100", "--imbalance", "10",
                      "--gamma-grid", "1,2,inf", "--jobs", "2", "--out", (dir / "s.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(first_line(dir / "s.csv") == "eta,epsilon,alpha,gamma,seed,accuracy,many,medium,few,final_loss,sampler_p,error");
  CHECK(line_count(dir / "s.csv") == 4);
  const auto empty = run({"sweep", "--epochs", "1", "--out", (dir / "e.csv").string()});
  CHECK(empty.code == 0);
  CHECK(line_count(dir / "e.csv") == 1);
}

TEST_CASE("reproduce-fig1 file contract") {
  const fs::path dir = fresh_dir("fig1");
  const auto r = run({"reproduce-fig1", "--out", dir.string(), "--seeds", "0,1", "--resolution", "8", "--jobs", "2"});
  REQUIRE(r.code == 0);
  std::size_t grids = 0, files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    ++files;
    if (e.path().filename().string().starts_with("boundary_")) {
      ++grids;
      CHECK(first_line(e.path()) == "x,y,pred,p0");
      CHECK(line_count(e.path()) == 65);
    }
  }
  CHECK(grids == 6);
  CHECK(files == 7);
  CHECK(first_line(dir / "summary.csv") == "method,seed,majority_recall,minority_recall");
  CHECK(line_count(dir / "summary.csv") == 7);
  CHECK(fs::exists(dir / "boundary_bilateral_seed1.csv"));

  const fs::path blocker = dir / "summary.csv";
  CHECK(run({"reproduce-fig1", "--out", (blocker / "sub").string(), "--seeds", "0"}).code == 1);
}
