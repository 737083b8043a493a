#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "spikeforge/cli.hpp"
#include "spikeforge/harness.hpp"
#include "spikeforge/metrics.hpp"
#include "spikeforge/signal_io.hpp"
#include "spikeforge/text_io.hpp"

using namespace spikeforge;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  args.insert(args.begin(), "spikeforge");
  args.erase(args.begin());
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string p(const std::filesystem::path& path) { return path.string(); }

// Three short cells shared by the tests below.
std::filesystem::path simulated(const std::string& name) {
  const auto dir = oracle::scratch_dir(name);
  const Run r = cli_run({"simulate", "--set", "n_cells=3", "--set", "duration_s=20", "--set", "rate_min_hz=2",
                         "--set", "rate_max_hz=15", "--seed", "3", "-o", p(dir / "data")});
  REQUIRE(r.code == 0);
  return dir;
}

}  // namespace

TEST_CASE("dotted overrides") {
  nlohmann::json doc = {{"a", {{"b", 1}}}, {"list", {1, 2}}};
  cli::apply_override(doc, "a.b=2.5");
  cli::apply_override(doc, "a.c=hello");
  cli::apply_override(doc, "list.1=7");
  cli::apply_override(doc, "flag=true");
  CHECK(doc["a"]["b"] == 2.5);
  CHECK(doc["a"]["c"] == "hello");
  CHECK(doc["list"][1] == 7);
  CHECK(doc["flag"] == true);
  CHECK_THROWS(cli::apply_override(doc, "noequals"));
}

TEST_CASE("exit codes") {
  CHECK(cli_run({}).code == cli::kUsage);
  CHECK(cli_run({"frobnicate"}).code == cli::kUsage);
  CHECK(cli_run({"inspect", "/nonexistent/path.json"}).code == cli::kDataError);
  const auto dir = oracle::scratch_dir("cli_codes");
  text::write_file(dir / "spec.json", R"({"protocol": "bootstrap", "datasets": ["x"]})");
  const Run bad = cli_run({"experiment", "--spec", p(dir / "spec.json")});
  CHECK(bad.code == cli::kUsage);
  CHECK(!bad.err.empty());
  CHECK(cli_run({"simulate", "--set", "gamma=1.5", "-o", p(dir / "x")}).code == cli::kUsage);
}

TEST_CASE("simulate writes the requested number of bundles") {
  const auto dir = simulated("cli_sim");
  const Dataset ds = load_dataset(dir / "data");
  CHECK(ds.cells.size() == 3);
  const Run r = cli_run({"inspect", p(dir / "data")});
  CHECK(r.code == 0);
  CHECK(r.out.find("cells: 3") != std::string::npos);
}

TEST_CASE("training is byte-for-byte reproducible and kinds differ in shape") {
  const auto dir = simulated("cli_train");
  const std::vector<std::string> common = {"train", "--dataset", p(dir / "data"), "--set", "max_iters=30",
                                           "--set", "n_members=2", "--seed", "11"};
  auto with_output = [&](const std::string& out, std::vector<std::string> extra) {
    std::vector<std::string> args = common;
    args.insert(args.end(), extra.begin(), extra.end());
    args.push_back("-o");
    args.push_back(p(dir / out));
    return cli_run(args);
  };
  REQUIRE(with_output("a.json", {}).code == 0);
  REQUIRE(with_output("b.json", {"--jobs", "2"}).code == 0);
  CHECK(text::read_file(dir / "a.json") == text::read_file(dir / "b.json"));
  CHECK(std::filesystem::exists(dir / "a.json.log.csv"));
  REQUIRE(with_output("lnp.json", {"--set", "kind=lnp"}).code == 0);
  const auto stm = nlohmann::json::parse(text::read_file(dir / "a.json"));
  const auto lnp = nlohmann::json::parse(text::read_file(dir / "lnp.json"));
  CHECK(stm.at("format_version") == 1);
  CHECK(stm.at("members").at(0).contains("beta"));
  CHECK(!lnp.at("members").at(0).contains("beta"));
  CHECK(cli_run({"inspect", p(dir / "a.json")}).out.find("model: stm") != std::string::npos);
}

TEST_CASE("infer then evaluate reproduces the harness scores") {
  const auto dir = simulated("cli_pipeline");
  const auto data = dir / "data";
  const Dataset ds = load_dataset(data);
  ExperimentSpec spec;
  TrainConfig cfg;
  cfg.n_members = 2;
  cfg.max_iters = 30;
  cfg.seed = 5;
  spec.models = {{"stm", cfg}};
  spec.baselines = false;
  const ExperimentResult harness = run_loocv({ds}, spec);

  std::vector<std::string> eval = {"evaluate", "--method", "stm", "-o", p(dir / "report.json")};
  for (const auto& cell : ds.cells) {
    const auto model = dir / (cell.cell_id + ".json");
    const auto rates = dir / (cell.cell_id + ".csv");
    REQUIRE(cli_run({"train", "--dataset", p(data), "--exclude", cell.cell_id, "--set", "n_members=2", "--set",
                     "max_iters=30", "--seed", "5", "-o", p(model)})
                .code == 0);
    REQUIRE(cli_run({"infer", "--model", p(model), "--bundle", p(data / cell.cell_id), "-o", p(rates)}).code == 0);
    eval.insert(eval.end(), {"--rates", p(rates), "--bundle", p(data / cell.cell_id)});
  }
  REQUIRE(cli_run(eval).code == 0);
  const MetricsReport cli_report = load_metrics_report(dir / "report.json");
  CHECK(to_csv(cli_report) == to_csv(harness.report("synthetic", "stm", 25.0)));
  CHECK(std::filesystem::exists(dir / "report.csv"));

  // Rates are positive and sampling is seeded.
  const auto rates_path = dir / (ds.cells[0].cell_id + ".csv");
  const auto table = text::read_csv(rates_path, "t_s,rate_per_bin");
  for (std::size_t i = 0; i < table.rows.size(); ++i) CHECK(text::parse_double(table.rows[i][1], "r") > 0.0);
  const auto model = p(dir / (ds.cells[0].cell_id + ".json"));
  const auto bundle = p(data / ds.cells[0].cell_id);
  cli_run({"infer", "--model", model, "--bundle", bundle, "-o", p(dir / "r1.csv"), "--sample", p(dir / "s1.csv"),
           "--seed", "4"});
  cli_run({"infer", "--model", model, "--bundle", bundle, "-o", p(dir / "r2.csv"), "--sample", p(dir / "s2.csv"),
           "--seed", "4"});
  CHECK(text::read_file(dir / "s1.csv") == text::read_file(dir / "s2.csv"));
  CHECK(nlohmann::json::parse(text::read_file(dir / "r1.csv.json")).at("format_version") == 1);
}

TEST_CASE("experiment reports replay to identical tables") {
  const auto dir = simulated("cli_experiment");
  text::write_file(dir / "spec.json", R"({
    "protocol": "freq_sweep",
    "datasets": [")" + p(dir / "data") + R"("],
    "models": [{"kind": "lnp", "n_members": 1, "max_iters": 30}],
    "eval_rates_hz": [5, 25]
  })");
  REQUIRE(cli_run({"experiment", "--spec", p(dir / "spec.json"), "--seed", "2", "-o", p(dir / "e1")}).code == 0);
  // Replay straight from the recorded spec.
  const auto record = nlohmann::json::parse(text::read_file(dir / "e1" / "experiment.json"));
  text::write_file(dir / "replay.json", record.at("spec").dump());
  REQUIRE(cli_run({"experiment", "--spec", p(dir / "replay.json"), "-o", p(dir / "e2")}).code == 0);
  CHECK(text::read_file(dir / "e1" / "freq_sweep.csv") == text::read_file(dir / "e2" / "freq_sweep.csv"));
  CHECK(text::read_file(dir / "e1" / "summary.csv") == text::read_file(dir / "e2" / "summary.csv"));
  CHECK(std::filesystem::exists(dir / "e1" / "reports" / "synthetic__lnp__5Hz.csv"));
}
