#include <doctest.h>

#include "oracles.hpp"
#include "spikeforge/error.hpp"
#include "spikeforge/harness.hpp"
#include "spikeforge/synth.hpp"

using namespace spikeforge;

namespace {

Dataset small_dataset(int n_cells, std::uint64_t seed, double gamma = 0.98, const std::string& id = "syn") {
  SynthConfig cfg;
  cfg.n_cells = n_cells;
  cfg.duration_s = 30.0;
  cfg.rate_min_hz = 2.0;
  cfg.rate_max_hz = 20.0;
  cfg.seed = seed;
  cfg.gamma = gamma;
  cfg.dataset_id = id;
  return generate_dataset(cfg);
}

ExperimentSpec quick_spec(Protocol protocol) {
  ExperimentSpec spec;
  spec.protocol = protocol;
  TrainConfig cfg;
  cfg.n_members = 2;
  cfg.max_iters = 40;
  spec.models = {{"stm", cfg}};
  return spec;
}

}  // namespace

TEST_CASE("loocv produces one row per cell per method") {
  const std::vector<Dataset> data = {small_dataset(4, 1)};
  const ExperimentResult r = run_loocv(data, quick_spec(Protocol::Loocv));
  REQUIRE(r.reports.size() == 3);  // stm, raw, deconv
  for (const auto& rep : r.reports) CHECK(rep.per_cell.size() == 4);
  CHECK(r.predictions[0].folds.size() == 4);
  for (const auto& f : r.predictions[0].folds) {
    CHECK(f.held_out.size() == 1);
    CHECK(f.train.size() == 3);
    CHECK(std::find(f.train.begin(), f.train.end(), f.held_out[0]) == f.train.end());
  }
  CHECK(r.record.at("spec").at("models").size() == 1);
  CHECK(r.tables.count("summary.csv") == 1);
}

TEST_CASE("held-out labels never reach the held-out prediction") {
  std::vector<Dataset> data = {small_dataset(3, 2)};
  const ExperimentSpec spec = quick_spec(Protocol::Loocv);
  const ExperimentResult a = run_loocv(data, spec);

  // Recompute cell 0's prediction from the other cells alone.
  const auto cells = prepare_dataset(data[0]);
  const TrainResult t = fit_pipeline({&cells[1], &cells[2]}, spec.models[0].config);
  CHECK(predict_rates(t.ensemble, cells[0].fluorescence) == a.predictions[0].methods[0].rates[0]);

  // Moving cell 0's spikes around leaves its own prediction untouched.
  auto& spikes = data[0].cells[0].spike_times_s;
  for (auto& s : spikes) s = std::max(0.0, s - 0.3);
  spikes.erase(std::unique(spikes.begin(), spikes.end()), spikes.end());
  const ExperimentResult b = run_loocv(data, spec);
  CHECK(b.predictions[0].methods[0].rates[0] == a.predictions[0].methods[0].rates[0]);
}

TEST_CASE("rebinned sweep equals independent per-rate evaluation") {
  const std::vector<Dataset> data = {small_dataset(3, 3)};
  ExperimentSpec spec = quick_spec(Protocol::FreqSweep);
  spec.baselines = false;
  spec.eval_rates_hz = {2, 5, 10, 25, 50, 100};
  const ExperimentResult sweep = run_freq_sweep(data, spec);
  CHECK(sweep.reports.size() == 6);
  const auto& preds = sweep.predictions[0];
  for (double rate : spec.eval_rates_hz) {
    const MetricsReport solo = score_predictions("stm", preds.cell_ids, preds.methods[0].rates, preds.counts, rate);
    CHECK(to_csv(solo) == to_csv(sweep.report("syn", "stm", rate)));
  }
  CHECK(sweep.tables.at("freq_sweep.csv").find("syn,stm,2,") != std::string::npos);
}

TEST_CASE("complexity runs every kind on identical folds") {
  const std::vector<Dataset> data = {small_dataset(3, 4)};
  ExperimentSpec spec;
  spec.protocol = Protocol::Complexity;
  spec.baselines = false;
  for (ModelKind k : {ModelKind::Stm, ModelKind::Lnp, ModelKind::Mlnn}) {
    TrainConfig cfg;
    cfg.kind = k;
    cfg.n_members = 1;
    cfg.max_iters = 20;
    spec.models.push_back({std::string(to_string(k)), cfg});
  }
  const ExperimentResult r = run_complexity(data, spec);
  CHECK(r.reports.size() == 3);
  const auto& hashes = r.record.at("fold_hashes").at("syn");
  CHECK(hashes.at("stm") == hashes.at("lnp"));
  CHECK(hashes.at("stm") == hashes.at("mlnn"));
  CHECK(r.tables.at("complexity.csv").find("stm,lnp,correlation") != std::string::npos);
}

TEST_CASE("cross-dataset trains on the other datasets") {
  const std::vector<Dataset> data = {small_dataset(2, 5, 0.98, "a"), small_dataset(3, 6, 0.9, "b")};
  ExperimentSpec spec = quick_spec(Protocol::CrossDataset);
  spec.baselines = false;
  const ExperimentResult r = run_cross_dataset(data, spec);
  REQUIRE(r.predictions.size() == 2);
  CHECK(r.predictions[0].folds[0].train.size() == 3);
  CHECK(r.predictions[1].folds[0].train.size() == 2);
  CHECK_THROWS_AS(run_cross_dataset({data[0]}, spec), DataError);
}

TEST_CASE("size sweep is seeded and sized as requested") {
  const std::vector<Dataset> data = {small_dataset(4, 7)};
  ExperimentSpec spec = quick_spec(Protocol::SizeSweep);
  spec.baselines = false;
  spec.sizes = {1, 3};
  const ExperimentResult a = run_size_sweep(data, spec);
  const ExperimentResult b = run_size_sweep(data, spec);
  CHECK(a.tables.at("size_sweep.csv") == b.tables.at("size_sweep.csv"));
  CHECK(a.predictions[0].folds[0].train.size() == 1);
  CHECK(a.predictions[1].folds[0].train.size() == 3);
  spec.sizes = {4};
  CHECK_THROWS_AS(run_size_sweep(data, spec), UsageError);
}

TEST_CASE("experiment spec validation") {
  CHECK_THROWS_AS(parse_protocol("bootstrap"), UsageError);
  nlohmann::json doc = {{"protocol", "loocv"}, {"datasets", {"x"}}, {"eval_rates_hz", {30}}};
  CHECK_THROWS_AS(experiment_spec_from_json(doc), UsageError);
  doc["eval_rates_hz"] = {25};
  doc["seed"] = 9;
  doc["models"] = {{{"kind", "lnp"}}};
  const ExperimentSpec spec = experiment_spec_from_json(doc);
  CHECK(spec.models.at(0).config.seed == 9);
  CHECK(spec.models.at(0).name == "lnp");
  CHECK(experiment_spec_from_json(to_json(spec)).models.at(0).config.kind == ModelKind::Lnp);
  CHECK_THROWS_AS(run_loocv({small_dataset(1, 1)}, quick_spec(Protocol::Loocv)), DataError);
}
