#include <doctest.h>

#include "oracles.hpp"
#include "spikeforge/error.hpp"
#include "spikeforge/signal_io.hpp"
#include "spikeforge/synth.hpp"

using namespace spikeforge;

TEST_CASE("simulated cells are reproducible and independent of dataset size") {
  SynthConfig cfg;
  cfg.seed = 5;
  cfg.duration_s = 10.0;
  cfg.n_cells = 3;
  const Dataset a = generate_dataset(cfg);
  cfg.n_cells = 5;
  const Dataset b = generate_dataset(cfg);
  CHECK(a.cells[2] == b.cells[2]);
  CHECK(!(a.cells[0] == a.cells[1]));
}

TEST_CASE("spike times bin back to the simulated counts") {
  SynthConfig cfg;
  cfg.seed = 2;
  cfg.duration_s = 20.0;
  cfg.fixed_rate_hz = 50.0;
  const SynthCell cell = simulate_cell(cfg, 0);
  const BinnedRecording b = resample_to_common(cell.recording);
  CHECK(b.spike_counts == cell.counts);
  CHECK(b.fluorescence == cell.recording.fluorescence);
}

TEST_CASE("calcium follows the autoregressive recursion") {
  SynthConfig cfg;
  cfg.duration_s = 5.0;
  const SynthCell cell = simulate_cell(cfg, 1);
  double c = 0.0;
  for (std::size_t t = 0; t < cell.counts.size(); ++t) {
    c = cfg.gamma * c + cell.counts[t];
    CHECK(cell.calcium[t] == doctest::Approx(c).epsilon(1e-12));
  }
}

TEST_CASE("rates are drawn from the configured interval") {
  SynthConfig cfg;
  cfg.duration_s = 1.0;
  cfg.rate_min_hz = 5.0;
  cfg.rate_max_hz = 6.0;
  for (int i = 0; i < 20; ++i) {
    const double r = simulate_cell(cfg, i).rate_hz;
    CHECK(r > 5.0);
    CHECK(r <= 6.0);
  }
}

TEST_CASE("writing a dataset stores the generating config") {
  SynthConfig cfg;
  cfg.n_cells = 2;
  cfg.duration_s = 3.0;
  const auto dir = oracle::scratch_dir("synth");
  write_synthetic_dataset(cfg, dir / "ds");
  const Dataset back = load_dataset(dir / "ds");
  CHECK(back.cells.size() == 2);
  CHECK(back.cells[0].cell_id == "cell_000");
  CHECK(synth_config_from_json(to_json(cfg)).duration_s == 3.0);
  SynthConfig bad;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}
