#include "spikeforge/synth.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "spikeforge/error.hpp"
#include "spikeforge/text_io.hpp"

namespace spikeforge {

using nlohmann::json;

namespace {

constexpr double kSpikeJitterS = 1e-4;

std::mt19937_64 cell_rng(std::uint64_t seed, int cell_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(cell_index), 0x5eedu};
  return std::mt19937_64(seq);
}

int poisson(std::mt19937_64& rng, double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<int> draw(mean);
  return draw(rng);
}

}  // namespace

void SynthConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw UsageError("synth config: gamma must lie in [0, 1)");
  if (!(a > 0.0)) throw UsageError("synth config: a must be positive");
  if (!(b >= 0.0)) throw UsageError("synth config: b must be >= 0");
  if (!(rate_min_hz >= 0.0 && rate_max_hz > rate_min_hz)) {
    throw UsageError("synth config: need 0 <= rate_min_hz < rate_max_hz");
  }
  if (!(duration_s > 0.0 && sample_rate_hz > 0.0)) {
    throw UsageError("synth config: duration and sample rate must be positive");
  }
  if (n_cells < 1) throw UsageError("synth config: n_cells must be >= 1");
  if (fixed_rate_hz && !(*fixed_rate_hz >= 0.0)) throw UsageError("synth config: negative fixed rate");
  if (!(quadratic_gain >= 0.0)) throw UsageError("synth config: quadratic_gain must be >= 0");
}

json to_json(const SynthConfig& cfg) {
  json doc = {{"gamma", cfg.gamma},
              {"a", cfg.a},
              {"b", cfg.b},
              {"rate_min_hz", cfg.rate_min_hz},
              {"rate_max_hz", cfg.rate_max_hz},
              {"duration_s", cfg.duration_s},
              {"sample_rate_hz", cfg.sample_rate_hz},
              {"n_cells", cfg.n_cells},
              {"seed", cfg.seed},
              {"quadratic_gain", cfg.quadratic_gain},
              {"dataset_id", cfg.dataset_id}};
  doc["fixed_rate_hz"] = cfg.fixed_rate_hz ? json(*cfg.fixed_rate_hz) : json(nullptr);
  return doc;
}

SynthConfig synth_config_from_json(const json& doc) {
  static const std::set<std::string> known = {
      "gamma",          "a",       "b",    "rate_min_hz",   "rate_max_hz",    "duration_s",
      "sample_rate_hz", "n_cells", "seed", "fixed_rate_hz", "quadratic_gain", "dataset_id"};
  if (!doc.is_object()) throw UsageError("synth config must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!known.contains(key)) throw UsageError("synth config: unknown key '" + key + "'");
  }
  SynthConfig cfg;
  try {
    cfg.gamma = doc.value("gamma", cfg.gamma);
    cfg.a = doc.value("a", cfg.a);
    cfg.b = doc.value("b", cfg.b);
    cfg.rate_min_hz = doc.value("rate_min_hz", cfg.rate_min_hz);
    cfg.rate_max_hz = doc.value("rate_max_hz", cfg.rate_max_hz);
    cfg.duration_s = doc.value("duration_s", cfg.duration_s);
    cfg.sample_rate_hz = doc.value("sample_rate_hz", cfg.sample_rate_hz);
    cfg.n_cells = doc.value("n_cells", cfg.n_cells);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.quadratic_gain = doc.value("quadratic_gain", cfg.quadratic_gain);
    cfg.dataset_id = doc.value("dataset_id", cfg.dataset_id);
    if (doc.contains("fixed_rate_hz") && !doc.at("fixed_rate_hz").is_null()) {
      cfg.fixed_rate_hz = doc.at("fixed_rate_hz").get<double>();
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("synth config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

SynthCell simulate_cell(const SynthConfig& cfg, int cell_index) {
  cfg.validate();
  auto rng = cell_rng(cfg.seed, cell_index);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SynthCell cell;
  // Uniform on (min, max].
  const double drawn = cfg.rate_max_hz - unit(rng) * (cfg.rate_max_hz - cfg.rate_min_hz);
  cell.rate_hz = cfg.fixed_rate_hz.value_or(drawn);
  const double rate_per_bin = cell.rate_hz / cfg.sample_rate_hz;

  const auto n_bins = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.sample_rate_hz));
  cell.counts.resize(n_bins);
  cell.calcium.resize(n_bins);
  Recording& rec = cell.recording;
  rec.fluorescence.resize(n_bins);

  double c = 0.0;
  for (std::size_t t = 0; t < n_bins; ++t) {
    const int k = poisson(rng, rate_per_bin);
    c = cfg.gamma * c + k;
    cell.counts[t] = k;
    cell.calcium[t] = c;
    rec.fluorescence[t] = poisson(rng, cfg.a * c + cfg.quadratic_gain * c * c + cfg.b);
  }

  char id[32];
  std::snprintf(id, sizeof(id), "cell_%03d", cell_index);
  rec.cell_id = id;
  rec.dataset_id = cfg.dataset_id;
  rec.fluor_rate_hz = cfg.sample_rate_hz;
  rec.indicator = "synthetic";
  rec.meta = {{"rate_hz", text::format_double(cell.rate_hz)},
              {"gamma", text::format_double(cfg.gamma)},
              {"a", text::format_double(cfg.a)},
              {"b", text::format_double(cfg.b)},
              {"quadratic_gain", text::format_double(cfg.quadratic_gain)},
              {"seed", std::to_string(cfg.seed)}};

  // Spikes at bin centers, spread by a small jitter to keep times distinct.
  for (std::size_t t = 0; t < n_bins; ++t) {
    const double center = (static_cast<double>(t) + 0.5) / cfg.sample_rate_hz;
    const int k = cell.counts[t];
    for (int j = 0; j < k; ++j) {
      rec.spike_times_s.push_back(center + (j - 0.5 * (k - 1)) * kSpikeJitterS);
    }
  }
  return cell;
}

Recording generate_cell(const SynthConfig& cfg, int cell_index) {
  return simulate_cell(cfg, cell_index).recording;
}

Dataset generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.dataset_id = cfg.dataset_id;
  for (int i = 0; i < cfg.n_cells; ++i) ds.cells.push_back(generate_cell(cfg, i));
  return ds;
}

Dataset write_synthetic_dataset(const SynthConfig& cfg, const std::filesystem::path& dir) {
  Dataset ds = generate_dataset(cfg);
  save_dataset(ds, dir, to_json(cfg));
  return ds;
}

}  // namespace spikeforge
