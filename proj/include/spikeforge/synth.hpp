#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "spikeforge/signal_io.hpp"

namespace spikeforge {

// Generative model per bin:
//   k_t ~ Poisson(rate_hz / sample_rate_hz)
//   C_t = gamma * C_{t-1} + k_t,  C_0 = 0
//   x_t ~ Poisson(a * C_t + quadratic_gain * C_t^2 + b)
struct SynthConfig {
  double gamma = 0.98;
  double a = 100.0;
  double b = 1.0;
  double rate_min_hz = 0.0;
  double rate_max_hz = 400.0;
  double duration_s = 100.0;
  double sample_rate_hz = 100.0;
  int n_cells = 20;
  std::uint64_t seed = 0;
  // Overrides the per-cell uniform rate draw.
  std::optional<double> fixed_rate_hz;
  double quadratic_gain = 0.0;
  std::string dataset_id = "synthetic";

  void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& doc);

struct SynthCell {
  Recording recording;
  std::vector<int> counts;
  std::vector<double> calcium;
  double rate_hz = 0.0;
};

SynthCell simulate_cell(const SynthConfig& cfg, int cell_index);
Recording generate_cell(const SynthConfig& cfg, int cell_index);
Dataset generate_dataset(const SynthConfig& cfg);
// Writes the dataset directory; returns the in-memory dataset.
Dataset write_synthetic_dataset(const SynthConfig& cfg, const std::filesystem::path& dir);

}  // namespace spikeforge
