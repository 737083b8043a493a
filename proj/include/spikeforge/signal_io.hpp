#pragma once

#include <filesystem>
#include <json.hpp>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spikeforge {

// A raw recording as it arrives from an experiment or the simulator.
// Sample i of `fluorescence` is taken at time (i + 0.5) / fluor_rate_hz.
struct Recording {
  std::string cell_id;
  std::string dataset_id;
  std::vector<double> fluorescence;
  double fluor_rate_hz = 0.0;
  std::vector<double> spike_times_s;
  std::string indicator;
  std::map<std::string, std::string> meta;

  double duration_s() const {
    return static_cast<double>(fluorescence.size()) / fluor_rate_hz;
  }

  // Throws DataError when a structural invariant is broken.
  void validate() const;

  bool operator==(const Recording&) const = default;
};

// Fluorescence and spike counts on a common grid.
struct BinnedRecording {
  std::string cell_id;
  double bin_rate_hz = 100.0;
  std::vector<double> fluorescence;
  std::vector<int> spike_counts;

  std::size_t size() const { return spike_counts.size(); }
};

struct Dataset {
  std::string dataset_id;
  std::vector<Recording> cells;
};

inline constexpr double kCommonRateHz = 100.0;

// Bundle layout: trace.csv ("t_s,f"), spikes.csv ("t_s"), meta.json.
Recording load_recording(const std::filesystem::path& bundle);
void save_recording(const Recording& rec, const std::filesystem::path& bundle);

// Dataset layout: one bundle per member plus dataset.json listing them.
Dataset load_dataset(const std::filesystem::path& dir);
// `config`, when not null, is stored in dataset.json for replay.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir,
                  const nlohmann::json& config = nullptr);

// Linear interpolation of fluorescence onto bin centers, spike histogram on
// half-open bins [i/r, (i+1)/r). Trailing partial bin dropped.
BinnedRecording resample_to_common(const Recording& rec, double target_hz = kCommonRateHz);

// Sums non-overlapping groups of `factor` bins; trailing partial group dropped.
std::vector<int> rebin_counts(std::span<const int> counts, int factor);
std::vector<double> rebin_rates(std::span<const double> rates, int factor);

}  // namespace spikeforge
