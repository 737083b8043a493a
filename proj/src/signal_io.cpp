#include "spikeforge/signal_io.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "spikeforge/error.hpp"
#include "spikeforge/text_io.hpp"

namespace spikeforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kBundleFormatVersion = 1;

template <typename T>
std::vector<T> rebin(std::span<const T> values, int factor) {
  if (factor < 1) throw UsageError("rebin: factor must be >= 1, got " + std::to_string(factor));
  const std::size_t groups = values.size() / static_cast<std::size_t>(factor);
  std::vector<T> out(groups, T{});
  for (std::size_t j = 0; j < groups; ++j) {
    T sum{};
    for (int i = 0; i < factor; ++i) sum += values[j * factor + i];
    out[j] = sum;
  }
  return out;
}

json parse_json_file(const fs::path& path) {
  const std::string text = text::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace

void Recording::validate() const {
  if (!(fluor_rate_hz > 0.0) || !std::isfinite(fluor_rate_hz)) {
    throw DataError("recording '" + cell_id + "': nonpositive sampling rate");
  }
  if (fluorescence.empty()) throw DataError("recording '" + cell_id + "': empty fluorescence");
  const double duration = duration_s();
  for (std::size_t i = 0; i < spike_times_s.size(); ++i) {
    const double t = spike_times_s[i];
    if (!(t >= 0.0)) throw DataError("recording '" + cell_id + "': negative spike time");
    if (i > 0 && !(t > spike_times_s[i - 1])) {
      throw DataError("recording '" + cell_id + "': spike times not strictly increasing");
    }
    if (t > duration) throw DataError("recording '" + cell_id + "': spike beyond trace end");
  }
}

Recording load_recording(const fs::path& bundle) {
  for (const char* name : {"trace.csv", "spikes.csv", "meta.json"}) {
    if (!fs::exists(bundle / name)) {
      throw DataError((bundle / name).string() + ": missing file");
    }
  }
  Recording rec;

  const fs::path meta_path = bundle / "meta.json";
  const json meta = parse_json_file(meta_path);
  try {
    rec.cell_id = meta.at("cell_id").get<std::string>();
    rec.dataset_id = meta.at("dataset_id").get<std::string>();
    rec.indicator = meta.at("indicator").get<std::string>();
    rec.fluor_rate_hz = meta.at("fluor_rate_hz").get<double>();
    if (meta.contains("meta")) rec.meta = meta.at("meta").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw DataError(meta_path.string() + ": " + e.what());
  }
  if (!(rec.fluor_rate_hz > 0.0)) {
    throw DataError(meta_path.string() + ": nonpositive sampling rate");
  }

  const auto trace = text::read_csv(bundle / "trace.csv", "t_s,f");
  rec.fluorescence.reserve(trace.rows.size());
  double prev_t = -INFINITY;
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const double t = text::parse_double(trace.rows[i][0], trace.where(i));
    if (!(t > prev_t)) throw DataError(trace.where(i) + ": t_s not strictly increasing");
    prev_t = t;
    rec.fluorescence.push_back(text::parse_double(trace.rows[i][1], trace.where(i)));
  }
  if (rec.fluorescence.empty()) throw DataError((bundle / "trace.csv").string() + ": no samples");

  const auto spikes = text::read_csv(bundle / "spikes.csv", "t_s");
  const double duration = rec.duration_s();
  for (std::size_t i = 0; i < spikes.rows.size(); ++i) {
    const double t = text::parse_double(spikes.rows[i][0], spikes.where(i));
    if (t < 0.0) throw DataError(spikes.where(i) + ": negative spike time");
    if (!rec.spike_times_s.empty() && !(t > rec.spike_times_s.back())) {
      throw DataError(spikes.where(i) + ": spike times not strictly increasing");
    }
    if (t > duration) throw DataError(spikes.where(i) + ": spike beyond trace end");
    rec.spike_times_s.push_back(t);
  }
  return rec;
}

void save_recording(const Recording& rec, const fs::path& bundle) {
  rec.validate();
  fs::create_directories(bundle);

  std::string trace = "t_s,f\n";
  for (std::size_t i = 0; i < rec.fluorescence.size(); ++i) {
    trace += text::format_double((static_cast<double>(i) + 0.5) / rec.fluor_rate_hz);
    trace += ',';
    trace += text::format_double(rec.fluorescence[i]);
    trace += '\n';
  }
  text::write_file(bundle / "trace.csv", trace);

  std::string spikes = "t_s\n";
  for (double t : rec.spike_times_s) {
    spikes += text::format_double(t);
    spikes += '\n';
  }
  text::write_file(bundle / "spikes.csv", spikes);

  json meta = {{"format_version", kBundleFormatVersion},
               {"cell_id", rec.cell_id},
               {"dataset_id", rec.dataset_id},
               {"indicator", rec.indicator},
               {"fluor_rate_hz", rec.fluor_rate_hz},
               {"meta", rec.meta}};
  text::write_file(bundle / "meta.json", meta.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path index = dir / "dataset.json";
  if (!fs::exists(index)) throw DataError(index.string() + ": missing file");
  const json doc = parse_json_file(index);
  Dataset ds;
  std::vector<std::string> members;
  try {
    ds.dataset_id = doc.at("dataset_id").get<std::string>();
    members = doc.at("members").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(index.string() + ": " + e.what());
  }
  for (const auto& m : members) ds.cells.push_back(load_recording(dir / m));
  return ds;
}

void save_dataset(const Dataset& dataset, const fs::path& dir, const json& config) {
  fs::create_directories(dir);
  std::vector<std::string> members;
  for (const auto& rec : dataset.cells) {
    save_recording(rec, dir / rec.cell_id);
    members.push_back(rec.cell_id);
  }
  json doc = {{"format_version", kBundleFormatVersion},
              {"dataset_id", dataset.dataset_id},
              {"members", members}};
  if (!config.is_null()) doc["config"] = config;
  text::write_file(dir / "dataset.json", doc.dump(2) + "\n");
}

BinnedRecording resample_to_common(const Recording& rec, double target_hz) {
  if (!(target_hz > 0.0)) throw UsageError("resample_to_common: target rate must be positive");
  rec.validate();
  const double duration = rec.duration_s();
  // Guard against floor(10 s * 100 Hz) landing on 999.999...
  const auto n_bins = static_cast<std::size_t>(std::floor(duration * target_hz + 1e-9));
  if (n_bins == 0) throw DataError("recording '" + rec.cell_id + "': shorter than one target bin");

  BinnedRecording out;
  out.cell_id = rec.cell_id;
  out.bin_rate_hz = target_hz;
  out.fluorescence.resize(n_bins);
  out.spike_counts.assign(n_bins, 0);

  const auto& f = rec.fluorescence;
  const std::size_t n = f.size();
  for (std::size_t i = 0; i < n_bins; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / target_hz;
    // Position in sample-index units; sample j sits at (j + 0.5) / rate.
    double pos = t * rec.fluor_rate_hz - 0.5;
    if (std::abs(pos - std::round(pos)) < 1e-9) pos = std::round(pos);
    if (pos <= 0.0) {
      out.fluorescence[i] = f.front();
    } else if (pos >= static_cast<double>(n - 1)) {
      out.fluorescence[i] = f.back();
    } else {
      const auto j = static_cast<std::size_t>(std::floor(pos));
      const double frac = pos - static_cast<double>(j);
      out.fluorescence[i] = frac == 0.0 ? f[j] : f[j] + frac * (f[j + 1] - f[j]);
    }
  }
  for (double t : rec.spike_times_s) {
    // Decimal boundaries such as 0.29 s * 100 Hz land just below the integer.
    const auto bin = static_cast<long long>(std::floor(t * target_hz + 1e-9));
    if (bin >= 0 && static_cast<std::size_t>(bin) < n_bins) ++out.spike_counts[bin];
  }
  return out;
}

std::vector<int> rebin_counts(std::span<const int> counts, int factor) {
  return rebin(counts, factor);
}

std::vector<double> rebin_rates(std::span<const double> rates, int factor) {
  return rebin(rates, factor);
}

}  // namespace spikeforge
