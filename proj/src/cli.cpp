#include "spikeforge/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <ostream>

#include "spikeforge/error.hpp"
#include "spikeforge/harness.hpp"
#include "spikeforge/model_io.hpp"
#include "spikeforge/parallel.hpp"
#include "spikeforge/synth.hpp"
#include "spikeforge/text_io.hpp"

namespace spikeforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kArtifactFormatVersion = 1;

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    return json::parse(text::read_file(path));
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": invalid JSON config: " + e.what());
  }
}

// --seed wins, then the config's own seed, then SPIKEFORGE_SEED.
void resolve_seed(json& doc, const std::optional<std::uint64_t>& flag) {
  if (flag) {
    doc["seed"] = *flag;
    return;
  }
  if (doc.contains("seed")) return;
  if (const char* env = std::getenv("SPIKEFORGE_SEED")) {
    doc["seed"] = static_cast<std::uint64_t>(text::parse_int(env, "SPIKEFORGE_SEED"));
  }
}

json resolve_config(const std::string& path, const std::vector<std::string>& overrides,
                    const std::optional<std::uint64_t>& seed) {
  json doc = load_config(path);
  for (const auto& o : overrides) apply_override(doc, o);
  resolve_seed(doc, seed);
  return doc;
}

std::vector<double> read_rates_csv(const fs::path& path) {
  const auto table = text::read_csv(path, "t_s,rate_per_bin");
  std::vector<double> rates;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    rates.push_back(text::parse_double(table.rows[i][1], table.where(i)));
  }
  return rates;
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  bool verbose = false;
  int jobs = default_jobs();

  void log(const std::string& msg) const {
    if (verbose) err << msg << '\n';
  }
};

int cmd_simulate(const Context& ctx, const std::string& config, const std::vector<std::string>& sets,
                 const std::optional<std::uint64_t>& seed, const std::string& output) {
  const SynthConfig cfg = synth_config_from_json(resolve_config(config, sets, seed));
  const Dataset ds = write_synthetic_dataset(cfg, output);
  std::size_t spikes = 0;
  double duration = 0.0;
  for (const auto& c : ds.cells) {
    spikes += c.spike_times_s.size();
    duration += c.duration_s();
  }
  ctx.out << "cells: " << ds.cells.size() << "\nspikes: " << spikes
          << "\nduration_s: " << text::format_double(duration) << "\noutput: " << output << '\n';
  return kOk;
}

int cmd_preprocess(const Context& ctx, const std::string& bundle, const std::string& output) {
  const Recording rec = load_recording(bundle);
  const PreparedCell cell = prepare_cell(rec);
  std::string csv = "t_s,f,count\n";
  for (std::size_t t = 0; t < cell.fluorescence.size(); ++t) {
    csv += text::format_double((static_cast<double>(t) + 0.5) / kCommonRateHz) + "," +
           text::format_double(cell.fluorescence[t]) + "," + std::to_string(cell.counts[t]) + "\n";
  }
  text::write_file(output, csv);
  ctx.out << "bins: " << cell.fluorescence.size() << "\noutput: " << output << '\n';
  return kOk;
}

int cmd_train(const Context& ctx, const std::vector<std::string>& datasets, const std::string& config,
              const std::vector<std::string>& sets, const std::optional<std::uint64_t>& seed,
              const std::vector<std::string>& exclude, const std::string& output, std::string log_path) {
  const TrainConfig cfg = train_config_from_json(resolve_config(config, sets, seed));
  std::vector<PreparedCell> cells;
  json used = json::array();
  for (const auto& path : datasets) {
    const Dataset ds = load_dataset(path);
    for (const auto& rec : ds.cells) {
      if (std::find(exclude.begin(), exclude.end(), rec.cell_id) != exclude.end()) continue;
      used.push_back(ds.dataset_id + "/" + rec.cell_id);
      cells.push_back(prepare_cell(rec));
    }
  }
  if (cells.empty()) throw DataError("train: no cells left after exclusions");
  std::vector<const PreparedCell*> ptrs;
  for (const auto& c : cells) ptrs.push_back(&c);
  ctx.log("training " + std::string(to_string(cfg.kind)) + " on " + std::to_string(cells.size()) + " cells");

  TrainResult result = fit_pipeline(ptrs, cfg, ctx.jobs);
  result.ensemble.provenance = {{"cells", used}};
  save_model(result.ensemble, output);

  if (log_path.empty()) log_path = output + ".log.csv";
  std::string log = "member,seed,iteration,objective\n";
  for (std::size_t m = 0; m < result.members.size(); ++m) {
    const auto& member = result.members[m];
    for (std::size_t it = 0; it < member.optimizer.history.size(); ++it) {
      log += std::to_string(m) + "," + std::to_string(member.seed) + "," + std::to_string(it) + "," +
             text::format_double(member.optimizer.history[it]) + "\n";
    }
  }
  text::write_file(log_path, log);

  ctx.out << "kind: " << to_string(cfg.kind) << "\ncells: " << cells.size()
          << "\npca_dims: " << result.ensemble.pca_basis.n_kept() << "\nmembers: " << result.ensemble.members.size()
          << "\nconstant_loglik: " << text::format_double(result.constant_loglik) << '\n';
  for (std::size_t m = 0; m < result.members.size(); ++m) {
    const auto& member = result.members[m];
    ctx.out << "member " << m << ": loglik " << text::format_double(member.train_loglik) << ", iterations "
            << member.optimizer.iterations << ", stop " << to_string(member.optimizer.reason)
            << (member.aborted ? ", aborted: " + member.diagnostic : "") << '\n';
  }
  ctx.out << "output: " << output << '\n';
  return kOk;
}

int cmd_infer(const Context& ctx, const std::string& model_path, const std::string& bundle,
              const std::string& output, const std::string& sample_path,
              const std::optional<std::uint64_t>& seed) {
  const ModelEnsemble model = load_model(model_path);
  if (model.bin_rate_hz != kCommonRateHz) {
    throw DataError("model bin rate " + text::format_double(model.bin_rate_hz) + " Hz is not " +
                    text::format_double(kCommonRateHz) + " Hz");
  }
  const PreparedCell cell = prepare_cell(load_recording(bundle));
  const std::vector<double> rates = predict_rates(model, cell.fluorescence);

  std::string csv = "t_s,rate_per_bin\n";
  for (std::size_t t = 0; t < rates.size(); ++t) {
    csv += text::format_double((static_cast<double>(t) + 0.5) / kCommonRateHz) + "," +
           text::format_double(rates[t]) + "\n";
  }
  text::write_file(output, csv);
  json sidecar = {{"format_version", kArtifactFormatVersion},
                  {"model", model_path},
                  {"bundle", bundle},
                  {"bin_rate_hz", kCommonRateHz},
                  {"train_config", model.train_config}};

  if (!sample_path.empty()) {
    json seed_doc = json::object();
    resolve_seed(seed_doc, seed);
    const std::uint64_t s = seed_doc.value("seed", std::uint64_t{0});
    const std::vector<int> counts = sample_spike_train(rates, s);
    std::string sampled = "t_s,count\n";
    for (std::size_t t = 0; t < counts.size(); ++t) {
      sampled += text::format_double((static_cast<double>(t) + 0.5) / kCommonRateHz) + "," +
                 std::to_string(counts[t]) + "\n";
    }
    text::write_file(sample_path, sampled);
    sidecar["sample"] = {{"path", sample_path}, {"seed", s}};
  }
  text::write_file(output + ".json", sidecar.dump(2) + "\n");
  ctx.out << "bins: " << rates.size() << "\noutput: " << output << '\n';
  return kOk;
}

int cmd_evaluate(const Context& ctx, const std::vector<std::string>& rate_files,
                 const std::vector<std::string>& bundles, double eval_rate, int knots,
                 const std::string& method, const std::string& output) {
  if (rate_files.size() != bundles.size() || rate_files.empty()) {
    throw UsageError("evaluate: give one --rates per --bundle");
  }
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rates;
  std::vector<std::vector<int>> counts;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const PreparedCell cell = prepare_cell(load_recording(bundles[i]));
    std::vector<double> r = read_rates_csv(rate_files[i]);
    if (r.size() != cell.counts.size()) {
      throw DataError(rate_files[i] + ": " + std::to_string(r.size()) + " rates for " +
                      std::to_string(cell.counts.size()) + " bins");
    }
    ids.push_back(cell.cell_id);
    rates.push_back(std::move(r));
    counts.push_back(cell.counts);
  }
  const MetricsReport report = score_predictions(method, ids, rates, counts, eval_rate, knots);
  ctx.out << to_csv(report);
  ctx.out << "relative_info_gain: " << text::format_double(report.relative_info_gain) << '\n';
  if (!output.empty()) {
    save_metrics_report(report, output);
    fs::path csv_path(output);
    csv_path.replace_extension(".csv");
    text::write_file(csv_path, to_csv(report));
  }
  return kOk;
}

int cmd_experiment(const Context& ctx, const std::string& spec_path, const std::vector<std::string>& sets,
                   const std::optional<std::uint64_t>& seed, const std::string& output, bool jobs_given) {
  json doc = resolve_config(spec_path, sets, seed);
  if (!output.empty()) doc["output"] = output;
  if (jobs_given || !doc.contains("jobs")) doc["jobs"] = ctx.jobs;
  const ExperimentSpec spec = experiment_spec_from_json(doc);
  ctx.log("running " + to_string(spec.protocol));
  const ExperimentResult result = run_experiment(spec);
  ctx.out << result.tables.at("summary.csv");
  if (!spec.output.empty()) ctx.out << "output: " << spec.output.string() << '\n';
  return kOk;
}

int cmd_inspect(const Context& ctx, const std::string& path) {
  const fs::path p(path);
  if (fs::is_directory(p) && fs::exists(p / "dataset.json")) {
    const Dataset ds = load_dataset(p);
    ctx.out << "dataset: " << ds.dataset_id << "\ncells: " << ds.cells.size() << '\n';
    for (const auto& c : ds.cells) {
      ctx.out << c.cell_id << ": " << c.fluorescence.size() << " samples at "
              << text::format_double(c.fluor_rate_hz) << " Hz, " << c.spike_times_s.size() << " spikes\n";
    }
    return kOk;
  }
  if (fs::is_directory(p)) {
    const Recording rec = load_recording(p);
    ctx.out << "cell: " << rec.cell_id << "\ndataset: " << rec.dataset_id
            << "\nduration_s: " << text::format_double(rec.duration_s())
            << "\nspikes: " << rec.spike_times_s.size() << '\n';
    return kOk;
  }
  json doc;
  try {
    doc = json::parse(text::read_file(p));
  } catch (const json::parse_error& e) {
    throw DataError(path + ": not a JSON artifact: " + e.what());
  }
  if (doc.contains("members") && doc.contains("pca_basis")) {
    const ModelEnsemble m = ensemble_from_json(doc);
    ctx.out << "model: " << to_string(m.kind) << "\nmembers: " << m.members.size()
            << "\npca_dims: " << m.pca_basis.n_kept() << "\nwindow_ms: " << text::format_double(m.window_ms)
            << "\nparameters_per_member: " << parameter_count(m.members.front()) << '\n';
    return kOk;
  }
  if (doc.contains("per_cell")) {
    const MetricsReport r = metrics_report_from_json(doc);
    ctx.out << to_csv(r) << "relative_info_gain: " << text::format_double(r.relative_info_gain) << '\n';
    return kOk;
  }
  ctx.out << doc.dump(2) << '\n';
  return kOk;
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError("override '" + assignment + "' must look like key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  const auto parts = text::split(path, '.');
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string key(parts[i]);
    if (key.empty()) throw UsageError("override '" + assignment + "': empty path segment");
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      const auto idx = static_cast<std::size_t>(text::parse_int(key, "override index"));
      if (idx >= node->size()) throw UsageError("override '" + assignment + "': index out of range");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw UsageError("override '" + assignment + "': '" + key + "' is not an object");
      node = &(*node)[key];
    }
    if (last) *node = value;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"spikeforge: supervised spike inference from calcium fluorescence"};
  app.require_subcommand(1);
  // Global flags may also follow the subcommand.
  app.fallthrough();
  bool verbose = false;
  int jobs = default_jobs();
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");
  auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads (default: logical cores)")->check(CLI::PositiveNumber);

  std::string config, output, bundle, model_path, spec_path, sample_path, log_path, method = "model";
  std::vector<std::string> sets, datasets, exclude, rate_files, bundles;
  std::optional<std::uint64_t> seed;
  double eval_rate = 25.0;
  int knots = 10;

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  simulate->add_option("--config", config, "Synthetic data config (JSON)");
  simulate->add_option("--set", sets, "Override key=value");
  simulate->add_option("--seed", seed, "Seed");
  simulate->add_option("-o,--output", output, "Dataset directory")->required();

  auto* preprocess = app.add_subcommand("preprocess", "Detrend, normalize and bin one recording");
  preprocess->add_option("--bundle", bundle, "Recording bundle")->required();
  preprocess->add_option("-o,--output", output, "Output CSV")->required();

  auto* train = app.add_subcommand("train", "Train a model ensemble on datasets");
  train->add_option("--dataset", datasets, "Dataset directory (repeatable)")->required();
  train->add_option("--config", config, "Train config (JSON)");
  train->add_option("--set", sets, "Override key=value");
  train->add_option("--seed", seed, "Seed");
  train->add_option("--exclude", exclude, "Cell id to leave out (repeatable)");
  train->add_option("--log", log_path, "Training log CSV (default: <output>.log.csv)");
  train->add_option("-o,--output", output, "Model file")->required();

  auto* infer = app.add_subcommand("infer", "Predict spike rates for one recording");
  infer->add_option("--model", model_path, "Model file")->required();
  infer->add_option("--bundle", bundle, "Recording bundle")->required();
  infer->add_option("--sample", sample_path, "Also write a sampled spike train here");
  infer->add_option("--seed", seed, "Sampling seed");
  infer->add_option("-o,--output", output, "Rates CSV")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score rate files against recordings");
  evaluate->add_option("--rates", rate_files, "Rates CSV (repeatable, paired with --bundle)")->required();
  evaluate->add_option("--bundle", bundles, "Recording bundle (repeatable)")->required();
  evaluate->add_option("--eval-rate", eval_rate, "Evaluation rate in Hz (must divide 100)");
  evaluate->add_option("--knots", knots, "Calibration knots");
  evaluate->add_option("--method", method, "Method label for the report");
  evaluate->add_option("-o,--output", output, "Report JSON (CSV written alongside)");

  auto* experiment = app.add_subcommand("experiment", "Run an experiment protocol");
  experiment->add_option("--spec", spec_path, "Experiment spec (JSON)")->required();
  experiment->add_option("--set", sets, "Override key=value");
  experiment->add_option("--seed", seed, "Seed");
  experiment->add_option("-o,--output", output, "Output directory");

  auto* inspect = app.add_subcommand("inspect", "Summarize a dataset, bundle, model or report");
  std::string inspect_path;
  inspect->add_option("path", inspect_path, "Artifact path")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  Context ctx{out, err, verbose, jobs};
  try {
    if (*simulate) return cmd_simulate(ctx, config, sets, seed, output);
    if (*preprocess) return cmd_preprocess(ctx, bundle, output);
    if (*train) return cmd_train(ctx, datasets, config, sets, seed, exclude, output, log_path);
    if (*infer) return cmd_infer(ctx, model_path, bundle, output, sample_path, seed);
    if (*evaluate) return cmd_evaluate(ctx, rate_files, bundles, eval_rate, knots, method, output);
    if (*experiment) return cmd_experiment(ctx, spec_path, sets, seed, output, jobs_opt->count() > 0);
    if (*inspect) return cmd_inspect(ctx, inspect_path);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace spikeforge::cli
