#include "commands.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fscil/benchmark.hpp"
#include "fscil/binary_io.hpp"
#include "fscil/dataset.hpp"
#include "fscil/encoders.hpp"
#include "fscil/error.hpp"
#include "fscil/learner.hpp"
#include "fscil/metrics.hpp"
#include "fscil/optimizer.hpp"
#include "fscil/rfe.hpp"
#include "fscil/run_config.hpp"

namespace fscil::cli {

namespace fs = std::filesystem;

namespace {

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string rfe;
  std::string snc;
  std::string cl;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration");
    cmd->add_option("--set", sets, "Override a config key, e.g. --set lr=0.01 (value parsed as JSON)");
    cmd->add_option("--seed", seed, "Master seed");
    for (auto [name, target] : {std::pair{"--rfe", &rfe}, {"--snc", &snc}, {"--cl", &cl}}) {
      cmd->add_option(name, *target, "on|off")->check(CLI::IsMember({"on", "off"}));
    }
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    nlohmann::json overrides = nlohmann::json::object();
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + kv + "'");
      const std::string key = kv.substr(0, eq);
      const std::string value = kv.substr(eq + 1);
      overrides[key] = nlohmann::json::accept(value) ? nlohmann::json::parse(value) : nlohmann::json(value);
    }
    if (seed) overrides["master_seed"] = *seed;
    if (!rfe.empty()) overrides["rfe_enabled"] = rfe == "on";
    if (!snc.empty()) overrides["snc_enabled"] = snc == "on";
    if (!cl.empty()) overrides["cl_enabled"] = cl == "on";
    return merge_config(cfg, overrides);
  }
};

struct DataArgs {
  std::string schedule;
  std::string base;
  std::string inc;

  void attach(CLI::App* cmd) {
    cmd->add_option("--schedule", schedule, "Schedule JSON")->required();
    cmd->add_option("--base", base, "Base dataset manifest")->required();
    cmd->add_option("--inc", inc, "Incremental dataset manifest")->required();
  }
};

struct LoadedData {
  DatasetManifest base;
  DatasetManifest inc;
  SessionSchedule schedule;
  SampleStore store;
};

LoadedData load_data(const std::string& schedule, const std::string& base, const std::string& inc) {
  LoadedData d{load_manifest(base), load_manifest(inc), load_schedule(schedule), {}};
  d.store.add(d.base);
  d.store.add(d.inc);
  return d;
}

std::string join_sizes(const SessionSchedule& s) {
  std::string out;
  for (const auto& session : s.sessions) {
    if (!out.empty()) out += ",";
    out += std::to_string(session.classes.size());
  }
  return out;
}

std::string checkpoint_name(std::size_t b) { return fmt::format("session_{:02}.ckpt", b); }

void write_json(const fs::path& path, const nlohmann::json& doc) { io::write_text_file(path, doc.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(io::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("cannot parse " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

int cmd_gen_benchmark(const std::string& suite, const std::string& base_path, const std::string& inc_path,
                      const std::string& alias_path, std::size_t per_session, const std::string& out_path,
                      std::ostream& out) {
  DatasetManifest base;
  DatasetManifest inc;
  AliasMap aliases;
  if (!suite.empty()) {
    ShippedBenchmark shipped = shipped_benchmark(suite);
    base = std::move(shipped.base);
    inc = std::move(shipped.inc);
    aliases = std::move(shipped.aliases);
  } else {
    if (base_path.empty() || inc_path.empty()) throw ConfigError("either --suite or both --base and --inc are required");
    base = load_manifest(base_path);
    inc = load_manifest(inc_path);
    if (!alias_path.empty()) aliases = load_aliases(alias_path);
  }
  const SessionSchedule schedule = build_schedule(base, inc, per_session, aliases);
  if (!out_path.empty()) write_schedule(out_path, schedule);
  out << schedule.size() << " sessions: " << join_sizes(schedule) << "\n";
  return kExitOk;
}

int cmd_gen_synthetic(const SyntheticSpec& spec, std::size_t per_session, const std::string& out_dir,
                      std::ostream& out) {
  const SyntheticBenchmark b = make_synthetic_benchmark(spec);
  const fs::path dir(out_dir);
  write_manifest(dir / "base.json", b.base);
  write_manifest(dir / "inc.json", b.inc);
  const SessionSchedule schedule = build_schedule(b.base, b.inc, per_session, {});
  write_schedule(dir / "schedule.json", schedule);
  out << "wrote " << (dir / "base.json").string() << ", " << (dir / "inc.json").string() << ", "
      << (dir / "schedule.json").string() << "\n";
  out << schedule.size() << " sessions: " << join_sizes(schedule) << "\n";
  return kExitOk;
}

std::vector<std::string> manifest_ids(const DatasetManifest& m, const std::string& split) {
  std::vector<std::string> ids;
  for (const auto& c : m.classes) {
    for (const auto& s : c.samples) {
      if (split == "all" || s.split == split) ids.push_back(s.id);
    }
  }
  return ids;
}

EmbeddingMatrix depth_embeddings(const DatasetManifest& manifest, const std::string& split, const RunConfig& cfg) {
  SampleStore store;
  store.add(manifest);
  const FeatureExtractor extractor(cfg);
  EmbeddingMatrix emb;
  const auto ids = manifest_ids(manifest, split);
  if (ids.empty()) throw DataError("manifest has no samples in split '" + split + "'");
  emb.rows.resize(static_cast<Eigen::Index>(ids.size()) * cfg.n_views, cfg.feature_dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const SampleFeatures f = extractor.extract(store.load(ids[i]));
    emb.rows.middleRows(static_cast<Eigen::Index>(i) * cfg.n_views, cfg.n_views) = f.depth;
    for (int v = 0; v < cfg.n_views; ++v) emb.keys.push_back(fmt::format("{}#view{}", ids[i], v));
  }
  return emb;
}

int cmd_embed(const std::string& manifest_path, const std::string& kind, const std::string& split,
              const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  EmbeddingMatrix emb;
  if (kind == "depth") {
    emb = depth_embeddings(manifest, split, cfg);
  } else if (kind == "points") {
    SampleStore store;
    store.add(manifest);
    const FeatureExtractor extractor(cfg);
    const auto ids = manifest_ids(manifest, split);
    if (ids.empty()) throw DataError("manifest has no samples in split '" + split + "'");
    emb.rows.resize(static_cast<Eigen::Index>(ids.size()), cfg.point_dim);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      emb.rows.row(static_cast<Eigen::Index>(i)) = extractor.extract(store.load(ids[i])).points.transpose();
    }
    emb.keys = ids;
  } else {
    const PrototypeBank bank = PrototypeBank::build(manifest.class_names(), cfg.feature_dim);
    emb.rows = bank.rows;
    emb.keys = bank.class_names;
  }
  write_embedding_manifest(emb, out_path);
  out << "wrote " << emb.count() << " x " << emb.dim() << " " << kind << " embeddings to " << out_path << "\n";
  return kExitOk;
}

int cmd_fit_basis(const std::string& embeddings, const std::string& manifest_path, const RunConfig& cfg,
                  std::optional<double> energy, const std::string& out_path, std::ostream& out) {
  RowMatrix features;
  if (!embeddings.empty()) {
    features = load_embeddings(embeddings).rows;
  } else if (!manifest_path.empty()) {
    features = depth_embeddings(load_manifest(manifest_path), "train", cfg).rows;
  } else {
    throw ConfigError("fit-basis needs --embeddings or --manifest");
  }
  const double fraction = energy.value_or(cfg.energy_fraction);
  const PrincipalBasis basis = fit_basis(features, fraction);
  write_basis(basis, out_path);
  out << fmt::format("M={} of C={} at energy {}\n", basis.rank(), basis.dim(), fraction);
  return kExitOk;
}

void save_run_outputs(const fs::path& dir, const RunResult& result, const SessionSchedule& schedule,
                      const RunConfig& cfg, std::ostream& out) {
  write_prediction_log(dir / "predictions.csv", result.log);
  nlohmann::json stats = nlohmann::json::array();
  for (const auto& s : result.sessions) {
    stats.push_back({{"session", s.session},
                     {"train_size", s.train_size},
                     {"epoch_loss", s.epoch_loss},
                     {"train_accuracy", s.train_accuracy}});
  }
  write_json(dir / "training.json", {{"sessions", stats}});
  MetricsReport report = compile_report(result.log, schedule);
  report.config = config_to_json(cfg);
  io::write_text_file(dir / "report.json", report_json_text(report));
  const std::string table = report_table(report);
  io::write_text_file(dir / "report.txt", table);
  out << table;
}

int cmd_train(const DataArgs& data_args, const RunConfig& cfg, const std::string& run_dir, std::ostream& out) {
  const LoadedData data = load_data(data_args.schedule, data_args.base, data_args.inc);
  const fs::path dir(run_dir);
  fs::create_directories(dir / "checkpoints");
  write_json(dir / "config.json", config_to_json(cfg));
  write_json(dir / "run.json", {{"schedule", fs::absolute(data_args.schedule).string()},
                                {"base", fs::absolute(data_args.base).string()},
                                {"inc", fs::absolute(data_args.inc).string()}});

  bool basis_written = false;
  const RunResult result = run_experiment(
      cfg, data.schedule, data.store, [&](const Learner& learner, const SessionStats& stats, const PredictionLog&) {
        if (!basis_written && learner.basis()) {
          write_basis(*learner.basis(), dir / "basis.pcv");
          basis_written = true;
        }
        write_checkpoint(dir / "checkpoints" / checkpoint_name(stats.session), learner.heads().params(),
                         &learner.optimizer());
        out << fmt::format("session {}: {} training samples, final loss {:.4f}, training accuracy {:.1f}%\n",
                           stats.session, stats.train_size, stats.epoch_loss.empty() ? 0.0 : stats.epoch_loss.back(),
                           100.0 * stats.train_accuracy);
      });
  save_run_outputs(dir, result, data.schedule, cfg, out);
  return kExitOk;
}

int cmd_eval(const std::string& run_dir, std::optional<std::size_t> session, const std::string& out_path,
             std::ostream& out) {
  const fs::path dir(run_dir);
  const RunConfig cfg = merge_config(RunConfig{}, read_json(dir / "config.json"));
  const nlohmann::json run = read_json(dir / "run.json");
  const LoadedData data = load_data(run.at("schedule").get<std::string>(), run.at("base").get<std::string>(),
                                    run.at("inc").get<std::string>());
  const std::size_t b = session.value_or(data.schedule.size());
  Learner learner(cfg, data.schedule, data.store);
  if (cfg.rfe_enabled) learner.set_basis(read_basis(dir / "basis.pcv"));
  learner.restore(read_checkpoint(dir / "checkpoints" / checkpoint_name(b)).params, b);
  const PredictionLog log = learner.evaluate(b);
  const fs::path target = out_path.empty() ? dir / fmt::format("eval_session_{:02}.csv", b) : fs::path(out_path);
  write_prediction_log(target, log);
  out << fmt::format("session {}: accuracy {:.1f}% over {} test samples, written to {}\n", b,
                     100.0 * session_accuracy(log, b), log.rows.size(), target.string());
  return kExitOk;
}

int cmd_report(const std::string& predictions, const std::string& schedule_path, const std::string& config_path,
               bool literal, const std::string& out_path, std::ostream& out) {
  const PredictionLog log = read_prediction_log(predictions);
  const SessionSchedule schedule = load_schedule(schedule_path);
  ReportOptions options;
  if (literal) options.ncacc_range = NcaccRange::all_sessions;
  MetricsReport report = compile_report(log, schedule, options);
  if (!config_path.empty()) report.config = read_json(config_path);
  if (!out_path.empty()) io::write_text_file(out_path, report_json_text(report));
  out << report_table(report);
  return kExitOk;
}

struct AblationRow {
  bool rfe;
  bool snc;
  bool cl;
};

int cmd_ablate(const DataArgs& data_args, const RunConfig& base_cfg, std::size_t seeds, bool full_grid,
               const std::string& out_path, std::ostream& out) {
  const LoadedData data = load_data(data_args.schedule, data_args.base, data_args.inc);
  std::vector<AblationRow> rows{{false, false, false}, {true, false, false}, {false, true, false},
                                {true, true, false}, {true, true, true}};
  if (full_grid) rows = {{false, false, false}, {true, false, false}, {false, true, false}, {false, false, true},
                         {true, true, false},   {true, false, true},  {false, true, true},  {true, true, true}};

  nlohmann::json grid = nlohmann::json::array();
  out << fmt::format("{:>4} {:>4} {:>4} {:>7} {:>7} {:>7} {:>7} {:>7}\n", "RFE", "SNC", "CL", "first", "last",
                     "NCAcc", "Delta", "F");
  for (const AblationRow& row : rows) {
    double first = 0.0;
    double last = 0.0;
    double ncacc = 0.0;
    double delta = 0.0;
    double f = 0.0;
    nlohmann::json per_seed = nlohmann::json::array();
    for (std::size_t k = 0; k < seeds; ++k) {
      RunConfig cfg = base_cfg;
      cfg.rfe_enabled = row.rfe;
      cfg.snc_enabled = row.snc;
      cfg.cl_enabled = row.cl;
      cfg.master_seed = base_cfg.master_seed + k;
      const RunResult result = run_experiment(cfg, data.schedule, data.store);
      const MetricsReport r = compile_report(result.log, data.schedule);
      first += r.acc.front();
      last += r.acc.back();
      ncacc += r.ncacc_micro.value_or(0.0);
      delta += r.delta_micro;
      f += r.f_micro.value_or(0.0);
      per_seed.push_back(report_to_json(r));
    }
    const double n = static_cast<double>(seeds);
    grid.push_back({{"rfe", row.rfe}, {"snc", row.snc}, {"cl", row.cl}, {"acc_first", first / n},
                    {"acc_last", last / n}, {"ncacc", ncacc / n}, {"delta", delta / n}, {"f_fscil", f / n},
                    {"runs", per_seed}});
    auto mark = [](bool on) { return on ? "x" : "-"; };
    out << fmt::format("{:>4} {:>4} {:>4} {:>7.1f} {:>7.1f} {:>7.1f} {:>7.1f} {:>7.1f}\n", mark(row.rfe),
                       mark(row.snc), mark(row.cl), 100 * first / n, 100 * last / n, 100 * ncacc / n, 100 * delta / n,
                       100 * f / n);
  }
  if (!out_path.empty()) {
    write_json(out_path, {{"seeds", seeds}, {"master_seed", base_cfg.master_seed}, {"rows", grid}});
  }
  return kExitOk;
}

void setup_logging(bool verbose, bool quiet) {
  auto logger = spdlog::get("fscil-forge");
  if (!logger) logger = spdlog::stderr_color_mt("fscil-forge");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot class-incremental learning on point clouds"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only warnings and errors");

  std::string suite, base_path, inc_path, alias_path, out_path;
  std::size_t per_session = 4;
  auto* gen = app.add_subcommand("gen-benchmark", "Build a session schedule from two manifests");
  gen->add_option("--suite", suite, "Shipped suite (s2s or s2r)")->check(CLI::IsMember({"s2s", "s2r"}));
  gen->add_option("--base", base_path, "Base manifest");
  gen->add_option("--inc", inc_path, "Incremental manifest");
  gen->add_option("--aliases", alias_path, "Alias map JSON");
  gen->add_option("--per-session", per_session, "Classes per incremental session");
  gen->add_option("--out", out_path, "Schedule JSON to write");

  SyntheticSpec spec;
  std::size_t synth_per_session = 2;
  std::string synth_dir;
  bool noisy_inc = false;
  auto* synth = app.add_subcommand("gen-synthetic-data", "Write synthetic base/inc manifests and a schedule");
  synth->add_option("--out-dir", synth_dir, "Output directory")->required();
  synth->add_option("--base-classes", spec.n_base, "Number of base classes");
  synth->add_option("--inc-classes", spec.n_inc, "Number of incremental classes");
  synth->add_option("--train", spec.train_per_class, "Training samples per class");
  synth->add_option("--test", spec.test_per_class, "Test samples per class");
  synth->add_option("--points", spec.n_points, "Points per cloud");
  synth->add_option("--per-session", synth_per_session, "Classes per incremental session");
  synth->add_option("--seed", spec.seed, "Data seed");
  synth->add_flag("--noisy-inc", noisy_inc, "Heavier jitter and outliers for incremental classes");

  std::string embed_manifest, kind = "depth", split = "all", embed_out;
  ConfigArgs embed_cfg;
  auto* embed = app.add_subcommand("embed", "Precompute EMB1 features with the toy encoders");
  embed->add_option("--manifest", embed_manifest, "Dataset manifest")->required();
  embed->add_option("--kind", kind, "depth|points|text")->check(CLI::IsMember({"depth", "points", "text"}));
  embed->add_option("--split", split, "train|test|all")->check(CLI::IsMember({"train", "test", "all"}));
  embed->add_option("--out", embed_out, "Embedding manifest to write")->required();
  embed_cfg.attach(embed);

  std::string fit_embeddings, fit_manifest, fit_out;
  std::optional<double> energy;
  ConfigArgs fit_cfg;
  auto* fit = app.add_subcommand("fit-basis", "Fit the principal basis on base-task depth features");
  fit->add_option("--embeddings", fit_embeddings, "Embedding manifest (EMB1)");
  fit->add_option("--manifest", fit_manifest, "Dataset manifest; training split is embedded on the fly");
  fit->add_option("--energy", energy, "Retained energy fraction in (0, 1]");
  fit->add_option("--out", fit_out, "PCV1 file to write")->required();
  fit_cfg.attach(fit);

  DataArgs train_data;
  ConfigArgs train_cfg;
  std::string run_dir;
  auto* train = app.add_subcommand("train", "Run every session and write checkpoints, predictions and a report");
  train_data.attach(train);
  train_cfg.attach(train);
  train->add_option("--run-dir", run_dir, "Output directory")->required();

  std::string eval_dir, eval_out;
  std::optional<std::size_t> eval_session;
  auto* eval = app.add_subcommand("eval", "Recompute a prediction log from a saved checkpoint");
  eval->add_option("--run-dir", eval_dir, "Directory written by train")->required();
  eval->add_option("--session", eval_session, "Session checkpoint to evaluate (default: last)");
  eval->add_option("--out", eval_out, "Prediction CSV to write");

  std::string predictions, report_schedule, report_config, report_out;
  bool literal = false;
  auto* report = app.add_subcommand("report", "Compute metrics from a prediction log");
  report->add_option("--predictions", predictions, "Prediction CSV")->required();
  report->add_option("--schedule", report_schedule, "Schedule JSON")->required();
  report->add_option("--config", report_config, "Config JSON echoed into the report");
  report->add_flag("--ncacc-all-sessions", literal, "Average NCAcc over sessions 1..B instead of 2..B");
  report->add_option("--out", report_out, "Report JSON to write");

  DataArgs ablate_data;
  ConfigArgs ablate_cfg;
  std::size_t seeds = 3;
  bool full_grid = false;
  std::string ablate_out;
  auto* ablate = app.add_subcommand("ablate", "Ablation grid over RFE, SNC and contrastive learning");
  ablate_data.attach(ablate);
  ablate_cfg.attach(ablate);
  ablate->add_option("--seeds", seeds, "Seeds per configuration")->check(CLI::PositiveNumber);
  ablate->add_flag("--full-grid", full_grid, "All 8 flag combinations instead of the 5 published rows");
  ablate->add_option("--out", ablate_out, "Grid JSON to write");

  std::vector<const char*> argv{"fscil-forge"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  setup_logging(verbose, quiet);
  if (noisy_inc) spec.inc_noise = NoiseProfile::noisy;

  try {
    if (gen->parsed()) return cmd_gen_benchmark(suite, base_path, inc_path, alias_path, per_session, out_path, out);
    if (synth->parsed()) return cmd_gen_synthetic(spec, synth_per_session, synth_dir, out);
    if (embed->parsed()) return cmd_embed(embed_manifest, kind, split, embed_cfg.resolve(), embed_out, out);
    if (fit->parsed()) return cmd_fit_basis(fit_embeddings, fit_manifest, fit_cfg.resolve(), energy, fit_out, out);
    if (train->parsed()) return cmd_train(train_data, train_cfg.resolve(), run_dir, out);
    if (eval->parsed()) return cmd_eval(eval_dir, eval_session, eval_out, out);
    if (report->parsed()) return cmd_report(predictions, report_schedule, report_config, literal, report_out, out);
    if (ablate->parsed()) return cmd_ablate(ablate_data, ablate_cfg.resolve(), seeds, full_grid, ablate_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace fscil::cli
