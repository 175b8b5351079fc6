#include "qrc/cli.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qrc/config.hpp"
#include "qrc/error.hpp"
#include "qrc/harness.hpp"
#include "qrc/hashing.hpp"
#include "qrc/market_pipeline.hpp"

namespace qrc::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Exclusive lock file; a second command on the same output fails fast.
class OutputLock {
 public:
  explicit OutputLock(fs::path path) : path_(std::move(path)) {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw Error(ErrorKind::kIo, "output is locked by another qrc command (" + path_.string() +
                                      "); remove the lock file if no command is running");
    }
    std::fclose(f);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create directory " + dir.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

bool valid_ticker_name(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '.' || c == '_' || c == '-';
  });
}

struct Manifest {
  std::string command;
  json arguments;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;     // path, sha256
  std::vector<std::pair<std::string, std::string>> artifacts;  // path relative to the manifest, sha256
  std::string started_at;

  void add_artifact(const fs::path& base, const fs::path& file) {
    artifacts.emplace_back(fs::relative(file, base).generic_string(), sha256_file(file));
  }
  void add_input(const fs::path& file) { inputs.emplace_back(file.generic_string(), sha256_file(file)); }

  void write(const fs::path& path) const {
    json j;
    j["tool"] = "qrc";
    j["tool_version"] = kToolVersion;
    j["command"] = command;
    j["arguments"] = arguments;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["inputs"] = json::array();
    for (const auto& [p, h] : inputs) j["inputs"].push_back({{"path", p}, {"sha256", h}});
    j["artifacts"] = json::array();
    for (const auto& [p, h] : artifacts) j["artifacts"].push_back({{"path", p}, {"sha256", h}});
    j["started_at"] = started_at;
    j["finished_at"] = utc_now();
    write_text(path, j.dump(2) + "\n");
  }
};

template <class Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    log << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    log << "error: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

fs::path synth_manifest_path(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

}  // namespace

int cmd_synth(const SynthArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    const auto schedule = harness::parse_regime_spec(args.regimes);
    if (args.tickers < 1) throw Error(ErrorKind::kConfig, "--tickers must be at least 1");
    if (args.out.empty()) throw Error(ErrorKind::kConfig, "--out is required");
    if (!args.out.parent_path().empty()) ensure_directory(args.out.parent_path());
    OutputLock lock(args.out.string() + ".lock");

    Manifest manifest;
    manifest.started_at = utc_now();
    manifest.command = "synth";
    manifest.seed = args.seed;
    manifest.arguments = {{"regimes", args.regimes}, {"seed", args.seed}, {"out", args.out.generic_string()},
                          {"tickers", args.tickers}, {"prefix", args.prefix}};
    manifest.config_hash = sha256_hex(manifest.arguments.dump());

    std::vector<market::PriceSeries> series;
    for (int i = 0; i < args.tickers; ++i) {
      std::ostringstream name;
      name << args.prefix;
      if (args.tickers > 1) name << (i < 10 ? "0" : "") << i;
      series.push_back(harness::synth_regime_series(schedule, args.seed + static_cast<std::uint64_t>(i), name.str()));
    }
    std::ostringstream csv;
    market::write_prices(csv, series);
    write_text(args.out, csv.str());
    const fs::path base = args.out.parent_path().empty() ? fs::path(".") : args.out.parent_path();
    manifest.add_artifact(base, args.out);
    manifest.write(synth_manifest_path(args.out));
    log << "wrote " << series.size() << " series of " << series.front().observations.size() << " prices to "
        << args.out.string() << '\n';
    return kExitOk;
  });
}

int cmd_prepare(const PrepareArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    market::PipelineOptions options;
    options.window = args.window;
    options.lambda = args.lambda;
    options.stride = args.stride;
    if (args.normalization == "full") {
      options.normalization = market::NormalizationMode::kFullSeries;
    } else if (args.normalization == "train") {
      options.normalization = market::NormalizationMode::kTrainOnly;
    } else {
      throw Error(ErrorKind::kConfig, "--normalization must be 'full' or 'train'");
    }
    if (args.window < 2) throw Error(ErrorKind::kConfig, "--window must be at least 2");
    if (args.stride < 1) throw Error(ErrorKind::kConfig, "--stride must be at least 1");
    if (!fs::exists(args.prices)) throw Error(ErrorKind::kIo, "price file not found: " + args.prices.string());

    const std::set<std::string> filter(args.tickers.begin(), args.tickers.end());
    const market::LoadResult loaded = market::load_prices(args.prices, filter);
    for (const auto& d : loaded.diagnostics)
      log << (d.severity == market::Diagnostic::Severity::kRejected ? "rejected: " : "warning: ") << d.message
          << '\n';
    if (loaded.series.empty()) throw Error(ErrorKind::kIngestion, args.prices.string() + ": no usable price rows");

    ensure_directory(args.out);
    OutputLock lock(args.out / ".qrc.lock");
    Manifest manifest;
    manifest.started_at = utc_now();
    manifest.command = "prepare";
    manifest.arguments = {{"prices", args.prices.generic_string()}, {"out", args.out.generic_string()},
                          {"window", args.window},   {"lambda", args.lambda},
                          {"stride", args.stride},   {"normalization", args.normalization},
                          {"tickers", args.tickers}};
    manifest.config_hash = sha256_hex(manifest.arguments.dump());
    manifest.add_input(args.prices);

    for (const auto& entry : fs::directory_iterator(args.out))
      if (entry.path().extension() == ".dataset") fs::remove(entry.path());

    std::size_t written = 0;
    for (const auto& series : loaded.series) {
      if (!valid_ticker_name(series.ticker))
        throw Error(ErrorKind::kIngestion, "ticker '" + series.ticker + "' is not usable as a file name");
      market::WindowedDataset ds;
      try {
        ds = market::prepare_dataset(series, options);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kInsufficientData) throw;
        log << "warning: skipping " << series.ticker << ": " << e.what() << '\n';
        continue;
      }
      const fs::path path = args.out / (series.ticker + ".dataset");
      market::save_dataset(path, ds);
      manifest.add_artifact(args.out, path);
      ++written;
      const auto positives = std::count_if(ds.windows.begin(), ds.windows.end(), [](const auto& w) { return w.label == 1; });
      log << series.ticker << ": " << ds.windows.size() << " windows (" << ds.train_size() << " train, "
          << ds.test_size() << " test), " << positives << " high-volatility labels\n";
    }
    if (written == 0) throw Error(ErrorKind::kInsufficientData, "no ticker produced a dataset");
    manifest.write(args.out / "manifest.json");
    return kExitOk;
  });
}

int cmd_run(const RunArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    config::RunConfig cfg = config::load_run_config(args.config);
    if (args.threads) cfg.threads = *args.threads;
    if (!args.embeddings.empty()) {
      std::vector<embed::EmbeddingKind> kinds;
      std::vector<std::string> problems;
      for (const auto& name : args.embeddings) {
        try {
          kinds.push_back(embed::parse_embedding_kind(name));
        } catch (const Error& e) {
          problems.push_back(e.what());
          continue;
        }
        const auto k = kinds.back();
        const bool present = (k == embed::EmbeddingKind::kQuantum && cfg.grid.quantum) ||
                             (k == embed::EmbeddingKind::kClassicalEsn && cfg.grid.esn) ||
                             (k == embed::EmbeddingKind::kRaw && cfg.grid.raw);
        if (!present) problems.push_back("embedding '" + name + "' is not configured in " + args.config.string());
      }
      if (!problems.empty()) {
        std::string msg = "invalid --embedding selection:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw Error(ErrorKind::kConfig, msg);
      }
      cfg.grid = cfg.grid.restricted_to(kinds);
    }

    if (!fs::is_directory(args.data)) throw Error(ErrorKind::kIo, "data directory not found: " + args.data.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(args.data))
      if (entry.path().extension() == ".dataset") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorKind::kInsufficientData, "no .dataset files in " + args.data.string());

    std::vector<market::WindowedDataset> data;
    std::vector<std::string> problems;
    for (const auto& f : files) {
      data.push_back(market::load_dataset(f));
      const auto& ds = data.back();
      if (ds.window_size != cfg.grid.window)
        problems.push_back(f.filename().string() + ": window " + std::to_string(ds.window_size) +
                           " differs from config window " + std::to_string(cfg.grid.window));
      if (ds.stride != cfg.grid.stride)
        problems.push_back(f.filename().string() + ": stride " + std::to_string(ds.stride) +
                           " differs from config stride " + std::to_string(cfg.grid.stride));
      if (ds.lambda != cfg.grid.lambda)
        problems.push_back(f.filename().string() + ": lambda " + format_double(ds.lambda) +
                           " differs from config lambda " + format_double(cfg.grid.lambda));
    }
    if (!problems.empty()) {
      std::string msg = "prepared data does not match the configuration:";
      for (const auto& p : problems) msg += "\n  - " + p;
      throw Error(ErrorKind::kConfig, msg);
    }

    ensure_directory(args.out);
    OutputLock lock(args.out / ".qrc.lock");
    Manifest manifest;
    manifest.started_at = utc_now();
    manifest.command = "run";
    manifest.seed = cfg.seed;
    json embeddings = args.embeddings;
    manifest.arguments = {{"data", args.data.generic_string()},
                          {"config", args.config.generic_string()},
                          {"out", args.out.generic_string()},
                          {"embeddings", embeddings}};
    if (args.threads) manifest.arguments["threads"] = *args.threads;
    manifest.config_hash = sha256_hex(read_file(args.config));
    manifest.add_input(args.config);
    for (const auto& f : files) manifest.add_input(f);

    harness::RunOptions options;
    options.threads = cfg.threads;
    options.selection = cfg.selection;
    options.cache_dir = cfg.cache_dir;
    if (!args.quiet) options.progress = &log;
    const auto cells = cfg.grid.embedding_configs().size() * cfg.grid.readout_specs().size();
    if (!args.quiet) log << "running " << cells << " grid cells over " << data.size() << " tickers\n";
    const harness::ExperimentReport report = harness::run_grid(data, cfg.grid, options);
    for (const auto& x : report.excluded) log << "warning: excluded " << x.ticker << ": " << x.reason << '\n';
    const auto written = harness::emit_report(report, args.out);
    manifest.add_artifact(args.out, written.cells_csv);
    manifest.add_artifact(args.out, written.tickers_csv);
    manifest.add_artifact(args.out, written.table);
    manifest.write(args.out / "manifest.json");
    if (!args.quiet) log << "wrote " << written.table.string() << '\n';
    return kExitOk;
  });
}

int cmd_replay(const ReplayArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    json m;
    try {
      m = json::parse(read_file(args.manifest));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kConfig, args.manifest.string() + ": invalid manifest: " + e.what());
    }
    int status = kExitOk;
    fs::path base;
    fs::path new_manifest;
    try {
      const std::string command = m.at("command").get<std::string>();
      const json& a = m.at("arguments");
      if (command == "synth") {
        SynthArgs s;
        s.regimes = a.at("regimes").get<std::string>();
        s.seed = a.at("seed").get<std::uint64_t>();
        s.out = args.out ? *args.out / fs::path(a.at("out").get<std::string>()).filename()
                         : fs::path(a.at("out").get<std::string>());
        s.tickers = a.at("tickers").get<int>();
        s.prefix = a.at("prefix").get<std::string>();
        status = cmd_synth(s, log);
        base = s.out.parent_path().empty() ? fs::path(".") : s.out.parent_path();
        new_manifest = synth_manifest_path(s.out);
      } else if (command == "prepare") {
        PrepareArgs p;
        p.prices = a.at("prices").get<std::string>();
        p.out = args.out ? *args.out : fs::path(a.at("out").get<std::string>());
        p.window = a.at("window").get<int>();
        p.lambda = a.at("lambda").get<double>();
        p.stride = a.at("stride").get<int>();
        p.normalization = a.at("normalization").get<std::string>();
        p.tickers = a.at("tickers").get<std::vector<std::string>>();
        status = cmd_prepare(p, log);
        base = p.out;
        new_manifest = p.out / "manifest.json";
      } else if (command == "run") {
        RunArgs r;
        r.data = a.at("data").get<std::string>();
        r.config = a.at("config").get<std::string>();
        r.out = args.out ? *args.out : fs::path(a.at("out").get<std::string>());
        r.embeddings = a.at("embeddings").get<std::vector<std::string>>();
        if (a.contains("threads")) r.threads = a.at("threads").get<int>();
        r.quiet = true;
        status = cmd_run(r, log);
        base = r.out;
        new_manifest = r.out / "manifest.json";
      } else {
        throw Error(ErrorKind::kConfig, "manifest records unknown command '" + command + "'");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kConfig, args.manifest.string() + ": incomplete manifest: " + e.what());
    }
    if (status != kExitOk) return status;

    std::size_t mismatches = 0;
    for (const auto& art : m.at("artifacts")) {
      const auto rel = art.at("path").get<std::string>();
      const auto expected = art.at("sha256").get<std::string>();
      const fs::path file = base / rel;
      const std::string actual = fs::exists(file) ? sha256_file(file) : std::string("missing");
      if (actual != expected) {
        ++mismatches;
        log << "mismatch: " << rel << " expected " << expected << " got " << actual << '\n';
      }
    }
    log << "replayed " << m.at("command").get<std::string>() << ": " << m.at("artifacts").size()
        << " artifact(s), " << mismatches << " mismatch(es)\n";
    return mismatches == 0 ? kExitOk : kExitValidation;
  });
}

int run_main(int argc, char** argv) {
  CLI::App app{"Quantum reservoir regime detection: synthesize, prepare and benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a seeded regime-switching price CSV");
  synth_cmd->add_option("--regimes", synth.regimes, "Schedule len:sigma[,len:sigma]*")->required();
  synth_cmd->add_option("--seed", synth.seed, "Root seed");
  synth_cmd->add_option("--out", synth.out, "Output CSV path")->required();
  synth_cmd->add_option("--tickers", synth.tickers, "Number of series (seeds seed, seed+1, ...)");
  synth_cmd->add_option("--prefix", synth.prefix, "Ticker name prefix");

  PrepareArgs prepare;
  auto* prepare_cmd = app.add_subcommand("prepare", "Build labeled window datasets from a price CSV");
  prepare_cmd->add_option("--prices", prepare.prices, "CSV with header date,ticker,adj_close")->required();
  prepare_cmd->add_option("--out", prepare.out, "Output directory")->required();
  prepare_cmd->add_option("--window", prepare.window, "Window size (= qubit count)");
  prepare_cmd->add_option("--lambda", prepare.lambda, "Threshold multiplier");
  prepare_cmd->add_option("--stride", prepare.stride, "Step between window end points");
  prepare_cmd->add_option("--normalization", prepare.normalization, "full | train");
  prepare_cmd->add_option("--tickers", prepare.tickers, "Only these tickers")->delimiter(',');

  RunArgs run;
  std::string embedding_list;
  int threads = -1;
  auto* run_cmd = app.add_subcommand("run", "Run the grid search and write the report");
  run_cmd->add_option("--data", run.data, "Directory of prepared datasets")->required();
  run_cmd->add_option("--config", run.config, "JSON run configuration")->required();
  run_cmd->add_option("--out", run.out, "Report directory")->required();
  run_cmd->add_option("--embedding", embedding_list, "Comma-separated families: quantum,classical_esn,raw");
  run_cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");
  run_cmd->add_flag("--quiet", run.quiet, "Suppress progress output");

  ReplayArgs replay;
  std::string replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a manifest and verify artifact hashes");
  replay_cmd->add_option("--manifest", replay.manifest, "manifest.json to replay")->required();
  replay_cmd->add_option("--out", replay_out, "Write artifacts here instead of the recorded path");

  auto* config_cmd = app.add_subcommand("default-config", "Print the default run configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (*synth_cmd) return cmd_synth(synth, std::cerr);
  if (*prepare_cmd) return cmd_prepare(prepare, std::cerr);
  if (*run_cmd) {
    if (!embedding_list.empty()) {
      std::stringstream ss(embedding_list);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) run.embeddings.push_back(item);
    }
    if (threads >= 0) run.threads = threads;
    return cmd_run(run, std::cerr);
  }
  if (*replay_cmd) {
    if (!replay_out.empty()) replay.out = replay_out;
    return cmd_replay(replay, std::cerr);
  }
  if (*config_cmd) {
    std::cout << config::default_config_json();
    return kExitOk;
  }
  return kExitValidation;
}

}  // namespace qrc::cli
