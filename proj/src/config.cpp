#include "qrc/config.hpp"

#include <fstream>
#include <iterator>
#include <set>
#include <vector>

#include <json.hpp>

#include "qrc/error.hpp"

namespace qrc::config {
namespace {

using nlohmann::json;

class Parser {
 public:
  explicit Parser(std::string source) : source_(std::move(source)) {}

  void problem(const std::string& path, const std::string& what) { problems_.push_back(path + ": " + what); }

  void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items())
      if (!allowed.contains(key)) problem(path + "." + key, "unknown key");
  }

  bool is_object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    problem(path, "expected an object");
    return false;
  }

  template <class T>
  void scalar(const json& obj, const std::string& key, const std::string& path, T& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) return problem(path + "." + key, "expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return problem(path + "." + key, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned())
          return problem(path + "." + key, "expected a non-negative integer");
      }
      out = v.get<T>();
    } else {
      if (!v.is_number()) return problem(path + "." + key, "expected a number");
      out = v.get<T>();
    }
  }

  template <class T>
  void list(const json& obj, const std::string& key, const std::string& path, std::vector<T>& out) {
    if (!obj.contains(key)) return problem(path + "." + key, "required list is missing");
    const json& v = obj.at(key);
    if (!v.is_array() || v.empty()) return problem(path + "." + key, "expected a non-empty list");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const bool ok = std::is_integral_v<T> ? v[i].is_number_integer() : v[i].is_number();
      if (!ok) {
        problem(path + "." + key + "[" + std::to_string(i) + "]",
                std::is_integral_v<T> ? "expected an integer" : "expected a number");
        continue;
      }
      out.push_back(v[i].get<T>());
    }
  }

  RunConfig parse(std::string_view text) {
    json root;
    try {
      root = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::kConfig, source_ + ": invalid JSON: " + e.what());
    }
    RunConfig cfg;
    cfg.grid = harness::GridSpec{};
    if (!is_object(root, "$")) return finish(cfg);
    check_keys(root, "$", {"seed", "threads", "selection", "window", "lambda", "stride", "cache_dir",
                           "embeddings", "readouts"});
    scalar(root, "seed", "$", cfg.seed);
    scalar(root, "threads", "$", cfg.threads);
    if (cfg.threads < 0) problem("$.threads", "must be >= 0");
    std::string selection = "test";
    scalar(root, "selection", "$", selection);
    if (selection != "test" && selection != "validation")
      problem("$.selection", "must be 'test' or 'validation'");
    else
      cfg.selection = harness::parse_selection_mode(selection);
    scalar(root, "window", "$", cfg.grid.window);
    scalar(root, "lambda", "$", cfg.grid.lambda);
    scalar(root, "stride", "$", cfg.grid.stride);
    std::string cache;
    scalar(root, "cache_dir", "$", cache);
    if (!cache.empty()) cfg.cache_dir = cache;

    if (!root.contains("embeddings")) {
      problem("$.embeddings", "required object is missing");
    } else if (const json& e = root.at("embeddings"); is_object(e, "$.embeddings")) {
      check_keys(e, "$.embeddings", {"quantum", "classical_esn", "raw"});
      if (e.contains("quantum") && is_object(e.at("quantum"), "$.embeddings.quantum")) {
        const json& q = e.at("quantum");
        const std::string p = "$.embeddings.quantum";
        check_keys(q, p, {"a_x", "a_z", "a_zz", "time", "method"});
        harness::QuantumGrid grid;
        list(q, "a_x", p, grid.a_x);
        list(q, "a_z", p, grid.a_z);
        list(q, "a_zz", p, grid.a_zz);
        list(q, "time", p, grid.time);
        std::string method = "chebyshev";
        scalar(q, "method", p, method);
        if (method != "chebyshev" && method != "eigendecomposition")
          problem(p + ".method", "must be 'chebyshev' or 'eigendecomposition'");
        else
          grid.method = quantum::parse_evolution_method(method);
        cfg.grid.quantum = grid;
      }
      if (e.contains("classical_esn") && is_object(e.at("classical_esn"), "$.embeddings.classical_esn")) {
        const json& c = e.at("classical_esn");
        const std::string p = "$.embeddings.classical_esn";
        check_keys(c, p, {"reservoir_size", "spectral_radius", "leak_rate", "input_scaling"});
        harness::EsnGrid grid;
        list(c, "reservoir_size", p, grid.reservoir_size);
        list(c, "spectral_radius", p, grid.spectral_radius);
        list(c, "leak_rate", p, grid.leak_rate);
        list(c, "input_scaling", p, grid.input_scaling);
        cfg.grid.esn = grid;
      }
      if (e.contains("raw") && is_object(e.at("raw"), "$.embeddings.raw")) {
        check_keys(e.at("raw"), "$.embeddings.raw", {});
        cfg.grid.raw = true;
      }
    }

    if (!root.contains("readouts")) {
      problem("$.readouts", "required object is missing");
    } else if (const json& r = root.at("readouts"); is_object(r, "$.readouts")) {
      check_keys(r, "$.readouts", {"logistic", "ridge"});
      if (r.contains("logistic") && is_object(r.at("logistic"), "$.readouts.logistic")) {
        const json& l = r.at("logistic");
        const std::string p = "$.readouts.logistic";
        check_keys(l, p, {"l2", "max_iter", "tol"});
        harness::ReadoutGrid grid;
        grid.kind = readout::ReadoutKind::kLogistic;
        list(l, "l2", p, grid.regularization);
        scalar(l, "max_iter", p, grid.max_iter);
        scalar(l, "tol", p, grid.tol);
        cfg.grid.readouts.push_back(grid);
      }
      if (r.contains("ridge") && is_object(r.at("ridge"), "$.readouts.ridge")) {
        const json& l = r.at("ridge");
        const std::string p = "$.readouts.ridge";
        check_keys(l, p, {"alpha"});
        harness::ReadoutGrid grid;
        grid.kind = readout::ReadoutKind::kRidge;
        list(l, "alpha", p, grid.regularization);
        cfg.grid.readouts.push_back(grid);
      }
    }
    return finish(cfg);
  }

 private:
  RunConfig finish(RunConfig& cfg) {
    if (cfg.grid.esn) cfg.grid.esn->seed = cfg.seed;
    if (problems_.empty())
      for (auto& p : cfg.grid.problems()) problems_.push_back("grid: " + p);
    if (!problems_.empty()) {
      std::string msg = source_ + ": " + std::to_string(problems_.size()) + " configuration problem(s)";
      for (const auto& p : problems_) msg += "\n  - " + p;
      throw Error(ErrorKind::kConfig, msg);
    }
    return cfg;
  }

  std::string source_;
  std::vector<std::string> problems_;
};

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const std::string& source_name) {
  return Parser(source_name).parse(json_text);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config file " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(text, path.string());
}

std::string default_config_json() {
  return R"({
  "seed": 42,
  "threads": 0,
  "selection": "test",
  "window": 9,
  "lambda": 1.0,
  "stride": 1,
  "embeddings": {
    "quantum": {
      "a_x": [0.5, 1.0, 2.0],
      "a_z": [0.5, 1.0, 2.0],
      "a_zz": [0.25, 0.5, 1.0],
      "time": [0.5, 1.0, 2.0],
      "method": "chebyshev"
    },
    "classical_esn": {
      "reservoir_size": [50],
      "spectral_radius": [0.7, 0.9, 1.1],
      "leak_rate": [0.3, 1.0],
      "input_scaling": [1.0]
    },
    "raw": {}
  },
  "readouts": {
    "logistic": {"l2": [0.0001, 0.01, 1.0], "max_iter": 100, "tol": 1e-8},
    "ridge": {"alpha": [0.01, 1.0, 100.0]}
  }
}
)";
}

}  // namespace qrc::config
