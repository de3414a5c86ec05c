#pragma once

// Commands behind the `stratify` executable. Each command is a plain function
// so that tests can drive it without spawning a process.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stratify/bundle.hpp"
#include "stratify/io.hpp"
#include "stratify/report.hpp"
#include "stratify/strata.hpp"
#include "stratify/synth.hpp"

namespace stratify {

namespace fs = std::filesystem;

struct RunConfig {
  std::string preset;       // "synthetic", "clinical" or empty
  fs::path input;           // delimited data file
  fs::path schema;          // schema file; empty means the preset's built-in schema
  fs::path out = "model";   // bundle directory
  SplitFractions fractions{0.5, 0.1, 0.4};
  std::uint64_t split_seed = 1;
  HyperParams hp;
  std::vector<double> thresholds = clinical_thresholds();
  double ci_level = 0.95;
};

inline void validate_thresholds(const std::vector<double>& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0 && t[i] < 1.0)) throw Error("thresholds must lie strictly inside (0, 1)");
    if (i > 0 && !(t[i] > t[i - 1])) throw Error("thresholds must be strictly ascending");
  }
}

inline RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "synthetic") {
    c.fractions = {400.0 / 1500.0, 400.0 / 1500.0, 700.0 / 1500.0};
    c.hp = HyperParams{100, 25, 1, 10, 0.05, 1e-3, 1};
    c.thresholds = synthetic_thresholds();
  } else if (name == "clinical") {
    c.fractions = {0.5, 0.1, 0.4};
    c.hp = HyperParams{200, 50, 50, 5, 0.05, 1.0, 1};
    c.thresholds = clinical_thresholds();
  } else if (!name.empty()) {
    throw Error("unknown preset '" + name + "' (expected synthetic or clinical)");
  }
  return c;
}

inline FeatureSchema preset_schema(const std::string& preset) {
  if (preset == "synthetic") return synthetic_schema();
  if (preset == "clinical") return clinical_schema();
  throw Error("config names no schema file and no preset");
}

/// Relative paths inside a config file resolve against the file's directory.
inline RunConfig config_from_json(const json& j, const fs::path& base = {}) {
  RunConfig c;
  try {
    c = preset_config(j.value("preset", ""));
    auto path = [&](const char* key) {
      fs::path p = j.at(key).get<std::string>();
      return p.is_relative() && !base.empty() ? base / p : p;
    };
    if (j.contains("input")) c.input = path("input");
    if (j.contains("schema")) c.schema = path("schema");
    if (j.contains("out")) c.out = path("out");
    if (j.contains("fractions")) {
      const auto f = j.at("fractions").get<std::vector<double>>();
      if (f.size() != 3) throw Error("fractions must list train, validation and test shares");
      c.fractions = {f[0], f[1], f[2]};
    }
    if (j.contains("split_seed")) c.split_seed = j.at("split_seed").get<std::uint64_t>();
    if (j.contains("hyperparams")) c.hp = hyperparams_from_json(j.at("hyperparams"), c.hp);
    if (j.contains("thresholds")) c.thresholds = j.at("thresholds").get<std::vector<double>>();
    if (j.contains("ci_level")) c.ci_level = j.at("ci_level").get<double>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed config: ") + e.what());
  }
  return c;
}

inline json config_to_json(const RunConfig& c) {
  json j = {{"fractions", {c.fractions.train, c.fractions.validation, c.fractions.test}},
            {"split_seed", c.split_seed},
            {"hyperparams", hyperparams_to_json(c.hp)},
            {"thresholds", c.thresholds},
            {"ci_level", c.ci_level},
            {"input", c.input.generic_string()}};
  if (!c.preset.empty()) j["preset"] = c.preset;
  if (!c.schema.empty()) j["schema"] = c.schema.generic_string();
  return j;
}

inline RunConfig load_config(const fs::path& path) { return config_from_json(read_json(path), path.parent_path()); }

// ---------------------------------------------------------------------------
// synth

struct SynthResult {
  fs::path data, truth, schema;
};

inline std::string truth_to_csv(const SyntheticData& s) {
  std::string out = "id,true_group,x1,x2\n";
  for (const auto& t : s.truth)
    out += t.id + ',' + to_string(t.group) + ',' + format_double(t.x1) + ',' + format_double(t.x2) + '\n';
  return out;
}

inline SynthResult cmd_synth(std::size_t n, std::uint64_t seed, const fs::path& out) {
  if (n % 2 != 0 || n < 2) throw Error("n must be an even number >= 2, got " + std::to_string(n));
  const auto s = generate_synthetic(n, seed);
  fs::create_directories(out);
  SynthResult r{out / "data.csv", out / "truth.csv", out / "schema.json"};
  write_dataset(r.data, s.dataset);
  write_text(r.truth, truth_to_csv(s));
  write_json(r.schema, schema_to_json(s.dataset.schema()));
  return r;
}

// ---------------------------------------------------------------------------
// fit

inline fs::path splits_dir(const fs::path& bundle) { return bundle / "splits"; }

inline FeatureSchema resolve_schema(const RunConfig& c) {
  return c.schema.empty() ? preset_schema(c.preset) : load_schema(c.schema);
}

inline StratificationModel cmd_fit(const RunConfig& c, std::ostream* log = nullptr) {
  if (c.input.empty()) throw Error("config names no input data file");
  validate_thresholds(c.thresholds);
  c.hp.validate();
  const auto schema = resolve_schema(c);
  const auto data = load_dataset(c.input, schema);
  const auto split = split_dataset(data, c.fractions, c.split_seed);
  auto model = optimize(split.train, split.validation, c.hp);

  save_bundle(model, c.out);
  fs::create_directories(splits_dir(c.out));
  write_dataset(splits_dir(c.out) / "train.csv", split.train);
  write_dataset(splits_dir(c.out) / "validation.csv", split.validation);
  write_dataset(splits_dir(c.out) / "test.csv", split.test);
  write_json(c.out / "config.json", config_to_json(c));
  if (log) *log << run_summary(model);
  return model;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateRequest {
  fs::path model;
  std::optional<fs::path> data;  // absent: the bundle's held-out test split
  fs::path out;                  // empty: <model>/report
  std::optional<double> delta;
  std::optional<std::vector<double>> thresholds;
  std::optional<std::uint64_t> seed;
};

/// The config echoed by `fit`, if the bundle has one.
inline std::optional<RunConfig> bundle_config(const fs::path& bundle) {
  if (!fs::exists(bundle / "config.json")) return std::nullopt;
  return config_from_json(read_json(bundle / "config.json"));
}

inline Evaluation cmd_evaluate(const EvaluateRequest& req, std::ostream* log = nullptr) {
  const auto model = load_bundle(req.model);
  const auto cfg = bundle_config(req.model);
  const fs::path data_path = req.data ? *req.data : splits_dir(req.model) / "test.csv";
  const auto test = load_dataset(data_path, model.schema);

  EvaluateOptions opt;
  opt.delta = req.delta.value_or(model.hp.delta);
  opt.thresholds = req.thresholds ? *req.thresholds : cfg ? cfg->thresholds : synthetic_thresholds();
  opt.ci_level = cfg ? cfg->ci_level : 0.95;
  opt.seed = req.seed.value_or(model.hp.seed);
  validate_thresholds(opt.thresholds);
  if (!(opt.delta > 0.0 && opt.delta < 1.0)) throw Error("delta must lie in (0, 1)");

  auto ev = evaluate(model, test, opt);
  const fs::path out = req.out.empty() ? req.model / "report" : req.out;
  write_evaluation(ev, out);
  if (log) *log << metrics_to_csv(ev.reports);
  return ev;
}

// ---------------------------------------------------------------------------
// profile

inline std::vector<ProfileRow> cmd_profile(const fs::path& bundle, const std::optional<fs::path>& data,
                                           const fs::path& out, std::ostream* log = nullptr) {
  const auto model = load_bundle(bundle);
  const auto train = load_dataset(data ? *data : splits_dir(bundle) / "train.csv", model.schema);
  const auto rows = profile_groups(model, train);
  const fs::path dir = out.empty() ? bundle / "report" : out;
  fs::create_directories(dir);
  const auto csv = profile_to_csv(model.schema, rows);
  write_text(dir / "profile.csv", csv);
  write_json(dir / "profile.json", profile_to_json(model.schema, rows));
  if (log) *log << csv;
  return rows;
}

}  // namespace stratify
