#pragma once

// Directory layout of a fitted StratificationModel:
//
//   manifest.json          hyperparameters, group counts, validation score
//   schema.json            feature schema
//   stats.json             training-split standardization
//   assignment.csv         id,group (1-based group number)
//   poles.csv              group,pole,<features...> in the standardized frame
//   group_<g>.json         additive model of group g (1-based)
//   global_additive.json   ALL baseline
//   global_linear.json     ALL-logit baseline
//   trace.csv              round,source,target,objective,outcome
//
// Every file is written from ordered data with shortest round-trip number
// formatting, so identical models produce identical bytes.

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "stratify/io.hpp"
#include "stratify/strata.hpp"

namespace stratify {

inline constexpr int kBundleVersion = 1;

inline json hyperparams_to_json(const HyperParams& hp) {
  return {{"C", hp.min_group}, {"P", hp.min_pole}, {"b", hp.block},  {"N", hp.rounds},
          {"delta", hp.delta}, {"lambda", hp.lambda}, {"seed", hp.seed}};
}

/// Reads the keys present in `j` over the values already in `hp`.
inline HyperParams hyperparams_from_json(const json& j, HyperParams hp = {}) {
  try {
    if (j.contains("C")) hp.min_group = j.at("C").get<int>();
    if (j.contains("P")) hp.min_pole = j.at("P").get<int>();
    if (j.contains("b")) hp.block = j.at("b").get<int>();
    if (j.contains("N")) hp.rounds = j.at("N").get<int>();
    if (j.contains("delta")) hp.delta = j.at("delta").get<double>();
    if (j.contains("lambda")) hp.lambda = j.at("lambda").get<double>();
    if (j.contains("seed")) hp.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed hyperparameters: ") + e.what());
  }
  return hp;
}

namespace detail {

inline std::string group_file(int g) { return "group_" + std::to_string(g + 1) + ".json"; }

inline std::string optional_index(int g) { return g < 0 ? std::string() : std::to_string(g + 1); }

inline int parse_index(const std::string& cell, const std::string& what) {
  if (cell.empty()) return -1;
  const auto v = parse_double(cell);
  if (!v || *v < 1 || *v != std::floor(*v)) throw ParseError("bad " + what + " '" + cell + "'", 0);
  return static_cast<int>(*v) - 1;
}

inline RoundOutcome parse_outcome(const std::string& s) {
  for (auto o : {RoundOutcome::initial, RoundOutcome::accepted, RoundOutcome::rejected, RoundOutcome::infeasible,
                 RoundOutcome::fit_failed})
    if (s == to_string(o)) return o;
  throw ParseError("unknown round outcome '" + s + "'", 0);
}

}  // namespace detail

inline std::string assignment_to_csv(const StratificationModel& model) {
  std::ostringstream out;
  out << "id,group\n";
  for (std::size_t i = 0; i < model.train_ids.size(); ++i)
    out << csv_field(model.train_ids[i]) << ',' << model.assignment.group_of[i] + 1 << '\n';
  return out.str();
}

inline std::string poles_to_csv(const StratificationModel& model) {
  std::ostringstream out;
  out << "group,pole";
  for (const auto& f : model.schema.features()) out << ',' << csv_field(f.name);
  out << '\n';
  for (std::size_t g = 0; g < model.poles.size(); ++g) {
    for (const auto* c : {&model.poles[g].positive, &model.poles[g].negative}) {
      out << g + 1 << ',' << (c == &model.poles[g].positive ? 'Y' : 'N');
      for (double v : *c) out << ',' << format_double(v);
      out << '\n';
    }
  }
  return out.str();
}

inline std::string trace_to_csv(const std::vector<TraceEntry>& trace) {
  std::ostringstream out;
  out << "round,source,target,objective,outcome\n";
  for (const auto& e : trace) {
    out << e.round << ',' << detail::optional_index(e.source) << ',' << detail::optional_index(e.target) << ','
        << (std::isnan(e.objective) ? std::string() : format_double(e.objective)) << ',' << to_string(e.outcome) << '\n';
  }
  return out.str();
}

inline std::string run_summary(const StratificationModel& model) {
  std::ostringstream out;
  int accepted = 0, infeasible = 0;
  for (const auto& e : model.trace) {
    accepted += e.outcome == RoundOutcome::accepted;
    infeasible += e.outcome == RoundOutcome::infeasible;
  }
  out << "groups: " << model.m() << '\n';
  for (int g = 0; g < model.m(); ++g) {
    const auto& c = model.assignment.counts[static_cast<std::size_t>(g)];
    out << group_tag(g) << ": " << c.total << " records (" << c.positive << " Y, " << c.negative << " N)\n";
  }
  out << "validation objective: " << format_double(model.objective()) << '\n';
  out << "rounds: " << model.trace.size() - 1 << " (" << accepted << " accepted, " << infeasible << " infeasible)\n";
  return out.str();
}

inline void save_bundle(const StratificationModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json counts = json::array();
  for (const auto& c : model.assignment.counts)
    counts.push_back({{"total", c.total}, {"Y", c.positive}, {"N", c.negative}});
  json degenerate = json::array();
  for (bool b : model.validation_score.degenerate) degenerate.push_back(b);
  json manifest = {{"format", "stratify-bundle"},
                   {"version", kBundleVersion},
                   {"m", model.m()},
                   {"hyperparams", hyperparams_to_json(model.hp)},
                   {"group_counts", counts},
                   {"validation",
                    {{"objective", model.validation_score.total},
                     {"group_auroc", model.validation_score.group_auroc},
                     {"degenerate", degenerate},
                     {"allocated", model.validation_score.allocated}}}};
  write_json(dir / "manifest.json", manifest);
  write_json(dir / "schema.json", schema_to_json(model.schema));
  write_json(dir / "stats.json", stats_to_json(model.stats));
  write_text(dir / "assignment.csv", assignment_to_csv(model));
  write_text(dir / "poles.csv", poles_to_csv(model));
  for (int g = 0; g < model.m(); ++g)
    write_json(dir / detail::group_file(g), model_to_json(model.group_models[static_cast<std::size_t>(g)]));
  write_json(dir / "global_additive.json", model_to_json(model.global_additive));
  write_json(dir / "global_linear.json", model_to_json(model.global_linear));
  write_text(dir / "trace.csv", trace_to_csv(model.trace));
  write_text(dir / "summary.txt", run_summary(model));
}

inline StratificationModel load_bundle(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("model bundle '" + dir.string() + "' is not a directory");
  const json manifest = read_json(dir / "manifest.json");
  if (manifest.value("format", "") != "stratify-bundle") throw Error("not a model bundle: " + dir.string());
  if (manifest.at("version").get<int>() != kBundleVersion) throw Error("unsupported bundle version");

  StratificationModel model;
  model.schema = load_schema(dir / "schema.json");
  model.stats = stats_from_json(read_json(dir / "stats.json"));
  model.hp = hyperparams_from_json(manifest.at("hyperparams"));
  const int m = manifest.at("m").get<int>();

  model.assignment.m = m;
  for (const auto& c : manifest.at("group_counts"))
    model.assignment.counts.push_back({c.at("total").get<int>(), c.at("Y").get<int>(), c.at("N").get<int>()});
  const auto assignment = read_csv(dir / "assignment.csv");
  const auto id_col = assignment.column("id"), group_col = assignment.column("group");
  for (const auto& row : assignment.rows) {
    model.train_ids.push_back(row[id_col]);
    model.assignment.group_of.push_back(detail::parse_index(row[group_col], "group"));
  }

  const auto poles = read_csv(dir / "poles.csv");
  model.poles.assign(static_cast<std::size_t>(m), {});
  for (const auto& row : poles.rows) {
    const int g = detail::parse_index(row[poles.column("group")], "group");
    if (g < 0 || g >= m) throw ParseError("pole group out of range", 0);
    std::vector<double> c;
    for (const auto& f : model.schema.features()) {
      const auto v = parse_double(row[poles.column(f.name)]);
      if (!v) throw ParseError("bad pole coordinate for '" + f.name + "'", 0);
      c.push_back(*v);
    }
    (row[poles.column("pole")] == "Y" ? model.poles[static_cast<std::size_t>(g)].positive
                                      : model.poles[static_cast<std::size_t>(g)].negative) = std::move(c);
  }

  for (int g = 0; g < m; ++g) model.group_models.push_back(model_from_json(read_json(dir / detail::group_file(g))));
  model.global_additive = model_from_json(read_json(dir / "global_additive.json"));
  model.global_linear = model_from_json(read_json(dir / "global_linear.json"));

  const auto trace = read_csv(dir / "trace.csv");
  for (const auto& row : trace.rows) {
    TraceEntry e;
    e.round = static_cast<int>(parse_double(row[trace.column("round")]).value_or(-1));
    e.source = detail::parse_index(row[trace.column("source")], "source");
    e.target = detail::parse_index(row[trace.column("target")], "target");
    const auto& obj = row[trace.column("objective")];
    e.objective = obj.empty() ? std::numeric_limits<double>::quiet_NaN() : parse_double(obj).value_or(0.0);
    e.outcome = detail::parse_outcome(row[trace.column("outcome")]);
    model.trace.push_back(e);
  }

  const auto& v = manifest.at("validation");
  model.validation_score.total = v.at("objective").get<double>();
  model.validation_score.group_auroc = v.at("group_auroc").get<std::vector<double>>();
  for (const auto& b : v.at("degenerate")) model.validation_score.degenerate.push_back(b.get<bool>());
  model.validation_score.allocated = v.at("allocated").get<std::vector<int>>();
  return model;
}

}  // namespace stratify
