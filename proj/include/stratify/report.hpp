#pragma once

// Evaluation and profile tables. Each table has a CSV form for people and a
// JSON mirror for programs.

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stratify/io.hpp"
#include "stratify/strata.hpp"

namespace stratify {

namespace detail {

inline std::string opt_number(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

inline const char* metrics_header() {
  return "row,omega,m,weight_norm,L_emp,R_emp,U,L,L_raw,saturated,AUROC,lo,hi,misclassified,status";
}

inline std::string row_status(const MetricsReport& r) {
  if (r.empty) return "empty";
  if (r.degenerate) return "single_label";
  return "ok";
}

inline std::string metrics_to_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  out << metrics_header() << '\n';
  for (const auto& r : reports) {
    const bool scored = !r.empty;
    const bool has_auc = r.auroc.has_value();
    out << csv_field(r.tag) << ',' << r.omega << ',' << r.train_count << ',' << format_double(r.weight_norm) << ','
        << (scored ? format_double(r.empirical_error) : "") << ',' << (scored ? format_double(r.rademacher) : "") << ','
        << (scored ? format_double(r.reliability) : "") << ',' << (scored ? format_double(r.bound.value) : "") << ','
        << (scored ? format_double(r.bound.raw) : "") << ',' << (scored ? (r.bound.saturated ? "1" : "0") : "") << ','
        << detail::opt_number(r.auroc) << ',' << (has_auc ? format_double(r.auroc_ci.lo) : "") << ','
        << (has_auc ? format_double(r.auroc_ci.hi) : "") << ',' << (scored ? std::to_string(r.misclassified) : "")
        << ',' << row_status(r) << '\n';
  }
  return out.str();
}

inline json metrics_to_json(const std::vector<MetricsReport>& reports) {
  json rows = json::array();
  for (const auto& r : reports) {
    json row = {{"row", r.tag},
                {"group", r.group < 0 ? json(nullptr) : json(r.group + 1)},
                {"omega", r.omega},
                {"m", r.train_count},
                {"weight_norm", r.weight_norm},
                {"status", row_status(r)}};
    if (!r.empty) {
      row["L_emp"] = r.empirical_error;
      row["R_emp"] = r.rademacher;
      row["U"] = r.reliability;
      row["L"] = r.bound.value;
      row["L_raw"] = r.bound.raw;
      row["saturated"] = r.bound.saturated;
      row["misclassified"] = r.misclassified;
    }
    row["AUROC"] = detail::opt_json(r.auroc);
    row["ci"] = r.auroc ? json::array({r.auroc_ci.lo, r.auroc_ci.hi}) : json(nullptr);
    rows.push_back(std::move(row));
  }
  return {{"rows", rows}};
}

inline std::string net_benefit_to_csv(const NetBenefitCurve& c) {
  std::ostringstream out;
  out << "threshold,model,treat_all,treat_none\n";
  for (std::size_t i = 0; i < c.thresholds.size(); ++i)
    out << format_double(c.thresholds[i]) << ',' << format_double(c.net_benefit[i]) << ','
        << format_double(c.treat_all[i]) << ',' << format_double(c.treat_none[i]) << '\n';
  return out.str();
}

inline std::string net_benefit_file(const std::string& tag) { return "net_benefit_" + tag + ".csv"; }

/// metrics.csv, metrics.json and one net-benefit table per scored predictor.
inline std::vector<std::filesystem::path> write_evaluation(const Evaluation& ev, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written{dir / "metrics.csv", dir / "metrics.json"};
  write_text(written[0], metrics_to_csv(ev.reports));
  json j = metrics_to_json(ev.reports);
  json curves = json::object();
  for (const auto& c : ev.curves) {
    curves[c.tag] = {{"thresholds", c.curve.thresholds},
                     {"model", c.curve.net_benefit},
                     {"treat_all", c.curve.treat_all},
                     {"treat_none", c.curve.treat_none}};
    written.push_back(dir / net_benefit_file(c.tag));
    write_text(written.back(), net_benefit_to_csv(c.curve));
  }
  j["net_benefit"] = std::move(curves);
  write_json(written[1], j);
  return written;
}

inline std::string profile_to_csv(const FeatureSchema& schema, const std::vector<ProfileRow>& rows) {
  std::ostringstream out;
  out << "group,pole,count";
  for (const auto& f : schema.features()) out << ',' << csv_field(f.name);
  out << '\n';
  for (const auto& r : rows) {
    out << group_tag(r.group) << ',' << (r.pole == Label::Y ? 'Y' : 'N') << ',' << r.count;
    for (double v : r.means) out << ',' << (r.count > 0 ? format_double(v) : "");
    out << '\n';
  }
  return out.str();
}

inline json profile_to_json(const FeatureSchema& schema, const std::vector<ProfileRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json means = json::object();
    for (std::size_t j = 0; j < schema.size(); ++j)
      means[schema[j].name] = r.count > 0 ? json(r.means[j]) : json(nullptr);
    out.push_back({{"group", group_tag(r.group)}, {"pole", r.pole == Label::Y ? "Y" : "N"}, {"count", r.count},
                   {"means", means}});
  }
  return {{"rows", out}};
}

}  // namespace stratify
