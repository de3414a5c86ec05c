#pragma once

// Delimited-text and JSON persistence shared by the CLI and the model bundle.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "stratify/core.hpp"

namespace stratify {

using json = nlohmann::json;

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw Error("number formatting failed");
  return std::string(buf.data(), end);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

/// Y/N, 1/0 and true/false in any case.
inline std::optional<bool> parse_flag(std::string_view cell) {
  const std::string s = lower(trim(cell));
  if (s == "y" || s == "1" || s == "true") return true;
  if (s == "n" || s == "0" || s == "false") return false;
  return std::nullopt;
}

/// Comma-separated fields; double quotes protect commas and "" escapes a quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw SchemaError("missing column '" + name + "'");
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  CsvTable t;
  std::string line;
  bool have_header = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      for (auto& h : split_csv_line(line)) t.header.emplace_back(trim(h));
      have_header = true;
      continue;
    }
    ++row;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != t.header.size())
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(t.header.size()) +
                           " fields, found " + std::to_string(fields.size()),
                       row);
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw ParseError("'" + path.string() + "' is empty");
  return t;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline constexpr const char* kIdColumn = "id";

/// Reads a header-first comma-separated file. Columns may appear in any order;
/// extra columns are ignored. Row numbers in errors count data rows from 1.
inline Dataset load_dataset(const std::filesystem::path& path, const FeatureSchema& schema) {
  const CsvTable t = read_csv(path);
  const std::size_t id_col = t.column(kIdColumn);
  const std::size_t label_col = t.column(schema.label_name());
  std::vector<std::size_t> cols;
  for (const auto& f : schema.features()) cols.push_back(t.column(f.name));

  std::vector<PatientRecord> records;
  records.reserve(t.rows.size());
  std::unordered_set<std::string> ids;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t rowno = r + 1;
    auto fail = [&](const std::string& col, const std::string& why) {
      throw ParseError("row " + std::to_string(rowno) + ", column '" + col + "': " + why, rowno);
    };
    PatientRecord rec;
    rec.id = std::string(trim(row[id_col]));
    if (rec.id.empty()) fail(kIdColumn, "missing id");
    if (!ids.insert(rec.id).second) fail(kIdColumn, "duplicate id '" + rec.id + "'");
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto& f = schema[j];
      const auto cell = trim(row[cols[j]]);
      if (cell.empty()) fail(f.name, "missing value");
      if (f.kind == FeatureKind::binary) {
        auto b = parse_flag(cell);
        if (!b) fail(f.name, "cannot parse '" + std::string(cell) + "' as a binary value");
        rec.values.push_back(*b ? 1.0 : 0.0);
      } else {
        auto v = parse_double(cell);
        if (!v || !std::isfinite(*v)) fail(f.name, "cannot parse '" + std::string(cell) + "' as a number");
        rec.values.push_back(*v);
      }
    }
    const auto cell = trim(row[label_col]);
    if (cell.empty()) fail(schema.label_name(), "missing label");
    auto y = parse_flag(cell);
    if (!y) fail(schema.label_name(), "cannot parse '" + std::string(cell) + "' as a Y/N label");
    rec.label = *y ? Label::Y : Label::N;
    records.push_back(std::move(rec));
  }
  return Dataset(schema, std::move(records), Role::unsplit);
}

inline std::string dataset_to_csv(const Dataset& ds) {
  std::ostringstream out;
  out << kIdColumn;
  for (const auto& f : ds.schema().features()) out << ',' << csv_field(f.name);
  out << ',' << csv_field(ds.schema().label_name()) << '\n';
  for (const auto& r : ds.records()) {
    out << csv_field(r.id);
    for (std::size_t j = 0; j < r.values.size(); ++j) {
      out << ',';
      if (ds.schema()[j].kind == FeatureKind::binary)
        out << (r.values[j] != 0.0 ? '1' : '0');
      else
        out << format_double(r.values[j]);
    }
    out << ',' << (r.label == Label::Y ? 'Y' : 'N') << '\n';
  }
  return out.str();
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& ds) { write_text(path, dataset_to_csv(ds)); }

// Schema file: {"label": "died_90d", "features": [{"name": "age", "kind": "continuous"}, ...]}

inline json schema_to_json(const FeatureSchema& s) {
  json features = json::array();
  for (const auto& f : s.features())
    features.push_back({{"name", f.name}, {"kind", f.kind == FeatureKind::binary ? "binary" : "continuous"}});
  return {{"label", s.label_name()}, {"features", features}};
}

inline FeatureSchema schema_from_json(const json& j) {
  try {
    std::vector<Feature> features;
    for (const auto& f : j.at("features")) {
      const std::string kind = f.at("kind").get<std::string>();
      if (kind != "continuous" && kind != "binary")
        throw SchemaError("feature '" + f.at("name").get<std::string>() + "': unknown kind '" + kind + "'");
      features.push_back({f.at("name").get<std::string>(),
                          kind == "binary" ? FeatureKind::binary : FeatureKind::continuous});
    }
    return FeatureSchema(std::move(features), j.at("label").get<std::string>());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
}

inline FeatureSchema load_schema(const std::filesystem::path& path) { return schema_from_json(read_json(path)); }

inline json stats_to_json(const StandardizationStats& s) {
  json std_flags = json::array();
  for (bool b : s.standardized) std_flags.push_back(b);
  return {{"mean", s.mean}, {"stddev", s.stddev}, {"standardized", std_flags}};
}

inline StandardizationStats stats_from_json(const json& j) {
  StandardizationStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  for (const auto& b : j.at("standardized")) s.standardized.push_back(b.get<bool>());
  return s;
}

}  // namespace stratify
