#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stratify/cli.hpp"

namespace {

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::size_t at = 0;
  while (at <= text.size()) {
    const auto comma = text.find(',', at);
    const auto cell = stratify::trim(std::string_view(text).substr(at, comma == std::string::npos ? std::string::npos : comma - at));
    const auto v = stratify::parse_double(cell);
    if (!v) throw stratify::Error("bad threshold '" + std::string(cell) + "'");
    out.push_back(*v);
    if (comma == std::string::npos) break;
    at = comma + 1;
  }
  stratify::validate_thresholds(out);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk stratification by constrained clustering and per-group additive models"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate the two-regime synthetic dataset");
  std::size_t n = 1500;
  std::uint64_t synth_seed = 1;
  std::string synth_out = "synthetic";
  synth->add_option("-n,--n", n, "Number of records (even)");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output directory");

  auto* fit = app.add_subcommand("fit", "Split, stratify and fit; writes a model bundle");
  std::string config_path, preset, input, schema, fit_out;
  std::optional<std::uint64_t> fit_seed;
  std::optional<int> rounds;
  std::optional<double> fit_delta;
  std::string fit_thresholds;
  fit->add_option("--config", config_path, "Run configuration (JSON)");
  fit->add_option("--preset", preset, "synthetic or clinical defaults");
  fit->add_option("--input", input, "Data file (overrides config)");
  fit->add_option("--schema", schema, "Schema file (overrides config)");
  fit->add_option("--seed", fit_seed, "Seed for the split and the search (overrides config)");
  fit->add_option("--rounds", rounds, "Perturbation rounds N (overrides config)");
  fit->add_option("--delta", fit_delta, "Reliability parameter (overrides config)");
  fit->add_option("--thresholds", fit_thresholds, "Comma-separated decision thresholds");
  fit->add_option("--out", fit_out, "Bundle directory (overrides config)");

  auto* evaluate = app.add_subcommand("evaluate", "Score a model bundle on test data");
  stratify::EvaluateRequest ereq;
  std::string eval_model, eval_data, eval_out, eval_thresholds;
  bool held_out = false;
  std::optional<double> eval_delta;
  std::optional<std::uint64_t> eval_seed;
  evaluate->add_option("--model", eval_model, "Model bundle directory")->required();
  auto* data_opt = evaluate->add_option("--data", eval_data, "Test data file");
  evaluate->add_flag("--held-out", held_out, "Use the bundle's held-out test split")->excludes(data_opt);
  evaluate->add_option("--delta", eval_delta, "Reliability parameter of the error bound");
  evaluate->add_option("--thresholds", eval_thresholds, "Comma-separated decision thresholds");
  evaluate->add_option("--seed", eval_seed, "Bootstrap seed");
  evaluate->add_option("--out", eval_out, "Report directory (default <model>/report)");

  auto* profile = app.add_subcommand("profile", "Per-group, per-pole attribute means");
  std::string prof_model, prof_data, prof_out;
  profile->add_option("--model", prof_model, "Model bundle directory")->required();
  profile->add_option("--data", prof_data, "Training data file (default: the bundle's training split)");
  profile->add_option("--out", prof_out, "Report directory (default <model>/report)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto r = stratify::cmd_synth(n, synth_seed, synth_out);
      std::cout << "wrote " << r.data.string() << ", " << r.truth.string() << ", " << r.schema.string() << '\n';
    } else if (*fit) {
      stratify::RunConfig cfg = config_path.empty() ? stratify::preset_config(preset) : stratify::load_config(config_path);
      if (!config_path.empty() && !preset.empty() && preset != cfg.preset)
        throw stratify::Error("--preset conflicts with the config's preset");
      if (!input.empty()) cfg.input = input;
      if (!schema.empty()) cfg.schema = schema;
      if (!fit_out.empty()) cfg.out = fit_out;
      if (fit_seed) cfg.split_seed = cfg.hp.seed = *fit_seed;
      if (rounds) cfg.hp.rounds = *rounds;
      if (fit_delta) cfg.hp.delta = *fit_delta;
      if (!fit_thresholds.empty()) cfg.thresholds = parse_thresholds(fit_thresholds);
      stratify::cmd_fit(cfg, &std::cout);
      std::cout << "bundle: " << cfg.out.string() << '\n';
    } else if (*evaluate) {
      ereq.model = eval_model;
      if (!eval_data.empty()) ereq.data = eval_data;
      ereq.out = eval_out;
      ereq.delta = eval_delta;
      ereq.seed = eval_seed;
      if (!eval_thresholds.empty()) ereq.thresholds = parse_thresholds(eval_thresholds);
      stratify::cmd_evaluate(ereq, &std::cout);
    } else if (*profile) {
      std::optional<std::filesystem::path> data;
      if (!prof_data.empty()) data = prof_data;
      stratify::cmd_profile(prof_model, data, prof_out, &std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
