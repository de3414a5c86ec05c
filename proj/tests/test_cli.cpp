#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "stratify/cli.hpp"
#include "support.hpp"

using namespace stratify;
using testing_support::TempDir;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + STRATIFY_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

/// Synthetic data plus one fitted bundle, shared by the tests below.
struct Workspace {
  TempDir dir;
  SynthResult data;
  fs::path bundle;
  StratificationModel model;

  Workspace() {
    data = cmd_synth(1500, 1, dir / "data");
    auto cfg = preset_config("synthetic");
    cfg.input = data.data;
    cfg.out = dir / "bundle";
    bundle = cfg.out;
    model = cmd_fit(cfg);
  }
};

/// Fit diagnostics are not part of the bundle; everything else must survive.
void expect_same_fit(const PredictorModel& a, const PredictorModel& b) {
  EXPECT_EQ(a.kind, b.kind);
  EXPECT_EQ(a.intercept, b.intercept);
  EXPECT_EQ(a.coefficients, b.coefficients);
  EXPECT_EQ(a.basis, b.basis);
  EXPECT_EQ(a.weight_norm, b.weight_norm);
  EXPECT_EQ(a.schema_fingerprint, b.schema_fingerprint);
  EXPECT_EQ(a.lambda, b.lambda);
  EXPECT_EQ(a.ridge, b.ridge);
}

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

// ---------------------------------------------------------------- synth

TEST(Synth, WritesHeaderPlusRows) {
  TempDir t;
  const auto r = cmd_synth(1500, 1, t.path());
  EXPECT_EQ(line_count(r.data), 1501u);
  EXPECT_EQ(line_count(r.truth), 1501u);
  EXPECT_EQ(read_csv(r.truth).header, (std::vector<std::string>{"id", "true_group", "x1", "x2"}));
  EXPECT_EQ(load_schema(r.schema), synthetic_schema());
}

TEST(Synth, OddCountRejected) { EXPECT_THROW(cmd_synth(3, 1, TempDir().path()), Error); }

TEST(Synth, ProcessSameSeedIsByteIdentical) {
  TempDir t;
  ASSERT_EQ(run_cli("synth --n 600 --seed 9 --out " + (t / "a").string()), 0);
  ASSERT_EQ(run_cli("synth --n 600 --seed 9 --out " + (t / "b").string()), 0);
  EXPECT_EQ(read_text(t / "a" / "data.csv"), read_text(t / "b" / "data.csv"));
  EXPECT_EQ(read_text(t / "a" / "truth.csv"), read_text(t / "b" / "truth.csv"));
}

TEST(Synth, ProcessOddCountFails) {
  TempDir t;
  EXPECT_NE(run_cli("synth --n 3 --out " + (t / "x").string()), 0);
}

// ---------------------------------------------------------------- fit

TEST(Fit, SyntheticPresetFindsTwoGroups) {
  auto& w = workspace();
  EXPECT_EQ(w.model.m(), 2);
  for (const char* f : {"manifest.json", "schema.json", "stats.json", "assignment.csv", "poles.csv", "group_1.json",
                        "group_2.json", "global_additive.json", "global_linear.json", "trace.csv", "summary.txt",
                        "config.json", "splits/train.csv", "splits/validation.csv", "splits/test.csv"})
    EXPECT_TRUE(fs::exists(w.bundle / f)) << f;
  EXPECT_EQ(line_count(w.bundle / "splits" / "test.csv"), 701u);
  EXPECT_EQ(line_count(w.bundle / "trace.csv"), 12u);
}

TEST(Fit, BundleRoundTrip) {
  auto& w = workspace();
  const auto loaded = load_bundle(w.bundle);
  EXPECT_EQ(loaded.schema, w.model.schema);
  EXPECT_EQ(loaded.train_ids, w.model.train_ids);
  EXPECT_EQ(loaded.assignment, w.model.assignment);
  EXPECT_EQ(loaded.poles, w.model.poles);
  ASSERT_EQ(loaded.group_models.size(), w.model.group_models.size());
  for (std::size_t g = 0; g < loaded.group_models.size(); ++g) expect_same_fit(loaded.group_models[g], w.model.group_models[g]);
  expect_same_fit(loaded.global_additive, w.model.global_additive);
  expect_same_fit(loaded.global_linear, w.model.global_linear);
  EXPECT_EQ(loaded.validation_score, w.model.validation_score);
  ASSERT_EQ(loaded.trace.size(), w.model.trace.size());
  for (std::size_t i = 0; i < loaded.trace.size(); ++i) {
    EXPECT_EQ(loaded.trace[i].outcome, w.model.trace[i].outcome);
    EXPECT_EQ(loaded.trace[i].source, w.model.trace[i].source);
    EXPECT_EQ(loaded.trace[i].target, w.model.trace[i].target);
  }
}

TEST(Fit, ProcessMissingInputFails) {
  TempDir t;
  EXPECT_NE(run_cli("fit --preset synthetic --input " + (t / "nope.csv").string() + " --out " + (t / "m").string()), 0);
}

TEST(Fit, TooSmallForConstraintsIsInfeasible) {
  TempDir t;
  const auto d = cmd_synth(200, 2, t / "d");
  auto cfg = preset_config("synthetic");
  cfg.input = d.data;
  cfg.out = t / "m";
  EXPECT_THROW(cmd_fit(cfg), InfeasibleError);
}

// ---------------------------------------------------------------- evaluate

TEST(Evaluate, HeldOutReportRows) {
  auto& w = workspace();
  TempDir t;
  EvaluateRequest req;
  req.model = w.bundle;
  req.out = t.path();
  const auto ev = cmd_evaluate(req);
  const auto table = read_csv(t / "metrics.csv");
  ASSERT_EQ(table.rows.size(), 4u);
  const auto row_col = table.column("row");
  EXPECT_EQ(table.rows[0][row_col], "G1");
  EXPECT_EQ(table.rows[1][row_col], "G2");
  EXPECT_EQ(table.rows[2][row_col], "ALL");
  EXPECT_EQ(table.rows[3][row_col], "ALL-logit");
  for (const auto& r : ev.reports) EXPECT_GE(r.bound.value, r.empirical_error);
  const auto u = *parse_double(table.rows[2][table.column("U")]);
  EXPECT_NEAR(u, 0.04625806704591404, 1e-15);
  for (const auto& c : ev.curves) EXPECT_TRUE(fs::exists(t / net_benefit_file(c.tag)));
  const auto j = read_json(t / "metrics.json");
  EXPECT_EQ(j.at("rows").size(), 4u);
  EXPECT_TRUE(j.at("net_benefit").contains("ALL-logit"));
}

TEST(Evaluate, ProcessHeldOutWritesReport) {
  auto& w = workspace();
  TempDir t;
  ASSERT_EQ(run_cli("evaluate --model " + w.bundle.string() + " --held-out --out " + t.path().string()), 0);
  EXPECT_EQ(line_count(t / "metrics.csv"), 5u);
}

TEST(Evaluate, SchemaMismatchRejected) {
  auto& w = workspace();
  TempDir t;
  write_dataset(t / "clin.csv", generate_clinical_surrogate(40, 1));
  EvaluateRequest req;
  req.model = w.bundle;
  req.data = t / "clin.csv";
  req.out = t / "r";
  EXPECT_THROW(cmd_evaluate(req), Error);
  EXPECT_NE(run_cli("evaluate --model " + w.bundle.string() + " --data " + (t / "clin.csv").string() + " --out " +
                    (t / "r2").string()),
            0);
}

TEST(Evaluate, ThresholdOverrideValidated) {
  auto& w = workspace();
  EvaluateRequest req;
  req.model = w.bundle;
  req.out = TempDir().path();
  req.thresholds = std::vector<double>{0.5, 0.2};
  EXPECT_THROW(cmd_evaluate(req), Error);
}

// ---------------------------------------------------------------- profile

TEST(Profile, SyntheticRowsAndSignPattern) {
  auto& w = workspace();
  TempDir t;
  const auto rows = cmd_profile(w.bundle, std::nullopt, t.path());
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(read_csv(t / "profile.csv").rows.size(), 4u);
  // One positive pole lies in the X3 < 0 half, the other in X3 > 0.
  const double x3_g1 = rows[0].means[0], x3_g2 = rows[2].means[0];
  EXPECT_LT(std::min(x3_g1, x3_g2), 0.0);
  EXPECT_GT(std::max(x3_g1, x3_g2), 0.0);
}

TEST(Profile, ProcessWritesJson) {
  auto& w = workspace();
  TempDir t;
  ASSERT_EQ(run_cli("profile --model " + w.bundle.string() + " --out " + t.path().string()), 0);
  EXPECT_EQ(read_json(t / "profile.json").at("rows").size(), 4u);
}

// ---------------------------------------------------------------- config

TEST(Config, JsonRoundTrip) {
  auto c = preset_config("clinical");
  c.input = "/data/cohort.csv";
  c.split_seed = 11;
  c.hp.rounds = 17;
  c.ci_level = 0.9;
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(back.input, c.input);
  EXPECT_EQ(back.split_seed, 11u);
  EXPECT_EQ(back.hp.rounds, 17);
  EXPECT_EQ(back.hp.min_group, 200);
  EXPECT_EQ(back.thresholds, clinical_thresholds());
  EXPECT_EQ(back.ci_level, 0.9);
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, RelativePathsResolveAgainstFile) {
  TempDir t;
  write_text(t / "run.json", R"({"preset": "synthetic", "input": "data.csv", "hyperparams": {"N": 3}})");
  const auto c = load_config(t / "run.json");
  EXPECT_EQ(c.input, t / "data.csv");
  EXPECT_EQ(c.hp.rounds, 3);
  EXPECT_EQ(c.hp.min_group, 100);
}

TEST(Config, Errors) {
  EXPECT_THROW(preset_config("other"), Error);
  EXPECT_THROW(config_from_json(json{{"fractions", {0.5, 0.5}}}), Error);
  EXPECT_THROW(validate_thresholds({0.1, 0.1}), Error);
  EXPECT_THROW(validate_thresholds({0.0, 0.5}), Error);
  EXPECT_THROW(validate_thresholds({0.5, 1.0}), Error);
  EXPECT_NO_THROW(validate_thresholds(synthetic_thresholds()));
}
