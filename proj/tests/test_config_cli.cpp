#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hmbandit/cli.hpp"
#include "support.hpp"

using namespace hmb;
using testing_support::code_of;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = HMB_FIXTURES;

std::string fixture(const std::string& name) { return kFixtures + "/" + name; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hmbandit_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& command, const std::string& config, const fs::path& out,
        std::string* err_text = nullptr) {
  CliOptions o;
  o.command = command;
  o.config = config;
  o.out = out.string();
  std::ostringstream log, err;
  const int rc = dispatch(o, log, err);
  if (err_text) *err_text = err.str();
  return rc;
}

const char* kSmallArm = R"({
  "schema_version": 1,
  "arm": {"lambda0": 0.9, "lambda1": 0.1, "mu0": 0.1, "mu1": 0.9,
          "rho0": 0.1, "rho1": 0.9, "eta0": 0.1, "eta1": 0.9},
  "beta": 0.9,
  "eta2": 0.5,
  "grid": 201
})";

}  // namespace

// --- configuration ---

TEST(Config, TenArmFixture) {
  const RunConfig c = parse_config(fixture("ten_arms.json"));
  ASSERT_EQ(c.arms.size(), 10u);
  EXPECT_DOUBLE_EQ(c.beta, 0.99);
  EXPECT_EQ(c.seed, 2024u);
  EXPECT_EQ(c.whittle.mode, NumericMode::Scan);
  EXPECT_EQ(c.whittle.points, 201u);
  EXPECT_EQ(c.simulation.horizon, 2000u);
  EXPECT_EQ(c.simulation.iterations, 100u);
  EXPECT_EQ(c.simulation.initial_mode, InitialBeliefMode::Random);
  EXPECT_DOUBLE_EQ(c.arms[9].eta0(), 0.05);
  EXPECT_DOUBLE_EQ(c.arms[9].eta1(), 0.5);
}

TEST(Config, FigureFixture) {
  const RunConfig c = parse_config(fixture("fig2.json"));
  ASSERT_EQ(c.arms.size(), 1u);
  ASSERT_TRUE(c.eta2.has_value());
  EXPECT_DOUBLE_EQ(*c.eta2, 0.5);
  EXPECT_EQ(c.grid, 2001u);
  EXPECT_EQ(c.eta2_values(), std::vector<double>{0.5});
}

TEST(Config, ProbabilityOutOfRangeNamesField) {
  const std::string text = R"({"schema_version": 1, "arms": [
    {"lambda0": 0.9, "lambda1": 0.1, "mu0": 0.1, "mu1": 0.9, "rho0": 0.1, "rho1": 0.9, "eta0": 0.1, "eta1": 0.9},
    {"lambda0": 0.9, "lambda1": 0.1, "mu0": 1.5, "mu1": 0.9, "rho0": 0.1, "rho1": 0.9, "eta0": 0.1, "eta1": 0.9}]})";
  try {
    parse_config_text(text, "inline");
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ValidationError);
    EXPECT_NE(std::string(e.what()).find("arms[1].mu0"), std::string::npos) << e.what();
  }
}

TEST(Config, EmptyFile) {
  const fs::path d = scratch("empty");
  const std::string p = write_file(d, "empty.json", "");
  EXPECT_EQ(code_of([&] { parse_config(p); }), Errc::ParseError);
  EXPECT_EQ(code_of([&] { parse_config((d / "missing.json").string()); }), Errc::ParseError);
  EXPECT_EQ(code_of([] { parse_config_text("{ \"arm\": ", "inline"); }), Errc::ParseError);
}

TEST(Config, UnknownKeyRejected) {
  std::string text = kSmallArm;
  text.insert(text.rfind('}'), ", \"gird\": 11");
  try {
    parse_config_text(text, "inline");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ValidationError);
    EXPECT_NE(std::string(e.what()).find("gird"), std::string::npos);
  }
}

TEST(Config, CommentsAllowed) {
  const std::string text = std::string("// leading comment\n") + kSmallArm;
  EXPECT_EQ(parse_config_text(text, "inline").grid, 201u);
}

TEST(Config, StructuralErrors) {
  EXPECT_EQ(code_of([] { parse_config_text(R"({"schema_version": 1})", "x"); }),
            Errc::ValidationError);
  EXPECT_EQ(code_of([] { parse_config_text(R"({"arm": {}})", "x"); }), Errc::ValidationError);
  std::string bad_type = kSmallArm;
  bad_type.replace(bad_type.find("\"grid\": 201"), 11, "\"grid\": \"x\"");
  EXPECT_EQ(code_of([&] { parse_config_text(bad_type, "x"); }), Errc::ValidationError);
  std::string bad_beta = kSmallArm;
  bad_beta.replace(bad_beta.find("\"beta\": 0.9"), 11, "\"beta\": 1.0");
  EXPECT_EQ(code_of([&] { parse_config_text(bad_beta, "x"); }), Errc::ValidationError);
  std::string order = kSmallArm;
  order.replace(order.find("\"rho1\": 0.9"), 11, "\"rho1\": 0.05");
  const Errc c = code_of([&] { parse_config_text(order, "x"); });
  EXPECT_TRUE(c == Errc::OrderViolation || c == Errc::ValidationError);
}

TEST(Config, ProbabilitiesOnlyAdmitsDegenerateArms) {
  const std::string text = R"({"schema_version": 1, "validation": "probabilities_only",
    "arm": {"lambda0": 1, "lambda1": 0, "mu0": 0, "mu1": 1, "rho0": 1, "rho1": 1, "eta0": 0.2, "eta1": 0.2}})";
  EXPECT_NO_THROW(parse_config_text(text, "x"));
  std::string strict = text;
  strict.replace(strict.find("probabilities_only"), 18, "strict");
  EXPECT_ANY_THROW(parse_config_text(strict, "x"));
}

TEST(Config, SweepExpands) {
  std::string text = kSmallArm;
  text.insert(text.rfind('}'), ", \"eta2_sweep\": {\"from\": 0.2, \"to\": 0.3, \"step\": 0.05}");
  EXPECT_EQ(parse_config_text(text, "x").eta2_values().size(), 3u);
}

// --- CSV ---

TEST(Csv, RoundTripsDoubles) {
  ValueTable t = solve(testing_support::fig2(), 0.5, Discount(0.9), BeliefGrid::uniform(101));
  std::stringstream ss;
  write_value_table_csv(ss, t);
  const CsvDocument doc = read_csv(ss);
  ASSERT_EQ(doc.rows.size(), 101u);
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    ASSERT_EQ(doc.number(i, "pi"), t.grid[i]);
    ASSERT_EQ(doc.number(i, "v"), t.v[i]);
    ASSERT_EQ(doc.number(i, "v_s"), t.v_s[i]);
    ASSERT_EQ(doc.number(i, "v_ns"), t.v_ns[i]);
  }
  EXPECT_EQ(fmt(0.1), "0.10000000000000001");
  EXPECT_EQ(code_of([&] { doc.column("nope"); }), Errc::ParseError);
}

// --- commands ---

TEST(Cli, ThresholdOnFigureConfig) {
  const fs::path out = scratch("threshold");
  ASSERT_EQ(run("threshold", fixture("fig2.json"), out), kExitOk);
  std::ifstream f(out / "threshold.csv");
  const CsvDocument doc = read_csv(f);
  ASSERT_EQ(doc.rows.size(), 1u);
  EXPECT_EQ(doc.rows[0][doc.column("regime")], "Threshold");
  const double pi_t = doc.number(0, "pi_t");
  EXPECT_GT(pi_t, 0.5);
  EXPECT_LT(pi_t, 1.0);
  EXPECT_DOUBLE_EQ(doc.number(0, "pi_circ"), 0.5);
  const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(j["command"], "threshold");
  EXPECT_DOUBLE_EQ(j["results"][0]["pi_t"].get<double>(), pi_t);
}

TEST(Cli, SolveWritesValueTable) {
  const fs::path out = scratch("solve");
  const std::string cfg = write_file(out, "c.json", kSmallArm);
  ASSERT_EQ(run("solve", cfg, out), kExitOk);
  std::ifstream f(out / "value_table.csv");
  const CsvDocument doc = read_csv(f);
  EXPECT_EQ(doc.rows.size(), 201u);
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    EXPECT_DOUBLE_EQ(doc.number(i, "v"), std::max(doc.number(i, "v_s"), doc.number(i, "v_ns")));
  }
}

TEST(Cli, ValidateAndIndexability) {
  const fs::path out = scratch("validate");
  const std::string cfg = write_file(out, "c.json", kSmallArm);
  ASSERT_EQ(run("validate", fixture("ten_arms.json"), out), kExitOk);
  const auto v = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(v["arms"].size(), 10u);
  ASSERT_EQ(run("indexability", cfg, out), kExitOk);
  const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_TRUE(j["report"]["indexable"].get<bool>());
  EXPECT_TRUE(fs::exists(out / "threshold_curve.csv"));
}

TEST(Cli, WhittleOnUnorderedArmUsesBisection) {
  const fs::path out = scratch("whittle");
  std::string text = kSmallArm;
  text.insert(text.rfind('}'), ", \"whittle\": {\"points\": 11, \"mode\": \"bisection\", \"vi_grid\": 201}");
  const std::string cfg = write_file(out, "c.json", text);
  ASSERT_EQ(run("whittle", cfg, out), kExitOk);
  std::ifstream f(out / "whittle.csv");
  const CsvDocument doc = read_csv(f);
  ASSERT_EQ(doc.rows.size(), 11u);
  for (const auto& row : doc.rows) EXPECT_EQ(row[doc.column("method")], "Bisection");
}

TEST(Cli, WhittleOnOrderedArmUsesClosedForm) {
  const fs::path out = scratch("whittle_ordered");
  ASSERT_EQ(run("whittle", fixture("ordered_arm.json"), out), kExitOk);
  std::ifstream f(out / "whittle.csv");
  const CsvDocument doc = read_csv(f);
  ASSERT_EQ(doc.rows.size(), 101u);
  EXPECT_EQ(doc.rows[0][doc.column("method")], "ClosedForm(A1)");
  EXPECT_NEAR(doc.number(0, "w"), 0.95, 1e-12);
}

TEST(Cli, SimulateSingleEpisodeTrace) {
  const fs::path out = scratch("simulate");
  std::string text = kSmallArm;
  text.replace(text.find("\"arm\""), 5, "\"arms\"");
  text.replace(text.find("{\"lambda0\""), 0, "[");
  text.insert(text.find("},\n  \"beta\"") + 1,
              ", {\"lambda0\": 0.9, \"lambda1\": 0.1, \"mu0\": 0.9, \"mu1\": 0.1, \"rho0\": 0.1, "
              "\"rho1\": 0.95, \"eta0\": 0.1, \"eta1\": 0.95}]");
  text.insert(text.rfind('}'),
              ", \"whittle\": {\"points\": 21, \"mode\": \"scan\", \"vi_grid\": 201},"
              " \"simulation\": {\"horizon\": 50, \"iterations\": 1, \"initial_beliefs\": [0.3, 0.6]}");
  const std::string cfg = write_file(out, "c.json", text);
  ASSERT_EQ(run("simulate", cfg, out), kExitOk);
  for (const char* p : {"whittle", "myopic", "random"}) {
    std::ifstream f(out / (std::string("trace_") + p + ".csv"));
    const CsvDocument trace = read_csv(f);
    ASSERT_EQ(trace.rows.size(), 50u);
  }
  // With one episode the per-slot mean is the trace reward.
  std::ifstream sf(out / "sim.csv");
  const CsvDocument sim = read_csv(sf);
  std::ifstream tf(out / "trace_myopic.csv");
  const CsvDocument trace = read_csv(tf);
  std::size_t k = 0;
  for (std::size_t i = 0; i < sim.rows.size(); ++i) {
    if (sim.rows[i][sim.column("policy")] != "myopic") continue;
    EXPECT_EQ(sim.number(i, "mean_instantaneous_reward"), trace.number(k, "reward"));
    ++k;
  }
  EXPECT_EQ(k, 50u);
}

TEST(Cli, RerunsAreByteIdentical) {
  const fs::path a = scratch("rerun_a");
  const fs::path b = scratch("rerun_b");
  std::string text = kSmallArm;
  text.insert(text.rfind('}'), ", \"simulation\": {\"horizon\": 40, \"iterations\": 3, "
                               "\"policies\": [\"myopic\", \"random\"]}");
  const std::string cfg = write_file(a, "c.json", text);
  for (const char* cmd : {"simulate", "threshold"}) {
    ASSERT_EQ(run(cmd, cfg, a), kExitOk);
    ASSERT_EQ(run(cmd, cfg, b), kExitOk);
    for (const auto& e : fs::directory_iterator(b)) {
      EXPECT_EQ(slurp(e.path()), slurp(a / e.path().filename())) << e.path();
    }
  }
}

TEST(Cli, OracleCheckPasses) {
  const fs::path out = scratch("oracle");
  std::string text = kSmallArm;
  text.insert(text.rfind('}'), ", \"oracle\": {\"horizon\": 10, \"samples\": 20}");
  const std::string cfg = write_file(out, "c.json", text);
  ASSERT_EQ(run("oracle-check", cfg, out), kExitOk);
  const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_TRUE(j["passed"].get<bool>());
}

TEST(Cli, ExitCodes) {
  const fs::path out = scratch("exit");
  std::string err;
  EXPECT_EQ(run("solve", (out / "missing.json").string(), out, &err), kExitConfig);
  EXPECT_NE(err.find("ParseError"), std::string::npos);
  EXPECT_EQ(run("bogus", fixture("fig2.json"), out), kExitConfig);

  std::string budget = kSmallArm;
  budget.insert(budget.rfind('}'), ", \"max_sweeps\": 3");
  const std::string cfg = write_file(out, "budget.json", budget);
  EXPECT_EQ(run("solve", cfg, out, &err), kExitNumeric);
  EXPECT_NE(err.find("IterationBudgetExceeded"), std::string::npos);

  CliOptions o;
  o.command = "solve";
  o.config = fixture("fig2.json");
  o.out = out.string();
  o.arm = 3;
  std::ostringstream log, e2;
  EXPECT_EQ(dispatch(o, log, e2), kExitConfig);

  EXPECT_EQ(exit_code(Errc::NoCrossingInBracket), kExitNumeric);
  EXPECT_EQ(exit_code(Errc::OrderViolation), kExitConfig);
  EXPECT_EQ(static_cast<int>(kExitOracle), 4);
}

TEST(Cli, BinaryArgumentHandling) {
  const fs::path out = scratch("binary");
  const std::string cli = HMB_CLI;
  auto sh = [](const std::string& cmd) {
    const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(sh(cli + " --help"), 0);
  EXPECT_EQ(sh(cli + " solve"), 2);
  EXPECT_EQ(sh(cli + " frobnicate --config " + fixture("fig2.json")), 2);
  const std::string cfg = write_file(out, "c.json", kSmallArm);
  EXPECT_EQ(sh(cli + " solve --config " + cfg + " --out " + out.string() + " --grid 51"), 0);
  std::ifstream f(out / "value_table.csv");
  EXPECT_EQ(read_csv(f).rows.size(), 51u);
  EXPECT_EQ(sh(cli + " solve --config " + cfg + " --out " + out.string() + " --grid 2"), 2);
}
