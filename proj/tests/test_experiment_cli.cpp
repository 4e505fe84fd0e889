#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "acm/experiment.hpp"
#include "acm/export.hpp"

using namespace acm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("acm_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(ACM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ConfigMap small(std::initializer_list<std::pair<const char*, const char*>> kv) {
  ConfigMap m;
  for (const auto& [k, v] : kv) m[k] = v;
  return m;
}

}  // namespace

TEST(Config, ParseText) {
  const auto cfg = parse_config_text("# comment\n delay = geometric:0.5  \n\nhorizon=100 # trailing\n");
  EXPECT_EQ(cfg.at("delay"), "geometric:0.5");
  EXPECT_EQ(cfg.at("horizon"), "100");
  EXPECT_EQ(cfg.size(), 2u);
}

TEST(Config, RejectsUnknownKeysAndBadLines) {
  auto expect_config_error = [](const std::string& text) {
    try {
      parse_config_text(text);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    }
  };
  expect_config_error("colour = red\n");
  expect_config_error("horizon 100\n");
}

TEST(Config, MaterializeValidates) {
  auto base = preset_defaults("");
  auto expect_kind = [&](const char* key, const char* value, ErrorKind kind) {
    auto m = base;
    m[key] = value;
    try {
      materialize(m);
      FAIL() << key << "=" << value;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), kind) << key << "=" << value;
    }
  };
  expect_kind("delay", "geometric:2", ErrorKind::ConfigError);
  expect_kind("delay", "zipf:1", ErrorKind::ConfigError);
  expect_kind("construction", "f0", ErrorKind::ConfigError);
  expect_kind("horizon", "0", ErrorKind::ConfigError);
  expect_kind("horizon", "12x", ErrorKind::ConfigError);
  expect_kind("horizon", "1000000000", ErrorKind::ResourceBound);
  expect_kind("replicas", "0", ErrorKind::ConfigError);
  expect_kind("exact_confirmation", "maybe", ErrorKind::ConfigError);
  expect_kind("alpha_grid", "1,-2", ErrorKind::ConfigError);
  expect_kind("k", "1", ErrorKind::ConfigError);
  expect_kind("preset", "nope", ErrorKind::ConfigError);
  const auto c = materialize(base);
  EXPECT_EQ(c.alpha_grid, (std::vector<double>{0.1, 0.5, 2, 10, 50}));
  EXPECT_EQ(c.k_list, (std::vector<std::int64_t>{2, 4, 8, 16, 32}));
}

TEST(Config, LayeringFileEnvCli) {
  TempDir dir;
  const auto file = dir.path / "run.cfg";
  std::ofstream(file) << "horizon = 777\noutput_dir = from_file\nseed = 5\n";
  ::unsetenv(kOutputDirEnv);
  auto c = load_config("palm", file.string(), {});
  EXPECT_EQ(c.horizon, 777);
  EXPECT_EQ(c.output_dir, "from_file");
  EXPECT_EQ(c.seed_base, 5u);
  ::setenv(kOutputDirEnv, "from_env", 1);
  EXPECT_EQ(load_config("palm", file.string(), {}).output_dir, "from_env");
  c = load_config("palm", file.string(), small({{"output_dir", "from_cli"}, {"seed", "9"}}));
  EXPECT_EQ(c.output_dir, "from_cli");
  EXPECT_EQ(c.seed_base, 9u);
  ::unsetenv(kOutputDirEnv);
  EXPECT_THROW(load_config("palm", (dir.path / "missing.cfg").string(), {}), Error);
  EXPECT_THROW(load_config("not-a-preset", "", {}), Error);
}

TEST(Config, PresetsMaterialize) {
  for (const auto& name : preset_names()) EXPECT_NO_THROW(materialize(preset_defaults(name))) << name;
}

TEST(Experiment, SmallRunsProduceSchema) {
  for (const auto& name : {"nakamoto-rate", "regen-stats", "palm", "commuting"}) {
    auto m = preset_defaults(name);
    m["horizon"] = "20000";
    m["replicas"] = "2";
    const auto res = run_experiment(materialize(m));
    const auto j = res.to_json();
    EXPECT_EQ(j["schema"], kResultSchema);
    EXPECT_EQ(j["preset"], name);
    EXPECT_TRUE(j.contains("thresholds"));
    EXPECT_EQ(j["per_replica"].size(), 2u) << name;
    // Keys keep insertion order.
    EXPECT_EQ(j.begin().key(), "schema");
  }
}

TEST(Experiment, DeterministicAcrossThreadCounts) {
  for (const auto& name : {"nakamoto-rate", "f2-stability", "commuting"}) {
    auto m = preset_defaults(name);
    m["horizon"] = "5000";
    m["replicas"] = "4";
    m["threads"] = "1";
    const auto one = run_experiment(materialize(m)).to_json().dump(2);
    m["threads"] = "4";
    const auto four = run_experiment(materialize(m)).to_json().dump(2);
    EXPECT_EQ(one, four) << name;
  }
}

TEST(Export, CsvQuotingAndDoubles) {
  std::ostringstream os;
  CsvWriter csv(os);
  csv.row("a", std::string("b,c"), std::string("say \"hi\""), 0.1, 3);
  EXPECT_EQ(os.str(), "a,\"b,c\",\"say \"\"hi\"\"\",0.1,3\r\n");
  EXPECT_EQ(CsvWriter::format_double(1.0 / 3.0), "0.3333333333333333");
  EXPECT_EQ(CsvWriter::format_double(2.5), "2.5");
}

TEST(Export, EdgesAndDot) {
  const auto st = run_on_trace(Trace(1, {1, 2, 2}), AllLeaves{});
  std::ostringstream edges;
  write_edges_csv(edges, st);
  EXPECT_EQ(edges.str(), "src,dst,mark_src,mark_dst\r\n1,0,1,0\r\n2,0,2,0\r\n3,1,3,1\r\n");
  std::ostringstream dot;
  write_dot(dot, st, DotOptions{{0, 1}, {}, true, "g"});
  const auto text = dot.str();
  EXPECT_EQ(text.rfind("digraph g {", 0), 0u);
  EXPECT_NE(text.find("v0 [label=\"0\", style=filled, fillcolor=\"#d62728\", fontcolor=white, confirmed=true, shape=doublecircle]"),
            std::string::npos);
  EXPECT_NE(text.find("v3 -> v1;"), std::string::npos);
}

TEST(Cli, LambdaPrintsConstants) {
  TempDir dir;
  const auto out = dir.path / "lambda.json";
  const std::string cmd = std::string(ACM_CLI_PATH) + " lambda --delay geometric:0.5 > " + out.string();
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  const auto j = Json::parse(slurp(out));
  EXPECT_NEAR(j["lambda"].get<double>(), 0.609149711066229, 1e-12);
  EXPECT_NEAR(j["q_tilde"].get<double>(), 0.144394047543301, 1e-9);
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  const std::string o = " -o " + dir.path.string();
  EXPECT_EQ(run_cli("lambda --delay bogus"), 2);
  EXPECT_EQ(run_cli("lambda --delay geometric:1.5"), 2);
  EXPECT_EQ(run_cli("simulate -T 0" + o), 2);
  EXPECT_EQ(run_cli("simulate --construction f0" + o), 2);
  EXPECT_EQ(run_cli("simulate --set colour=red" + o), 2);
  EXPECT_EQ(run_cli("experiment no-such-preset" + o), 2);
  EXPECT_EQ(run_cli("regen --delay shifted-geometric:1:0.5 -T 1000" + o), 0);
  EXPECT_EQ(run_cli("simulate -T 1000000000" + o), 3);
  EXPECT_EQ(run_cli("export-dot -T 30000 --file g.dot" + o), 3);
  EXPECT_EQ(run_cli("--no-such-flag"), 2);
}

TEST(Cli, SimulateWritesOutputs) {
  TempDir dir;
  ASSERT_EQ(run_cli("simulate --construction f2 -T 500 --seed 3 -o " + dir.path.string()), 0);
  for (const auto* f : {"series.csv", "edges.csv", "graph.dot", "summary.json"})
    EXPECT_TRUE(fs::exists(dir.path / f)) << f;
  const auto series = slurp(dir.path / "series.csv");
  EXPECT_EQ(series.rfind("t,leaves,max_depth\r\n0,1,0\r\n", 0), 0u);
  EXPECT_NO_THROW(Json::parse(slurp(dir.path / "summary.json")));
}

TEST(Cli, OutputDirFromEnvironment) {
  TempDir dir;
  ASSERT_EQ(run_cli("regen -T 2000", std::string(kOutputDirEnv) + "=" + dir.path.string()), 0);
  EXPECT_TRUE(fs::exists(dir.path / "regenerations.csv"));
  EXPECT_TRUE(fs::exists(dir.path / "regenerations.json"));
}

TEST(Cli, AnalyzeAndExportDot) {
  TempDir dir;
  const std::string o = " -o " + dir.path.string();
  ASSERT_EQ(run_cli("analyze --construction f2 -T 3000" + o), 0);
  const auto j = Json::parse(slurp(dir.path / "analysis.json"));
  EXPECT_TRUE(j.is_object());
  EXPECT_TRUE(fs::exists(dir.path / "confirmed.csv"));
  ASSERT_EQ(run_cli("export-dot -T 200 --file small.dot" + o), 0);
  EXPECT_EQ(slurp(dir.path / "small.dot").rfind("digraph", 0), 0u);
}

TEST(Cli, ExperimentPassAndFailExitCodes) {
  TempDir dir;
  const std::string o = " -o " + dir.path.string();
  EXPECT_EQ(run_cli("experiment commuting -T 2000" + o), 0);
  EXPECT_TRUE(fs::exists(dir.path / "commuting.json"));
  // A single-leaf run cannot meet the recurrence thresholds.
  EXPECT_EQ(run_cli("experiment f2-stability --construction f1 -T 2000 --replicas 2" + o), 1);
}

TEST(Cli, ByteIdenticalAcrossThreads) {
  TempDir a, b;
  ASSERT_EQ(run_cli("experiment nakamoto-rate -T 20000 --replicas 4 --threads 1 -o " + a.path.string()), 0);
  ASSERT_EQ(run_cli("experiment nakamoto-rate -T 20000 --replicas 4 --threads 3 -o " + b.path.string()), 0);
  EXPECT_EQ(slurp(a.path / "nakamoto-rate.json"), slurp(b.path / "nakamoto-rate.json"));
}
