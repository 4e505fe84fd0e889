#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "acm/analysis.hpp"
#include "acm/experiment.hpp"
#include "acm/export.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitResource = 3;
constexpr acm::Time kDotVertexLimit = 20000;

int exit_code_for(acm::ErrorKind kind) {
  switch (kind) {
    case acm::ErrorKind::MalformedSpec:
    case acm::ErrorKind::InfiniteMean:
    case acm::ErrorKind::WrongMinimumSupport:
    case acm::ErrorKind::MalformedInitialGraph:
    case acm::ErrorKind::ConfigError:
      return kExitConfig;
    case acm::ErrorKind::ResourceBound:
    case acm::ErrorKind::HorizonTooLargeForExact:
    case acm::ErrorKind::TooLargeToEnumerate:
      return kExitResource;
    default:
      return kExitFail;
  }
}

// Options shared by the run-based subcommands.
struct RunOptions {
  std::string config_file;
  std::vector<std::string> sets;
  std::string delay, construction, output_dir;
  long long horizon = -1, replicas = -1, seed = -1, threads = -1;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_file, "key = value config file");
    app->add_option("--delay", delay, "delay spec, e.g. geometric:0.5");
    app->add_option("--construction", construction, "construction spec, e.g. nakamoto, f2, all");
    app->add_option("-T,--horizon", horizon, "number of steps");
    app->add_option("--replicas", replicas, "replica count");
    app->add_option("--seed", seed, "seed (replica i uses seed + i)");
    app->add_option("--threads", threads, "worker threads (0 = hardware)");
    app->add_option("-o,--output-dir", output_dir, "output directory (overrides ACM_OUTPUT_DIR)");
    app->add_option("--set", sets, "extra key=value overrides")->take_all();
  }

  acm::ConfigMap overrides() const {
    acm::ConfigMap m;
    if (!delay.empty()) m["delay"] = delay;
    if (!construction.empty()) m["construction"] = construction;
    if (!output_dir.empty()) m["output_dir"] = output_dir;
    if (horizon != -1) m["horizon"] = std::to_string(horizon);
    if (replicas != -1) m["replicas"] = std::to_string(replicas);
    if (seed != -1) m["seed"] = std::to_string(seed);
    if (threads != -1) m["threads"] = std::to_string(threads);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw acm::Error(acm::ErrorKind::ConfigError, "--set expects key=value");
      m[acm::trim(kv.substr(0, eq))] = acm::trim(kv.substr(eq + 1));
    }
    return m;
  }
};

std::string dump(const acm::Json& j) { return j.dump(2) + "\n"; }

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

bool exact_allowed(const acm::ExperimentConfig& c) {
  if (!c.exact_confirmation) return false;
  if (c.horizon > acm::kExactHorizonLimit) {
    std::cerr << "warning: exact confirmation disabled for T = " << c.horizon << " > " << acm::kExactHorizonLimit
              << "\n";
    return false;
  }
  return true;
}

int cmd_lambda(const std::string& delay_text) {
  const auto model = acm::make_delay_model(acm::parse_delay_spec(delay_text));
  const auto law = acm::chi_law(model);
  const auto regen = acm::regen_probability_detail(model);
  acm::Json j;
  j["delay"] = delay_text;
  j["r"] = model.r();
  j["mean_delay"] = model.mean();
  j["support_period"] = acm::support_period(model);
  j["lambda"] = 1.0 / law.mean;
  j["chi_mean"] = law.mean;
  j["chi_variance"] = law.variance;
  j["clt_variance"] = law.variance / (law.mean * law.mean * law.mean);
  j["q_tilde"] = regen.value;
  j["q_tilde_truncation_bound"] = regen.truncation_bound;
  j["censor_margin"] = model.censor_margin(acm::kDefaultCensorEps);
  std::cout << dump(j);
  return kExitOk;
}

int cmd_simulate(const RunOptions& opt) {
  const auto c = acm::load_config("", opt.config_file, opt.overrides());
  const auto model = acm::make_delay_model(c.delay);
  const auto dir = acm::ensure_output_dir(c.output_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = acm::run(model, c.construction, c.horizon, c.seed_base, c.initial_graph());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  acm::write_text_file(dir / "series.csv", render([&](std::ostream& o) { acm::write_series_csv(o, res.state); }));
  acm::write_text_file(dir / "edges.csv", render([&](std::ostream& o) { acm::write_edges_csv(o, res.state); }));
  acm::DotOptions dot;
  if (exact_allowed(c)) {
    const auto rep = acm::detect_regeneration_intervals(res.trace, model);
    dot.confirmed = acm::confirmed_exact(res.state, c.margin.value_or(rep.censor_margin));
  }
  if (res.state.vertex_count() <= kDotVertexLimit)
    acm::write_text_file(dir / "graph.dot", render([&](std::ostream& o) { acm::write_dot(o, res.state, dot); }));
  else
    std::cerr << "warning: graph.dot skipped above " << kDotVertexLimit << " vertices\n";
  acm::Json j;
  j["schema"] = acm::kResultSchema;
  j["delay"] = c.delay_text;
  j["construction"] = c.construction_text;
  j["horizon"] = c.horizon;
  j["seed"] = c.seed_base;
  j["vertices"] = res.state.vertex_count();
  j["edges"] = res.state.edge_count();
  j["final_leaves"] = res.state.leaf_count(c.horizon);
  j["final_max_depth"] = res.state.max_depth(c.horizon);
  j["confirmed_exact"] = dot.confirmed.size();
  acm::write_text_file(dir / "summary.json", dump(j));
  std::cerr << "simulated " << c.horizon << " steps in " << secs << " s -> " << dir.string() << "\n";
  return kExitOk;
}

int cmd_regen(const RunOptions& opt) {
  const auto c = acm::load_config("", opt.config_file, opt.overrides());
  const auto model = acm::make_delay_model(c.delay);
  const auto dir = acm::ensure_output_dir(c.output_dir);
  const auto trace = acm::sample_trace(model, c.horizon, c.seed_base);
  const auto rep = acm::detect_regeneration_intervals(trace, model);
  acm::write_text_file(dir / "regenerations.csv", render([&](std::ostream& o) { acm::write_regeneration_csv(o, rep); }));
  acm::Json j = acm::to_json(rep);
  j["q_tilde"] = acm::regen_probability(model);
  acm::write_text_file(dir / "regenerations.json", dump(j));
  std::cout << dump(j);
  return kExitOk;
}

int cmd_analyze(const RunOptions& opt) {
  const auto c = acm::load_config("", opt.config_file, opt.overrides());
  const auto model = acm::make_delay_model(c.delay);
  const auto dir = acm::ensure_output_dir(c.output_dir);
  const auto res = acm::run(model, c.construction, c.horizon, c.seed_base, c.initial_graph());
  const auto rep = acm::detect_regeneration_intervals(res.trace, model);
  acm::Json j;
  j["schema"] = acm::kResultSchema;
  j["delay"] = c.delay_text;
  j["construction"] = c.construction_text;
  j["horizon"] = c.horizon;
  j["seed"] = c.seed_base;
  j["regeneration"] = acm::to_json(rep);
  const auto series = acm::height_recursion(res.trace);
  j["height"] = acm::Json{{"final", series.X.back()},
                          {"rate", static_cast<double>(series.X.back()) / static_cast<double>(c.horizon)},
                          {"lambda", acm::lambda_closed_form(model)}};
  if (std::holds_alternative<acm::Nakamoto>(c.construction))
    j["height"]["matches_max_depth"] = acm::verify_against_dag(series, res);
  if (model.r() == 1 && acm::is_leaf_based(c.construction))
    j["single_leaf_hits"] = acm::single_leaf_hitting(res.state, rep).times.size();
  if (rep.times.size() >= 2 && !std::holds_alternative<acm::Nakamoto>(c.construction)) {
    const auto drift = acm::foster_drift(res.state, rep, c.construction);
    j["drift"] = acm::to_json(drift);
    acm::write_text_file(dir / "drift.csv", render([&](std::ostream& o) { acm::write_drift_csv(o, drift); }));
  }
  if (exact_allowed(c)) {
    const auto conf = acm::confirmation_report(res, model, c.construction, c.margin);
    j["confirmation"] = acm::Json{{"margin", conf.margin},
                                  {"exact", conf.confirmed_exact.size()},
                                  {"certified", conf.confirmed_anchor.size()},
                                  {"certified_subset_of_exact", conf.anchors_contained()}};
    acm::write_text_file(dir / "confirmed.csv",
                         render([&](std::ostream& o) { acm::write_confirmed_csv(o, res.state, conf); }));
  }
  acm::write_text_file(dir / "analysis.json", dump(j));
  std::cout << dump(j);
  return kExitOk;
}

int cmd_export_dot(const RunOptions& opt, const std::string& file) {
  const auto c = acm::load_config("", opt.config_file, opt.overrides());
  if (c.horizon + c.initial_leaves >= kDotVertexLimit)
    throw acm::Error(acm::ErrorKind::ResourceBound, "DOT export limited to " + std::to_string(kDotVertexLimit) + " vertices");
  const auto model = acm::make_delay_model(c.delay);
  const auto res = acm::run(model, c.construction, c.horizon, c.seed_base, c.initial_graph());
  acm::DotOptions dot;
  if (exact_allowed(c)) {
    const auto conf = acm::confirmation_report(res, model, c.construction, c.margin);
    dot.confirmed = conf.confirmed_exact;
    dot.certified = conf.confirmed_anchor;
  }
  const auto text = render([&](std::ostream& o) { acm::write_dot(o, res.state, dot); });
  if (file == "-") {
    std::cout << text;
  } else {
    const auto dir = acm::ensure_output_dir(c.output_dir);
    acm::write_text_file(dir / file, text);
    std::cerr << "wrote " << (dir / file).string() << "\n";
  }
  return kExitOk;
}

int cmd_experiment(const std::string& preset, const RunOptions& opt) {
  const auto c = acm::load_config(preset, opt.config_file, opt.overrides());
  const auto dir = acm::ensure_output_dir(c.output_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = acm::run_experiment(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  acm::write_text_file(dir / (preset + ".json"), dump(res.to_json()));
  std::cout << preset << ": " << (res.passed ? "PASS" : "FAIL") << " (" << secs << " s) -> "
            << (dir / (preset + ".json")).string() << "\n";
  return res.passed ? kExitOk : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous composition model simulator"};
  app.require_subcommand(1);

  std::string delay_text;
  auto* lambda = app.add_subcommand("lambda", "print closed-form constants of a delay law");
  lambda->add_option("--delay", delay_text, "delay spec")->required();

  RunOptions sim_opt, regen_opt, analyze_opt, dot_opt, exp_opt;
  auto* simulate = app.add_subcommand("simulate", "run one trajectory and write CSV, DOT and JSON");
  sim_opt.attach(simulate);
  auto* regen = app.add_subcommand("regen", "detect regeneration times of a sampled delay trace");
  regen_opt.attach(regen);
  auto* analyze = app.add_subcommand("analyze", "run one trajectory and compute all applicable analyses");
  analyze_opt.attach(analyze);
  std::string dot_file = "graph.dot";
  auto* export_dot = app.add_subcommand("export-dot", "write a run as Graphviz DOT");
  dot_opt.attach(export_dot);
  export_dot->add_option("--file", dot_file, "file name inside the output directory, '-' for stdout");
  std::string preset;
  auto* experiment = app.add_subcommand("experiment", "run a preset battery and check its thresholds");
  experiment->add_option("preset", preset, "preset name")->required();
  exp_opt.attach(experiment);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*lambda) return cmd_lambda(delay_text);
    if (*simulate) return cmd_simulate(sim_opt);
    if (*regen) return cmd_regen(regen_opt);
    if (*analyze) return cmd_analyze(analyze_opt);
    if (*export_dot) return cmd_export_dot(dot_opt, dot_file);
    if (*experiment) return cmd_experiment(preset, exp_opt);
  } catch (const acm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return kExitResource;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
  return kExitFail;
}
