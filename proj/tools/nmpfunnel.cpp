// Command-line front end: simulate, check, case-study, sweep.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "nmpfunnel/io.hpp"
#include "nmpfunnel/sim.hpp"
#include "nmpfunnel/testing/acceptance.hpp"

namespace fs = std::filesystem;
using namespace nmpfunnel;

namespace {

enum Exit : int { ok = 0, config_error = 1, funnel_violation = 2, domain_exit = 3, integrator_failure = 4 };

int exit_code(FailureKind k) {
  switch (k) {
    case FailureKind::funnel_violation: return funnel_violation;
    case FailureKind::domain_exit: return domain_exit;
    case FailureKind::integrator_failure: return integrator_failure;
  }
  return integrator_failure;
}

const char* kind_name(FailureKind k) {
  switch (k) {
    case FailureKind::funnel_violation: return "funnel_violation";
    case FailureKind::domain_exit: return "domain_exit";
    case FailureKind::integrator_failure: return "integrator_failure";
  }
  return "unknown";
}

void report(const SimulationError& e) {
  std::cerr << "error (" << kind_name(e.kind()) << "): " << e.what() << "\nstate:";
  for (double v : e.state()) std::fprintf(stderr, " %.17g", v);
  std::cerr << '\n';
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

ScenarioConfig load_or_default(const std::string& path) {
  return path.empty() ? ScenarioConfig{} : load_config(path);
}

int cmd_simulate(const std::string& config, const std::string& mode, const std::string& out) {
  ScenarioConfig cfg = load_config(config);
  if (!mode.empty()) cfg.mode = parse_mode(mode);
  const Trajectory traj = integrate(cfg);
  if (out.empty()) {
    write_csv(std::cout, traj);
  } else {
    write_file(out, to_csv(traj));
    std::cout << summary_to_json(summarize(traj, cfg)).dump(2) << '\n';
  }
  return ok;
}

int cmd_check() {
  const auto results = testing::run_acceptance();
  const bool all = testing::print_acceptance(results, std::cout);
  const auto passed = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.passed; });
  std::cout << passed << "/" << results.size() << " criteria passed\n";
  return all ? 0 : 1;
}

int cmd_case_study(const std::string& config, const std::string& out_dir) {
  const ScenarioConfig cfg = load_or_default(config);
  const CaseStudyResult r = run_case_study(cfg);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  write_file(dir / "lin.csv", to_csv(r.lin));
  write_file(dir / "hg.csv", to_csv(r.hg));
  json summary;
  summary["lin"] = summary_to_json(r.lin_summary);
  summary["hg"] = summary_to_json(r.hg_summary);
  summary["max_input_difference_after_0.5s"] = r.max_input_difference_after_transient;
  summary["y_final_difference"] = std::abs(r.lin_summary.y_final - r.hg_summary.y_final);
  summary["config"] = to_json(cfg);
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << '\n';
  return ok;
}

struct Vary {
  std::string field;
  double start = 0.0;
  double stop = 0.0;
  int n = 0;
};

Vary parse_vary(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--vary expects <field>=<start>:<stop>:<n>, got '" + spec + "'");
  Vary v;
  v.field = spec.substr(0, eq);
  const std::string range = spec.substr(eq + 1);
  const auto c1 = range.find(':');
  const auto c2 = c1 == std::string::npos ? std::string::npos : range.find(':', c1 + 1);
  if (c2 == std::string::npos) throw ConfigError("--vary range must be <start>:<stop>:<n>");
  try {
    std::size_t used = 0;
    v.start = std::stod(range.substr(0, c1));
    v.stop = std::stod(range.substr(c1 + 1, c2 - c1 - 1));
    v.n = std::stoi(range.substr(c2 + 1), &used);
    if (used != range.size() - c2 - 1) throw std::invalid_argument("n");
  } catch (const std::logic_error&) {
    throw ConfigError("--vary range must be <start>:<stop>:<n>, got '" + range + "'");
  }
  if (v.n < 1) throw ConfigError("--vary needs n >= 1");
  return v;
}

struct SweepRow {
  double value = 0.0;
  std::string status = "ok";
  std::optional<Summary> summary;
  std::string message;
};

int cmd_sweep(const std::string& config, const std::string& vary_spec, const std::string& mode,
              unsigned jobs) {
  const json base = load_json_file(config);
  const Vary vary = parse_vary(vary_spec);

  // Validate every scenario up front so that a bad field path is a config error.
  std::vector<ScenarioConfig> scenarios;
  std::vector<SweepRow> rows(vary.n);
  for (int i = 0; i < vary.n; ++i) {
    const double v = vary.n == 1 ? vary.start : vary.start + (vary.stop - vary.start) * i / (vary.n - 1);
    json j = base;
    set_json_path(j, vary.field, v);
    ScenarioConfig cfg = config_from_json(j);
    if (!mode.empty()) cfg.mode = parse_mode(mode);
    scenarios.push_back(cfg);
    rows[i].value = v;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < scenarios.size(); i = next++) {
      try {
        rows[i].summary = summarize(integrate(scenarios[i]), scenarios[i]);
      } catch (const SimulationError& e) {
        rows[i].status = kind_name(e.kind());
        rows[i].message = e.what();
      } catch (const std::exception& e) {
        rows[i].status = "error";
        rows[i].message = e.what();
      }
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(scenarios.size()));
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < jobs; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::cout << vary.field
            << ",status,y_final,final_tracking_error,max_ratio0,max_ratio1,max_ratio2,max_abs_u,max_abs_beta\n";
  for (const auto& r : rows) {
    std::printf("%.17g,%s", r.value, r.status.c_str());
    if (r.summary) {
      const Summary& s = *r.summary;
      std::printf(",%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.y_final, s.final_tracking_error,
                  s.max_funnel_ratio[0], s.max_funnel_ratio[1], s.max_funnel_ratio[2], s.max_abs_u,
                  s.max_abs_beta);
    } else {
      std::printf(",,,,,,,\n");
      std::cerr << vary.field << " = " << r.value << ": " << r.message << '\n';
    }
  }
  std::fflush(stdout);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Funnel control of a non-minimum phase two-link manipulator"};
  app.require_subcommand(1);

  std::string config, mode, out, out_dir = ".", vary;
  unsigned jobs = 0;

  auto* sim = app.add_subcommand("simulate", "Run one scenario and write its trajectory as CSV");
  sim->add_option("--config", config, "Scenario JSON file")->required();
  sim->add_option("--mode", mode, "Controller variant: lin or hg (overrides the file)");
  sim->add_option("--out", out, "CSV output path (default: stdout)");

  auto* check = app.add_subcommand("check", "Run the acceptance criteria and oracle checks");

  auto* cs = app.add_subcommand("case-study", "Run both controller variants; write lin.csv, hg.csv, summary.json");
  cs->add_option("--config", config, "Scenario JSON file (default: built-in case study)");
  cs->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Vary one numeric field over a range, scenarios in parallel");
  sweep->add_option("--config", config, "Base scenario JSON file")->required();
  sweep->add_option("--vary", vary, "<field>=<start>:<stop>:<n>, e.g. params.d=0.1:0.5:5")->required();
  sweep->add_option("--mode", mode, "Controller variant: lin or hg (overrides the file)");
  sweep->add_option("--jobs", jobs, "Worker threads (default: hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : config_error;
  }

  try {
    if (*sim) return cmd_simulate(config, mode, out);
    if (*check) return cmd_check();
    if (*cs) return cmd_case_study(config, out_dir);
    if (*sweep) return cmd_sweep(config, vary, mode, jobs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const SimulationError& e) {
    report(e);
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return integrator_failure;
  }
  return ok;
}
