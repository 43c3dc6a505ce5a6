// gbkm-bench: run greedy block nonlinear Kaczmarz solvers on the bundled
// benchmark systems, sweep parameters, and write CSV/JSON results.
//
// Exit codes: 0 batch completed, 2 configuration error, 3 I/O error.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "gbkm/gbkm.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Args {
  std::string problem = "singular-broyden";
  std::string n = "100";
  std::string method = "mrwnk-m";
  std::string q = "2";
  std::string omega = "0.5";
  std::string rho = "0.2";
  double eps = 1e-6;
  long max_iter = 10000;
  int repeats = 10;
  double c = 0.9;
  std::string out;
  std::string format = "csv";
  std::string history;
  std::string constants;
  unsigned workers = 0;
};

gbkm::ExperimentPlan build_plan(const Args& a) {
  gbkm::ExperimentPlan plan;
  plan.problems.clear();
  for (const auto& p : gbkm::split(a.problem, ',')) {
    const auto b = gbkm::parse_benchmark(p);
    if (!b) throw gbkm::ConfigError({"unknown problem '" + p + "'"});
    plan.problems.push_back(*b);
  }
  plan.methods.clear();
  for (const auto& m : gbkm::split(a.method, ',')) {
    const auto parsed = gbkm::parse_method(m);
    if (!parsed) throw gbkm::ConfigError({"unknown method '" + m + "'"});
    plan.methods.push_back(*parsed);
  }
  try {
    plan.ns.clear();
    for (long v : gbkm::parse_int_list(a.n)) {
      if (v < 2) throw gbkm::ConfigError({"n below 2"});
      plan.ns.push_back(static_cast<std::size_t>(v));
    }
    plan.qs.clear();
    for (long v : gbkm::parse_int_list(a.q)) plan.qs.push_back(static_cast<int>(v));
    plan.omegas = gbkm::parse_real_grid(a.omega);
    plan.rhos = gbkm::parse_real_grid(a.rho);
  } catch (const gbkm::ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw gbkm::ConfigError({e.what()});
  }
  plan.c = a.c;
  plan.eps = a.eps;
  plan.max_iter = a.max_iter;
  plan.repeats = a.repeats;
  plan.workers = a.workers;
  return plan;
}

nlohmann::json rate_constants_report(const gbkm::PlanEntry& entry) {
  const auto problem = gbkm::make_problem(entry.problem);
  gbkm::SolveOptions opts;
  opts.keep_iterates = true;
  const gbkm::SolveReport rep = gbkm::solve(*problem, entry.config, opts);

  const gbkm::Vector& last = rep.iterates.back();
  std::vector<std::pair<gbkm::Vector, gbkm::Vector>> pairs;
  for (std::size_t k = 0; k + 1 < rep.iterates.size(); ++k) pairs.emplace_back(rep.iterates[k], last);
  double xi = 0.0;
  if (!pairs.empty()) {
    try {
      xi = gbkm::estimate_xi(*problem, pairs).xi;
    } catch (const gbkm::EstimationError&) {
      xi = 0.0;
    }
  }
  const double alpha = gbkm::estimate_alpha(*problem, rep.iterates);
  const double sigma = gbkm::sigma_min_at(*problem, last);

  nlohmann::json j;
  if (xi < 0.5 && alpha > 0.0) {
    const auto rule = gbkm::uses_max_residual(entry.config.method) ? gbkm::SelectionRule::MAXRES
                                                                    : gbkm::SelectionRule::GREEDY;
    j = gbkm::theoretical_constants(xi, alpha, sigma, entry.config.omega, entry.config.q, problem->m(),
                                    entry.config.rho, rule);
  } else {
    j = {{"xi", xi}, {"alpha", alpha}, {"sigma_min", sigma}, {"valid", false}, {"estimate", "empirical"},
         {"note", "xi estimate not below 1/2; rate constants undefined"}};
  }
  j["problem"] = problem->name();
  j["n"] = problem->n();
  j["method"] = std::string(gbkm::to_string(entry.config.method));
  j["iterations"] = rep.iterations;
  return j;
}

int run(const Args& a) {
  const gbkm::ExperimentPlan plan = build_plan(a);
  const auto format = gbkm::parse_format(a.format);
  if (!format) throw gbkm::ConfigError({"unknown format '" + a.format + "'"});
  const std::vector<gbkm::PlanEntry> entries = gbkm::expand_plan(plan);

  if ((!a.history.empty() || !a.constants.empty()) && entries.size() != 1)
    throw gbkm::ConfigError({"--history and --constants need exactly one configuration"});

  std::vector<gbkm::ResultRow> rows;
  if (entries.size() == 1) {
    gbkm::SolveReport report;
    rows.push_back(gbkm::run_single(entries.front(), plan.repeats, &report));
    if (!a.history.empty()) {
      if (!rows.front().error.empty()) throw gbkm::IoError("no history: " + rows.front().error);
      gbkm::emit_history(report, a.history);
    }
    if (!a.constants.empty()) {
      std::ofstream out(a.constants);
      if (!out) throw gbkm::IoError("cannot open '" + a.constants + "' for writing");
      out << rate_constants_report(entries.front()).dump(2) << '\n';
      if (!out) throw gbkm::IoError("write to '" + a.constants + "' failed");
    }
  } else {
    gbkm::SweepResult sweep = gbkm::run_sweep(plan);
    rows = std::move(sweep.rows);
    if (plan.omegas.size() > 1) std::cerr << gbkm::format_best_omega(sweep.best);
  }

  for (const auto& r : rows)
    if (!r.error.empty())
      std::cerr << "warning: " << r.problem << " n=" << r.n << ' ' << gbkm::to_string(r.method) << ": " << r.error
                << '\n';

  if (a.out.empty()) {
    std::cout << (*format == gbkm::OutputFormat::CSV ? gbkm::format_csv(rows) : gbkm::format_json(rows));
  } else {
    gbkm::emit_results(rows, *format, a.out);
  }
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Greedy block nonlinear Kaczmarz solvers with momentum: benchmark runner"};
  Args a;
  app.add_option("--problem", a.problem,
                 "singular-broyden | broyden-tridiagonal | h-equation | h-equation-classical | nondquar "
                 "(comma list)");
  app.add_option("--n", a.n, "dimension, list 100,500 or grid a:b:step");
  app.add_option("--method", a.method, "rbwnk | mrwnk | rbwnk-m | mrwnk-m (comma list)");
  app.add_option("--q", a.q, "residual weight exponent, list or grid");
  app.add_option("--omega", a.omega, "momentum: value, list or grid a:b:step");
  app.add_option("--rho", a.rho, "max-residual relaxation: value, list or grid a:b:step");
  app.add_option("--eps", a.eps, "tolerance on ||f(x)||^2")->capture_default_str();
  app.add_option("--max-iter", a.max_iter, "iteration cap")->capture_default_str();
  app.add_option("--repeats", a.repeats, "timed runs per configuration")->capture_default_str();
  app.add_option("--c", a.c, "H-equation constant")->capture_default_str();
  app.add_option("--out", a.out, "result file (stdout when omitted)");
  app.add_option("--format", a.format, "csv | json")->capture_default_str();
  app.add_option("--history", a.history, "residual history CSV (single configuration)");
  app.add_option("--constants", a.constants, "empirical rate constants JSON (single configuration)");
  app.add_option("--workers", a.workers, "parallel sweep workers, 0 = all cores");
  app.set_config("--config", "", "key=value file; command-line flags override it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::FileError& e) {
    app.exit(e);
    return kExitIo;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    return run(a);
  } catch (const gbkm::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const gbkm::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
