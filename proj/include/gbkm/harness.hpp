#pragma once
//
// Experiment runner: single runs, Cartesian parameter sweeps with a best-omega
// summary, and CSV / JSON emission of result rows and residual histories.
//

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "gbkm/core.hpp"
#include "gbkm/problems.hpp"
#include "gbkm/solver.hpp"

namespace gbkm {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

////////////////////////////////////////////////////////////////////////////////
//
// number formatting and grids
//

//! Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

inline long parse_long(std::string_view s) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

//!
//! "a:b:step" (start, stop inclusive, step), "x,y,z", or a single value.
//! Grid points are rounded to 12 decimals so 0.01:0.99:0.01 yields 0.29, not
//! 0.29000000000000004.
//!
inline std::vector<double> parse_real_grid(std::string_view spec) {
  if (spec.find(':') != std::string_view::npos) {
    const auto parts = split(spec, ':');
    if (parts.size() != 3) throw std::invalid_argument("grid must be a:b:step, got '" + std::string(spec) + "'");
    const double a = parse_double(parts[0]), b = parse_double(parts[1]), step = parse_double(parts[2]);
    if (!(step > 0.0) || b < a) throw std::invalid_argument("grid needs step > 0 and a <= b: '" + std::string(spec) + "'");
    const auto count = static_cast<long>(std::floor((b - a) / step + 1e-9)) + 1;
    std::vector<double> out;
    for (long i = 0; i < count; ++i) out.push_back(std::round((a + static_cast<double>(i) * step) * 1e12) / 1e12);
    return out;
  }
  std::vector<double> out;
  for (const auto& p : split(spec, ',')) out.push_back(parse_double(p));
  return out;
}

//! Integer list "2,3,4" or grid "2:9:1".
inline std::vector<long> parse_int_list(std::string_view spec) {
  std::vector<long> out;
  if (spec.find(':') != std::string_view::npos) {
    const auto parts = split(spec, ':');
    if (parts.size() != 3) throw std::invalid_argument("grid must be a:b:step, got '" + std::string(spec) + "'");
    const long a = parse_long(parts[0]), b = parse_long(parts[1]), step = parse_long(parts[2]);
    if (step <= 0 || b < a) throw std::invalid_argument("grid needs step > 0 and a <= b: '" + std::string(spec) + "'");
    for (long v = a; v <= b; v += step) out.push_back(v);
    return out;
  }
  for (const auto& p : split(spec, ',')) out.push_back(parse_long(p));
  return out;
}

////////////////////////////////////////////////////////////////////////////////
//
// plans and rows
//

struct ExperimentPlan {
  std::vector<BenchmarkName> problems{BenchmarkName::SINGULAR_BROYDEN};
  std::vector<std::size_t> ns{100};
  double c = 0.9;
  std::vector<Method> methods{Method::MRWNK_M};
  std::vector<int> qs{2};
  std::vector<double> rhos{0.2};
  std::vector<double> omegas{0.5};
  double eps = 1e-6;
  long max_iter = 10000;
  int repeats = 10;
  unsigned workers = 0;   // 0: hardware concurrency
};

struct PlanEntry {
  BenchmarkSpec problem;
  SolverConfig config;
};

//!
//! Cartesian product of the plan grids. Methods without momentum run once
//! with omega = 0 and greedy-rule methods ignore the rho grid, so duplicates
//! are collapsed. Throws ConfigError naming every invalid grid value.
//!
inline std::vector<PlanEntry> expand_plan(const ExperimentPlan& plan) {
  std::vector<std::string> errors;
  if (plan.problems.empty() || plan.ns.empty() || plan.methods.empty() || plan.qs.empty() || plan.rhos.empty() ||
      plan.omegas.empty())
    errors.emplace_back("empty grid");
  if (plan.repeats < 1) errors.emplace_back("repeats below 1");
  for (std::size_t n : plan.ns)
    if (n < 2) errors.emplace_back("n below 2");
  if (!(plan.c > 0.0 && plan.c < 1.0)) errors.emplace_back("c out of range");

  std::vector<PlanEntry> out;
  for (BenchmarkName name : plan.problems)
    for (std::size_t n : plan.ns)
      for (Method method : plan.methods)
        for (int q : plan.qs)
          for (std::size_t ir = 0; ir < plan.rhos.size(); ++ir) {
            if (!uses_max_residual(method) && ir > 0) break;
            for (std::size_t iw = 0; iw < plan.omegas.size(); ++iw) {
              if (!uses_momentum(method) && iw > 0) break;
              SolverConfig cfg;
              cfg.method = method;
              cfg.q = q;
              cfg.rho = uses_max_residual(method) ? plan.rhos[ir] : 1.0;
              cfg.omega = uses_momentum(method) ? plan.omegas[iw] : 0.0;
              cfg.eps = plan.eps;
              cfg.max_iter = plan.max_iter;
              for (auto& v : config_violations(cfg))
                if (std::find(errors.begin(), errors.end(), v) == errors.end()) errors.push_back(std::move(v));
              out.push_back({BenchmarkSpec{name, n, plan.c}, cfg});
            }
          }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return out;
}

struct ResultRow {
  std::string problem;
  std::size_t n = 0;
  Method method = Method::RBWNK;
  int q = 2;
  std::optional<double> rho;   // empty for greedy-rule methods
  double omega = 0.0;
  long iterations = 0;
  bool converged = false;
  double final_res_norm_sq = 0.0;
  double cpu_mean_seconds = 0.0;
  bool breakdown = false;

  long max_iter = 0;           // not serialized except through the ">K" rendering
  std::string error;           // solver error, not serialized

  //! Stopped by the iteration cap.
  bool capped() const { return !converged && !breakdown && error.empty() && max_iter > 0 && iterations >= max_iter; }

  //! Equality of the serialized columns.
  bool operator==(const ResultRow& o) const {
    return problem == o.problem && n == o.n && method == o.method && q == o.q && rho == o.rho &&
           omega == o.omega && iterations == o.iterations && converged == o.converged &&
           final_res_norm_sq == o.final_res_norm_sq && cpu_mean_seconds == o.cpu_mean_seconds &&
           breakdown == o.breakdown;
  }
};

inline auto sort_key(const ResultRow& r) {
  return std::make_tuple(r.problem, r.n, static_cast<int>(r.method), r.q, r.rho.value_or(-1.0), r.omega);
}

inline void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ResultRow& a, const ResultRow& b) { return sort_key(a) < sort_key(b); });
}

namespace detail {

inline ResultRow row_skeleton(const PlanEntry& e) {
  ResultRow row;
  row.problem = std::string(to_string(e.problem.name));
  row.n = e.problem.n;
  row.method = e.config.method;
  row.q = e.config.q;
  if (uses_max_residual(e.config.method)) row.rho = e.config.rho;
  row.omega = e.config.omega;
  row.max_iter = e.config.max_iter;
  return row;
}

inline void fill_from_report(ResultRow& row, const SolveReport& rep) {
  row.iterations = rep.iterations;
  row.converged = rep.converged;
  row.final_res_norm_sq = rep.final_res_norm_sq;
  row.cpu_mean_seconds = rep.wall_time_seconds;
  row.breakdown = rep.breakdown;
}

inline void fill_from_error(ResultRow& row, const std::exception& e, long k) {
  row.iterations = k;
  row.converged = false;
  row.final_res_norm_sq = std::numeric_limits<double>::infinity();
  row.cpu_mean_seconds = 0.0;
  row.error = e.what();
}

//! Solves once on an already built problem; errors are recorded in the row.
inline ResultRow run_on(const Problem& problem, const PlanEntry& entry, int repeats, SolveReport* report) {
  ResultRow row = row_skeleton(entry);
  try {
    SolveReport rep = solve_with_timing(problem, entry.config, repeats);
    fill_from_report(row, rep);
    if (report) *report = std::move(rep);
  } catch (const DivergenceError& e) {
    fill_from_error(row, e, e.iteration());
  } catch (const EvaluationError& e) {
    fill_from_error(row, e, 0);
  }
  return row;
}

} // namespace detail

//!
//! One solve_with_timing call; the problem is built outside the timed region.
//! Divergence and evaluation failures are recorded in the row, not thrown.
//!
inline ResultRow run_single(const PlanEntry& entry, int repeats = 10, SolveReport* report = nullptr) {
  validate_config(entry.config);
  const auto problem = make_problem(entry.problem);
  return detail::run_on(*problem, entry, repeats, report);
}

struct BestOmega {
  std::string problem;
  std::size_t n = 0;
  Method method = Method::RBWNK;
  int q = 2;
  std::optional<double> rho;
  bool found = false;          // false: no convergent configuration
  double omega = 0.0;
  long iterations = 0;
};

//! Best omega per (problem, n, method, q, rho): least IT among converged rows, ties to the smaller omega.
inline std::vector<BestOmega> best_omega(const std::vector<ResultRow>& rows) {
  std::map<std::tuple<std::string, std::size_t, int, int, double>, BestOmega> groups;
  for (const ResultRow& r : rows) {
    auto key = std::make_tuple(r.problem, r.n, static_cast<int>(r.method), r.q, r.rho.value_or(-1.0));
    auto [it, inserted] = groups.try_emplace(key);
    BestOmega& b = it->second;
    if (inserted) {
      b.problem = r.problem;
      b.n = r.n;
      b.method = r.method;
      b.q = r.q;
      b.rho = r.rho;
    }
    if (!r.converged) continue;
    if (!b.found || r.iterations < b.iterations || (r.iterations == b.iterations && r.omega < b.omega)) {
      b.found = true;
      b.omega = r.omega;
      b.iterations = r.iterations;
    }
  }
  std::vector<BestOmega> out;
  for (auto& [key, b] : groups) out.push_back(std::move(b));
  return out;
}

struct SweepResult {
  std::vector<ResultRow> rows;   // sorted by (problem, n, method, q, rho, omega)
  std::vector<BestOmega> best;
};

//!
//! Runs every plan entry. Iteration counts come from a parallel pass with one
//! solve per entry; mean times come from a second, sequential pass with
//! plan.repeats solves per entry so that workers do not skew each other's
//! timings. Problems are built once and shared read-only between workers.
//!
inline SweepResult run_sweep(const ExperimentPlan& plan) {
  const std::vector<PlanEntry> entries = expand_plan(plan);

  std::map<std::tuple<int, std::size_t, double>, std::shared_ptr<const Problem>> problems;
  std::vector<std::shared_ptr<const Problem>> entry_problem;
  for (const PlanEntry& e : entries) {
    auto key = std::make_tuple(static_cast<int>(e.problem.name), e.problem.n, e.problem.c);
    auto it = problems.find(key);
    if (it == problems.end()) it = problems.emplace(key, make_problem(e.problem)).first;
    entry_problem.push_back(it->second);
  }

  std::vector<ResultRow> rows(entries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++)
      rows[i] = detail::run_on(*entry_problem[i], entries[i], 1, nullptr);
  };
  unsigned workers = plan.workers ? plan.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, entries.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!rows[i].error.empty()) continue;
    const ResultRow timed = detail::run_on(*entry_problem[i], entries[i], plan.repeats, nullptr);
    if (timed.iterations != rows[i].iterations)
      throw std::logic_error("run_sweep: iteration count changed between passes");
    rows[i] = timed;
  }

  sort_rows(rows);
  SweepResult out;
  out.best = best_omega(rows);
  out.rows = std::move(rows);
  return out;
}

////////////////////////////////////////////////////////////////////////////////
//
// emission
//

enum class OutputFormat { CSV, JSON };

inline std::optional<OutputFormat> parse_format(std::string_view s) {
  if (s == "csv") return OutputFormat::CSV;
  if (s == "json") return OutputFormat::JSON;
  return std::nullopt;
}

inline constexpr std::string_view kResultHeader =
    "problem,n,method,q,rho,omega,IT,converged,final_res_norm_sq,cpu_mean_seconds,breakdown";

//! IT column as printed in tables: ">K" for runs stopped by the cap.
inline std::string render_iterations(const ResultRow& r, bool table_mode = true) {
  if (table_mode && r.capped()) return ">" + std::to_string(r.max_iter);
  return std::to_string(r.iterations);
}

inline std::string format_csv(const std::vector<ResultRow>& rows, bool table_mode = true) {
  std::ostringstream os;
  os << kResultHeader << '\n';
  for (const ResultRow& r : rows) {
    os << r.problem << ',' << r.n << ',' << to_string(r.method) << ',' << r.q << ','
       << (r.rho ? format_double(*r.rho) : std::string()) << ',' << format_double(r.omega) << ','
       << render_iterations(r, table_mode) << ',' << (r.converged ? "true" : "false") << ','
       << format_double(r.final_res_norm_sq) << ',' << format_double(r.cpu_mean_seconds) << ','
       << (r.breakdown ? "true" : "false") << '\n';
  }
  return os.str();
}

inline nlohmann::json to_json_rows(const std::vector<ResultRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ResultRow& r : rows) {
    nlohmann::json o;
    o["problem"] = r.problem;
    o["n"] = r.n;
    o["method"] = std::string(to_string(r.method));
    o["q"] = r.q;
    o["rho"] = r.rho ? nlohmann::json(*r.rho) : nlohmann::json(nullptr);
    o["omega"] = r.omega;
    o["IT"] = r.iterations;
    o["converged"] = r.converged;
    // JSON has no infinity; diverged runs carry the string form.
    o["final_res_norm_sq"] = std::isfinite(r.final_res_norm_sq) ? nlohmann::json(r.final_res_norm_sq)
                                                                 : nlohmann::json(format_double(r.final_res_norm_sq));
    o["cpu_mean_seconds"] = r.cpu_mean_seconds;
    o["breakdown"] = r.breakdown;
    arr.push_back(std::move(o));
  }
  return arr;
}

inline std::string format_json(const std::vector<ResultRow>& rows) { return to_json_rows(rows).dump(2) + "\n"; }

inline bool parse_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("not a boolean: '" + std::string(s) + "'");
}

inline std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kResultHeader) throw std::invalid_argument("unexpected CSV header");
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 11) throw std::invalid_argument("CSV row with " + std::to_string(f.size()) + " fields");
    ResultRow r;
    r.problem = f[0];
    r.n = static_cast<std::size_t>(parse_long(f[1]));
    const auto m = parse_method(f[2]);
    if (!m) throw std::invalid_argument("unknown method '" + f[2] + "'");
    r.method = *m;
    r.q = static_cast<int>(parse_long(f[3]));
    if (!f[4].empty()) r.rho = parse_double(f[4]);
    r.omega = parse_double(f[5]);
    if (!f[6].empty() && f[6][0] == '>') {
      r.iterations = r.max_iter = parse_long(std::string_view(f[6]).substr(1));
    } else {
      r.iterations = parse_long(f[6]);
    }
    r.converged = parse_bool(f[7]);
    r.final_res_norm_sq = parse_double(f[8]);
    r.cpu_mean_seconds = parse_double(f[9]);
    r.breakdown = parse_bool(f[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<ResultRow> parse_results_json(const std::string& text) {
  const auto arr = nlohmann::json::parse(text);
  std::vector<ResultRow> rows;
  for (const auto& o : arr) {
    ResultRow r;
    r.problem = o.at("problem").get<std::string>();
    r.n = o.at("n").get<std::size_t>();
    const auto m = parse_method(o.at("method").get<std::string>());
    if (!m) throw std::invalid_argument("unknown method in JSON");
    r.method = *m;
    r.q = o.at("q").get<int>();
    if (!o.at("rho").is_null()) r.rho = o.at("rho").get<double>();
    r.omega = o.at("omega").get<double>();
    r.iterations = o.at("IT").get<long>();
    r.converged = o.at("converged").get<bool>();
    const auto& fr = o.at("final_res_norm_sq");
    r.final_res_norm_sq = fr.is_string() ? parse_double(fr.get<std::string>()) : fr.get<double>();
    r.cpu_mean_seconds = o.at("cpu_mean_seconds").get<double>();
    r.breakdown = o.at("breakdown").get<bool>();
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace detail {

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

} // namespace detail

inline void emit_results(const std::vector<ResultRow>& rows, OutputFormat format, const std::string& path) {
  if (rows.empty()) throw std::invalid_argument("emit_results: no rows");
  detail::write_file(path, format == OutputFormat::CSV ? format_csv(rows) : format_json(rows));
}

inline std::string format_history(const SolveReport& report) {
  std::ostringstream os;
  os << "iter,res_norm_sq\n";
  for (const HistoryPoint& h : report.history) os << h.k << ',' << format_double(h.res_norm_sq) << '\n';
  return os.str();
}

//! Residual-versus-iteration curve, one row per iterate.
inline void emit_history(const SolveReport& report, const std::string& path) {
  if (report.history.empty()) throw std::invalid_argument("emit_history: report has no history");
  detail::write_file(path, format_history(report));
}

inline std::string format_best_omega(const std::vector<BestOmega>& best) {
  std::ostringstream os;
  for (const BestOmega& b : best) {
    os << b.problem << " n=" << b.n << ' ' << to_string(b.method) << " q=" << b.q;
    if (b.rho) os << " rho=" << format_double(*b.rho);
    if (b.found)
      os << ": best omega=" << format_double(b.omega) << " IT=" << b.iterations << '\n';
    else
      os << ": no convergent configuration\n";
  }
  return os.str();
}

} // namespace gbkm
