#pragma once
//
// Domain types shared by the solver, benchmark problems, analysis and harness:
// the residual/Jacobian-row abstraction of a nonlinear system f(x) = 0,
// solver configuration, iteration state and solve reports.
//

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gbkm {

using Vector = std::vector<double>;

//! Raised when a residual or Jacobian evaluation produces a non-finite value.
class EvaluationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

//! One row of a Jacobian stored as parallel (column, value) arrays.
struct SparseRow {
  std::vector<std::size_t> index;
  std::vector<double> value;

  std::size_t nnz() const { return index.size(); }

  void push(std::size_t j, double v) {
    index.push_back(j);
    value.push_back(v);
  }

  double squared_norm() const {
    double s = 0.0;
    for (double v : value) s += v * v;
    return s;
  }

  //! Row times a dense vector.
  double dot(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < index.size(); ++k) s += value[k] * x[index[k]];
    return s;
  }

  Vector to_dense(std::size_t n) const {
    Vector d(n, 0.0);
    for (std::size_t k = 0; k < index.size(); ++k) d[index[k]] += value[k];
    return d;
  }
};

//!
//! A nonlinear system f : R^n -> R^m accessed component by component.
//!
//! Implementations must be immutable after construction: every member is
//! const and may be called concurrently from several solves.
//!
class Problem {
public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  virtual std::size_t m() const = 0;
  virtual std::size_t n() const = 0;

  //! f_i(x)
  virtual double residual_component(std::size_t i, std::span<const double> x) const = 0;

  //! f'_i(x), the i-th Jacobian row.
  virtual SparseRow jacobian_row(std::size_t i, std::span<const double> x) const = 0;

  virtual Vector initial_point() const = 0;

  //! Writes f(x) into out. Overrides must stay bit-identical to residual_component.
  virtual void residual_into(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < m(); ++i) out[i] = residual_component(i, x);
  }

  Vector residual(std::span<const double> x) const {
    Vector r(m());
    residual_into(x, r);
    return r;
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

//! Default central-difference step for coordinate value xj.
inline double default_fd_step(double xj) {
  static const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  return h0 * std::max(1.0, std::abs(xj));
}

namespace detail {

inline SparseRow central_difference_row(const Problem& problem, std::size_t i,
                                        std::span<const double> x,
                                        std::optional<double> fixed_h) {
  if (i >= problem.m()) throw std::out_of_range("finite_difference_row: row index out of range");
  if (fixed_h && !(*fixed_h > 0.0)) throw std::invalid_argument("finite_difference_row: h must be positive");

  Vector xp(x.begin(), x.end());
  SparseRow row;
  for (std::size_t j = 0; j < xp.size(); ++j) {
    const double xj = xp[j];
    const double h = fixed_h ? *fixed_h : default_fd_step(xj);
    xp[j] = xj + h;
    const double fp = problem.residual_component(i, xp);
    xp[j] = xj - h;
    const double fm = problem.residual_component(i, xp);
    xp[j] = xj;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw EvaluationError("finite_difference_row: non-finite residual in row " + std::to_string(i));
    // (x+h)-(x-h) is the step actually taken after rounding.
    const double d = (fp - fm) / ((xj + h) - (xj - h));
    if (d != 0.0) row.push(j, d);
  }
  return row;
}

} // namespace detail

//! Central-difference approximation of f'_i(x) with the default per-coordinate step.
inline SparseRow finite_difference_row(const Problem& problem, std::size_t i, std::span<const double> x) {
  return detail::central_difference_row(problem, i, x, std::nullopt);
}

//! Central-difference approximation of f'_i(x) with a uniform step h.
inline SparseRow finite_difference_row(const Problem& problem, std::size_t i, std::span<const double> x,
                                       double h) {
  return detail::central_difference_row(problem, i, x, h);
}

////////////////////////////////////////////////////////////////////////////////
//
// solver configuration
//

//! Selection rule x momentum on/off.
enum class Method { RBWNK, MRWNK, RBWNK_M, MRWNK_M };

inline constexpr bool uses_momentum(Method m) { return m == Method::RBWNK_M || m == Method::MRWNK_M; }

//! True for the rho * max residual rule, false for the delta_k greedy rule.
inline constexpr bool uses_max_residual(Method m) { return m == Method::MRWNK || m == Method::MRWNK_M; }

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::RBWNK: return "rbwnk";
    case Method::MRWNK: return "mrwnk";
    case Method::RBWNK_M: return "rbwnk-m";
    case Method::MRWNK_M: return "mrwnk-m";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (Method m : {Method::RBWNK, Method::MRWNK, Method::RBWNK_M, Method::MRWNK_M})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

struct SolverConfig {
  Method method = Method::RBWNK;
  int q = 2;
  double omega = 0.0;
  double rho = 1.0;          // max-residual rule only
  double eps = 1e-6;         // tolerance on ||f(x)||^2
  long max_iter = 10000;
};

class ConfigError : public std::invalid_argument {
public:
  explicit ConfigError(std::vector<std::string> violations)
      : std::invalid_argument(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid solver configuration:";
    for (const auto& e : v) s += " [" + e + "]";
    return s;
  }
  std::vector<std::string> violations_;
};

//! Every violated constraint of config, empty when valid.
inline std::vector<std::string> config_violations(const SolverConfig& c) {
  std::vector<std::string> v;
  if (c.q < 2) v.emplace_back("q below 2");
  if (!(c.omega >= 0.0 && c.omega < 1.0)) v.emplace_back("omega out of range");
  else if (!uses_momentum(c.method) && c.omega != 0.0) v.emplace_back("omega nonzero for method without momentum");
  if (!(c.rho > 0.0 && c.rho <= 1.0)) v.emplace_back("rho out of range");
  if (!(c.eps > 0.0)) v.emplace_back("eps not positive");
  if (c.max_iter < 1) v.emplace_back("max_iter not positive");
  return v;
}

//! Returns config unchanged, or throws ConfigError listing every violation.
inline SolverConfig validate_config(const SolverConfig& config) {
  auto v = config_violations(config);
  if (!v.empty()) throw ConfigError(std::move(v));
  return config;
}

////////////////////////////////////////////////////////////////////////////////
//
// iteration state and results
//

struct IterationState {
  long k = 0;            // steps taken so far
  Vector x_curr;         // x_k
  Vector x_prev;         // x_{k-1}; equals x_curr before the first step
  Vector residual;       // f(x_k)
  double res_norm_sq = 0.0;
};

//! Vanishing step denominator ||f'_tau^T eta||^2 while the residual is not yet small.
struct StepBreakdown {
  long k = 0;
  double denominator = 0.0;
  double res_norm_sq = 0.0;
};

struct HistoryPoint {
  long k;
  double res_norm_sq;

  bool operator==(const HistoryPoint&) const = default;
};

struct SolveReport {
  bool converged = false;
  long iterations = 0;
  double final_res_norm_sq = 0.0;
  std::vector<HistoryPoint> history;   // k = 0 .. iterations
  Vector solution;                     // last iterate
  std::vector<Vector> iterates;        // only with SolveOptions::keep_iterates

  double wall_time_seconds = 0.0;      // mean over runs
  double wall_time_min_seconds = 0.0;
  double wall_time_max_seconds = 0.0;
  int timed_runs = 0;

  bool breakdown = false;
  std::optional<StepBreakdown> breakdown_info;
};

} // namespace gbkm
