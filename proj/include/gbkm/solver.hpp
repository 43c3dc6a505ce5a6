#pragma once
//
// Greedy block nonlinear Kaczmarz iteration with heavy-ball momentum:
//
//   x_{k+1} = x_k - (eta_k^T f_tau(x_k) / ||f'_tau(x_k)^T eta_k||^2) f'_tau(x_k)^T eta_k
//             + omega (x_k - x_{k-1})
//
// One engine drives all four methods. The rows of tau_k come either from the
// delta_k greedy rule (RBWNK, RBWNK-m) or from the rho * max rule (MRWNK,
// MRWNK-m); methods without momentum skip the omega term entirely.
//

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbkm/core.hpp"
#include "gbkm/selection.hpp"

namespace gbkm {

class StepBreakdownError : public std::runtime_error {
public:
  explicit StepBreakdownError(StepBreakdown info)
      : std::runtime_error("step denominator vanished at k = " + std::to_string(info.k)), info_(info) {}
  const StepBreakdown& info() const { return info_; }

private:
  StepBreakdown info_;
};

//! A non-finite iterate or residual; typically omega too large.
class DivergenceError : public std::runtime_error {
public:
  explicit DivergenceError(long k)
      : std::runtime_error("iteration diverged (non-finite value) at k = " + std::to_string(k)), k_(k) {}
  long iteration() const { return k_; }

private:
  long k_;
};

//! d = sum_j eta_j f'_{tau_j}(x_k), accumulated densely in O(sum nnz).
inline Vector projection_direction(std::span<const SparseRow> rows, const WeightVector& eta, std::size_t n) {
  Vector d(n, 0.0);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const SparseRow& row = rows[j];
    const double w = eta[j];
    for (std::size_t k = 0; k < row.index.size(); ++k) d[row.index[k]] += w * row.value[k];
  }
  return d;
}

//!
//! Threshold below which ||d||^2 counts as zero: machine epsilon times
//! ||eta||^2 max(1, alpha_hat), with alpha_hat the largest squared row norm
//! seen so far. ||eta|| sqrt(alpha_hat) bounds ||d|| up to sqrt(|tau|).
//!
inline double breakdown_tolerance(double eta_norm_sq, double alpha_hat) {
  return std::numeric_limits<double>::epsilon() * eta_norm_sq * std::max(1.0, alpha_hat);
}

//! The plain step x_k - (eta^T f_tau / ||d||^2) d, without momentum.
inline Vector kaczmarz_step(const IterationState& state, const WeightVector& eta, std::span<const double> f_tau,
                            std::span<const double> d, double breakdown_tol) {
  const double den = squared_norm(d);
  if (!(den > breakdown_tol)) throw StepBreakdownError({state.k, den, state.res_norm_sq});
  const double scale = dot(eta.values, f_tau) / den;

  const std::span<const double> x = state.x_curr;
  Vector next(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) next[j] = x[j] - scale * d[j];
  return next;
}

//! The momentum step: kaczmarz_step plus omega (x_k - x_{k-1}).
inline Vector kaczmarz_momentum_step(const IterationState& state, const WeightVector& eta,
                                     std::span<const double> f_tau, std::span<const double> d, double omega,
                                     double breakdown_tol) {
  const double den = squared_norm(d);
  if (!(den > breakdown_tol)) throw StepBreakdownError({state.k, den, state.res_norm_sq});
  const double scale = dot(eta.values, f_tau) / den;

  const std::span<const double> x = state.x_curr;
  const std::span<const double> xp = state.x_prev;
  Vector next(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) next[j] = x[j] - scale * d[j] + omega * (x[j] - xp[j]);
  return next;
}

//! Everything known about one step, passed to SolveOptions::on_step before the state advances.
struct StepInfo {
  const IterationState& state;          // x_k, x_{k-1}, f(x_k)
  const IndexSet& tau;
  std::span<const double> f_tau;
  const WeightVector& eta;
  std::span<const SparseRow> rows;      // f'_i(x_k), i in tau, aligned with eta
  std::span<const double> direction;    // f'_tau(x_k)^T eta
  std::span<const double> x_next;       // x_{k+1}
  double alpha_hat;                     // running max of ||f'_i||^2 over evaluated rows
  const SolverConfig& config;
};

struct SolveOptions {
  bool keep_iterates = false;
  std::optional<Vector> x0;                        // overrides problem.initial_point()
  std::function<void(const StepInfo&)> on_step;
};

//!
//! Runs the configured method until ||f(x_k)||^2 < eps or max_iter steps.
//! The residual is recomputed in full once per step; only the Jacobian rows
//! in tau_k are evaluated.
//!
//! Throws ConfigError for an invalid config and DivergenceError when an
//! iterate or residual becomes non-finite. A vanishing step denominator ends
//! the solve with report.breakdown set.
//!
inline SolveReport solve(const Problem& problem, const SolverConfig& config, const SolveOptions& options = {}) {
  validate_config(config);
  const auto t0 = std::chrono::steady_clock::now();

  const std::size_t n = problem.n();
  const bool momentum = uses_momentum(config.method);
  const bool max_rule = uses_max_residual(config.method);

  IterationState st;
  st.x_curr = options.x0 ? *options.x0 : problem.initial_point();
  if (st.x_curr.size() != n) throw std::invalid_argument("solve: initial point has wrong dimension");
  st.x_prev = st.x_curr;
  st.residual.resize(problem.m());

  SolveReport report;
  auto evaluate = [&] {
    problem.residual_into(st.x_curr, st.residual);
    st.res_norm_sq = squared_norm(st.residual);
    if (!std::isfinite(st.res_norm_sq) || !all_finite(st.x_curr)) throw DivergenceError(st.k);
    report.history.push_back({st.k, st.res_norm_sq});
    if (options.keep_iterates) report.iterates.push_back(st.x_curr);
  };
  evaluate();

  double alpha_hat = 0.0;
  std::vector<SparseRow> rows;
  while (true) {
    if (st.res_norm_sq < config.eps) {
      report.converged = true;
      break;
    }
    if (st.k >= config.max_iter) break;

    const Vector sq = squares(st.residual);
    const IndexSet tau = max_rule ? select_max_residual(sq, config.rho)
                                  : select_greedy(sq, compute_delta(sq, st.res_norm_sq), st.res_norm_sq);
    const Vector f_tau = gather(st.residual, tau);
    const WeightVector eta = compute_eta(f_tau, config.q);

    rows.clear();
    for (std::size_t i : tau) {
      rows.push_back(problem.jacobian_row(i, st.x_curr));
      alpha_hat = std::max(alpha_hat, rows.back().squared_norm());
    }
    const Vector d = projection_direction(rows, eta, n);
    const double tol = breakdown_tolerance(squared_norm(eta.values), alpha_hat);

    Vector next;
    try {
      next = momentum ? kaczmarz_momentum_step(st, eta, f_tau, d, config.omega, tol)
                      : kaczmarz_step(st, eta, f_tau, d, tol);
    } catch (const StepBreakdownError& e) {
      report.breakdown = true;
      report.breakdown_info = e.info();
      break;
    }

    if (options.on_step) options.on_step(StepInfo{st, tau, f_tau, eta, rows, d, next, alpha_hat, config});

    st.x_prev = std::move(st.x_curr);
    st.x_curr = std::move(next);
    ++st.k;
    evaluate();
  }

  report.iterations = st.k;
  report.final_res_norm_sq = st.res_norm_sq;
  report.solution = std::move(st.x_curr);

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.wall_time_seconds = report.wall_time_min_seconds = report.wall_time_max_seconds = secs;
  report.timed_runs = 1;
  return report;
}

//! Repeats solve and reports the mean wall time; the iteration count must not change between runs.
inline SolveReport solve_with_timing(const Problem& problem, const SolverConfig& config, int repeats = 10,
                                     const SolveOptions& options = {}) {
  if (repeats < 1) throw std::invalid_argument("solve_with_timing: repeats must be >= 1");
  SolveReport first = solve(problem, config, options);
  double total = first.wall_time_seconds;
  double lo = total, hi = total;
  for (int r = 1; r < repeats; ++r) {
    const SolveReport again = solve(problem, config, options);
    if (again.iterations != first.iterations || again.history != first.history)
      throw std::logic_error("solve_with_timing: non-deterministic iteration history");
    total += again.wall_time_seconds;
    lo = std::min(lo, again.wall_time_seconds);
    hi = std::max(hi, again.wall_time_seconds);
  }
  first.wall_time_seconds = std::clamp(total / repeats, lo, hi);
  first.wall_time_min_seconds = lo;
  first.wall_time_max_seconds = hi;
  first.timed_runs = repeats;
  return first;
}

} // namespace gbkm
