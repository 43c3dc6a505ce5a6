#pragma once
//
// Numerical checks of the convergence theory: sample-based estimates of the
// tangential cone constant xi and the row-norm bound alpha, the smallest
// nonzero singular value of the Jacobian, the rate constants a1, a2 and the
// heavy-ball recursion factor p, and the per-step inequalities the rate
// proof relies on.
//
// All estimates are empirical lower bounds of suprema over the domain, so a
// "valid" flag computed from them is a heuristic, not a certificate.
//

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gbkm/core.hpp"
#include "gbkm/selection.hpp"
#include "gbkm/solver.hpp"

namespace gbkm {

class EstimationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

////////////////////////////////////////////////////////////////////////////////
//
// xi, alpha, sigma_min
//

struct XiEstimate {
  double xi = 0.0;                 // max ratio over pairs and rows
  std::size_t ratios = 0;          // ratios that entered the max
  std::size_t skipped = 0;         // denominators below the floor
  std::size_t above_half = 0;      // ratios > 1/2
};

//!
//! Max over point pairs (x1, x2) and rows i of
//!   |f_i(x1) - f_i(x2) - f'_i(x1)(x1 - x2)| / |f_i(x1) - f_i(x2)|.
//! Pairs with |f_i(x1) - f_i(x2)| below floor are skipped (the ratio is 0/0).
//!
inline XiEstimate estimate_xi(const Problem& problem, std::span<const std::pair<Vector, Vector>> pairs,
                              double floor = 1e-12) {
  XiEstimate est;
  for (const auto& [x1, x2] : pairs) {
    Vector diff(x1.size());
    for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = x1[j] - x2[j];
    for (std::size_t i = 0; i < problem.m(); ++i) {
      const double df = problem.residual_component(i, x1) - problem.residual_component(i, x2);
      if (std::abs(df) < floor) {
        ++est.skipped;
        continue;
      }
      const double lin = problem.jacobian_row(i, x1).dot(diff);
      const double ratio = std::abs(df - lin) / std::abs(df);
      est.xi = std::max(est.xi, ratio);
      ++est.ratios;
      if (ratio > 0.5) ++est.above_half;
    }
  }
  if (est.ratios == 0) throw EstimationError("estimate_xi: every denominator fell below the floor");
  return est;
}

//! max over samples and rows of ||f'_i(x)||^2
inline double estimate_alpha(const Problem& problem, std::span<const Vector> samples) {
  if (samples.empty()) throw std::invalid_argument("estimate_alpha: need at least one sample point");
  double alpha = 0.0;
  for (const Vector& x : samples)
    for (std::size_t i = 0; i < problem.m(); ++i) alpha = std::max(alpha, problem.jacobian_row(i, x).squared_norm());
  return alpha;
}

//! Full m x n Jacobian at x; analysis only.
inline Eigen::MatrixXd dense_jacobian(const Problem& problem, std::span<const double> x) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(problem.m()),
                                              static_cast<Eigen::Index>(problem.n()));
  for (std::size_t i = 0; i < problem.m(); ++i) {
    const SparseRow row = problem.jacobian_row(i, x);
    for (std::size_t k = 0; k < row.nnz(); ++k)
      jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(row.index[k])) += row.value[k];
  }
  return jac;
}

//!
//! Smallest singular value of f'(x) above max(m, n) * eps * sigma_max.
//! Returns 0 when the Jacobian is numerically zero.
//!
inline double sigma_min_at(const Problem& problem, std::span<const double> x) {
  if (!all_finite(x)) throw EvaluationError("sigma_min_at: non-finite point");
  const Eigen::MatrixXd jac = dense_jacobian(problem, x);
  if (!jac.allFinite()) throw EvaluationError("sigma_min_at: non-finite Jacobian entry");

  const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(jac).singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0.0;
  const double tol = static_cast<double>(std::max(problem.m(), problem.n())) *
                     std::numeric_limits<double>::epsilon() * sv(0);
  double smallest = sv(0);
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > tol) smallest = std::min(smallest, sv(k));
  return smallest;
}

////////////////////////////////////////////////////////////////////////////////
//
// rate constants
//

enum class SelectionRule { GREEDY, MAXRES };

struct RecursionFactor {
  double p;
  double gamma;   // p - a1
};

//! p = (a1 + sqrt(a1^2 + 4 a2)) / 2, gamma = p - a1.
inline RecursionFactor recursion_factor(double a1, double a2) {
  if (a2 < 0.0) throw std::invalid_argument("recursion_factor: a2 must be nonnegative");
  const double p = 0.5 * (a1 + std::sqrt(a1 * a1 + 4.0 * a2));
  return {p, p - a1};
}

struct RateConstants {
  double xi = 0.0;
  double alpha = 0.0;
  double sigma_min = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double p = 0.0;
  double gamma = 0.0;
  bool valid = false;   // a1 + a2 < 1
};

//!
//! a1 = 1 + 3w + 2w^2 - (1 - 2xi + 3w - 4w xi) m^{1-q} [rho] sigma_min^2 / (alpha (1 + xi)^2)
//! a2 = w + 2w^2
//! The rho factor enters only for the max-residual rule.
//!
inline RateConstants theoretical_constants(double xi, double alpha, double sigma_min, double omega, int q,
                                           std::size_t m, double rho, SelectionRule rule) {
  if (!(xi >= 0.0 && xi < 0.5)) throw std::invalid_argument("theoretical_constants: xi must lie in [0, 1/2)");
  if (!(omega >= 0.0 && omega < 1.0)) throw std::invalid_argument("theoretical_constants: omega must lie in [0, 1)");
  if (q < 2) throw std::invalid_argument("theoretical_constants: q below 2");
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("theoretical_constants: rho must lie in (0, 1]");
  if (!(alpha > 0.0)) throw std::invalid_argument("theoretical_constants: alpha must be positive");

  const double w = omega;
  const double gain = (1.0 - 2.0 * xi + 3.0 * w - 4.0 * w * xi) *
                      std::pow(static_cast<double>(m), 1.0 - q) * (rule == SelectionRule::MAXRES ? rho : 1.0) *
                      sigma_min * sigma_min / (alpha * (1.0 + xi) * (1.0 + xi));
  RateConstants rc;
  rc.xi = xi;
  rc.alpha = alpha;
  rc.sigma_min = sigma_min;
  rc.a1 = 1.0 + 3.0 * w + 2.0 * w * w - gain;
  rc.a2 = w + 2.0 * w * w;
  const RecursionFactor f = recursion_factor(rc.a1, rc.a2);
  rc.p = f.p;
  rc.gamma = f.gamma;
  rc.valid = rc.a1 + rc.a2 < 1.0;
  return rc;
}

inline void to_json(nlohmann::json& j, const RateConstants& rc) {
  j = nlohmann::json{{"xi", rc.xi},       {"alpha", rc.alpha}, {"sigma_min", rc.sigma_min},
                     {"a1", rc.a1},       {"a2", rc.a2},       {"p", rc.p},
                     {"gamma", rc.gamma}, {"valid", rc.valid}, {"estimate", "empirical"}};
}

////////////////////////////////////////////////////////////////////////////////
//
// inequality checks
//

struct RecursionCheck {
  bool hypothesis_holds = true;     // F_{k+1} <= a1 F_k + a2 F_{k-1}, k >= 1
  bool conclusion_holds = true;     // F_{k+1} <= p^k (1 + gamma) F_0, k >= 1
  double max_hypothesis_violation = 0.0;   // relative, > 0 means violated
  double max_conclusion_violation = 0.0;
  double p = 0.0;
  double gamma = 0.0;
};

//!
//! Checks a nonnegative sequence with F_0 = F_1 against the two-term
//! recursion and its closed-form bound. Violations are measured relative to
//! the right-hand side; rel_tol absorbs rounding.
//!
inline RecursionCheck verify_recursion_bound(std::span<const double> F, double a1, double a2,
                                             double rel_tol = 1e-12) {
  if (F.size() < 2) throw std::invalid_argument("verify_recursion_bound: need F_0 and F_1");
  if (F[0] < 0.0 || F[0] != F[1]) throw std::invalid_argument("verify_recursion_bound: requires F_0 = F_1 >= 0");

  RecursionCheck out;
  const RecursionFactor rf = recursion_factor(a1, a2);
  out.p = rf.p;
  out.gamma = rf.gamma;
  auto violation = [](double lhs, double rhs) {
    const double scale = std::max(std::abs(rhs), std::numeric_limits<double>::min());
    return (lhs - rhs) / scale;
  };
  double pk = 1.0;
  for (std::size_t k = 1; k + 1 < F.size(); ++k) {
    pk *= rf.p;
    const double hyp = violation(F[k + 1], a1 * F[k] + a2 * F[k - 1]);
    const double con = violation(F[k + 1], pk * (1.0 + rf.gamma) * F[0]);
    out.max_hypothesis_violation = std::max(out.max_hypothesis_violation, hyp);
    out.max_conclusion_violation = std::max(out.max_conclusion_violation, con);
  }
  out.hypothesis_holds = out.max_hypothesis_violation <= rel_tol;
  out.conclusion_holds = out.max_conclusion_violation <= rel_tol;
  return out;
}

struct StepRatioCheck {
  bool holds = false;
  bool breakdown = false;
  double lhs = 0.0;     // ||f_tau||_q^{2q} / ||f'_tau^T eta||^2
  double rhs = 0.0;     // |tau|^{1-q} / alpha * ||f_tau||_2^2
  double slack = 0.0;   // lhs - rhs
};

//!
//! ||f_tau||_q^{2q} / ||f'_tau^T eta||^2 >= |tau|^{1-q} / alpha * ||f_tau||_2^2.
//! holds allows a relative rounding margin of a few ulps; the inequality is
//! tight for a single row attaining alpha.
//!
inline StepRatioCheck verify_step_ratio_bound(std::span<const double> f_tau, const WeightVector& eta,
                                              std::span<const SparseRow> rows, int q, double alpha) {
  StepRatioCheck out;
  std::size_t n = 0;
  for (const SparseRow& r : rows)
    for (std::size_t j : r.index) n = std::max(n, j + 1);
  const Vector d = projection_direction(rows, eta, n);
  const double den = squared_norm(d);
  if (!(den > 0.0)) {
    out.breakdown = true;
    return out;
  }
  double lq = 0.0;   // ||f_tau||_q^q
  for (double f : f_tau) lq += std::pow(std::abs(f), q);
  const double tau = static_cast<double>(f_tau.size());
  out.lhs = lq * lq / den;
  out.rhs = std::pow(tau, 1.0 - q) / alpha * squared_norm(f_tau);
  out.slack = out.lhs - out.rhs;
  out.holds = out.slack >= -8.0 * std::numeric_limits<double>::epsilon() * out.rhs;
  return out;
}

//!
//! Watches a solve on a problem with known root x_star and records, per step,
//! the worst relative violation of
//!   (step)     ||x_{k+1}-x*||^2 <= (1+3w+2w^2) ||x_k-x*||^2 + (w+2w^2) ||x_{k-1}-x*||^2
//!                                  - (1-2xi+3w-4w xi) |tau|^{1-q} / alpha ||f_tau||^2
//!   (rate)     ||x_{k+1}-x*||^2 <= a1 ||x_k-x*||^2 + a2 ||x_{k-1}-x*||^2
//!
class ContractionMonitor {
public:
  ContractionMonitor(Vector x_star, double xi, double alpha, RateConstants rate)
      : x_star_(std::move(x_star)), xi_(xi), alpha_(alpha), rate_(rate) {}

  void observe(const StepInfo& s) {
    const double w = s.config.omega;
    const int q = s.config.q;
    const double e_next = squared_distance(s.x_next, x_star_);
    const double e_curr = squared_distance(s.state.x_curr, x_star_);
    const double e_prev = squared_distance(s.state.x_prev, x_star_);

    const double tau = static_cast<double>(s.tau.size());
    const double step_rhs = (1.0 + 3.0 * w + 2.0 * w * w) * e_curr + (w + 2.0 * w * w) * e_prev -
                            (1.0 - 2.0 * xi_ + 3.0 * w - 4.0 * w * xi_) * std::pow(tau, 1.0 - q) / alpha_ *
                                squared_norm(s.f_tau);
    const double rate_rhs = rate_.a1 * e_curr + rate_.a2 * e_prev;
    const double scale = std::max(e_curr, std::numeric_limits<double>::min());
    worst_step_ = std::max(worst_step_, (e_next - step_rhs) / scale);
    worst_rate_ = std::max(worst_rate_, (e_next - rate_rhs) / scale);
    ++steps_;
  }

  std::size_t steps() const { return steps_; }
  double worst_step_violation() const { return worst_step_; }
  double worst_rate_violation() const { return worst_rate_; }

private:
  Vector x_star_;
  double xi_, alpha_;
  RateConstants rate_;
  std::size_t steps_ = 0;
  double worst_step_ = -std::numeric_limits<double>::infinity();
  double worst_rate_ = -std::numeric_limits<double>::infinity();
};

} // namespace gbkm
