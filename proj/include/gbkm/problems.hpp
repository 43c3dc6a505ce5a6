#pragma once
//
// Benchmark nonlinear systems with analytic Jacobian rows.
//
//   broyden-tridiagonal   f_k = (3 - 2x_k) x_k - x_{k-1} - 2x_{k+1} + 1
//   singular-broyden      f_k = ((3 - 2x_k) x_k - x_{k-1} - 2x_{k+1} + 1)^2
//   h-equation            f_i = x_i - (1 - c/(2n) sum_j mu_i x_j / (mu_i + mu_j))
//   h-equation-classical  f_i = x_i - (1 - c/(2n) sum_j mu_i x_j / (mu_i + mu_j))^{-1}
//   nondquar              f_k = (0.5 x_k - 3) x_k + x_{k-1} + x_{k+1} - 1
//
// with mu_i = (i - 1/2)/n; boundary rows drop the missing neighbour.
// The singular Broyden system squares each tridiagonal component, which makes
// its Jacobian vanish at the root.
//

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gbkm/core.hpp"

namespace gbkm {

namespace detail {

inline void require_n(std::size_t n, const char* what) {
  if (n < 2) throw std::invalid_argument(std::string(what) + ": n must be >= 2");
}

} // namespace detail

//! Broyden tridiagonal system, x0 = (-0.5, ..., -0.5).
class BroydenTridiagonal : public Problem {
public:
  explicit BroydenTridiagonal(std::size_t n) : n_(n) { detail::require_n(n, "BroydenTridiagonal"); }

  std::string name() const override { return "broyden-tridiagonal"; }
  std::size_t m() const override { return n_; }
  std::size_t n() const override { return n_; }

  double residual_component(std::size_t k, std::span<const double> x) const override {
    double f = (3.0 - 2.0 * x[k]) * x[k] + 1.0;
    if (k > 0) f -= x[k - 1];
    if (k + 1 < n_) f -= 2.0 * x[k + 1];
    return f;
  }

  SparseRow jacobian_row(std::size_t k, std::span<const double> x) const override {
    SparseRow row;
    if (k > 0) row.push(k - 1, -1.0);
    row.push(k, 3.0 - 4.0 * x[k]);
    if (k + 1 < n_) row.push(k + 1, -2.0);
    return row;
  }

  Vector initial_point() const override { return Vector(n_, -0.5); }

private:
  std::size_t n_;
};

//! Squared Broyden tridiagonal components; same sparsity and starting point.
class SingularBroyden : public Problem {
public:
  explicit SingularBroyden(std::size_t n) : base_(n) {}

  std::string name() const override { return "singular-broyden"; }
  std::size_t m() const override { return base_.m(); }
  std::size_t n() const override { return base_.n(); }

  double residual_component(std::size_t k, std::span<const double> x) const override {
    const double g = base_.residual_component(k, x);
    return g * g;
  }

  SparseRow jacobian_row(std::size_t k, std::span<const double> x) const override {
    const double two_g = 2.0 * base_.residual_component(k, x);
    SparseRow row = base_.jacobian_row(k, x);
    for (double& v : row.value) v *= two_g;
    return row;
  }

  Vector initial_point() const override { return base_.initial_point(); }

private:
  BroydenTridiagonal base_;
};

//!
//! Discretised H-equation, affine in x. Dense rows; the weights
//! mu_i / (mu_i + mu_j) are tabulated once at construction (n^2 doubles).
//! x0 = 0.
//!
class HEquation : public Problem {
public:
  HEquation(std::size_t n, double c) : n_(n), c_(c), scale_(c / (2.0 * static_cast<double>(n))), w_(n * n) {
    detail::require_n(n, "HEquation");
    if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("HEquation: c must lie in (0, 1)");
    for (std::size_t i = 0; i < n; ++i) {
      const double mu_i = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) {
        const double mu_j = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
        w_[i * n + j] = mu_i / (mu_i + mu_j);
      }
    }
  }

  std::string name() const override { return "h-equation"; }
  std::size_t m() const override { return n_; }
  std::size_t n() const override { return n_; }
  double c() const { return c_; }

  //! mu_i / (mu_i + mu_j)
  double weight(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }

  double residual_component(std::size_t i, std::span<const double> x) const override {
    return x[i] - (1.0 - scale_ * weighted_sum(i, x));
  }

  SparseRow jacobian_row(std::size_t i, std::span<const double> x) const override {
    (void)x;
    SparseRow row;
    row.index.resize(n_);
    row.value.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      row.index[j] = j;
      row.value[j] = scale_ * w_[i * n_ + j];
    }
    row.value[i] += 1.0;
    return row;
  }

  Vector initial_point() const override { return Vector(n_, 0.0); }

protected:
  //! sum_j w_ij x_j, accumulated left to right.
  double weighted_sum(std::size_t i, std::span<const double> x) const {
    const double* wi = &w_[i * n_];
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) s += wi[j] * x[j];
    return s;
  }

  std::size_t n_;
  double c_;
  double scale_;   // c / (2n)
  std::vector<double> w_;
};

//! The H-equation with the reciprocal of the integral operator (Chandrasekhar form).
class HEquationClassical : public HEquation {
public:
  using HEquation::HEquation;

  std::string name() const override { return "h-equation-classical"; }

  double residual_component(std::size_t i, std::span<const double> x) const override {
    return x[i] - 1.0 / (1.0 - scale_ * weighted_sum(i, x));
  }

  SparseRow jacobian_row(std::size_t i, std::span<const double> x) const override {
    const double s = 1.0 - scale_ * weighted_sum(i, x);
    const double k = scale_ / (s * s);
    SparseRow row;
    row.index.resize(n_);
    row.value.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      row.index[j] = j;
      row.value[j] = -k * w_[i * n_ + j];
    }
    row.value[i] += 1.0;
    return row;
  }
};

//! NONDQUAR tridiagonal quadratic system, x0 = (-0.5, ..., -0.5).
class Nondquar : public Problem {
public:
  explicit Nondquar(std::size_t n) : n_(n) { detail::require_n(n, "Nondquar"); }

  std::string name() const override { return "nondquar"; }
  std::size_t m() const override { return n_; }
  std::size_t n() const override { return n_; }

  double residual_component(std::size_t k, std::span<const double> x) const override {
    double f = (0.5 * x[k] - 3.0) * x[k] - 1.0;
    if (k > 0) f += x[k - 1];
    if (k + 1 < n_) f += x[k + 1];
    return f;
  }

  SparseRow jacobian_row(std::size_t k, std::span<const double> x) const override {
    SparseRow row;
    if (k > 0) row.push(k - 1, 1.0);
    row.push(k, x[k] - 3.0);
    if (k + 1 < n_) row.push(k + 1, 1.0);
    return row;
  }

  Vector initial_point() const override { return Vector(n_, -0.5); }

private:
  std::size_t n_;
};

//! f(x) = A x - b with a dense row-major A; used for synthetic checks.
class AffineProblem : public Problem {
public:
  AffineProblem(std::size_t m, std::size_t n, Vector a, Vector b, Vector x0)
      : m_(m), n_(n), a_(std::move(a)), b_(std::move(b)), x0_(std::move(x0)) {
    if (a_.size() != m * n || b_.size() != m || x0_.size() != n)
      throw std::invalid_argument("AffineProblem: inconsistent dimensions");
  }

  std::string name() const override { return "affine"; }
  std::size_t m() const override { return m_; }
  std::size_t n() const override { return n_; }

  double residual_component(std::size_t i, std::span<const double> x) const override {
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) s += a_[i * n_ + j] * x[j];
    return s - b_[i];
  }

  SparseRow jacobian_row(std::size_t i, std::span<const double> x) const override {
    (void)x;
    SparseRow row;
    for (std::size_t j = 0; j < n_; ++j)
      if (a_[i * n_ + j] != 0.0) row.push(j, a_[i * n_ + j]);
    return row;
  }

  Vector initial_point() const override { return x0_; }

  double entry(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

private:
  std::size_t m_, n_;
  Vector a_, b_, x0_;
};

////////////////////////////////////////////////////////////////////////////////
//
// selection by name
//

enum class BenchmarkName { SINGULAR_BROYDEN, BROYDEN_TRIDIAGONAL, H_EQUATION, H_EQUATION_CLASSICAL, NONDQUAR };

inline std::string_view to_string(BenchmarkName b) {
  switch (b) {
    case BenchmarkName::SINGULAR_BROYDEN: return "singular-broyden";
    case BenchmarkName::BROYDEN_TRIDIAGONAL: return "broyden-tridiagonal";
    case BenchmarkName::H_EQUATION: return "h-equation";
    case BenchmarkName::H_EQUATION_CLASSICAL: return "h-equation-classical";
    case BenchmarkName::NONDQUAR: return "nondquar";
  }
  return "?";
}

inline std::optional<BenchmarkName> parse_benchmark(std::string_view s) {
  for (BenchmarkName b : {BenchmarkName::SINGULAR_BROYDEN, BenchmarkName::BROYDEN_TRIDIAGONAL,
                          BenchmarkName::H_EQUATION, BenchmarkName::H_EQUATION_CLASSICAL, BenchmarkName::NONDQUAR})
    if (to_string(b) == s) return b;
  return std::nullopt;
}

struct BenchmarkSpec {
  BenchmarkName name = BenchmarkName::SINGULAR_BROYDEN;
  std::size_t n = 100;
  double c = 0.9;   // H-equation only
};

inline SingularBroyden make_singular_broyden(std::size_t n) { return SingularBroyden(n); }
inline BroydenTridiagonal make_broyden_tridiagonal(std::size_t n) { return BroydenTridiagonal(n); }
inline HEquation make_h_equation(std::size_t n, double c = 0.9) { return HEquation(n, c); }
inline HEquationClassical make_h_equation_classical(std::size_t n, double c = 0.9) { return HEquationClassical(n, c); }
inline Nondquar make_nondquar(std::size_t n) { return Nondquar(n); }

inline std::shared_ptr<const Problem> make_problem(const BenchmarkSpec& spec) {
  switch (spec.name) {
    case BenchmarkName::SINGULAR_BROYDEN: return std::make_shared<SingularBroyden>(spec.n);
    case BenchmarkName::BROYDEN_TRIDIAGONAL: return std::make_shared<BroydenTridiagonal>(spec.n);
    case BenchmarkName::H_EQUATION: return std::make_shared<HEquation>(spec.n, spec.c);
    case BenchmarkName::H_EQUATION_CLASSICAL: return std::make_shared<HEquationClassical>(spec.n, spec.c);
    case BenchmarkName::NONDQUAR: return std::make_shared<Nondquar>(spec.n);
  }
  throw std::invalid_argument("make_problem: unknown benchmark");
}

} // namespace gbkm
