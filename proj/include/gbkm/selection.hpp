#pragma once
//
// Greedy row selection (delta_k rule and rho * max rule) and the q-weighted
// residual vector eta_k used to combine the selected rows.
//

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbkm/core.hpp"

namespace gbkm {

//! Raised when a selection rule is applied to an all-zero residual.
class AlreadyConverged : public std::domain_error {
public:
  AlreadyConverged() : std::domain_error("residual is zero: already converged") {}
};

//! Selected row indices tau_k in ascending order.
struct IndexSet {
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  auto begin() const { return indices.begin(); }
  auto end() const { return indices.end(); }
  std::size_t operator[](std::size_t j) const { return indices[j]; }

  bool contains(std::size_t i) const { return std::binary_search(indices.begin(), indices.end(), i); }

  bool operator==(const IndexSet&) const = default;
};

//! eta_k, aligned with the IndexSet it was built for.
struct WeightVector {
  Vector values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t j) const { return values[j]; }
};

inline Vector squares(std::span<const double> r) {
  Vector s(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) s[i] = r[i] * r[i];
  return s;
}

//! r restricted to tau.
inline Vector gather(std::span<const double> r, const IndexSet& tau) {
  Vector out;
  out.reserve(tau.size());
  for (std::size_t i : tau) out.push_back(r[i]);
  return out;
}

//! delta_k = (max_i |f_i|^2 / ||f||^2 + 1/m) / 2
inline double compute_delta(std::span<const double> res_squares, double res_norm_sq) {
  if (!(res_norm_sq > 0.0)) throw AlreadyConverged();
  const double max_sq = *std::max_element(res_squares.begin(), res_squares.end());
  return 0.5 * (max_sq / res_norm_sq + 1.0 / static_cast<double>(res_squares.size()));
}

//! tau_k = { i : |f_i|^2 >= delta_k ||f||^2 }
inline IndexSet select_greedy(std::span<const double> res_squares, double delta, double res_norm_sq) {
  const double threshold = delta * res_norm_sq;
  IndexSet tau;
  for (std::size_t i = 0; i < res_squares.size(); ++i)
    if (res_squares[i] >= threshold) tau.indices.push_back(i);
  return tau;
}

//! tau_k = { i : |f_i|^2 >= rho * max_i |f_i|^2 }
inline IndexSet select_max_residual(std::span<const double> res_squares, double rho) {
  const double max_sq = res_squares.empty() ? 0.0 : *std::max_element(res_squares.begin(), res_squares.end());
  if (!(max_sq > 0.0)) throw AlreadyConverged();
  const double threshold = rho * max_sq;
  IndexSet tau;
  for (std::size_t i = 0; i < res_squares.size(); ++i)
    if (res_squares[i] >= threshold) tau.indices.push_back(i);
  return tau;
}

//! base^e for small nonnegative e by repeated multiplication.
inline double ipow(double base, int e) {
  double r = 1.0;
  for (int k = 0; k < e; ++k) r *= base;
  return r;
}

//!
//! Residual weights eta_i = f_i^{q-1} for even q and |f_i^{q-2}| f_i for odd q.
//! Both keep the sign of f_i and give eta^T f_tau = ||f_tau||_q^q.
//!
inline WeightVector compute_eta(std::span<const double> f_tau, int q) {
  if (q < 2) throw std::invalid_argument("compute_eta: q below 2");
  WeightVector eta;
  eta.values.resize(f_tau.size());
  for (std::size_t j = 0; j < f_tau.size(); ++j) {
    const double f = f_tau[j];
    const double w = (q % 2 == 0) ? ipow(f, q - 1) : std::abs(ipow(f, q - 2)) * f;
    if (!std::isfinite(w))
      throw EvaluationError("compute_eta: non-finite weight for q = " + std::to_string(q));
    eta.values[j] = w;
  }
  return eta;
}

} // namespace gbkm
