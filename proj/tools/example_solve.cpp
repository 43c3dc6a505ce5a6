// Minimal library usage: solve the singular Broyden system with MRWNK-m and
// print the residual curve.

#include <iostream>

#include "gbkm/problems.hpp"
#include "gbkm/solver.hpp"

int main() {
  const gbkm::SingularBroyden problem(100);

  gbkm::SolverConfig config;
  config.method = gbkm::Method::MRWNK_M;
  config.q = 2;
  config.rho = 0.2;
  config.omega = 0.5;

  const gbkm::SolveReport report = gbkm::solve(problem, config);
  for (const auto& h : report.history) std::cout << h.k << ' ' << h.res_norm_sq << '\n';
  std::cout << (report.converged ? "converged" : "not converged") << " after " << report.iterations
            << " steps\n";
  return report.converged ? 0 : 1;
}
