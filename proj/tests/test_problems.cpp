#include <random>

#include <gtest/gtest.h>

#include "gbkm/problems.hpp"
#include "oracles.hpp"

using namespace gbkm;

TEST(BroydenTridiagonal, HandValuesAtStart) {
  const BroydenTridiagonal p(5);
  const Vector x = p.initial_point();
  EXPECT_DOUBLE_EQ(p.residual_component(0, x), 0.0);
  for (std::size_t k = 1; k < 4; ++k) EXPECT_DOUBLE_EQ(p.residual_component(k, x), 0.5);
  EXPECT_DOUBLE_EQ(p.residual_component(4, x), -0.5);
  EXPECT_EQ(p.jacobian_row(2, x).to_dense(5), (Vector{0, -1, 5, -2, 0}));
}

TEST(SingularBroyden, SquaresTheTridiagonalComponents) {
  const SingularBroyden p(5);
  const Vector x = p.initial_point();
  EXPECT_DOUBLE_EQ(p.residual_component(0, x), 0.0);
  EXPECT_DOUBLE_EQ(p.residual_component(2, x), 0.25);
  EXPECT_DOUBLE_EQ(p.residual_component(4, x), 0.25);
  // 2 g row, g = 0.5
  EXPECT_EQ(p.jacobian_row(2, x).to_dense(5), (Vector{0, -1, 5, -2, 0}));
  EXPECT_EQ(p.jacobian_row(4, x).to_dense(5), (Vector{0, 0, 0, 1, -5}));
}

TEST(Nondquar, HandValuesAtStart) {
  const Nondquar p(4);
  const Vector x = p.initial_point();
  EXPECT_DOUBLE_EQ(p.residual_component(0, x), 0.125);
  EXPECT_DOUBLE_EQ(p.residual_component(1, x), -0.375);
  EXPECT_DOUBLE_EQ(p.residual_component(2, x), -0.375);
  EXPECT_DOUBLE_EQ(p.residual_component(3, x), 0.125);
  EXPECT_EQ(p.jacobian_row(1, x).to_dense(4), (Vector{1, -3.5, 1, 0}));
}

TEST(HEquation, ValuesAtZero) {
  const HEquation p(10, 0.9);
  const Vector x = p.initial_point();
  for (std::size_t i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(p.residual_component(i, x), -1.0);
  const HEquationClassical pc(10, 0.9);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(pc.residual_component(i, x), -1.0);
  // at x = 1 the affine form gives 1 - (1 - c/(2n) sum_j w_ij)
  const Vector ones(10, 1.0);
  double s = 0.0;
  for (std::size_t j = 0; j < 10; ++j) s += p.weight(3, j);
  EXPECT_NEAR(p.residual_component(3, ones), 0.9 / 20.0 * s, 1e-15);
}

TEST(HEquation, WeightsAreComplementary) {
  const HEquation p(17, 0.5);
  for (std::size_t i = 0; i < 17; ++i) {
    EXPECT_DOUBLE_EQ(p.weight(i, i), 0.5);
    for (std::size_t j = 0; j < 17; ++j) EXPECT_NEAR(p.weight(i, j) + p.weight(j, i), 1.0, 1e-15);
  }
}

TEST(Problems, SparsityStructure) {
  const std::size_t n = 8;
  const Vector x(n, 0.3);
  for (const auto& p : {make_problem({BenchmarkName::SINGULAR_BROYDEN, n}),
                        make_problem({BenchmarkName::BROYDEN_TRIDIAGONAL, n}),
                        make_problem({BenchmarkName::NONDQUAR, n})}) {
    EXPECT_EQ(p->jacobian_row(0, x).nnz(), 2u);
    EXPECT_EQ(p->jacobian_row(4, x).nnz(), 3u);
    EXPECT_EQ(p->jacobian_row(n - 1, x).nnz(), 2u);
  }
  EXPECT_EQ(make_problem({BenchmarkName::H_EQUATION, n})->jacobian_row(2, x).nnz(), n);
  EXPECT_EQ(make_problem({BenchmarkName::H_EQUATION_CLASSICAL, n})->jacobian_row(2, x).nnz(), n);
}

TEST(Problems, AnalyticRowsMatchFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (BenchmarkName b : {BenchmarkName::SINGULAR_BROYDEN, BenchmarkName::BROYDEN_TRIDIAGONAL,
                          BenchmarkName::H_EQUATION, BenchmarkName::H_EQUATION_CLASSICAL, BenchmarkName::NONDQUAR}) {
    const auto p = make_problem({b, 20, 0.9});
    for (int t = 0; t < 30; ++t) {
      const Vector x = oracle::ball_point(p->initial_point(), 1.0, rng);
      for (std::size_t i = 0; i < p->m(); ++i) {
        const Vector a = p->jacobian_row(i, x).to_dense(p->n());
        const Vector fd = finite_difference_row(*p, i, x).to_dense(p->n());
        EXPECT_LT(oracle::rel_err(a, fd), 1e-6) << to_string(b) << " row " << i;
      }
    }
  }
}

TEST(Problems, ConstructionErrors) {
  EXPECT_THROW(BroydenTridiagonal(1), std::invalid_argument);
  EXPECT_THROW(Nondquar(0), std::invalid_argument);
  EXPECT_THROW(HEquation(10, 1.0), std::invalid_argument);
  EXPECT_THROW(HEquation(10, 0.0), std::invalid_argument);
  EXPECT_THROW(AffineProblem(2, 2, Vector(3), Vector(2), Vector(2)), std::invalid_argument);
}

TEST(Problems, NamesRoundTrip) {
  for (BenchmarkName b : {BenchmarkName::SINGULAR_BROYDEN, BenchmarkName::BROYDEN_TRIDIAGONAL,
                          BenchmarkName::H_EQUATION, BenchmarkName::H_EQUATION_CLASSICAL, BenchmarkName::NONDQUAR}) {
    EXPECT_EQ(parse_benchmark(to_string(b)), b);
    EXPECT_EQ(make_problem({b, 10})->name(), to_string(b));
  }
  EXPECT_FALSE(parse_benchmark("rosenbrock").has_value());
}
