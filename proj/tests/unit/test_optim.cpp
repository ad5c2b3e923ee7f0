#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cacherec/error.hpp"
#include "cacherec/optim.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

using namespace cacherec;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

const Matrix kSwap = mat({{0, 1}, {1, 0}});

OptimInputs swap_inputs(double a, const Vector& x) {
  return OptimInputs(SimilarityMatrix(mat({{0, 0.8}, {0.6, 0}})),
                     RequestModel(PopularityVector(vec({0.5, 0.5})), a, 1), CostVector(x), 0.5);
}

// One-step objective evaluated without library helpers.
double one_step(const Matrix& y, const OptimInputs& in) {
  const double a = in.model().follow_prob();
  const Vector& p0 = in.model().popularity().values();
  const Vector& x = in.cost().values();
  return a * p0.dot(y * x) + (1.0 - a) * p0.dot(x);
}

// Per-row vertex enumeration of the myopic LP.
Matrix myopic_oracle(const OptimInputs& in) {
  const Index k = in.size();
  const int n = in.model().list_size();
  Matrix y(k, k);
  for (Index i = 0; i < k; ++i) {
    const oracle::Problem p = oracle::row_polytope(in.cost().values(), in.similarity().values().row(i).transpose(),
                                                   n, int(i), in.quality()[i]);
    const oracle::Answer a = oracle::lp_vertices(p);
    EXPECT_TRUE(a.found);
    y.row(i) = a.point.transpose();
  }
  return y;
}

void expect_feasible(const RecMatrix& y, const OptimInputs& in, double tol = 1e-5) {
  EXPECT_TRUE(validate_rec_matrix(y.values(), y.list_size(), tol).empty());
  EXPECT_GE((quality_of(y, in.similarity()) - in.quality()).minCoeff(), -tol);
}

}  // namespace

TEST(OptimInputs, RejectsUnreachableQuality) {
  try {
    OptimInputs(SimilarityMatrix(mat({{0, 0.3, 0.2}, {0.3, 0, 1}, {0.2, 1, 0}})),
                RequestModel(PopularityVector(vec({0.4, 0.3, 0.3})), 0.5, 1), CostVector(vec({1, 0, 1})),
                0.5);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("row 0"), std::string::npos) << e.what();
  }
}

TEST(Myopic, TwoContentsHaveOneFeasibleMatrix) {
  const RecMatrix y = myopic_solve(swap_inputs(0.7, vec({1, 0})));
  EXPECT_LE((y.values() - kSwap).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Myopic, InactiveQualityPicksCheapestLowestIndex) {
  const OptimInputs in(SimilarityMatrix(Matrix::Zero(3, 3)),
                       RequestModel(PopularityVector(vec({0.3, 0.3, 0.4})), 0.6, 1),
                       CostVector(vec({1, 0, 1})), 0.0);
  const Matrix y = myopic_solve(in).values();
  EXPECT_LE((y - mat({{0, 1, 0}, {1, 0, 0}, {0, 1, 0}})).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Myopic, BindingQualityMatchesVertexOracle) {
  // Content 1 is cached but poorly related to everything, so q binds.
  const SimilarityMatrix u(mat({{0, 0.1, 0.9, 0.7}, {0.1, 0, 0.8, 0.6}, {0.9, 0.8, 0, 0.5}, {0.7, 0.6, 0.5, 0}}));
  const OptimInputs in(u, RequestModel(PopularityVector(vec({0.4, 0.3, 0.2, 0.1})), 0.8, 2),
                       CostVector(vec({1, 0, 1, 1})), 0.6);
  const Matrix expected = myopic_oracle(in);
  const RecMatrix y = myopic_solve(in);
  expect_feasible(y, in);
  EXPECT_NEAR(one_step(y.values(), in), one_step(expected, in), 1e-12);
  // Unconstrained rows 0 and 3 would put 1/2 on content 1.
  EXPECT_LT(y(0, 1), 0.5);
  EXPECT_NEAR(quality_of(y, u)[0], 0.6, 1e-9);
}

TEST(Myopic, RandomInstancesMatchVertexOracle) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 20; ++t) {
    const int k = 3 + t % 4;
    const int n = 1 + t % 2;
    const oracle::Mat u = oracle::random_similarity(k, rng);
    std::vector<double> best(k);
    for (int i = 0; i < k; ++i) {
      Vector row = u.row(i).transpose();
      std::sort(row.data(), row.data() + k, std::greater<>());
      best[std::size_t(i)] = row.head(n).mean();
    }
    const double q = 0.8 * *std::min_element(best.begin(), best.end());
    Vector x = Vector::Ones(k);
    x[t % k] = 0.0;
    const OptimInputs in(SimilarityMatrix(Matrix(u)),
                         RequestModel(PopularityVector(oracle::random_popularity(k, rng)), 0.7, n),
                         CostVector(x), q);
    const RecMatrix y = myopic_solve(in);
    expect_feasible(y, in, 1e-9);
    EXPECT_NEAR(myopic_objective(y.values(), in), one_step(myopic_oracle(in), in), 1e-10);
  }
}

TEST(Myopic, RowDecompositionMatchesJointLp) {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 6; ++t) {
    const int k = 4 + t % 3, n = 2;
    const oracle::Mat u = oracle::random_similarity(k, rng);
    Vector x = Vector::Ones(k);
    x.head(2).setZero();
    const OptimInputs in(SimilarityMatrix(Matrix(u)),
                         RequestModel(PopularityVector(oracle::random_popularity(k, rng)), 0.8, n),
                         CostVector(x), 0.3);
    // All K^2 entries as one LP with explicit constraint rows.
    const Index dim = Index(k) * k;
    QpProblem p;
    p.dimension = dim;
    p.linear = Vector(dim);
    p.eq_matrix = Matrix::Zero(k, dim);
    p.eq_rhs = Vector::Ones(k);
    p.ineq_matrix = Matrix::Zero(k, dim);
    p.ineq_rhs = Vector::Constant(k, 0.3);
    p.lower = Vector::Zero(dim);
    p.upper = Vector::Constant(dim, 1.0 / n);
    const double a = in.model().follow_prob();
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        p.linear[i * k + j] = a * in.model().popularity()[i] * x[j];
        p.eq_matrix(i, i * k + j) = 1.0;
        p.ineq_matrix(i, i * k + j) = u(i, j);
      }
      p.upper[i * k + i] = 0.0;
    }
    const QpSolution joint = solve_qp(p, 1e-10, 200000);
    ASSERT_EQ(joint.status, QpStatus::kOptimal);
    const double constant = (1.0 - a) * in.model().popularity().values().dot(x);
    EXPECT_NEAR(myopic_objective(myopic_solve(in).values(), in), joint.objective + constant, 1e-8);
  }
}

TEST(Myopic, NeverWorseThanTopSimilarity) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const OptimInputs in = scenarios::synthetic_instance(40, 3, 6.0, 100 + t, 0.7, 0.8, 0.6, 3);
    const RecMatrix top = top_similarity_rec(in.similarity(), 3);
    EXPECT_LE(myopic_objective(myopic_solve(in).values(), in), myopic_objective(top.values(), in) + 1e-12);
  }
}

TEST(Myopic, ScaleInvariantInCost) {
  const OptimInputs in = scenarios::synthetic_instance(30, 2, 5.0, 9, 0.8, 0.8, 0.7, 2);
  const OptimInputs scaled(in.similarity(), in.model(), CostVector(3.5 * in.cost().values()), in.quality());
  EXPECT_LE((myopic_solve(in).values() - myopic_solve(scaled).values()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Myopic, ThreadCountDoesNotChangeResult) {
  const OptimInputs in = scenarios::synthetic_instance(60, 3, 6.0, 2, 0.8, 0.8, 0.8, 3);
  EXPECT_EQ(myopic_solve(in, 1).values(), myopic_solve(in, 4).values());
}

TEST(TopSimilarity, PicksLargestWithLowestIndexTies) {
  const SimilarityMatrix u(mat({{0, 1, 1, 0.5}, {1, 0, 0.2, 0.2}, {1, 0.2, 0, 0.9}, {0.5, 0.2, 0.9, 0}}));
  const Matrix y = top_similarity_rec(u, 2).values();
  EXPECT_LE((y - mat({{0, 0.5, 0.5, 0}, {0.5, 0, 0.5, 0}, {0.5, 0, 0, 0.5}, {0.5, 0, 0.5, 0}})).cwiseAbs().maxCoeff(),
            1e-15);
}

TEST(ResidualC, VanishesAtStationaryVector) {
  std::mt19937_64 rng(100);
  for (int t = 0; t < 100; ++t) {
    const int k = 5 + t % 20;
    const RecMatrix y(oracle::random_rec_matrix(k, 2, rng), 2);
    const RequestModel m(PopularityVector(oracle::random_popularity(k, rng)), 0.2 + 0.7 * (t % 4) / 3.0, 2);
    EXPECT_LE(residual_c(stationary_direct(y, m).values(), y.values(), m).norm(), 1e-10);
  }
}

TEST(ResidualC, Examples) {
  const RequestModel zero(PopularityVector(vec({0.3, 0.7})), 0.0, 1);
  EXPECT_LE(residual_c(vec({0.3, 0.7}), kSwap, zero).cwiseAbs().maxCoeff(), 1e-16);
  const RequestModel half(PopularityVector(vec({0.5, 0.5})), 0.5, 1);
  const Vector c = residual_c(vec({1, 0}), kSwap, half);
  EXPECT_NEAR(c[0], 0.75, 1e-15);
  EXPECT_NEAR(c[1], -0.75, 1e-15);
}

TEST(AugmentedLagrangian, Examples) {
  const OptimInputs in = swap_inputs(0.5, vec({1, 0}));
  EXPECT_DOUBLE_EQ(augmented_lagrangian(vec({1, 0}), kSwap, vec({1, 1}), 2.0, in), 2.125);
  EXPECT_DOUBLE_EQ(augmented_lagrangian(vec({1, 0}), kSwap, Vector::Zero(2), 0.0, in), 1.0);
  // At the stationary point the penalty and multiplier terms vanish.
  EXPECT_NEAR(augmented_lagrangian(vec({0.5, 0.5}), kSwap, vec({3, -2}), 7.0, in), 0.5, 1e-15);
}

TEST(PiStep, LargePenaltyRecoversStationaryVector) {
  const OptimInputs in = scenarios::synthetic_instance(20, 2, 5.0, 3, 0.8, 0.8, 0.5, 2);
  const RecMatrix y = top_similarity_rec(in.similarity(), 2);
  const Vector pi = cars_pi_step(y, Vector::Zero(20), 1e6, in, {1e-12, 200000}).values();
  EXPECT_LE((pi - stationary_direct(y, in.model()).values()).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(PiStep, ZeroPenaltyIsVertexOfCheapestContent) {
  const OptimInputs in(SimilarityMatrix(mat({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}})),
                       RequestModel(PopularityVector(vec({0.3, 0.3, 0.4})), 0.6, 1),
                       CostVector(vec({0.7, 0.2, 0.9})), 0.0);
  const RecMatrix y = top_similarity_rec(in.similarity(), 1);
  const Vector pi = cars_pi_step(y, Vector::Zero(3), 0.0, in).values();
  EXPECT_LE((pi - vec({0, 1, 0})).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(PiStep, NoFollowingDrivesPiToPopularity) {
  const OptimInputs in(SimilarityMatrix(mat({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}})),
                       RequestModel(PopularityVector(vec({0.2, 0.5, 0.3})), 0.0, 1),
                       CostVector(vec({1, 0, 1})), 0.0);
  const RecMatrix y = top_similarity_rec(in.similarity(), 1);
  const Vector pi = cars_pi_step(y, Vector::Zero(3), 1e6, in, {1e-12, 200000}).values();
  EXPECT_LE((pi - vec({0.2, 0.5, 0.3})).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(PiStep, BiasMultipliersMakeStationaryVectorOptimal) {
  const OptimInputs in = scenarios::synthetic_instance(25, 2, 5.0, 6, 0.8, 0.8, 0.5, 2);
  const RecMatrix y = top_similarity_rec(in.similarity(), 2);
  const Vector lambda = bias_multipliers(y, in);
  const Vector exact = stationary_direct(y, in.model()).values();
  for (double rho : {0.1, 1.0, 10.0}) {
    const Vector pi = cars_pi_step(y, lambda, rho, in, {1e-12, 200000}).values();
    EXPECT_LE((pi - exact).cwiseAbs().maxCoeff(), 1e-6) << "rho=" << rho;
  }
}

TEST(YStep, SingletonFeasibleSet) {
  const OptimInputs in = swap_inputs(0.8, vec({1, 0}));
  const RecMatrix y = cars_y_step(vec({0.9, 0.1}), vec({2, -1}), 3.0, in);
  EXPECT_LE((y.values() - kSwap).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(YStep, ZeroMultipliersAndPenaltyReturnFeasible) {
  const OptimInputs in = scenarios::synthetic_instance(15, 2, 5.0, 8, 0.8, 0.8, 0.6, 1);
  const RecMatrix y = cars_y_step(Vector::Constant(15, 1.0 / 15), Vector::Zero(15), 0.0, in);
  expect_feasible(y, in);
}

TEST(YStep, ConcentratedPiReducesToOneRow) {
  std::mt19937_64 rng(12);
  const int k = 5, n = 2, r = 3;
  const oracle::Mat u = oracle::random_similarity(k, rng);
  const double q = 0.3;
  const double a = 0.8, rho = 2.0;
  const Vector p0 = oracle::random_popularity(k, rng);
  const OptimInputs in(SimilarityMatrix(Matrix(u)), RequestModel(PopularityVector(p0), a, n),
                       CostVector(vec({0, 1, 1, 0, 1})), q);
  Vector pi = Vector::Zero(k);
  pi[r] = 1.0;
  const Vector lambda = vec({0.3, -0.2, 0.5, 0.1, -0.4});
  const RecMatrix y = cars_y_step(pi, lambda, rho, in, {1e-12, 200000});
  expect_feasible(y, in);

  // c = d - a y_r with d = pi - (1 - a) p0: minimize lambda'c + rho/2 |c|^2.
  const Vector d = pi - (1.0 - a) * p0;
  oracle::Problem ref = oracle::row_polytope(-a * (lambda + rho * d), u.row(r).transpose(), n, r, q);
  ref.q = rho * a * a * oracle::Mat::Identity(k, k);
  const oracle::Answer best = oracle::qp_active_sets(ref);
  ASSERT_TRUE(best.found);
  EXPECT_LE((y.values().row(r).transpose() - best.point).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SelectBest, Examples) {
  EXPECT_EQ(select_best({5, 3, 4}), 1u);
  EXPECT_EQ(select_best({2}), 0u);
  EXPECT_EQ(select_best({4, 3, 2, 1}), 3u);
  EXPECT_EQ(select_best({1, 0.5, 0.5}), 1u);
  EXPECT_THROW(select_best({}), InvalidArgument);
}

TEST(CarsSolve, TwoContents) {
  const OptimInputs in = swap_inputs(0.8, vec({1, 0}));
  const CarsResult r = cars_solve(in, CarsConfig{});
  EXPECT_LE((r.best_y.values() - kSwap).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(r.best_cost, 0.5, 1e-12);
}

TEST(CarsSolve, MatchesDeterministicEnumeration) {
  std::mt19937_64 rng(2718);
  for (double q : {0.0, 0.5}) {
    for (int t = 0; t < 5; ++t) {
      oracle::Mat u;
      const OptimInputs in = scenarios::tiny_instance(rng, 0.8, q, &u);
      const oracle::DeterministicBest best =
          oracle::best_deterministic(u, in.model().popularity().values(), in.cost().values(), 0.8, q);
      ASSERT_TRUE(best.found);
      const CarsResult r = cars_solve(in, scenarios::tuned_cars());
      EXPECT_LE(r.best_cost, best.cost + 1e-4) << "q=" << q << " instance " << t;
      expect_feasible(r.best_y, in);
    }
  }
}

TEST(CarsSolve, TraceInvariants) {
  const OptimInputs in = scenarios::synthetic_instance(40, 3, 6.0, 21, 0.8, 0.8, 0.8, 2);
  for (const CarsConfig& cfg : {CarsConfig{}, scenarios::tuned_cars()}) {
    const CarsResult r = cars_solve(in, cfg);
    ASSERT_FALSE(r.cost_trace.empty());
    EXPECT_LE(int(r.cost_trace.size()), cfg.max_iter + 1);
    EXPECT_DOUBLE_EQ(r.best_cost, *std::min_element(r.cost_trace.begin(), r.cost_trace.end()));
    EXPECT_LE(r.best_cost, r.cost_trace.front());
    for (std::size_t i = 0; i < r.cost_trace.size(); ++i) {
      EXPECT_TRUE(std::isfinite(r.cost_trace[i]));
      if (i > 0) EXPECT_TRUE(std::isfinite(r.residual_trace[i]));
    }
    EXPECT_NEAR(expected_cost(stationary_direct(r.best_y, in.model()), in.cost()), r.best_cost, 1e-12);
    expect_feasible(r.best_y, in);
    EXPECT_TRUE(r.failure.empty()) << r.failure;
  }
}

TEST(CarsSolve, ConvergedRunHasSmallCostGap) {
  std::mt19937_64 rng(5);
  const OptimInputs in = scenarios::tiny_instance(rng, 0.8, 0.0);
  CarsConfig cfg;
  cfg.max_iter = 200;
  const CarsResult r = cars_solve(in, cfg);
  ASSERT_TRUE(r.converged);
  const CarsIterate& last = r.iterates.back();
  EXPECT_LE(last.residual_sq, cfg.acc1);
  EXPECT_LE(std::abs(last.actual_cost - last.virtual_cost), std::sqrt(cfg.acc1));
}

TEST(CarsSolve, ExplicitLambdaOverridesInit) {
  const OptimInputs in = scenarios::synthetic_instance(20, 2, 5.0, 1, 0.8, 0.8, 0.6, 1);
  CarsConfig a = scenarios::tuned_cars();
  a.max_iter = 3;
  CarsConfig b = a;
  b.lambda0 = Vector::Zero(20);
  b.lambda_init = LambdaInit::kBias;
  CarsConfig c = a;
  c.lambda_init = LambdaInit::kZero;
  EXPECT_EQ(cars_solve(in, b).cost_trace, cars_solve(in, c).cost_trace);
}

TEST(CarsSolve, TraceCsvColumns) {
  const OptimInputs in = swap_inputs(0.8, vec({1, 0}));
  CarsConfig cfg;
  cfg.max_iter = 2;
  std::ostringstream out;
  write_cars_trace(out, cars_solve(in, cfg));
  std::istringstream lines(out.str());
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(header, "iter,actual_cost,virtual_cost,residual_sq,lambda_norm");
  EXPECT_EQ(first.rfind("0,0.5,,,", 0), 0u) << first;
}

TEST(CarsConfig, Validation) {
  CarsConfig cfg;
  cfg.rho = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = CarsConfig{};
  cfg.acc2 = -1.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = CarsConfig{};
  cfg.max_iter = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}
