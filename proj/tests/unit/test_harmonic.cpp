#include <gtest/gtest.h>

#include <Eigen/SparseLU>

#include <array>
#include <cstdlib>
#include <map>
#include <random>

#include "refwalk/harmonic.hpp"
#include "refwalk/zoo.hpp"

using namespace refwalk;

namespace {

std::vector<int> random_subset(std::mt19937_64& rng, int n, int k) {
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(k));
  return all;
}

std::vector<double> random_values(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(-2.0, 3.0);
  std::vector<double> out(k);
  for (double& x : out) x = u(rng);
  return out;
}

}  // namespace

TEST(SolveFreeDirichlet, PathMidpoint) {
  const WeightedGraph p = zoo::path_graph(3);
  const auto f = solve_free_dirichlet({&p, {0, 2}, {0.0, 1.0}});
  EXPECT_NEAR(f[1], 0.5, 1e-12);
  EXPECT_EQ(f[0], 0.0);
  EXPECT_EQ(f[2], 1.0);
}

TEST(SolveFreeDirichlet, AllPinnedIsIdentity) {
  const WeightedGraph k = zoo::complete_graph(4);
  const std::vector<double> phi{1.0, -2.0, 0.5, 3.0};
  EXPECT_EQ(solve_free_dirichlet({&k, {0, 1, 2, 3}, phi}), phi);
}

TEST(SolveFreeDirichlet, SingletonGivesConstant) {
  std::mt19937_64 rng(3);
  const WeightedGraph g = zoo::random_connected(rng, 9);
  const auto f = solve_free_dirichlet({&g, {4}, {7.0}});
  for (double x : f) EXPECT_NEAR(x, 7.0, 1e-10);
}

TEST(SolveFreeDirichlet, ResidualWithinTolerance) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const WeightedGraph g = zoo::random_connected(rng, 12);
    const auto A = random_subset(rng, 12, 3);
    const auto f = solve_free_dirichlet({&g, A, random_values(rng, 3)}, 1e-10);
    EXPECT_LE(harmonic_residual(g, A, f), 1e-10);
  }
}

TEST(SolveFreeDirichlet, LargeGraphUsesIterativeSolver) {
  // 30x30 grid: 898 unknowns, above the dense threshold
  std::vector<Edge> edges;
  const int n = 30;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i + 1 < n) edges.push_back({i * n + j, (i + 1) * n + j, 1.0});
      if (j + 1 < n) edges.push_back({i * n + j, i * n + j + 1, 1.0});
    }
  const WeightedGraph g(n * n, edges);
  const std::vector<int> A{0, n * n - 1};
  const PinnedLaplacian lap(g, A, {}, 1);
  EXPECT_EQ(lap.backend(), PinnedLaplacian::Backend::Iterative);
  const auto f = solve_free_dirichlet({&g, A, {0.0, 1.0}}, 1e-9);
  EXPECT_LE(harmonic_residual(g, A, f), 1e-9);
  // antisymmetry of the grid about its anti-diagonal centre
  EXPECT_NEAR(f[n * (n / 2) + n / 2] + f[n * (n / 2 - 1) + n / 2 - 1], 1.0, 1e-6);
}

TEST(SolveFreeDirichlet, RejectsEmptyBoundary) {
  const WeightedGraph p = zoo::path_graph(3);
  EXPECT_THROW(solve_free_dirichlet({&p, {}, {}}), ConstructionError);
}

TEST(HarmonicProperties, MaximumPrinciple) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 4 + trial % 9;
    const WeightedGraph g = zoo::random_connected(rng, n);
    const auto A = random_subset(rng, n, 1 + trial % 3);
    const auto phi = random_values(rng, A.size());
    const auto f = solve_free_dirichlet({&g, A, phi});
    const auto [lo, hi] = std::minmax_element(phi.begin(), phi.end());
    for (double x : f) {
      EXPECT_GE(x, *lo - 1e-9);
      EXPECT_LE(x, *hi + 1e-9);
    }
  }
}

TEST(HarmonicProperties, Linearity) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const WeightedGraph g = zoo::random_connected(rng, 10);
    const auto A = random_subset(rng, 10, 3);
    const auto phi = random_values(rng, 3);
    const auto psi = random_values(rng, 3);
    const double a = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
    std::vector<double> mix(3);
    for (int i = 0; i < 3; ++i) mix[i] = a * phi[i] + psi[i];
    const auto f = solve_free_dirichlet({&g, A, phi});
    const auto h = solve_free_dirichlet({&g, A, psi});
    const auto m = solve_free_dirichlet({&g, A, mix});
    for (int v = 0; v < 10; ++v) EXPECT_NEAR(m[v], a * f[v] + h[v], 1e-9);
  }
}

TEST(HarmonicProperties, CompatibilityWithLargerBoundary) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const WeightedGraph g = zoo::random_connected(rng, 11);
    auto B = random_subset(rng, 11, 6);
    const std::vector<int> A(B.begin(), B.begin() + 2);
    const auto f = solve_free_dirichlet({&g, A, random_values(rng, 2)});
    std::vector<double> restricted;
    for (int b : B) restricted.push_back(f[b]);
    const auto f2 = solve_free_dirichlet({&g, B, restricted});
    for (int v = 0; v < 11; ++v) EXPECT_NEAR(f2[v], f[v], 1e-9);
  }
}

TEST(HarmonicProperties, SingleVertexPerturbationRaisesEnergy) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const WeightedGraph g = zoo::random_connected(rng, 8);
    const auto A = random_subset(rng, 8, 2);
    const auto f = solve_free_dirichlet({&g, A, random_values(rng, 2)}, 1e-12);
    const double e0 = g.energy(f);
    for (int x = 0; x < 8; ++x) {
      if (std::find(A.begin(), A.end(), x) != A.end()) continue;
      for (double eps : {1e-3, 1e-6}) {
        for (double sign : {-1.0, 1.0}) {
          auto p = f;
          p[x] += sign * eps;
          // the increase is exactly π(x)ε² at a harmonic point
          EXPECT_GT(g.energy(p), e0) << "x=" << x << " eps=" << eps;
          EXPECT_NEAR(g.energy(p) - e0, g.pi(x) * eps * eps, 1e-3 * g.pi(x) * eps * eps + 1e-14);
        }
      }
    }
  }
}

TEST(HarmonicMeasureRows, ProbabilityVectors) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const WeightedGraph g = zoo::random_connected(rng, 9);
    const auto A = random_subset(rng, 9, 1 + trial % 4);
    std::vector<int> sources(9);
    for (int i = 0; i < 9; ++i) sources[i] = i;
    const Eigen::MatrixXd hm = harmonic_measure_rows(g, A, sources);
    for (Eigen::Index i = 0; i < hm.rows(); ++i) {
      EXPECT_NEAR(hm.row(i).sum(), 1.0, 1e-10);
      EXPECT_GE(hm.row(i).minCoeff(), -1e-12);
      EXPECT_LE(hm.row(i).maxCoeff(), 1.0 + 1e-12);
    }
  }
}

TEST(HarmonicMeasureRows, DirectAndAdjointAgree) {
  std::mt19937_64 rng(16);
  const WeightedGraph g = zoo::random_connected(rng, 12);
  const std::vector<int> A{0, 1, 2, 3, 4};
  // one source: adjoint route; all sources: direct route
  std::vector<int> all{5, 6, 7, 8, 9, 10, 11};
  const Eigen::MatrixXd many = harmonic_measure_rows(g, A, all);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const std::vector<int> one{all[i]};
    const Eigen::MatrixXd single = harmonic_measure_rows(g, A, one);
    EXPECT_LE((single.row(0) - many.row(static_cast<Eigen::Index>(i))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CycleOrthogonality, MinimizerOnFourCycle) {
  const WeightedGraph c4 = zoo::cycle_graph(4);
  const std::vector<int> A{0, 2};
  const auto h = solve_free_dirichlet({&c4, A, {0.0, 1.0}});
  const CycleReport r = cycle_orthogonality_check(c4, A, h);
  EXPECT_LE(r.max_inner_product, 1e-10);
  EXPECT_LE(r.energy_gap, 1e-10);
  EXPECT_EQ(r.directions_checked, 2);
}

TEST(CycleOrthogonality, NonHarmonicIsReported) {
  const WeightedGraph c4 = zoo::cycle_graph(4);
  const std::vector<double> f{0.0, 0.9, 1.0, 0.1};
  const CycleReport r = cycle_orthogonality_check(c4, std::vector<int>{0, 2}, f);
  EXPECT_GT(r.max_inner_product, 1e-3);
  EXPECT_GT(r.energy_gap, 1e-3);
}

TEST(CycleOrthogonality, ConstantOnTriangle) {
  const WeightedGraph k3 = zoo::complete_graph(3);
  const std::vector<int> A{1};
  const auto h = solve_free_dirichlet({&k3, A, {2.5}});
  const CycleReport r = cycle_orthogonality_check(k3, A, h);
  EXPECT_LE(r.max_inner_product, 1e-12);
}

TEST(CycleOrthogonality, RandomMinimizersPass) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 15; ++trial) {
    const WeightedGraph g = zoo::random_connected(rng, 10, 0.5);
    const auto A = random_subset(rng, 10, 3);
    const auto h = solve_free_dirichlet({&g, A, random_values(rng, 3)}, 1e-12);
    EXPECT_LE(cycle_orthogonality_check(g, A, h).max_inner_product, 1e-9);
  }
}

TEST(MinEnergyExtension, FiniteSegmentMatchesDirectSolve) {
  const WeightedGraph p = zoo::path_graph(7);
  const GraphOracle o = zoo::finite(p);
  const std::vector<VertexKey> A{0, 6}, W{1, 3, 5};
  const std::vector<double> phi{0.0, 1.0};
  const ExtensionResult r = min_energy_extension(o, Exhaustion::balls(o), A, phi, W);
  const auto direct = solve_free_dirichlet({&p, {0, 6}, phi});
  for (std::size_t i = 0; i < W.size(); ++i) EXPECT_NEAR(r.values[i], direct[W[i]], 1e-10);
  EXPECT_LE(r.achieved_tolerance, 1e-12);
}

TEST(MinEnergyExtension, TreeConstant) {
  const GraphOracle t = zoo::regular_tree(2);
  const Exhaustion e = Exhaustion::balls(t);
  const std::vector<VertexKey> A{0}, W{1, 5, 20, 40};
  const std::vector<double> phi{1.0};
  for (int n = 5; n <= 8; ++n) {
    const Eigen::MatrixXd v = extension_at_level(t, e, A, Eigen::MatrixXd::Ones(1, 1), W, n);
    for (Eigen::Index i = 0; i < v.rows(); ++i) EXPECT_NEAR(v(i, 0), 1.0, 1e-10);
  }
  const ExtensionResult r = min_energy_extension(t, e, A, phi, W);
  for (double x : r.values) EXPECT_NEAR(x, 1.0, 1e-10);
}

namespace {

// Free-boundary Dirichlet solve on the l1 ball of radius R in Z^3, assembled from coordinates.
double lattice_ball_solve(int R, const std::array<int, 3>& target) {
  std::map<std::array<int, 3>, int> index;
  std::vector<std::array<int, 3>> points;
  for (int x = -R; x <= R; ++x)
    for (int y = -R; y <= R; ++y)
      for (int z = -R; z <= R; ++z)
        if (std::abs(x) + std::abs(y) + std::abs(z) <= R) {
          index[{x, y, z}] = static_cast<int>(points.size());
          points.push_back({x, y, z});
        }
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  const int a0 = index.at({0, 0, 0});
  const int a1 = index.at({1, 0, 0});
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == a0 || i == a1) {
      L(i, i) = 1.0;
      b[i] = i == a1 ? 1.0 : 0.0;
      continue;
    }
    for (int axis = 0; axis < 3; ++axis)
      for (int s : {-1, 1}) {
        auto q = points[i];
        q[axis] += s;
        auto it = index.find(q);
        if (it == index.end()) continue;
        L(i, i) += 1.0;
        L(i, it->second) -= 1.0;
      }
  }
  const Eigen::VectorXd f = L.fullPivLu().solve(b);
  return f[index.at(target)];
}

}  // namespace

TEST(MinEnergyExtension, LatticeLevelMatchesIndependentBallSolve) {
  const GraphOracle z = zoo::lattice_zd(3);
  const Exhaustion e = Exhaustion::balls(z);
  const std::vector<VertexKey> A{*z.parse("0,0,0"), *z.parse("1,0,0")};
  const std::vector<VertexKey> W{*z.parse("2,0,0")};
  Eigen::MatrixXd phi(2, 1);
  phi << 0.0, 1.0;
  const double oracle = lattice_ball_solve(8, {2, 0, 0});
  const Eigen::MatrixXd v = extension_at_level(z, e, A, phi, W, 8, {1e-12, 500, 0});
  EXPECT_NEAR(v(0, 0), oracle, 1e-6);
  EXPECT_NEAR(oracle, 0.634357872028, 1e-9);
}

TEST(MinEnergyExtension, LatticeCauchyStopsAndReportsLevels) {
  const GraphOracle z = zoo::lattice_zd(3);
  const Exhaustion e = Exhaustion::balls(z);
  const std::vector<VertexKey> A{*z.parse("0,0,0"), *z.parse("1,0,0")};
  const std::vector<VertexKey> W{*z.parse("2,0,0")};
  const std::vector<double> phi{0.0, 1.0};
  LevelOptions opts;
  opts.tol = 1e-4;
  opts.n_max = 40;
  const ExtensionResult r = min_energy_extension(z, e, A, phi, W, opts);
  EXPECT_LT(r.achieved_tolerance, 1e-4);
  EXPECT_EQ(r.level_high - r.level_low, 2);
  EXPECT_TRUE(r.empirical_tolerance);
  // the free-boundary values decrease toward the limit from above
  EXPECT_LT(r.values[0], 0.634357872028);
  EXPECT_GT(r.values[0], 0.62);
}

TEST(MinEnergyExtension, NotCauchyCarriesIterates) {
  const GraphOracle z = zoo::lattice_zd(3);
  const Exhaustion e = Exhaustion::balls(z);
  const std::vector<VertexKey> A{*z.parse("0,0,0"), *z.parse("1,0,0")};
  const std::vector<VertexKey> W{*z.parse("2,0,0")};
  const std::vector<double> phi{0.0, 1.0};
  LevelOptions opts;
  opts.tol = 1e-6;
  opts.n_max = 8;
  try {
    min_energy_extension(z, e, A, phi, W, opts);
    FAIL() << "expected NotCauchyError";
  } catch (const NotCauchyError& err) {
    EXPECT_EQ(err.level_high(), 8);
    EXPECT_EQ(err.level_low(), 6);
    ASSERT_EQ(err.previous().size(), 1u);
    ASSERT_EQ(err.last().size(), 1u);
    EXPECT_NEAR(err.last()[0], 0.634357872028, 1e-9);
    EXPECT_GT(err.gap(), 1e-6);
  }
}

TEST(HarmonicMeasure, SingletonIsPointMass) {
  const GraphOracle t = zoo::regular_tree(3);
  const std::vector<VertexKey> A{7};
  for (VertexKey x : {VertexKey{0}, VertexKey{1}, VertexKey{7}, VertexKey{30}}) {
    const HarmonicMeasure hm = harmonic_measure(t, Exhaustion::balls(t), A, x);
    ASSERT_EQ(hm.probabilities.size(), 1u);
    EXPECT_NEAR(hm.probabilities[0], 1.0, 1e-10);
  }
}

TEST(HarmonicMeasure, SourceInsideTarget) {
  const GraphOracle z = zoo::lattice_zd(2);
  const std::vector<VertexKey> A{*z.parse("0,0"), *z.parse("1,0"), *z.parse("0,2")};
  const HarmonicMeasure hm = harmonic_measure(z, Exhaustion::balls(z), A, A[1]);
  EXPECT_EQ(hm.probabilities, (std::vector<double>{0.0, 1.0, 0.0}));
}

TEST(HarmonicMeasure, BinaryTreeMatchesDeepTruncation) {
  // independent sparse solve on the depth-12 binary tree with free boundary
  const int depth = 12;
  const int n = (1 << (depth + 1)) - 1;
  std::vector<Eigen::Triplet<double>> t;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int v = 0; v < n; ++v) {
    if (v == 0 || v == 1) {
      t.emplace_back(v, v, 1.0);
      b[v] = v == 0 ? 1.0 : 0.0;  // h = indicator of the root on A = {root, left child}
      continue;
    }
    std::vector<int> nb{(v - 1) / 2};
    if (2 * v + 2 < n) {
      nb.push_back(2 * v + 1);
      nb.push_back(2 * v + 2);
    }
    t.emplace_back(v, v, static_cast<double>(nb.size()));
    for (int u : nb) t.emplace_back(v, u, -1.0);
  }
  Eigen::SparseMatrix<double> L(n, n);
  L.setFromTriplets(t.begin(), t.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(L);
  const Eigen::VectorXd h = lu.solve(b);
  const double oracle_root = h[2];

  const GraphOracle tree = zoo::regular_tree(2);
  const std::vector<VertexKey> A{0, 1};
  const HarmonicMeasure hm = harmonic_measure(tree, Exhaustion::balls(tree), A, 2);
  EXPECT_NEAR(hm.probabilities[0], oracle_root, 1e-9);
  EXPECT_NEAR(hm.probabilities[1], 1.0 - oracle_root, 1e-9);
  EXPECT_NEAR(oracle_root, 1.0, 1e-12);  // the right subtree hangs off the root alone
}

TEST(HarmonicMeasure, TernaryTreeThreeBranches) {
  // A = {child, grandchild in the second branch, depth-3 vertex in the third}; seen from the root
  // the tree reduces to three paths of lengths 1, 2, 3 with dangling subtrees.
  const GraphOracle t = zoo::regular_tree(3);
  const std::vector<VertexKey> A{1, 7, 31};
  const HarmonicMeasure hm = harmonic_measure(t, Exhaustion::balls(t), A, 0);
  EXPECT_NEAR(hm.probabilities[0], 6.0 / 11.0, 1e-10);
  EXPECT_NEAR(hm.probabilities[1], 3.0 / 11.0, 1e-10);
  EXPECT_NEAR(hm.probabilities[2], 2.0 / 11.0, 1e-10);
}

TEST(HarmonicMeasure, LatticeRowsAreProbabilities) {
  const GraphOracle z = zoo::lattice_zd(3);
  const Exhaustion e = Exhaustion::balls(z);
  const auto A = e.level(1);
  const std::vector<VertexKey> sources{*z.parse("2,0,0"), *z.parse("1,1,0"), *z.parse("0,0,-3")};
  const Eigen::MatrixXd rows = harmonic_measures_at_level(z, e, A, sources, 6);
  check_probability_rows(rows, "test", 1e-10, 1e-12);
}
