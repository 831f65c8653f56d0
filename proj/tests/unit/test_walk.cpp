#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <array>
#include <map>
#include <random>
#include <set>

#include "refwalk/stats.hpp"
#include "refwalk/walk.hpp"
#include "refwalk/zoo.hpp"

using namespace refwalk;

namespace {

KernelOptions fixed_resolution(int level) {
  KernelOptions o;
  o.resolution_level = level;
  return o;
}

VertexKey lattice_key(std::vector<std::int64_t> x) { return zoo::LatticeCodec(static_cast<int>(x.size())).encode(x); }

// Harmonic measure on the l1 ball of radius `core` seen from `source`, solved on the l1 ball of
// radius R with free boundary. Assembled from coordinates only.
std::map<std::array<int, 3>, double> lattice_shell_row(int core, int R, std::array<int, 3> source) {
  std::map<std::array<int, 3>, int> index;
  std::vector<std::array<int, 3>> points;
  for (int x = -R; x <= R; ++x) {
    for (int y = -R; y <= R; ++y) {
      for (int z = -R; z <= R; ++z) {
        if (std::abs(x) + std::abs(y) + std::abs(z) <= R) {
          index[{x, y, z}] = static_cast<int>(points.size());
          points.push_back({x, y, z});
        }
      }
    }
  }
  auto norm = [](const std::array<int, 3>& p) { return std::abs(p[0]) + std::abs(p[1]) + std::abs(p[2]); };
  std::vector<int> unknown_pos(points.size(), -1);
  int nu = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (norm(points[i]) > core) unknown_pos[i] = nu++;
  }
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(nu, nu);
  const std::array<std::array<int, 3>, 6> steps{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (unknown_pos[i] < 0) continue;
    for (const auto& s : steps) {
      const std::array<int, 3> q{points[i][0] + s[0], points[i][1] + s[1], points[i][2] + s[2]};
      auto it = index.find(q);
      if (it == index.end()) continue;
      L(unknown_pos[i], unknown_pos[i]) += 1.0;
      if (unknown_pos[it->second] >= 0) L(unknown_pos[i], unknown_pos[it->second]) -= 1.0;
    }
  }
  Eigen::VectorXd e = Eigen::VectorXd::Zero(nu);
  e[unknown_pos[index.at(source)]] = 1.0;
  const Eigen::VectorXd g = L.ldlt().solve(e);
  std::map<std::array<int, 3>, double> row;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (unknown_pos[i] < 0) continue;
    for (const auto& s : steps) {
      const std::array<int, 3> q{points[i][0] + s[0], points[i][1] + s[1], points[i][2] + s[2]};
      if (index.count(q) && norm(q) <= core) row[q] += g[unknown_pos[i]];
    }
  }
  return row;
}

std::uint64_t tree_parent(std::uint64_t v, std::uint64_t b) { return (v - 1) / b; }

// Vertex at the k-th visit of the chain to `window` (the start counts as visit 0).
int kth_window_visit(const LevelChainKernel& k, int start, const std::vector<char>& window, int visits, Stream& rng) {
  int cur = start;
  int seen = 0;
  while (true) {
    cur = k.sample(cur, rng.uniform());
    if (window[cur] && ++seen == visits) return cur;
  }
}

}  // namespace

TEST(BuildKernel, FiniteGraphIsPlainRandomWalk) {
  std::mt19937_64 rng(5);
  const WeightedGraph g = zoo::random_connected(rng, 7);
  const GraphOracle o = zoo::finite(g);
  const LevelChainKernel k = build_kernel(o, Exhaustion::balls(o), 10);
  EXPECT_EQ(k.graph().shell_count(), 0);
  EXPECT_EQ(k.size(), 7);
  for (int i = 0; i < k.size(); ++i) {
    const int v = static_cast<int>(k.key(i));
    const auto to = k.targets(i);
    const auto p = k.probabilities(i);
    ASSERT_EQ(to.size(), g.neighbors(v).size());
    for (std::size_t j = 0; j < to.size(); ++j) {
      EXPECT_NEAR(p[j], g.conductance(v, static_cast<int>(k.key(to[j]))) / g.pi(v), 1e-15);
    }
  }
  EXPECT_LT(k.row_error(), 1e-14);
}

TEST(BuildKernel, BinaryTreeShellRowIsParent) {
  const GraphOracle t = zoo::regular_tree(2);
  const LevelChainKernel k = build_kernel(t, Exhaustion::balls(t), 1);
  ASSERT_EQ(k.graph().shell_count(), 4);
  for (int i = k.graph().core_count(); i < k.size(); ++i) {
    const auto to = k.targets(i);
    const auto p = k.probabilities(i);
    double total = 0.0;
    for (std::size_t j = 0; j < to.size(); ++j) {
      EXPECT_TRUE(k.is_core(to[j]));
      total += p[j];
    }
    EXPECT_NEAR(total, 1.0, 1e-10);
    ASSERT_EQ(to.size(), 1u);
    EXPECT_EQ(k.key(to[0]), tree_parent(k.key(i), 2));
  }
  EXPECT_LT(k.row_error(), 1e-10);
}

TEST(BuildKernel, LatticeShellRowMatchesDenseSolve) {
  const GraphOracle z = zoo::lattice_zd(3);
  const LevelChainKernel k = build_kernel(z, Exhaustion::balls(z), 2, fixed_resolution(8));
  for (const std::array<int, 3>& s : {std::array<int, 3>{3, 0, 0}, {1, 1, 1}, {-2, 0, 1}}) {
    const auto oracle = lattice_shell_row(2, 8, s);
    const int i = *k.index(lattice_key({s[0], s[1], s[2]}));
    ASSERT_FALSE(k.is_core(i));
    std::map<VertexKey, double> row;
    const auto to = k.targets(i);
    const auto p = k.probabilities(i);
    for (std::size_t j = 0; j < to.size(); ++j) row[k.key(to[j])] = p[j];
    for (const auto& [q, value] : oracle) {
      const VertexKey key = lattice_key({q[0], q[1], q[2]});
      EXPECT_NEAR(row.count(key) ? row[key] : 0.0, value, 1e-6) << z.format(key);
    }
  }
}

TEST(BuildKernel, RowsAreProbabilitiesAcrossZoo) {
  const GraphOracle b = zoo::biased_tree(2, 2.0);
  EXPECT_LT(build_kernel(b, Exhaustion::balls(b), 3).row_error(), 1e-10);
  const GraphOracle z2 = zoo::lattice_zd(2);
  EXPECT_LT(build_kernel(z2, Exhaustion::balls(z2), 3, fixed_resolution(7)).row_error(), 1e-10);
  const GraphOracle t3 = zoo::regular_tree(3);
  EXPECT_LT(build_kernel(t3, Exhaustion::balls(t3), 2).row_error(), 1e-10);
}

TEST(BuildKernel, EndPrefixesOnShellOnly) {
  const GraphOracle t = zoo::regular_tree(2);
  const LevelChainKernel k = build_kernel(t, Exhaustion::balls(t), 2);
  EXPECT_EQ(k.end_prefix(0), nullptr);
  std::set<EndPrefix> labels;
  for (int i = k.graph().core_count(); i < k.size(); ++i) {
    ASSERT_NE(k.end_prefix(i), nullptr);
    labels.insert(*k.end_prefix(i));
  }
  // each grandchild subtree below level 2 is its own complement component
  EXPECT_EQ(labels.size(), 8u);
}

TEST(BuildKernel, RejectsLowResolution) {
  const GraphOracle z = zoo::lattice_zd(3);
  EXPECT_THROW(build_kernel(z, Exhaustion::balls(z), 2, fixed_resolution(2)), ConstructionError);
}

TEST(Simulate, FiniteTransitionFrequencies) {
  std::mt19937_64 rng(11);
  const WeightedGraph g = zoo::random_connected(rng, 6);
  const GraphOracle o = zoo::finite(g);
  const LevelChainKernel k = build_kernel(o, Exhaustion::balls(o), 10);
  const Trajectory t = simulate(k, 0, StopRule::after(100000), RateSchedule{}, 2024);
  const auto seq = t.vertex_sequence();
  ASSERT_EQ(seq.size(), 100001u);
  std::vector<std::vector<std::uint64_t>> counts(6);
  for (int i = 0; i < k.size(); ++i) counts[i].assign(k.targets(i).size(), 0);
  for (std::size_t s = 0; s + 1 < seq.size(); ++s) {
    const int i = *k.index(seq[s]);
    const auto to = k.targets(i);
    const int j = *k.index(seq[s + 1]);
    const auto pos = std::find(to.begin(), to.end(), j);
    ASSERT_NE(pos, to.end());
    ++counts[i][static_cast<std::size_t>(pos - to.begin())];
  }
  for (int i = 0; i < k.size(); ++i) {
    const auto r = stats::chi_square_gof(counts[i], k.probabilities(i));
    EXPECT_GT(r.p_value, 0.01) << "state " << i;
  }
  EXPECT_TRUE(trajectory_is_consistent(t, o));
}

TEST(Simulate, HoldingTimesAreExponential) {
  const GraphOracle o = zoo::finite(zoo::path_graph(2));
  const LevelChainKernel k = build_kernel(o, Exhaustion::balls(o), 3);
  const Trajectory t = simulate(k, 0, StopRule::after(20000), RateSchedule{2.0, 1.0}, 3);
  std::vector<double> holds;
  for (const auto& e : t.events) holds.push_back(std::get<VertexVisit>(e).hold);
  const auto m = stats::mean_ci(holds);
  EXPECT_NEAR(m.mean, 0.5, 3 * m.half_width);
}

TEST(Simulate, ShellEntryFollowsShellRow) {
  const GraphOracle z = zoo::lattice_zd(3);
  const LevelChainKernel k = build_kernel(z, Exhaustion::balls(z), 1, fixed_resolution(5));
  const VertexKey start = lattice_key({1, 0, 0});
  const VertexKey shell = lattice_key({2, 0, 0});
  const int si = *k.index(shell);
  const auto to = k.targets(si);
  std::vector<std::uint64_t> counts(to.size(), 0);
  std::uint64_t passes = 0;
  for (std::uint64_t r = 0; r < 100000; ++r) {
    const Trajectory t = simulate(k, start, StopRule::after(1), RateSchedule{}, 99, r);
    ASSERT_TRUE(trajectory_is_consistent(t, z));
    const auto* pass = std::get_if<InfinityPass>(&t.events[1]);
    if (!pass) continue;
    ASSERT_EQ(pass->exit, start);
    ASSERT_EQ(std::get<VertexVisit>(t.events[2]).vertex, pass->entry);
    if (pass->shell != shell) continue;
    ++passes;
    const auto pos = std::find(to.begin(), to.end(), *k.index(pass->entry));
    ASSERT_NE(pos, to.end());
    ++counts[static_cast<std::size_t>(pos - to.begin())];
  }
  EXPECT_GT(passes, 15000u);
  EXPECT_GT(stats::chi_square_gof(counts, k.probabilities(si)).p_value, 0.01);
}

TEST(Simulate, HitRootTerminatesOnBinaryTree) {
  const GraphOracle t = zoo::regular_tree(2);
  const LevelChainKernel k = build_kernel(t, Exhaustion::balls(t), 6);
  const VertexKey deep = 100;  // depth 6
  std::array<stats::MeanEstimate, 2> est;
  for (int seed = 0; seed < 2; ++seed) {
    std::vector<double> events;
    for (std::uint64_t r = 0; r < 2000; ++r) {
      const Trajectory tr = simulate(k, deep, StopRule::hit({0}), RateSchedule{}, 1000 + seed, r);
      ASSERT_EQ(tr.vertex_sequence().back(), 0u);
      for (const auto& e : tr.events) {
        // on a tree the only way back from the shell is the vertex just exited
        if (const auto* p = std::get_if<InfinityPass>(&e)) {
          ASSERT_EQ(p->entry, p->exit);
        }
      }
      events.push_back(static_cast<double>(tr.events.size()));
    }
    est[seed] = stats::mean_ci(events);
    EXPECT_TRUE(std::isfinite(est[seed].half_width));
  }
  EXPECT_LT(std::abs(est[0].mean - est[1].mean), 3 * std::hypot(est[0].half_width, est[1].half_width));
}

TEST(Simulate, VertexOrderIndependentOfRates) {
  const GraphOracle t = zoo::regular_tree(2);
  const LevelChainKernel k = build_kernel(t, Exhaustion::balls(t), 3);
  const Trajectory a = simulate(k, 0, StopRule::after(5000), RateSchedule{1.0, 4.0}, 77, 3);
  const Trajectory b = simulate(k, 0, StopRule::after(5000), RateSchedule{0.3, 1.0}, 77, 3);
  EXPECT_EQ(a.vertex_sequence(), b.vertex_sequence());
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    ASSERT_EQ(a.events[i].index(), b.events[i].index());
    if (const auto* p = std::get_if<InfinityPass>(&a.events[i])) {
      const auto& q = std::get<InfinityPass>(b.events[i]);
      EXPECT_EQ(p->shell, q.shell);
      EXPECT_EQ(p->end_prefix, q.end_prefix);
    }
  }
}

TEST(Simulate, ReproducibleAndStreamDependent) {
  const GraphOracle z = zoo::lattice_zd(2);
  const LevelChainKernel k = build_kernel(z, Exhaustion::balls(z), 2, fixed_resolution(4));
  const VertexKey o = z.root();
  const auto a = simulate(k, o, StopRule::after(300), RateSchedule{}, 5, 0).vertex_sequence();
  const auto b = simulate(k, o, StopRule::after(300), RateSchedule{}, 5, 0).vertex_sequence();
  const auto c = simulate(k, o, StopRule::after(300), RateSchedule{}, 5, 1).vertex_sequence();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Simulate, CoverStopVisitsEverything) {
  const GraphOracle o = zoo::finite(zoo::cycle_graph(8));
  const LevelChainKernel k = build_kernel(o, Exhaustion::balls(o), 10);
  const Trajectory t = simulate(k, 0, StopRule::cover({0, 1, 2, 3, 4, 5, 6, 7}), RateSchedule{}, 1);
  const auto seq = t.vertex_sequence();
  EXPECT_EQ(std::set<VertexKey>(seq.begin(), seq.end()).size(), 8u);
  EXPECT_EQ(std::count(seq.begin(), seq.end(), seq.back()), 1);
}

TEST(Simulate, TimeoutCarriesPartialTrajectory) {
  const GraphOracle o = zoo::finite(zoo::path_graph(50));
  const LevelChainKernel k = build_kernel(o, Exhaustion::balls(o), 60);
  try {
    simulate(k, 0, StopRule::hit({49}), RateSchedule{}, 1, 0, 10);
    FAIL() << "expected a timeout";
  } catch (const SimulationTimeout& e) {
    EXPECT_EQ(e.partial().steps, 10u);
    EXPECT_EQ(e.partial().vertex_sequence().size(), 10u);
  }
}

TEST(Simulate, RejectsShellStartAndEmptyTargets) {
  const GraphOracle t = zoo::regular_tree(2);
  const LevelChainKernel k = build_kernel(t, Exhaustion::balls(t), 1);
  EXPECT_THROW(simulate(k, 3, StopRule::after(1), RateSchedule{}, 1), ConstructionError);
  EXPECT_THROW(simulate(k, 0, StopRule::hit({}), RateSchedule{}, 1), ConstructionError);
  EXPECT_THROW(simulate(k, 0, StopRule::after(1), RateSchedule{0.0, 4.0}, 1), ConstructionError);
}

TEST(WalkProperties, HittingLawMatchesHarmonicMeasure) {
  const GraphOracle z = zoo::lattice_zd(3);
  const Exhaustion e = Exhaustion::balls(z);
  const LevelChainKernel k = build_kernel(z, e, 2, fixed_resolution(5));
  const std::vector<VertexKey> A = e.level(1);
  const VertexKey x = lattice_key({2, 1, 0});
  const VertexKey xs[] = {x};
  const Eigen::MatrixXd hm = harmonic_measures_at_level(z, e, A, xs, 5, {1e-12, 500, 0});
  std::vector<char> target(static_cast<std::size_t>(k.size()), 0);
  std::map<int, std::size_t> cell;
  for (std::size_t a = 0; a < A.size(); ++a) {
    target[*k.index(A[a])] = 1;
    cell[*k.index(A[a])] = a;
  }
  std::vector<std::uint64_t> counts(A.size(), 0);
  for (std::uint64_t r = 0; r < 100000; ++r) {
    Stream rng(31, r);
    ++counts[cell.at(first_hit(k, *k.index(x), target, rng))];
  }
  std::vector<double> p(hm.row(0).data(), hm.row(0).data() + hm.cols());
  EXPECT_GT(stats::chi_square_gof(counts, p).p_value, 0.01);
}

TEST(WalkProperties, WindowVisitsStableAcrossLevels) {
  // by consistency the chain watched on V_1 has the same law at levels 2 and 4
  const GraphOracle t = zoo::regular_tree(2);
  const Exhaustion e = Exhaustion::balls(t);
  std::array<std::vector<std::uint64_t>, 2> counts{std::vector<std::uint64_t>(3, 0), std::vector<std::uint64_t>(3, 0)};
  for (int which = 0; which < 2; ++which) {
    const LevelChainKernel k = build_kernel(t, e, 2 + 2 * which);
    std::vector<char> window(static_cast<std::size_t>(k.size()), 0);
    for (VertexKey v : {0, 1, 2}) window[*k.index(v)] = 1;
    for (std::uint64_t r = 0; r < 20000; ++r) {
      Stream rng(7 + which, r);
      ++counts[which][k.key(kth_window_visit(k, *k.index(0), window, 25, rng))];
    }
  }
  EXPECT_GT(stats::chi_square_two_sample(counts[0], counts[1]).p_value, 0.01);
}

TEST(ConsistencyCheck, SameLevelIsExactlyZero) {
  const GraphOracle t = zoo::regular_tree(2);
  const ConsistencyReport r = consistency_check(t, Exhaustion::balls(t), 2, 2);
  EXPECT_EQ(r.max_deviation, 0.0);
}

TEST(ConsistencyCheck, BinaryTreeOneThree) {
  const GraphOracle t = zoo::regular_tree(2);
  const ConsistencyReport r = consistency_check(t, Exhaustion::balls(t), 1, 3);
  EXPECT_LE(r.max_deviation, 1e-10);
  EXPECT_EQ(r.states_compared, 7);
}

TEST(ConsistencyCheck, LatticeTwoFour) {
  const GraphOracle z = zoo::lattice_zd(3);
  const ConsistencyReport r = consistency_check(z, Exhaustion::balls(z), 2, 4);
  EXPECT_LE(r.max_deviation, 1e-9);
  EXPECT_EQ(r.resolution_level, 6);
  EXPECT_EQ(r.states_compared, 25 + 38);
}

TEST(ConsistencyCheck, BiasedTreeAndPlane) {
  const GraphOracle b = zoo::biased_tree(3, 1.5);
  EXPECT_LE(consistency_check(b, Exhaustion::balls(b), 1, 3).max_deviation, 1e-10);
  const GraphOracle z2 = zoo::lattice_zd(2);
  EXPECT_LE(consistency_check(z2, Exhaustion::balls(z2), 2, 3).max_deviation, 1e-9);
}

TEST(ConsistencyCheck, RejectsBadLevels) {
  const GraphOracle t = zoo::regular_tree(2);
  EXPECT_THROW(consistency_check(t, Exhaustion::balls(t), 3, 1), ConstructionError);
  EXPECT_THROW(consistency_check(t, Exhaustion::balls(t), 0, 1), ConstructionError);
}

TEST(ExcursionTime, SingleEdge) {
  const GraphOracle o = zoo::finite(zoo::path_graph(2));
  const LevelChainKernel k = build_kernel(o, Exhaustion::balls(o), 3);
  EXPECT_NEAR(expected_excursion_time(k, RateSchedule{1.0, 1.0}, 0), 2.0, 1e-12);
}

TEST(ExcursionTime, PathOfThree) {
  const GraphOracle o = zoo::finite(zoo::path_graph(3));
  const LevelChainKernel k = build_kernel(o, Exhaustion::balls(o), 3);
  EXPECT_NEAR(expected_excursion_time(k, RateSchedule{1.0, 1.0}, 0), 4.0, 1e-12);
}

TEST(ExcursionTime, UnitRatesGiveReturnTimeFormula) {
  // with unit holds the return time is π(V)/π(start)
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const WeightedGraph g = zoo::random_connected(rng, 9);
    const GraphOracle o = zoo::finite(g);
    const LevelChainKernel k = build_kernel(o, Exhaustion::balls(o), 10);
    double total = 0.0;
    for (int v = 0; v < 9; ++v) total += g.pi(v);
    for (int v : {0, 4, 8}) {
      EXPECT_NEAR(expected_excursion_time(k, RateSchedule{1.0, 1.0}, static_cast<VertexKey>(v)), total / g.pi(v),
                  1e-9 * total);
    }
  }
}

TEST(ExcursionTime, MatchesMonteCarlo) {
  const GraphOracle t = zoo::regular_tree(2);
  const LevelChainKernel k = build_kernel(t, Exhaustion::balls(t), 2);
  const RateSchedule rate{1.0, 4.0};
  const double exact = expected_excursion_time(k, rate, 0);
  std::vector<double> times;
  for (std::uint64_t r = 0; r < 40000; ++r) {
    Stream rng(4, r);
    double total = rng.exponential(rate.rate(k.graph().exhaustion_level(0)));
    int cur = k.sample(0, rng.uniform());
    while (cur != 0) {
      total += rng.exponential(rate.rate(k.graph().exhaustion_level(cur)));
      cur = k.sample(cur, rng.uniform());
    }
    times.push_back(total);
  }
  const auto m = stats::mean_ci(times);
  EXPECT_NEAR(m.mean, exact, 4 * m.half_width);
}

TEST(ExcursionTime, TreeIncrementsDecrease) {
  const GraphOracle t = zoo::regular_tree(2);
  const int levels[] = {3, 4, 5};
  const ExcursionProfile p = excursion_profile(t, Exhaustion::balls(t), levels, RateSchedule{1.0, 4.0}, 0);
  ASSERT_EQ(p.increments.size(), 2u);
  EXPECT_GT(p.increments[0], 0.0);
  EXPECT_LT(p.increments[1], p.increments[0]);
}
