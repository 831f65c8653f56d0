#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "refwalk/forest.hpp"
#include "refwalk/stats.hpp"
#include "refwalk/zoo.hpp"

using namespace refwalk;

namespace {

VertexSequence seq(std::initializer_list<std::pair<VertexKey, bool>> items) {
  VertexSequence out;
  for (auto [v, f] : items) out.push_back({v, f});
  return out;
}

WeightedGraph weighted_triangle() { return WeightedGraph(3, {{0, 1, 1.0}, {1, 2, 2.0}, {0, 2, 3.0}}); }

std::vector<VertexKey> all_vertices(const WeightedGraph& g) {
  std::vector<VertexKey> out;
  for (int v = 0; v < g.vertex_count(); ++v) out.push_back(static_cast<VertexKey>(v));
  return out;
}

enum class Sampler { AldousBroder, Wilson };

std::vector<std::uint64_t> tree_counts(const WeightedGraph& g, Sampler which, std::uint64_t replicas,
                                       std::uint64_t seed) {
  const TreeDistribution d = enumerate_ust(g);
  const LevelChainKernel k = finite_kernel(g);
  const auto all = all_vertices(g);
  std::vector<std::uint64_t> counts(d.trees.size(), 0);
  for (std::uint64_t r = 0; r < replicas; ++r) {
    Stream rng(seed, r);
    const Forest f = which == Sampler::AldousBroder ? aldous_broder_window(k, 0, all, all, rng)
                                                    : wilson_sample(k, all, rng);
    const auto idx = d.find(f.edges());
    EXPECT_TRUE(idx.has_value());
    if (idx) ++counts[*idx];
  }
  return counts;
}

}  // namespace

TEST(LoopErase, RemovesLoop) {
  const LoopErasure le = loop_erase(seq({{1, false}, {2, false}, {1, false}, {3, false}}));
  EXPECT_EQ(le.path, seq({{1, false}, {3, false}}));
  EXPECT_FALSE(le.contains_infinity_step);
}

TEST(LoopErase, SimplePathUnchanged) {
  const auto s = seq({{1, false}, {2, false}, {3, false}});
  EXPECT_EQ(loop_erase(s).path, s);
}

TEST(LoopErase, KeptInfinityStepSetsFlag) {
  const LoopErasure le = loop_erase(seq({{1, false}, {2, false}, {1, false}, {3, true}}));
  EXPECT_EQ(le.path, seq({{1, false}, {3, true}}));
  EXPECT_TRUE(le.contains_infinity_step);
}

TEST(LoopErase, ErasedInfinityStepDoesNotSetFlag) {
  const LoopErasure le = loop_erase(seq({{1, false}, {2, true}, {1, false}, {3, false}}));
  EXPECT_FALSE(le.contains_infinity_step);
}

TEST(LoopErase, OutputIsSimpleAndEndsAtLastVertex) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> v(0, 6);
  for (int trial = 0; trial < 500; ++trial) {
    VertexSequence s;
    const int len = 1 + trial % 40;
    for (int i = 0; i < len; ++i) s.push_back({static_cast<VertexKey>(v(rng)), false});
    const LoopErasure le = loop_erase(s);
    std::set<VertexKey> distinct;
    for (const auto& e : le.path) distinct.insert(e.vertex);
    EXPECT_EQ(distinct.size(), le.path.size());
    EXPECT_EQ(le.path.front().vertex, s.front().vertex);
    EXPECT_EQ(le.path.back().vertex, s.back().vertex);
  }
}

TEST(ToSequence, MarksArrivalsThroughInfinity) {
  Trajectory t;
  t.events = {VertexVisit{1, 0.1}, InfinityPass{{}, 1, 9, 2}, VertexVisit{2, 0.1}, VertexVisit{3, 0.1}};
  EXPECT_EQ(to_sequence(t), seq({{1, false}, {2, true}, {3, false}}));
}

TEST(EnumerateUst, Triangle) {
  const TreeDistribution d = enumerate_ust(zoo::complete_graph(3));
  ASSERT_EQ(d.trees.size(), 3u);
  for (double p : d.probabilities) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(EnumerateUst, FourCycle) {
  const TreeDistribution d = enumerate_ust(zoo::cycle_graph(4));
  ASSERT_EQ(d.trees.size(), 4u);
  for (double p : d.probabilities) EXPECT_NEAR(p, 0.25, 1e-15);
}

TEST(EnumerateUst, K4MatchesCayleyAndMatrixTree) {
  const WeightedGraph k4 = zoo::complete_graph(4);
  const TreeDistribution d = enumerate_ust(k4);
  EXPECT_EQ(d.trees.size(), 16u);
  EXPECT_NEAR(weighted_tree_count(k4), 16.0, 1e-9);
  double total = 0.0;
  for (double p : d.probabilities) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(EnumerateUst, WeightedTriangle) {
  const TreeDistribution d = enumerate_ust(weighted_triangle());
  std::map<int, double> by_missing_edge;
  for (std::size_t t = 0; t < d.trees.size(); ++t) {
    for (int e = 0; e < 3; ++e) {
      if (std::find(d.trees[t].begin(), d.trees[t].end(), e) == d.trees[t].end()) {
        by_missing_edge[static_cast<int>(d.edges[e].c)] = d.probabilities[t];
      }
    }
  }
  EXPECT_NEAR(by_missing_edge[3], 2.0 / 11.0, 1e-14);
  EXPECT_NEAR(by_missing_edge[2], 3.0 / 11.0, 1e-14);
  EXPECT_NEAR(by_missing_edge[1], 6.0 / 11.0, 1e-14);
}

TEST(EnumerateUst, RejectsLargeGraphs) {
  EXPECT_THROW(enumerate_ust(zoo::complete_graph(11)), BudgetError);
  EXPECT_THROW(enumerate_ust(zoo::complete_graph(9), 1000), BudgetError);
}

TEST(MatrixTreeEdgeProb, Examples) {
  EXPECT_NEAR(matrix_tree_edge_prob(zoo::complete_graph(3), 0, 1), 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(matrix_tree_edge_prob(zoo::path_graph(3), 1, 2), 1.0, 1e-14);
  EXPECT_NEAR(matrix_tree_edge_prob(weighted_triangle(), 0, 2), 9.0 / 11.0, 1e-14);
  EXPECT_THROW(matrix_tree_edge_prob(zoo::path_graph(3), 0, 2), ConstructionError);
}

TEST(MatrixTreeEdgeProb, MatchesEnumerationMarginals) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const WeightedGraph g = zoo::random_connected(rng, 4 + trial % 4);
    const TreeDistribution d = enumerate_ust(g);
    double sum = 0.0;
    for (std::size_t e = 0; e < d.edges.size(); ++e) {
      double marginal = 0.0;
      for (std::size_t t = 0; t < d.trees.size(); ++t) {
        if (std::count(d.trees[t].begin(), d.trees[t].end(), static_cast<int>(e))) marginal += d.probabilities[t];
      }
      const double p = matrix_tree_edge_prob(g, d.edges[e].u, d.edges[e].v);
      EXPECT_NEAR(p, marginal, 1e-12);
      sum += p;
    }
    EXPECT_NEAR(sum, g.vertex_count() - 1, 1e-10);
  }
}

TEST(AldousBroder, TriangleUniform) {
  const auto counts = tree_counts(zoo::complete_graph(3), Sampler::AldousBroder, 30000, 1);
  EXPECT_GT(stats::chi_square_gof(counts, enumerate_ust(zoo::complete_graph(3)).probabilities).p_value, 0.01);
}

TEST(AldousBroder, WeightedTriangle) {
  const auto counts = tree_counts(weighted_triangle(), Sampler::AldousBroder, 30000, 2);
  EXPECT_GT(stats::chi_square_gof(counts, enumerate_ust(weighted_triangle()).probabilities).p_value, 0.01);
}

TEST(AldousBroder, K4Uniform) {
  const WeightedGraph k4 = zoo::complete_graph(4);
  const auto counts = tree_counts(k4, Sampler::AldousBroder, 30000, 3);
  EXPECT_GT(stats::chi_square_gof(counts, enumerate_ust(k4).probabilities).p_value, 0.01);
}

TEST(AldousBroder, WindowRequiresNeighborhoodInCover) {
  const GraphOracle t = zoo::regular_tree(2);
  const Exhaustion e = Exhaustion::balls(t);
  const LevelChainKernel k = build_kernel(t, e, 3);
  const auto window = e.level(2);
  Stream rng(1, 0);
  EXPECT_THROW(aldous_broder_window(k, 0, window, window, rng), ConstructionError);
  const auto cover = e.level(3);
  const Forest f = aldous_broder_window(k, 0, window, cover, rng);
  // on a tree every first entrance comes from the parent, so the window tree is complete
  EXPECT_EQ(f.edges().size(), window.size() - 1);
  EXPECT_EQ(f.unresolved_parents, 0u);
}

TEST(Wilson, PathHasUniqueTree) {
  const WeightedGraph p = zoo::path_graph(3);
  const LevelChainKernel k = finite_kernel(p);
  const auto all = all_vertices(p);
  for (std::uint64_t r = 0; r < 50; ++r) {
    Stream rng(5, r);
    const Forest f = wilson_sample(k, all, rng);
    EXPECT_EQ(f.edges(), (std::vector<UndirectedEdge>{{0, 1}, {1, 2}}));
  }
}

TEST(Wilson, TriangleUniform) {
  const auto counts = tree_counts(zoo::complete_graph(3), Sampler::Wilson, 30000, 4);
  EXPECT_GT(stats::chi_square_gof(counts, enumerate_ust(zoo::complete_graph(3)).probabilities).p_value, 0.01);
}

TEST(Wilson, WeightedTriangle) {
  const auto counts = tree_counts(weighted_triangle(), Sampler::Wilson, 30000, 5);
  EXPECT_GT(stats::chi_square_gof(counts, enumerate_ust(weighted_triangle()).probabilities).p_value, 0.01);
}

TEST(Wilson, RandomGraphMatchesEnumeration) {
  std::mt19937_64 g_rng(23);
  const WeightedGraph g = zoo::random_connected(g_rng, 5, 0.3);
  const TreeDistribution d = enumerate_ust(g);
  ASSERT_LE(d.trees.size(), 125u);
  const auto counts = tree_counts(g, Sampler::Wilson, 40000, 6);
  EXPECT_GT(stats::chi_square_gof(counts, d.probabilities).p_value, 0.01);
}

TEST(Wilson, ForestsAreAcyclicAndComponentsGrow) {
  const GraphOracle z = zoo::lattice_zd(3);
  const Exhaustion e = Exhaustion::balls(z);
  KernelOptions o;
  o.resolution_level = 5;
  const LevelChainKernel k = build_kernel(z, e, 2, o);
  const auto order = exhaustion_order(e, 2);
  std::uint64_t escaped_runs = 0;
  for (std::uint64_t r = 0; r < 300; ++r) {
    Stream rng(8, r);
    const Forest f = wilson_sample(k, order, rng);
    EXPECT_TRUE(is_acyclic(f.edges()));
    EXPECT_TRUE(std::is_sorted(f.components.begin(), f.components.end()));
    const int escapes = static_cast<int>(std::count(f.escaped.begin(), f.escaped.end(), 1));
    // a branch may keep several passes, each leaving one more component
    EXPECT_GE(f.components.back(), 1 + escapes);
    EXPECT_EQ(f.components.back() == 1, escapes == 0);
    if (escapes > 0) ++escaped_runs;
  }
  // on Z^3 a walk can leave through one side and come back through another
  EXPECT_GT(escaped_runs, 0u);
}

TEST(Wilson, TreeBranchesNeverKeepAnInfinityStep) {
  // the only way back from a tree shell vertex is the vertex just left, so the pass is always a loop
  const GraphOracle t = zoo::regular_tree(3);
  const Exhaustion e = Exhaustion::balls(t);
  const LevelChainKernel k = build_kernel(t, e, 3);
  const auto order = exhaustion_order(e, 3);
  for (std::uint64_t r = 0; r < 200; ++r) {
    Stream rng(9, r);
    const Forest f = wilson_sample(k, order, rng);
    EXPECT_FALSE(f.any_escaped());
    EXPECT_EQ(f.edges().size(), order.size() - 1);
  }
}

TEST(ForestSamplers, AgreeOnLatticeWindow) {
  const GraphOracle z = zoo::lattice_zd(3);
  const Exhaustion e = Exhaustion::balls(z);
  KernelOptions o;
  o.resolution_level = 4;
  const LevelChainKernel k = build_kernel(z, e, 2, o);
  const auto window = e.level(1);
  const auto cover = e.level(2);
  std::map<std::vector<UndirectedEdge>, std::size_t> cell;
  std::array<std::vector<std::uint64_t>, 2> counts;
  auto tally = [&](int which, const std::vector<UndirectedEdge>& edges) {
    auto [it, fresh] = cell.emplace(edges, cell.size());
    if (fresh) {
      counts[0].push_back(0);
      counts[1].push_back(0);
    }
    ++counts[which][it->second];
  };
  for (std::uint64_t r = 0; r < 20000; ++r) {
    Stream a(10, r);
    tally(0, aldous_broder_window(k, window[0], window, cover, a).edges_within(window));
    Stream b(11, r);
    tally(1, wilson_sample(k, window, b).edges_within(window));
  }
  EXPECT_GT(stats::chi_square_two_sample(counts[0], counts[1]).p_value, 0.01);
}
