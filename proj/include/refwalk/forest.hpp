#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "refwalk/errors.hpp"
#include "refwalk/graph.hpp"
#include "refwalk/walk.hpp"

namespace refwalk {

struct SequenceEntry {
  VertexKey vertex = 0;
  bool via_infinity = false;  // an InfinityPass immediately preceded this arrival

  bool operator==(const SequenceEntry&) const = default;
};

using VertexSequence = std::vector<SequenceEntry>;

/// Vertex visits of a trajectory, flagging arrivals that came through infinity.
inline VertexSequence to_sequence(const Trajectory& t) {
  VertexSequence out;
  bool crossed = false;
  for (const auto& e : t.events) {
    if (const auto* v = std::get_if<VertexVisit>(&e)) {
      out.push_back({v->vertex, crossed && !out.empty()});
      crossed = false;
    } else {
      crossed = true;
    }
  }
  return out;
}

struct LoopErasure {
  VertexSequence path;
  bool contains_infinity_step = false;
};

/// Chronological loop erasure: from the last occurrence of the current head, keep the next
/// arrival. The flag of a kept entry is the flag of that arrival.
inline LoopErasure loop_erase(const VertexSequence& seq) {
  LoopErasure out;
  if (seq.empty()) return out;
  std::unordered_map<VertexKey, std::size_t> last;
  for (std::size_t i = 0; i < seq.size(); ++i) last[seq[i].vertex] = i;
  std::size_t i = 0;
  out.path.push_back({seq[0].vertex, false});
  while (true) {
    i = last.at(seq[i].vertex);
    if (i + 1 >= seq.size()) break;
    ++i;
    out.path.push_back(seq[i]);
    out.contains_infinity_step = out.contains_infinity_step || seq[i].via_infinity;
  }
  return out;
}

using UndirectedEdge = std::pair<VertexKey, VertexKey>;

inline UndirectedEdge undirected(VertexKey a, VertexKey b) { return a < b ? UndirectedEdge{a, b} : UndirectedEdge{b, a}; }

struct Forest {
  std::vector<VertexKey> window;
  std::map<VertexKey, VertexKey> parent;  // child -> parent, one entry per forest edge
  std::vector<char> escaped;              // Wilson: per branch
  std::vector<int> components;            // Wilson: component count after each branch
  std::size_t unresolved_parents = 0;     // Aldous-Broder: window vertices first entered via infinity
  std::size_t steps = 0;

  std::vector<UndirectedEdge> edges() const {
    std::vector<UndirectedEdge> out;
    for (const auto& [c, p] : parent) out.push_back(undirected(c, p));
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Edges with both endpoints in `keys`.
  std::vector<UndirectedEdge> edges_within(std::span<const VertexKey> keys) const {
    const std::unordered_set<VertexKey> in(keys.begin(), keys.end());
    std::vector<UndirectedEdge> out;
    for (const auto& e : edges()) {
      if (in.count(e.first) && in.count(e.second)) out.push_back(e);
    }
    return out;
  }

  bool any_escaped() const { return std::find(escaped.begin(), escaped.end(), 1) != escaped.end(); }
};

/// True when the edge set has no cycle.
inline bool is_acyclic(const std::vector<UndirectedEdge>& edges) {
  std::unordered_map<VertexKey, int> id;
  for (const auto& [a, b] : edges) {
    id.emplace(a, static_cast<int>(id.size()));
    id.emplace(b, static_cast<int>(id.size()));
  }
  detail::DisjointSets sets(static_cast<int>(id.size()));
  for (const auto& [a, b] : edges) {
    if (!sets.unite(id.at(a), id.at(b))) return false;
  }
  return true;
}

/// Aldous-Broder forest on the window G_k: run the chain from `start` until every vertex of
/// `cover` (G_K) is visited and keep the first-entrance edge of each window vertex. Vertices first
/// entered through infinity have their parent outside the resolution and get no edge.
inline Forest aldous_broder_window(const LevelChainKernel& kernel, VertexKey start, std::span<const VertexKey> window,
                                   std::span<const VertexKey> cover, Stream& rng,
                                   std::size_t step_budget = 100'000'000) {
  const std::unordered_set<VertexKey> in_cover(cover.begin(), cover.end());
  const std::unordered_set<VertexKey> in_window(window.begin(), window.end());
  if (!in_window.count(start)) throw ConstructionError("start must lie in the window");
  for (VertexKey v : window) {
    if (!in_cover.count(v)) throw ConstructionError("window must lie inside the cover set");
    const auto i = kernel.index(v);
    for (const Arc& a : kernel.graph().neighbors(*i)) {
      if (!in_cover.count(kernel.key(a.to))) {
        throw ConstructionError("cover set must contain the 1-neighborhood of the window");
      }
    }
  }
  // only the jump chain matters here, so the walk runs without recording a trajectory or
  // drawing holding times
  const int n = kernel.size();
  std::vector<char> pending(static_cast<std::size_t>(n), 0);
  std::vector<char> window_state(static_cast<std::size_t>(n), 0);
  std::size_t remaining = 0;
  for (VertexKey v : cover) {
    const auto i = kernel.index(v);
    if (!i || !kernel.is_core(*i)) throw ConstructionError("cover set must consist of core vertices");
    if (!pending[*i]) {
      pending[*i] = 1;
      ++remaining;
    }
  }
  for (VertexKey v : window) window_state[*kernel.index(v)] = 1;
  Forest f;
  f.window.assign(window.begin(), window.end());
  int cur = *kernel.index(start);
  pending[cur] = 0;
  --remaining;
  while (remaining > 0) {
    if (f.steps >= step_budget) throw BudgetError("Aldous-Broder step budget exhausted");
    int next = kernel.sample(cur, rng.uniform());
    ++f.steps;
    bool via_infinity = false;
    if (!kernel.is_core(next)) {
      next = kernel.sample(next, rng.uniform());
      ++f.steps;
      via_infinity = true;
    }
    if (pending[next]) {
      pending[next] = 0;
      --remaining;
      if (window_state[next]) {
        if (via_infinity) {
          ++f.unresolved_parents;
        } else if (window_state[cur]) {
          f.parent[kernel.key(next)] = kernel.key(cur);
        }
      }
    }
    cur = next;
  }
  return f;
}

/// Wilson's algorithm driven by the level chain. Each branch runs from the next vertex of
/// `order` not yet in the forest until it hits the forest, and its loop erasure is added. A kept
/// step through infinity is not an edge; it marks the branch as escaped and leaves a separate
/// component.
inline Forest wilson_sample(const LevelChainKernel& kernel, std::span<const VertexKey> order, Stream& rng,
                            std::size_t step_budget = 100'000'000) {
  if (order.empty()) throw ConstructionError("vertex order is empty");
  Forest f;
  f.window.assign(order.begin(), order.end());
  std::vector<char> member(static_cast<std::size_t>(kernel.size()), 0);
  auto state = [&](VertexKey v) {
    const auto i = kernel.index(v);
    if (!i || !kernel.is_core(*i)) throw ConstructionError("vertex order must consist of core vertices");
    return *i;
  };
  member[state(order[0])] = 1;
  std::size_t vertices = 1, edges = 0;
  const RateSchedule unit{};
  for (std::size_t b = 1; b < order.size(); ++b) {
    const int s = state(order[b]);
    if (member[s]) continue;
    if (f.steps >= step_budget) throw BudgetError("Wilson step budget exhausted");
    const Trajectory t = detail::run_chain(
        kernel, s, [&](int cur, std::size_t) { return member[cur] != 0; }, unit, rng, step_budget - f.steps);
    f.steps += t.steps;
    const LoopErasure le = loop_erase(to_sequence(t));
    for (std::size_t i = 0; i + 1 < le.path.size(); ++i) {
      const VertexKey v = le.path[i].vertex;
      member[*kernel.index(v)] = 1;
      ++vertices;
      if (!le.path[i + 1].via_infinity) {
        f.parent[v] = le.path[i + 1].vertex;
        ++edges;
      }
    }
    f.escaped.push_back(le.contains_infinity_step ? 1 : 0);
    f.components.push_back(static_cast<int>(vertices - edges));
  }
  return f;
}

/// Window order used by default: exhaustion level, then key.
inline std::vector<VertexKey> exhaustion_order(const Exhaustion& exhaustion, int k) {
  std::vector<VertexKey> out;
  for (const auto& m : exhaustion.members(k)) out.push_back(m.key);
  return out;
}

struct TreeDistribution {
  std::vector<Edge> edges;             // edge list of the graph, indexed
  std::vector<std::vector<int>> trees;  // sorted edge indices per tree
  std::vector<double> probabilities;

  /// Index of the tree with exactly these (sorted) edge indices.
  std::optional<std::size_t> find(const std::vector<int>& tree) const {
    auto it = std::find(trees.begin(), trees.end(), tree);
    if (it == trees.end()) return std::nullopt;
    return static_cast<std::size_t>(it - trees.begin());
  }

  /// Index of the tree given as vertex pairs.
  std::optional<std::size_t> find(const std::vector<UndirectedEdge>& pairs) const {
    std::vector<int> idx;
    for (const auto& [a, b] : pairs) {
      int found = -1;
      for (std::size_t e = 0; e < edges.size(); ++e) {
        if (undirected(static_cast<VertexKey>(edges[e].u), static_cast<VertexKey>(edges[e].v)) == undirected(a, b)) {
          found = static_cast<int>(e);
        }
      }
      if (found < 0) return std::nullopt;
      idx.push_back(found);
    }
    std::sort(idx.begin(), idx.end());
    return find(idx);
  }
};

namespace detail {

inline Eigen::MatrixXd laplacian(const WeightedGraph& g) {
  const int n = g.vertex_count();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (const Edge& e : g.edges()) {
    L(e.u, e.u) += e.c;
    L(e.v, e.v) += e.c;
    L(e.u, e.v) -= e.c;
    L(e.v, e.u) -= e.c;
  }
  return L;
}

// log det of a Laplacian with row/column `drop` removed.
inline double reduced_log_det(const Eigen::MatrixXd& L, int drop) {
  const int n = static_cast<int>(L.rows());
  if (n == 1) return 0.0;
  std::vector<int> keep;
  for (int i = 0; i < n; ++i) {
    if (i != drop) keep.push_back(i);
  }
  Eigen::MatrixXd R(n - 1, n - 1);
  for (int i = 0; i < n - 1; ++i) {
    for (int j = 0; j < n - 1; ++j) R(i, j) = L(keep[i], keep[j]);
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) throw SolverError("reduced Laplacian is singular (graph disconnected?)", 0.0);
  double s = 0.0;
  for (int i = 0; i < n - 1; ++i) s += std::log(llt.matrixL()(i, i));
  return 2.0 * s;
}

}  // namespace detail

/// Weighted spanning-tree count Σ_T Π c(e) by the matrix-tree theorem.
inline double weighted_tree_count(const WeightedGraph& g) {
  return std::exp(detail::reduced_log_det(detail::laplacian(g), 0));
}

/// Exact uniform spanning tree law of a small graph by enumeration.
inline TreeDistribution enumerate_ust(const WeightedGraph& g, std::size_t max_trees = 1'000'000) {
  const int n = g.vertex_count();
  if (n > 10) throw BudgetError("enumerate_ust supports at most 10 vertices");
  std::vector<Edge> unit;
  for (const Edge& e : g.edges()) unit.push_back({e.u, e.v, 1.0});
  const double count = weighted_tree_count(WeightedGraph(n, unit));
  if (count > static_cast<double>(max_trees) + 0.5) {
    throw BudgetError("graph has " + std::to_string(std::llround(count)) + " spanning trees");
  }
  TreeDistribution d;
  d.edges.assign(g.edges().begin(), g.edges().end());
  const int m = static_cast<int>(d.edges.size());
  std::vector<double> weights;
  std::vector<int> chosen;
  // include/exclude search with a union-find rebuilt along the path
  auto acyclic_with = [&](int e) {
    detail::DisjointSets sets(n);
    for (int c : chosen) sets.unite(d.edges[c].u, d.edges[c].v);
    return sets.unite(d.edges[e].u, d.edges[e].v);
  };
  auto recurse = [&](auto&& self, int next) -> void {
    if (static_cast<int>(chosen.size()) == n - 1) {
      double w = 1.0;
      for (int c : chosen) w *= d.edges[c].c;
      d.trees.push_back(chosen);
      weights.push_back(w);
      return;
    }
    if (m - next < n - 1 - static_cast<int>(chosen.size())) return;
    if (acyclic_with(next)) {
      chosen.push_back(next);
      self(self, next + 1);
      chosen.pop_back();
    }
    self(self, next + 1);
  };
  if (n == 1) {
    d.trees.push_back({});
    weights.push_back(1.0);
  } else {
    recurse(recurse, 0);
  }
  double total = 0.0;
  for (double w : weights) total += w;
  for (double w : weights) d.probabilities.push_back(w / total);
  return d;
}

/// P[{u,v} ∈ UST] = c(u,v) · τ(G/{u,v}) / τ(G), with τ the weighted tree count.
inline double matrix_tree_edge_prob(const WeightedGraph& g, int u, int v) {
  if (!g.edge_index(u, v)) throw ConstructionError("not an edge");
  const Eigen::MatrixXd L = detail::laplacian(g);
  const int n = g.vertex_count();
  // contract v into u
  std::vector<int> map(static_cast<std::size_t>(n));
  for (int i = 0, j = 0; i < n; ++i) map[i] = i == v ? -1 : j++;
  map[v] = map[u];
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n - 1, n - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) C(map[i], map[j]) += L(i, j);
  }
  // the contracted edge became a self-loop contributing zero to the Laplacian
  return g.conductance(u, v) * std::exp(detail::reduced_log_det(C, 0) - detail::reduced_log_det(L, 0));
}

}  // namespace refwalk
