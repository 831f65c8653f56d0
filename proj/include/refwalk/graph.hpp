#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "refwalk/errors.hpp"

namespace refwalk {

using VertexKey = std::uint64_t;

struct Edge {
  int u = 0;
  int v = 0;
  double c = 1.0;
};

struct Arc {
  int to = 0;
  double c = 1.0;
};

namespace detail {

inline void check_conductance(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw ConstructionError("conductance must be positive and finite, got " + std::to_string(c));
  }
}

// Union-find that tracks the minimum key of each class.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Returns false if already joined.
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

}  // namespace detail

/// Finite connected graph with positive conductances on dense vertex ids 0..V-1.
/// Parallel edges are merged by summing their conductances.
class WeightedGraph {
 public:
  WeightedGraph() = default;

  WeightedGraph(int vertex_count, const std::vector<Edge>& edges) : n_(vertex_count) {
    if (vertex_count < 1) throw ConstructionError("graph needs at least one vertex");
    std::unordered_map<std::uint64_t, std::size_t> seen;
    for (const Edge& e : edges) {
      if (e.u < 0 || e.v < 0 || e.u >= n_ || e.v >= n_) {
        throw ConstructionError("edge endpoint out of range");
      }
      if (e.u == e.v) throw ConstructionError("self-loops are not allowed");
      detail::check_conductance(e.c);
      const int a = std::min(e.u, e.v);
      const int b = std::max(e.u, e.v);
      const std::uint64_t id = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
      if (auto it = seen.find(id); it != seen.end()) {
        edges_[it->second].c += e.c;
      } else {
        seen.emplace(id, edges_.size());
        edges_.push_back({a, b, e.c});
      }
    }
    build_adjacency();
    if (!is_connected()) throw ConstructionError("graph is not connected");
  }

  int vertex_count() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }

  std::span<const Arc> neighbors(int v) const {
    return {arcs_.data() + offsets_[v], arcs_.data() + offsets_[v + 1]};
  }

  double pi(int v) const { return pi_[v]; }
  std::span<const double> pi() const noexcept { return pi_; }

  /// Conductance of {u,v}, zero when not adjacent.
  double conductance(int u, int v) const {
    for (const Arc& a : neighbors(u)) {
      if (a.to == v) return a.c;
    }
    return 0.0;
  }

  std::optional<std::size_t> edge_index(int u, int v) const {
    const int a = std::min(u, v);
    const int b = std::max(u, v);
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      if (edges_[i].u == a && edges_[i].v == b) return i;
    }
    return std::nullopt;
  }

  bool is_connected() const {
    if (n_ == 0) return true;
    std::vector<char> seen(static_cast<std::size_t>(n_), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const Arc& a : neighbors(v)) {
        if (!seen[a.to]) {
          seen[a.to] = 1;
          ++count;
          stack.push_back(a.to);
        }
      }
    }
    return count == n_;
  }

  /// Largest relative mismatch between stored pi and the recomputed neighbor sum.
  double stationary_mismatch() const {
    double worst = 0.0;
    for (int v = 0; v < n_; ++v) {
      double s = 0.0;
      for (const Arc& a : neighbors(v)) s += a.c;
      worst = std::max(worst, std::abs(s - pi_[v]) / pi_[v]);
    }
    return worst;
  }

  /// Dirichlet energy over unordered edges.
  double energy(std::span<const double> f) const {
    double e = 0.0;
    for (const Edge& ed : edges_) {
      const double d = f[ed.v] - f[ed.u];
      e += ed.c * d * d;
    }
    return e;
  }

 private:
  void build_adjacency() {
    std::vector<int> degree(static_cast<std::size_t>(n_), 0);
    for (const Edge& e : edges_) {
      ++degree[e.u];
      ++degree[e.v];
    }
    offsets_.assign(static_cast<std::size_t>(n_) + 1, 0);
    for (int v = 0; v < n_; ++v) offsets_[v + 1] = offsets_[v] + degree[v];
    arcs_.resize(offsets_.back());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    pi_.assign(static_cast<std::size_t>(n_), 0.0);
    for (const Edge& e : edges_) {
      arcs_[fill[e.u]++] = {e.v, e.c};
      arcs_[fill[e.v]++] = {e.u, e.c};
      pi_[e.u] += e.c;
      pi_[e.v] += e.c;
    }
  }

  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Arc> arcs_;
  std::vector<double> pi_;
};

struct Neighbor {
  VertexKey key = 0;
  double c = 1.0;
};

/// Lazy adjacency source for a locally finite weighted graph, possibly infinite.
/// Cheap to copy; the callbacks are shared and must be pure and re-entrant.
/// Neighbor lists keep the order produced by the callback (planar maps rely on it
/// being the rotation order).
class GraphOracle {
 public:
  using NeighborFn = std::function<std::vector<Neighbor>(VertexKey)>;
  using FormatFn = std::function<std::string(VertexKey)>;
  using ParseFn = std::function<std::optional<VertexKey>(std::string_view)>;

  GraphOracle(std::string name, VertexKey root, NeighborFn neighbors, FormatFn format = {},
              ParseFn parse = {})
      : impl_(std::make_shared<Impl>(
            Impl{std::move(name), root, std::move(neighbors), std::move(format), std::move(parse)})) {
    if (!impl_->neighbors) throw ConstructionError("oracle needs a neighbor callback");
  }

  const std::string& name() const noexcept { return impl_->name; }
  VertexKey root() const noexcept { return impl_->root; }

  /// Validated neighbor list: rejects self-loops and bad conductances, merges repeats.
  std::vector<Neighbor> neighbors(VertexKey v) const {
    std::vector<Neighbor> raw = impl_->neighbors(v);
    std::vector<Neighbor> out;
    out.reserve(raw.size());
    for (const Neighbor& nb : raw) {
      if (nb.key == v) throw ConstructionError("oracle returned a self-loop at " + format(v));
      detail::check_conductance(nb.c);
      auto it = std::find_if(out.begin(), out.end(), [&](const Neighbor& o) { return o.key == nb.key; });
      if (it != out.end()) {
        it->c += nb.c;
      } else {
        out.push_back(nb);
      }
    }
    return out;
  }

  double pi(VertexKey v) const {
    double s = 0.0;
    for (const Neighbor& nb : neighbors(v)) s += nb.c;
    return s;
  }

  std::string format(VertexKey v) const {
    return impl_->format ? impl_->format(v) : std::to_string(v);
  }

  std::optional<VertexKey> parse(std::string_view text) const {
    if (impl_->parse) return impl_->parse(text);
    try {
      std::size_t used = 0;
      const auto value = std::stoull(std::string(text), &used);
      if (used != text.size()) return std::nullopt;
      return static_cast<VertexKey>(value);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

 private:
  struct Impl {
    std::string name;
    VertexKey root;
    NeighborFn neighbors;
    FormatFn format;
    ParseFn parse;
  };
  std::shared_ptr<const Impl> impl_;
};

/// Checks that neighbors(v) is symmetric with matching conductances for every v in `keys`.
/// Throws ConstructionError on the first asymmetric pair.
inline void check_symmetry(const GraphOracle& oracle, std::span<const VertexKey> keys) {
  for (VertexKey v : keys) {
    for (const Neighbor& nb : oracle.neighbors(v)) {
      bool found = false;
      for (const Neighbor& back : oracle.neighbors(nb.key)) {
        if (back.key == v) {
          if (back.c != nb.c) {
            throw ConstructionError("asymmetric conductance on {" + oracle.format(v) + "," +
                                    oracle.format(nb.key) + "}");
          }
          found = true;
          break;
        }
      }
      if (!found) {
        throw ConstructionError("asymmetric adjacency: " + oracle.format(nb.key) +
                                " does not list " + oracle.format(v));
      }
    }
  }
}

/// Increasing family of finite vertex sets V_1 ⊂ V_2 ⊂ ... exhausting the graph.
/// The canonical choice is graph-distance balls around a center; arbitrary families can be
/// supplied through a callback.
class Exhaustion {
 public:
  struct Member {
    VertexKey key = 0;
    int level = 1;  // first n with key ∈ V_n
  };
  using LevelFn = std::function<std::vector<VertexKey>(int)>;

  static Exhaustion balls(GraphOracle oracle, VertexKey center, int radius_offset = 0) {
    Exhaustion e;
    e.ball_ = BallSpec{std::move(oracle), center, radius_offset};
    return e;
  }

  static Exhaustion balls(const GraphOracle& oracle) { return balls(oracle, oracle.root()); }

  static Exhaustion custom(LevelFn fn) {
    if (!fn) throw ConstructionError("custom exhaustion needs a level callback");
    Exhaustion e;
    e.custom_ = std::move(fn);
    return e;
  }

  /// V_n with first-entry levels, sorted by (level, key).
  std::vector<Member> members(int n) const {
    if (n < 1) throw ConstructionError("exhaustion levels start at 1");
    std::vector<Member> out;
    if (ball_) {
      const int radius = n + ball_->radius_offset;
      std::unordered_map<VertexKey, int> dist{{ball_->center, 0}};
      std::vector<VertexKey> frontier{ball_->center};
      out.push_back({ball_->center, 1});
      for (int d = 1; d <= radius && !frontier.empty(); ++d) {
        std::vector<VertexKey> next;
        for (VertexKey v : frontier) {
          for (const Neighbor& nb : ball_->oracle.neighbors(v)) {
            if (dist.emplace(nb.key, d).second) next.push_back(nb.key);
          }
        }
        std::sort(next.begin(), next.end());
        const int level = std::max(1, d - ball_->radius_offset);
        for (VertexKey k : next) out.push_back({k, level});
        frontier = std::move(next);
      }
    } else {
      std::unordered_set<VertexKey> seen;
      for (int k = 1; k <= n; ++k) {
        std::vector<VertexKey> layer;
        for (VertexKey v : custom_(k)) {
          if (seen.insert(v).second) layer.push_back(v);
        }
        std::sort(layer.begin(), layer.end());
        for (VertexKey v : layer) out.push_back({v, k});
      }
    }
    return out;
  }

  /// The set V_n exactly as the family defines it (no accumulation over earlier levels).
  std::vector<VertexKey> raw_level(int n) const {
    if (ball_) return level(n);
    std::vector<VertexKey> out = custom_(n);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// V_n sorted by (level, key).
  std::vector<VertexKey> level(int n) const {
    std::vector<VertexKey> out;
    for (const Member& m : members(n)) out.push_back(m.key);
    return out;
  }

  /// Smallest level n ≤ n_max containing every key, if any.
  std::optional<int> covering_level(std::span<const VertexKey> keys, int n_max) const {
    if (keys.empty()) return 1;
    std::unordered_map<VertexKey, int> first;
    for (const Member& m : members(n_max)) first.emplace(m.key, m.level);
    int need = 1;
    for (VertexKey k : keys) {
      auto it = first.find(k);
      if (it == first.end()) return std::nullopt;
      need = std::max(need, it->second);
    }
    return need;
  }

 private:
  struct BallSpec {
    GraphOracle oracle;
    VertexKey center;
    int radius_offset;
  };
  std::optional<BallSpec> ball_;
  LevelFn custom_;
};

/// Verifies nesting and induced connectivity of V_1..V_{n_max}; throws on the first violation.
inline void check_exhaustion(const GraphOracle& oracle, const Exhaustion& exhaustion, int n_max) {
  std::unordered_set<VertexKey> previous;
  for (int n = 1; n <= n_max; ++n) {
    const std::vector<VertexKey> keys = exhaustion.raw_level(n);
    if (keys.empty()) throw ConstructionError("exhaustion level " + std::to_string(n) + " is empty");
    std::unordered_set<VertexKey> current(keys.begin(), keys.end());
    for (VertexKey k : previous) {
      if (!current.count(k)) throw ConstructionError("exhaustion is not nested at level " + std::to_string(n));
    }
    if (n == 1 && !current.count(oracle.root())) {
      throw ConstructionError("root must belong to V_1");
    }
    std::unordered_set<VertexKey> seen{keys.front()};
    std::vector<VertexKey> stack{keys.front()};
    while (!stack.empty()) {
      const VertexKey v = stack.back();
      stack.pop_back();
      for (const Neighbor& nb : oracle.neighbors(v)) {
        if (current.count(nb.key) && seen.insert(nb.key).second) stack.push_back(nb.key);
      }
    }
    if (seen.size() != current.size()) {
      throw ConstructionError("induced subgraph on V_" + std::to_string(n) + " is disconnected");
    }
    previous = std::move(current);
  }
}

/// Finite truncation B_1 G_n: the core V_n (free boundary) plus its outer shell.
/// Local indices put the core first, ordered by (exhaustion level, key), then the shell by key.
class LevelGraph {
 public:
  int level() const noexcept { return level_; }
  int size() const noexcept { return static_cast<int>(keys_.size()); }
  int core_count() const noexcept { return core_count_; }
  int shell_count() const noexcept { return size() - core_count_; }
  bool is_core(int i) const noexcept { return i < core_count_; }

  VertexKey key(int i) const { return keys_[i]; }
  std::span<const VertexKey> keys() const noexcept { return keys_; }
  std::span<const VertexKey> core_keys() const noexcept { return {keys_.data(), keys_.data() + core_count_}; }
  std::span<const VertexKey> shell_keys() const noexcept {
    return {keys_.data() + core_count_, keys_.data() + keys_.size()};
  }

  std::optional<int> index(VertexKey k) const {
    auto it = index_.find(k);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Exhaustion level of a local vertex; shell vertices report the first level containing them.
  int exhaustion_level(int i) const { return levels_[i]; }

  /// Stationary weight in the full graph.
  double pi(int i) const { return pi_[i]; }

  /// Neighbors inside B_1 G_n. Complete for core vertices.
  std::span<const Arc> neighbors(int i) const {
    return {arcs_.data() + offsets_[i], arcs_.data() + offsets_[i + 1]};
  }

  /// Induced graph on the core with conductances restricted to it (free truncation boundary).
  WeightedGraph core_graph() const {
    std::vector<Edge> edges;
    for (int i = 0; i < core_count_; ++i) {
      for (const Arc& a : neighbors(i)) {
        if (a.to < core_count_ && i < a.to) edges.push_back({i, a.to, a.c});
      }
    }
    return WeightedGraph(core_count_, edges);
  }

  /// Core vertices with at least one shell neighbor.
  std::vector<int> core_boundary() const {
    std::vector<int> out;
    for (int i = 0; i < core_count_; ++i) {
      for (const Arc& a : neighbors(i)) {
        if (a.to >= core_count_) {
          out.push_back(i);
          break;
        }
      }
    }
    return out;
  }

 private:
  friend LevelGraph truncate(const GraphOracle&, const Exhaustion&, int);

  int level_ = 0;
  int core_count_ = 0;
  std::vector<VertexKey> keys_;
  std::unordered_map<VertexKey, int> index_;
  std::vector<int> levels_;
  std::vector<double> pi_;
  std::vector<std::size_t> offsets_;
  std::vector<Arc> arcs_;
};

/// Builds the induced graph on B_1 G_n with its core/shell partition.
/// Throws ConstructionError when the oracle is asymmetric on the queried region.
inline LevelGraph truncate(const GraphOracle& oracle, const Exhaustion& exhaustion, int n) {
  if (n < 1) throw ConstructionError("truncation level must be ≥ 1");
  LevelGraph g;
  g.level_ = n;
  const std::vector<Exhaustion::Member> core = exhaustion.members(n);
  for (const auto& m : core) {
    g.index_.emplace(m.key, static_cast<int>(g.keys_.size()));
    g.keys_.push_back(m.key);
    g.levels_.push_back(m.level);
  }
  g.core_count_ = static_cast<int>(core.size());

  std::vector<std::vector<Neighbor>> lists(core.size());
  std::vector<VertexKey> shell;
  for (std::size_t i = 0; i < core.size(); ++i) {
    lists[i] = oracle.neighbors(core[i].key);
    for (const Neighbor& nb : lists[i]) {
      if (!g.index_.count(nb.key)) shell.push_back(nb.key);
    }
  }
  std::sort(shell.begin(), shell.end());
  shell.erase(std::unique(shell.begin(), shell.end()), shell.end());

  std::unordered_map<VertexKey, int> next_level;
  if (!shell.empty()) {
    for (const auto& m : exhaustion.members(n + 1)) next_level.emplace(m.key, m.level);
  }
  for (VertexKey k : shell) {
    g.index_.emplace(k, static_cast<int>(g.keys_.size()));
    g.keys_.push_back(k);
    auto it = next_level.find(k);
    g.levels_.push_back(it == next_level.end() ? n + 1 : it->second);
    lists.push_back(oracle.neighbors(k));
  }

  const std::size_t total = g.keys_.size();
  g.offsets_.assign(total + 1, 0);
  g.pi_.assign(total, 0.0);
  for (std::size_t i = 0; i < total; ++i) {
    const bool core_vertex = static_cast<int>(i) < g.core_count_;
    for (const Neighbor& nb : lists[i]) {
      g.pi_[i] += nb.c;
      auto it = g.index_.find(nb.key);
      if (it == g.index_.end()) {
        if (core_vertex) throw ConstructionError("internal: core neighbor missing from B_1");
        continue;
      }
      // symmetry: the other side must list us with the same conductance
      const auto& back = lists[it->second];
      auto bt = std::find_if(back.begin(), back.end(), [&](const Neighbor& b) { return b.key == g.keys_[i]; });
      if (bt == back.end() || bt->c != nb.c) {
        throw ConstructionError("asymmetric adjacency between " + oracle.format(g.keys_[i]) + " and " +
                                oracle.format(nb.key));
      }
      g.arcs_.push_back({it->second, nb.c});
    }
    g.offsets_[i + 1] = g.arcs_.size();
  }
  return g;
}

/// Induced subgraph G_n on V_n alone (free boundary), with key lookup.
struct InducedGraph {
  WeightedGraph graph;
  std::vector<VertexKey> keys;
  std::vector<int> levels;
  std::unordered_map<VertexKey, int> index;

  std::optional<int> find(VertexKey k) const {
    auto it = index.find(k);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

inline InducedGraph induced(const GraphOracle& oracle, const Exhaustion& exhaustion, int n) {
  InducedGraph out;
  for (const auto& m : exhaustion.members(n)) {
    out.index.emplace(m.key, static_cast<int>(out.keys.size()));
    out.keys.push_back(m.key);
    out.levels.push_back(m.level);
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < out.keys.size(); ++i) {
    for (const Neighbor& nb : oracle.neighbors(out.keys[i])) {
      auto it = out.index.find(nb.key);
      if (it != out.index.end() && static_cast<int>(i) < it->second) {
        edges.push_back({static_cast<int>(i), it->second, nb.c});
      }
    }
  }
  out.graph = WeightedGraph(static_cast<int>(out.keys.size()), edges);
  return out;
}

using EndPrefix = std::vector<VertexKey>;

/// Component labels of V \ V_k (k = 1..n) restricted to the probe window V_probe, for every
/// vertex of the window that lies outside V_n. Labels are the minimal key in the component.
class ComplementStructure {
 public:
  ComplementStructure(const GraphOracle& oracle, const Exhaustion& exhaustion, int n, int probe_depth)
      : n_(n) {
    if (n < 1) throw ConstructionError("level must be ≥ 1");
    if (probe_depth < n + 1) throw ConstructionError("probe depth must be ≥ n+1");
    const auto window = exhaustion.members(probe_depth);
    std::unordered_map<VertexKey, std::size_t> local;
    for (std::size_t i = 0; i < window.size(); ++i) local.emplace(window[i].key, i);

    // window vertices sorted from the outermost level inward
    std::vector<std::size_t> order(window.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return window[a].level > window[b].level; });

    detail::DisjointSets sets(window.size());
    std::vector<VertexKey> min_key(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) min_key[i] = window[i].key;
    std::vector<char> added(window.size(), 0);
    auto add = [&](std::size_t i) {
      added[i] = 1;
      for (const Neighbor& nb : oracle.neighbors(window[i].key)) {
        auto it = local.find(nb.key);
        if (it == local.end() || !added[it->second]) continue;
        const std::size_t ra = sets.find(i);
        const std::size_t rb = sets.find(it->second);
        if (ra == rb) continue;
        const VertexKey m = std::min(min_key[ra], min_key[rb]);
        sets.unite(ra, rb);
        min_key[sets.find(i)] = m;
      }
    };

    // vertices with level > k form V \ V_k; add them level by level from the outside in
    std::size_t cursor = 0;
    const int max_level = window.empty() ? 0 : window.back().level;
    for (std::size_t i = 0; i < window.size(); ++i) {
      if (window[i].level > n_) targets_.emplace(window[i].key, EndPrefix(static_cast<std::size_t>(n_)));
    }
    for (int k = std::max(max_level, n_ + 1) - 1; k >= 1; --k) {
      while (cursor < order.size() && window[order[cursor]].level > k) add(order[cursor++]);
      if (k > n_) continue;
      for (auto& [key, prefix] : targets_) {
        prefix[static_cast<std::size_t>(k - 1)] = min_key[sets.find(local.at(key))];
      }
    }
  }

  int level() const noexcept { return n_; }

  /// End prefix (component ids at levels 1..n) of a vertex outside V_n within the window.
  std::optional<EndPrefix> prefix(VertexKey v) const {
    auto it = targets_.find(v);
    if (it == targets_.end()) return std::nullopt;
    return it->second;
  }

  /// Component id at level k ≤ n.
  std::optional<VertexKey> component(VertexKey v, int k) const {
    auto p = prefix(v);
    if (!p || k < 1 || k > n_) return std::nullopt;
    return (*p)[static_cast<std::size_t>(k - 1)];
  }

 private:
  int n_;
  std::unordered_map<VertexKey, EndPrefix> targets_;
};

/// Probe window used when none is given: 2n, but never fewer than two levels past n.
inline int default_probe_depth(int n) { return std::max(2 * n, n + 2); }

/// Partition of the shell of level n into components of V \ V_n, certified within V_probe_depth.
/// Maps each shell vertex to its component id (minimal key in the component).
inline std::unordered_map<VertexKey, VertexKey> complement_components(const GraphOracle& oracle,
                                                                      const Exhaustion& exhaustion, int n,
                                                                      int probe_depth) {
  const LevelGraph level = truncate(oracle, exhaustion, n);
  std::unordered_map<VertexKey, VertexKey> out;
  if (level.shell_count() == 0) return out;
  const ComplementStructure structure(oracle, exhaustion, n, probe_depth);
  for (VertexKey k : level.shell_keys()) out.emplace(k, *structure.component(k, n));
  return out;
}

inline std::unordered_map<VertexKey, VertexKey> complement_components(const GraphOracle& oracle,
                                                                      const Exhaustion& exhaustion, int n) {
  return complement_components(oracle, exhaustion, n, default_probe_depth(n));
}

}  // namespace refwalk
