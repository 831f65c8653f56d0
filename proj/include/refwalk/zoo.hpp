#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "refwalk/errors.hpp"
#include "refwalk/graph.hpp"

namespace refwalk::zoo {

/// Coordinates of Z^d packed into a 64-bit key, 64/d bits per axis (offset binary).
class LatticeCodec {
 public:
  explicit LatticeCodec(int d) : d_(d) {
    if (d < 1) throw ConstructionError("lattice dimension must be ≥ 1");
    if (d > 8) throw ConstructionError("lattice dimension above 8 is not supported");
    bits_ = 64 / d;
    limit_ = bits_ >= 64 ? std::numeric_limits<std::int64_t>::max() / 2 : (std::int64_t{1} << (bits_ - 1)) - 1;
  }

  int dimension() const noexcept { return d_; }
  std::int64_t limit() const noexcept { return limit_; }

  VertexKey encode(const std::vector<std::int64_t>& x) const {
    VertexKey key = 0;
    for (int i = 0; i < d_; ++i) {
      if (x[i] > limit_ || x[i] < -limit_) throw ConstructionError("lattice coordinate out of range");
      const auto biased = static_cast<std::uint64_t>(x[i] + limit_ + 1);
      key |= bits_ >= 64 ? biased : biased << (bits_ * i);
    }
    return key;
  }

  std::vector<std::int64_t> decode(VertexKey key) const {
    std::vector<std::int64_t> x(static_cast<std::size_t>(d_));
    const std::uint64_t mask = bits_ >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits_) - 1;
    for (int i = 0; i < d_; ++i) {
      const std::uint64_t raw = bits_ >= 64 ? key : (key >> (bits_ * i)) & mask;
      x[i] = static_cast<std::int64_t>(raw) - limit_ - 1;
    }
    return x;
  }

 private:
  int d_;
  int bits_;
  std::int64_t limit_;
};

/// Z^d with unit conductances, rooted at the origin. Vertices print as "x,y,z".
inline GraphOracle lattice_zd(int d) {
  const LatticeCodec codec(d);
  const VertexKey origin = codec.encode(std::vector<std::int64_t>(static_cast<std::size_t>(d), 0));
  auto neighbors = [codec](VertexKey v) {
    std::vector<std::int64_t> x = codec.decode(v);
    std::vector<Neighbor> out;
    out.reserve(2 * x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (int s : {1, -1}) {
        x[i] += s;
        out.push_back({codec.encode(x), 1.0});
        x[i] -= s;
      }
    }
    return out;
  };
  auto format = [codec](VertexKey v) {
    std::string s;
    for (std::int64_t c : codec.decode(v)) {
      if (!s.empty()) s += ',';
      s += std::to_string(c);
    }
    return s;
  };
  auto parse = [codec](std::string_view text) -> std::optional<VertexKey> {
    std::vector<std::int64_t> x;
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t end = std::min(text.find(',', start), text.size());
      std::int64_t value = 0;
      const auto piece = text.substr(start, end - start);
      auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), value);
      if (ec != std::errc() || ptr != piece.data() + piece.size()) return std::nullopt;
      x.push_back(value);
      start = end + 1;
    }
    if (static_cast<int>(x.size()) != codec.dimension()) return std::nullopt;
    try {
      return codec.encode(x);
    } catch (const ConstructionError&) {
      return std::nullopt;
    }
  };
  return GraphOracle("lattice_zd(" + std::to_string(d) + ")", origin, neighbors, format, parse);
}

namespace detail {

// Heap-indexed rooted tree: root 0, children of v are b*v+1 .. b*v+b.
inline int tree_depth(VertexKey v, std::uint64_t b) {
  int depth = 0;
  while (v != 0) {
    v = (v - 1) / b;
    ++depth;
  }
  return depth;
}

inline std::vector<Neighbor> tree_neighbors(VertexKey v, std::uint64_t b, double lambda) {
  std::vector<Neighbor> out;
  const int depth = tree_depth(v, b);
  if (v != 0) out.push_back({(v - 1) / b, std::pow(lambda, depth - 1)});
  if (v > (std::numeric_limits<std::uint64_t>::max() - b) / b) {
    throw ConstructionError("tree vertex key overflow at depth " + std::to_string(depth));
  }
  const double down = std::pow(lambda, depth);
  for (std::uint64_t i = 1; i <= b; ++i) out.push_back({b * v + i, down});
  return out;
}

}  // namespace detail

/// Rooted tree in which every vertex has b children (the root has degree b), unit conductances.
inline GraphOracle regular_tree(int b) {
  if (b < 2) throw ConstructionError("regular_tree needs b ≥ 2");
  const auto bb = static_cast<std::uint64_t>(b);
  return GraphOracle("regular_tree(" + std::to_string(b) + ")", 0,
                     [bb](VertexKey v) { return detail::tree_neighbors(v, bb, 1.0); });
}

/// Same tree with c(e) = λ^k for an edge joining depths k and k+1.
inline GraphOracle biased_tree(int b, double lambda) {
  if (b < 2) throw ConstructionError("biased_tree needs b ≥ 2");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConstructionError("biased_tree needs λ > 0");
  const auto bb = static_cast<std::uint64_t>(b);
  std::ostringstream name;
  name << "biased_tree(" << b << "," << lambda << ")";
  return GraphOracle(name.str(), 0, [bb, lambda](VertexKey v) { return detail::tree_neighbors(v, bb, lambda); });
}

/// Finite graph as an oracle; vertex keys are the dense ids.
inline GraphOracle finite(const WeightedGraph& graph, VertexKey root = 0) {
  if (root >= static_cast<VertexKey>(graph.vertex_count())) throw ConstructionError("root out of range");
  auto adjacency = std::make_shared<std::vector<std::vector<Neighbor>>>(graph.vertex_count());
  for (int v = 0; v < graph.vertex_count(); ++v) {
    for (const Arc& a : graph.neighbors(v)) (*adjacency)[v].push_back({static_cast<VertexKey>(a.to), a.c});
  }
  return GraphOracle("finite", root, [adjacency](VertexKey v) {
    if (v >= adjacency->size()) throw ConstructionError("vertex " + std::to_string(v) + " not in finite graph");
    return (*adjacency)[v];
  });
}

/// Complete graph K_n with unit conductances.
inline WeightedGraph complete_graph(int n) {
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) edges.push_back({u, v, 1.0});
  }
  return WeightedGraph(n, edges);
}

/// Cycle C_n with unit conductances.
inline WeightedGraph cycle_graph(int n) {
  std::vector<Edge> edges;
  for (int v = 0; v < n; ++v) edges.push_back({v, (v + 1) % n, 1.0});
  return WeightedGraph(n, edges);
}

/// Path 0-1-...-(n-1) with unit conductances.
inline WeightedGraph path_graph(int n) {
  std::vector<Edge> edges;
  for (int v = 0; v + 1 < n; ++v) edges.push_back({v, v + 1, 1.0});
  return WeightedGraph(n, edges);
}

/// Random connected graph on n vertices: a random spanning tree plus each other pair with
/// probability `extra`, conductances uniform in [c_min, c_max].
template <class Rng>
WeightedGraph random_connected(Rng& rng, int n, double extra = 0.4, double c_min = 0.5, double c_max = 3.0) {
  if (n < 1) throw ConstructionError("random graph needs at least one vertex");
  std::uniform_real_distribution<double> weight(c_min, c_max);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Edge> edges;
  std::vector<std::vector<char>> used(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    const int u = order[i];
    const int v = order[pick(rng)];
    edges.push_back({u, v, weight(rng)});
    used[u][v] = used[v][u] = 1;
  }
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (!used[u][v] && coin(rng) < extra) edges.push_back({u, v, weight(rng)});
    }
  }
  return WeightedGraph(n, edges);
}

}  // namespace refwalk::zoo
