#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "refwalk/errors.hpp"
#include "refwalk/graph.hpp"
#include "refwalk/harmonic.hpp"
#include "refwalk/linalg.hpp"

namespace refwalk {

using Point = std::complex<double>;

/// One directed side of an edge. `next` is the following half-edge counterclockwise around `origin`.
struct HalfEdge {
  int twin = -1;
  int next = -1;
  int origin = -1;
};

/// Finite planar map as a rotation system. The face of a half-edge lies on its right, so faces are
/// orbits of h -> next(twin(h)); bounded faces run clockwise and the external face runs
/// counterclockwise around the map.
class PlanarMap {
 public:
  PlanarMap(std::vector<HalfEdge> half_edges, int external_half_edge, int x_hat, int y_hat,
            std::vector<double> conductances = {})
      : h_(std::move(half_edges)), c_(std::move(conductances)), x_hat_(x_hat), y_hat_(y_hat) {
    const int H = static_cast<int>(h_.size());
    if (H == 0) throw ConstructionError("planar map needs at least one edge");
    if (c_.empty()) c_.assign(h_.size(), 1.0);
    if (c_.size() != h_.size()) throw ConstructionError("one conductance per half-edge expected");
    int vmax = -1;
    for (int h = 0; h < H; ++h) {
      const HalfEdge& e = h_[h];
      if (e.twin < 0 || e.twin >= H || e.next < 0 || e.next >= H) {
        throw ConstructionError("half-edge " + std::to_string(h) + " points out of range");
      }
      if (e.origin < 0) throw ConstructionError("half-edge " + std::to_string(h) + " has no origin");
      if (e.twin == h || h_[e.twin].twin != h) throw ConstructionError("twin is not a fixed-point-free involution");
      if (h_[e.twin].origin == e.origin) throw ConstructionError("self-loop at vertex " + std::to_string(e.origin));
      if (h_[e.next].origin != e.origin) throw ConstructionError("next leaves the origin of half-edge " + std::to_string(h));
      if (!(c_[h] > 0.0) || !std::isfinite(c_[h]) || c_[h] != c_[e.twin]) {
        throw ConstructionError("conductance of half-edge " + std::to_string(h) + " is invalid or asymmetric");
      }
      vmax = std::max(vmax, e.origin);
    }
    V_ = vmax + 1;

    // next must be a permutation with exactly one cycle per vertex
    std::vector<int> preimages(h_.size(), 0);
    for (const HalfEdge& e : h_) ++preimages[e.next];
    for (int p : preimages) {
      if (p != 1) throw ConstructionError("next is not a permutation");
    }
    std::vector<int> cycles(static_cast<std::size_t>(V_), 0);
    std::vector<char> seen(h_.size(), 0);
    out_.assign(static_cast<std::size_t>(V_), -1);
    for (int h = 0; h < H; ++h) {
      if (seen[h]) continue;
      ++cycles[h_[h].origin];
      out_[h_[h].origin] = h;
      for (int g = h; !seen[g]; g = h_[g].next) seen[g] = 1;
    }
    for (int v = 0; v < V_; ++v) {
      if (cycles[v] != 1) throw ConstructionError("vertex " + std::to_string(v) + " needs exactly one rotation cycle");
    }

    face_of_.assign(h_.size(), -1);
    for (int h = 0; h < H; ++h) {
      if (face_of_[h] >= 0) continue;
      const int f = static_cast<int>(faces_.size());
      faces_.emplace_back();
      for (int g = h; face_of_[g] < 0; g = face_next(g)) {
        face_of_[g] = f;
        faces_.back().push_back(g);
      }
    }
    if (external_half_edge < 0 || external_half_edge >= H) throw ConstructionError("external half-edge out of range");
    external_ = face_of_[external_half_edge];
    external_half_edge_ = external_half_edge;

    if (!graph().is_connected()) throw ConstructionError("planar map is not connected");
    const int E = H / 2;
    if (V_ - E + face_count() != 2) {
      throw ConstructionError("Euler characteristic V - E + F = " + std::to_string(V_ - E + face_count()) + ", expected 2");
    }
    if (x_hat_ < 0 || x_hat_ >= V_ || y_hat_ < 0 || y_hat_ >= V_) throw ConstructionError("marked vertex out of range");
  }

  /// Builds half-edges from counterclockwise neighbor lists. The external face is the one on the
  /// right of the directed edge ext_u -> ext_v.
  static PlanarMap from_rotation(const std::vector<std::vector<int>>& rotation, int ext_u, int ext_v, int x_hat,
                                 int y_hat, const std::map<std::pair<int, int>, double>& conductances = {}) {
    std::map<std::pair<int, int>, int> id;
    std::vector<HalfEdge> h;
    std::vector<double> c;
    for (int v = 0; v < static_cast<int>(rotation.size()); ++v) {
      for (int u : rotation[v]) {
        if (!id.emplace(std::pair{v, u}, static_cast<int>(h.size())).second) {
          throw ConstructionError("repeated neighbor in rotation of vertex " + std::to_string(v));
        }
        h.push_back({-1, -1, v});
        auto it = conductances.find({std::min(u, v), std::max(u, v)});
        c.push_back(it == conductances.end() ? 1.0 : it->second);
      }
    }
    for (int v = 0; v < static_cast<int>(rotation.size()); ++v) {
      const auto& rot = rotation[v];
      for (std::size_t i = 0; i < rot.size(); ++i) {
        const int self = id.at({v, rot[i]});
        auto twin = id.find({rot[i], v});
        if (twin == id.end()) throw ConstructionError("rotation is not symmetric at edge " + std::to_string(v) + "-" + std::to_string(rot[i]));
        h[self].twin = twin->second;
        h[self].next = id.at({v, rot[(i + 1) % rot.size()]});
      }
    }
    auto ext = id.find({ext_u, ext_v});
    if (ext == id.end()) throw ConstructionError("external half-edge is not an edge of the map");
    return PlanarMap(std::move(h), ext->second, x_hat, y_hat, std::move(c));
  }

  /// Straight-line drawing: rotations are read off the angles of the given points.
  static PlanarMap from_points(const std::vector<Point>& points, const std::vector<std::pair<int, int>>& edges, int ext_u,
                               int ext_v, int x_hat, int y_hat) {
    std::vector<std::vector<int>> rotation(points.size());
    for (auto [u, v] : edges) {
      if (u < 0 || v < 0 || u >= static_cast<int>(points.size()) || v >= static_cast<int>(points.size())) {
        throw ConstructionError("edge endpoint out of range");
      }
      rotation[u].push_back(v);
      rotation[v].push_back(u);
    }
    for (std::size_t v = 0; v < points.size(); ++v) {
      std::sort(rotation[v].begin(), rotation[v].end(),
                [&](int a, int b) { return std::arg(points[a] - points[v]) < std::arg(points[b] - points[v]); });
    }
    return from_rotation(rotation, ext_u, ext_v, x_hat, y_hat);
  }

  int vertex_count() const noexcept { return V_; }
  int half_edge_count() const noexcept { return static_cast<int>(h_.size()); }
  int edge_count() const noexcept { return half_edge_count() / 2; }
  int face_count() const noexcept { return static_cast<int>(faces_.size()); }
  const HalfEdge& half_edge(int h) const { return h_.at(static_cast<std::size_t>(h)); }
  const std::vector<HalfEdge>& half_edges() const noexcept { return h_; }
  double conductance(int h) const { return c_.at(static_cast<std::size_t>(h)); }
  int target(int h) const { return h_[h_[h].twin].origin; }
  int face_next(int h) const { return h_[h_[h].twin].next; }
  int face_of(int h) const { return face_of_.at(static_cast<std::size_t>(h)); }
  const std::vector<int>& face(int f) const { return faces_.at(static_cast<std::size_t>(f)); }
  int external_face() const noexcept { return external_; }
  int external_half_edge() const noexcept { return external_half_edge_; }
  int x_hat() const noexcept { return x_hat_; }
  int y_hat() const noexcept { return y_hat_; }

  std::vector<int> face_vertices(int f) const {
    std::vector<int> out;
    for (int h : face(f)) out.push_back(h_[h].origin);
    return out;
  }

  /// Counterclockwise neighbors of v, starting from an arbitrary half-edge.
  std::vector<int> rotation(int v) const {
    std::vector<int> out;
    const int start = out_.at(static_cast<std::size_t>(v));
    int h = start;
    do {
      out.push_back(target(h));
      h = h_[h].next;
    } while (h != start);
    return out;
  }

  bool on_external_face(int v) const {
    for (int h : faces_[external_]) {
      if (h_[h].origin == v) return true;
    }
    return false;
  }

  WeightedGraph graph() const {
    std::vector<Edge> edges;
    for (int h = 0; h < half_edge_count(); ++h) {
      if (h < h_[h].twin) edges.push_back({h_[h].origin, target(h), c_[h]});
    }
    return WeightedGraph(V_, edges);
  }

 private:
  std::vector<HalfEdge> h_;
  std::vector<double> c_;
  int x_hat_;
  int y_hat_;
  int V_ = 0;
  std::vector<int> out_;
  std::vector<int> face_of_;
  std::vector<std::vector<int>> faces_;
  int external_ = -1;
  int external_half_edge_ = -1;
};

/// Infinite planar map given lazily: the oracle lists neighbors in counterclockwise order and the
/// exhaustion runs through submaps. The external face lies on the right of external_from -> external_to.
struct MapOracle {
  GraphOracle graph;
  Exhaustion exhaustion;
  VertexKey external_from = 0;
  VertexKey external_to = 0;
  VertexKey x_hat = 0;
  VertexKey y_hat = 0;
};

namespace detail {

/// Distinct vertices of a closed walk starting just after ŷ, kept at their last visit.
inline std::vector<VertexKey> last_visit_order(const std::vector<VertexKey>& orbit, VertexKey y_hat) {
  auto first = std::find(orbit.begin(), orbit.end(), y_hat);
  if (first == orbit.end()) throw ConstructionError("ŷ is not on the external face");
  std::vector<VertexKey> walk(first + 1, orbit.end());
  walk.insert(walk.end(), orbit.begin(), first + 1);
  std::unordered_map<VertexKey, std::size_t> last;
  for (std::size_t i = 0; i < walk.size(); ++i) last[walk[i]] = i;
  std::vector<VertexKey> out;
  for (std::size_t i = 0; i < walk.size(); ++i) {
    if (last[walk[i]] == i) out.push_back(walk[i]);
  }
  return out;
}

/// Vertex after u in the counterclockwise rotation at v.
inline VertexKey rotation_successor(const GraphOracle& g, VertexKey v, VertexKey u) {
  const auto nbs = g.neighbors(v);
  for (std::size_t i = 0; i < nbs.size(); ++i) {
    if (nbs[i].key == u) return nbs[(i + 1) % nbs.size()].key;
  }
  throw ConstructionError(g.format(u) + " is not a neighbor of " + g.format(v));
}

}  // namespace detail

/// Origins of the face on the right of u -> v, or nothing if it is longer than max_length.
inline std::optional<std::vector<VertexKey>> trace_face(const GraphOracle& g, VertexKey u, VertexKey v,
                                                        std::size_t max_length = 1024) {
  std::vector<VertexKey> out;
  VertexKey a = u, b = v;
  do {
    if (out.size() >= max_length) return std::nullopt;
    out.push_back(a);
    const VertexKey c = detail::rotation_successor(g, b, a);
    a = b;
    b = c;
  } while (a != u || b != v);
  return out;
}

/// Boundary vertices y_1..y_m in counterclockwise order along the external face, each kept at its
/// last visit, ending with y_m = ŷ.
inline std::vector<int> boundary_trace(const PlanarMap& map) {
  std::vector<VertexKey> orbit;
  const int start = map.external_half_edge();
  int h = start;
  do {
    orbit.push_back(static_cast<VertexKey>(map.half_edge(h).origin));
    h = map.face_next(h);
  } while (h != start);
  std::vector<int> out;
  for (VertexKey k : detail::last_visit_order(orbit, static_cast<VertexKey>(map.y_hat()))) out.push_back(static_cast<int>(k));
  return out;
}

inline std::vector<VertexKey> boundary_trace(const MapOracle& map, std::size_t max_length = 1 << 20) {
  auto orbit = trace_face(map.graph, map.external_from, map.external_to, max_length);
  if (!orbit) throw ConstructionError("external face is longer than " + std::to_string(max_length));
  return detail::last_visit_order(*orbit, map.y_hat);
}

struct Embedding {
  std::vector<VertexKey> vertices;
  std::vector<Point> positions;  // aligned with vertices
  std::vector<VertexKey> boundary;  // y_1..y_m
  std::vector<double> boundary_hm;  // hm^{x̂}(y_k)
  std::vector<double> boundary_angles;  // 2π Σ_{j≤k} hm(y_j)
  std::vector<std::pair<VertexKey, VertexKey>> edges;
  std::vector<std::vector<VertexKey>> faces;  // bounded faces as clockwise vertex cycles
  double achieved_tolerance = 0.0;
  bool empirical_tolerance = false;
  int level_low = 0;
  int level_high = 0;
  int window_level = 0;  // 0 for finite maps

  std::optional<Point> find(VertexKey v) const {
    auto it = index_.find(v);
    if (it == index_.end()) return std::nullopt;
    return positions[it->second];
  }

  Point at(VertexKey v) const {
    auto p = find(v);
    if (!p) throw ConstructionError("vertex " + std::to_string(v) + " is not embedded");
    return *p;
  }

  Point& at(VertexKey v) {
    auto it = index_.find(v);
    if (it == index_.end()) throw ConstructionError("vertex " + std::to_string(v) + " is not embedded");
    return positions[it->second];
  }

  std::vector<Point> polygon(std::size_t f) const {
    std::vector<Point> out;
    for (VertexKey v : faces.at(f)) out.push_back(at(v));
    return out;
  }

  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < vertices.size(); ++i) index_.emplace(vertices[i], i);
  }

 private:
  std::unordered_map<VertexKey, std::size_t> index_;
};

namespace detail {

inline void place_boundary(Embedding& e, std::span<const VertexKey> boundary, std::span<const double> hm) {
  if (boundary.size() < 3) throw ConstructionError("degenerate boundary: fewer than 3 boundary vertices");
  e.boundary.assign(boundary.begin(), boundary.end());
  e.boundary_hm.assign(hm.begin(), hm.end());
  e.boundary_angles.clear();
  double cumulative = 0.0;
  for (double p : hm) {
    cumulative += p;
    e.boundary_angles.push_back(2.0 * std::numbers::pi * cumulative);
  }
}

inline Point boundary_point(const Embedding& e, std::size_t k) {
  if (k + 1 == e.boundary.size()) return {1.0, 0.0};  // H(ŷ) = 1 exactly
  return std::polar(1.0, e.boundary_angles[k]);
}

}  // namespace detail

/// Tutte embedding of a finite map: boundary by cumulative harmonic measure from x̂, interior by
/// the harmonic extension of the real and imaginary parts.
inline Embedding tutte_embed(const PlanarMap& map, SolverOptions options = {}) {
  if (map.on_external_face(map.x_hat())) throw ConstructionError("x̂ must be an interior vertex");
  const std::vector<int> boundary = boundary_trace(map);
  const WeightedGraph g = map.graph();
  const int source[] = {map.x_hat()};
  const Eigen::MatrixXd hm = harmonic_measure_rows(g, boundary, source, options);
  check_probability_rows(hm, "boundary harmonic measure");

  Embedding e;
  const std::vector<VertexKey> keys(boundary.begin(), boundary.end());
  std::vector<double> hm_row(boundary.size());
  for (std::size_t k = 0; k < boundary.size(); ++k) hm_row[k] = hm(0, static_cast<Eigen::Index>(k));
  detail::place_boundary(e, keys, hm_row);

  Eigen::MatrixXd phi(static_cast<Eigen::Index>(boundary.size()), 2);
  for (std::size_t k = 0; k < boundary.size(); ++k) {
    const Point p = detail::boundary_point(e, k);
    phi(static_cast<Eigen::Index>(k), 0) = p.real();
    phi(static_cast<Eigen::Index>(k), 1) = p.imag();
  }
  std::vector<int> interior;
  std::vector<char> on_boundary(static_cast<std::size_t>(map.vertex_count()), 0);
  for (int b : boundary) on_boundary[b] = 1;
  for (int v = 0; v < map.vertex_count(); ++v) {
    if (!on_boundary[v]) interior.push_back(v);
  }
  const Eigen::MatrixXd inner = extend_rows(g, boundary, phi, interior, options);

  e.positions.assign(static_cast<std::size_t>(map.vertex_count()), Point{});
  for (int v = 0; v < map.vertex_count(); ++v) e.vertices.push_back(static_cast<VertexKey>(v));
  for (std::size_t k = 0; k < boundary.size(); ++k) e.positions[boundary[k]] = detail::boundary_point(e, k);
  for (std::size_t i = 0; i < interior.size(); ++i) {
    e.positions[interior[i]] = {inner(static_cast<Eigen::Index>(i), 0), inner(static_cast<Eigen::Index>(i), 1)};
  }
  for (int h = 0; h < map.half_edge_count(); ++h) {
    if (h < map.half_edge(h).twin) e.edges.emplace_back(map.half_edge(h).origin, map.target(h));
  }
  for (int f = 0; f < map.face_count(); ++f) {
    if (f == map.external_face()) continue;
    std::vector<VertexKey> cycle;
    for (int v : map.face_vertices(f)) cycle.push_back(static_cast<VertexKey>(v));
    e.faces.push_back(std::move(cycle));
  }
  e.reindex();
  return e;
}

namespace detail {

/// Bounded faces whose vertices all lie in `allowed`, each listed once.
inline std::vector<std::vector<VertexKey>> faces_within(const MapOracle& map, const std::unordered_set<VertexKey>& allowed,
                                                        std::span<const VertexKey> seeds, std::size_t max_length = 256) {
  std::set<std::pair<VertexKey, VertexKey>> used;
  std::vector<std::vector<VertexKey>> out;
  std::vector<VertexKey> sorted(seeds.begin(), seeds.end());
  std::sort(sorted.begin(), sorted.end());
  for (VertexKey u : sorted) {
    for (const Neighbor& nb : map.graph.neighbors(u)) {
      if (!allowed.count(nb.key) || used.count({u, nb.key})) continue;
      auto face = trace_face(map.graph, u, nb.key, max_length);
      if (!face) continue;
      bool inside = true;
      bool external = false;
      for (std::size_t i = 0; i < face->size(); ++i) {
        const VertexKey a = (*face)[i], b = (*face)[(i + 1) % face->size()];
        used.insert({a, b});
        inside = inside && allowed.count(a);
        external = external || (a == map.external_from && b == map.external_to);
      }
      if (inside && !external) out.push_back(std::move(*face));
    }
  }
  return out;
}

}  // namespace detail

/// Tutte embedding of the finite submap G_level, reported on the window V_{window_level}.
inline Embedding tutte_embed_at_level(const MapOracle& map, int window_level, int level, SolverOptions options = {}) {
  if (level < window_level) throw ConstructionError("solve level must cover the window");
  const std::vector<VertexKey> boundary = boundary_trace(map);
  const std::vector<VertexKey> window = map.exhaustion.level(window_level);
  const std::unordered_set<VertexKey> in_window(window.begin(), window.end());
  for (VertexKey b : boundary) {
    if (!in_window.count(b)) throw ConstructionError("boundary vertex " + map.graph.format(b) + " lies outside the window");
  }
  if (!in_window.count(map.x_hat)) throw ConstructionError("x̂ lies outside the window");
  if (std::find(boundary.begin(), boundary.end(), map.x_hat) != boundary.end()) {
    throw ConstructionError("x̂ must be an interior vertex");
  }
  const VertexKey source[] = {map.x_hat};
  const Eigen::MatrixXd hm = harmonic_measures_at_level(map.graph, map.exhaustion, boundary, source, level, options);
  check_probability_rows(hm, "boundary harmonic measure");

  Embedding e;
  std::vector<double> hm_row(boundary.size());
  for (std::size_t k = 0; k < boundary.size(); ++k) hm_row[k] = hm(0, static_cast<Eigen::Index>(k));
  detail::place_boundary(e, boundary, hm_row);
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(boundary.size()), 2);
  std::unordered_map<VertexKey, Point> fixed;
  for (std::size_t k = 0; k < boundary.size(); ++k) {
    const Point p = detail::boundary_point(e, k);
    phi(static_cast<Eigen::Index>(k), 0) = p.real();
    phi(static_cast<Eigen::Index>(k), 1) = p.imag();
    fixed.emplace(boundary[k], p);
  }
  std::vector<VertexKey> interior;
  for (VertexKey v : window) {
    if (!fixed.count(v)) interior.push_back(v);
  }
  const Eigen::MatrixXd inner = extension_at_level(map.graph, map.exhaustion, boundary, phi, interior, level, options);
  std::size_t i = 0;
  for (VertexKey v : window) {
    e.vertices.push_back(v);
    if (auto it = fixed.find(v); it != fixed.end()) {
      e.positions.push_back(it->second);
    } else {
      e.positions.emplace_back(inner(static_cast<Eigen::Index>(i), 0), inner(static_cast<Eigen::Index>(i), 1));
      ++i;
    }
    for (const Neighbor& nb : map.graph.neighbors(v)) {
      if (v < nb.key && in_window.count(nb.key)) e.edges.emplace_back(v, nb.key);
    }
  }
  e.faces = detail::faces_within(map, in_window, window);
  e.level_low = e.level_high = level;
  e.window_level = window_level;
  e.reindex();
  return e;
}

/// Tutte embedding of an infinite map on the window V_{window_level}: submap embeddings at
/// increasing levels until the window positions agree within options.tol.
inline Embedding tutte_embed(const MapOracle& map, int window_level, const LevelOptions& options = {}) {
  if (window_level < 1) throw ConstructionError("window level must be ≥ 1");
  const int n0 = std::max(window_level, options.n_start.value_or(1));
  Embedding last;
  const LevelResult r = escalate(n0, options, "tutte_embed", [&](int n) {
    last = tutte_embed_at_level(map, window_level, n, options.solver);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(last.positions.size()), 2);
    for (std::size_t i = 0; i < last.positions.size(); ++i) {
      m(static_cast<Eigen::Index>(i), 0) = last.positions[i].real();
      m(static_cast<Eigen::Index>(i), 1) = last.positions[i].imag();
    }
    return m;
  });
  last.achieved_tolerance = r.achieved_tolerance;
  last.empirical_tolerance = true;
  last.level_low = r.level_low;
  last.level_high = r.level_high;
  return last;
}

/// Sup distance on the window between submap embeddings at consecutive entries of `levels`.
inline std::vector<double> submap_convergence(const MapOracle& map, int window_level, std::span<const int> levels,
                                              SolverOptions options = {}) {
  std::vector<double> out;
  std::optional<Embedding> previous;
  for (int n : levels) {
    Embedding e = tutte_embed_at_level(map, window_level, n, options);
    if (previous) {
      double gap = 0.0;
      for (std::size_t i = 0; i < e.positions.size(); ++i) gap = std::max(gap, std::abs(e.positions[i] - previous->positions[i]));
      out.push_back(gap);
    }
    previous = std::move(e);
  }
  return out;
}

/// Largest turn in the wrong direction along a clockwise polygon, measured as a cross product.
inline double convexity_defect(std::span<const Point> polygon) {
  const std::size_t k = polygon.size();
  double worst = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const Point a = polygon[(i + 1) % k] - polygon[i];
    const Point b = polygon[(i + 2) % k] - polygon[(i + 1) % k];
    worst = std::max(worst, a.real() * b.imag() - a.imag() * b.real());
  }
  return worst;
}

struct ConvexityReport {
  std::vector<double> defects;  // aligned with Embedding::faces
  double max_defect = 0.0;
  int worst_face = -1;
  bool passed = true;
};

inline ConvexityReport face_convexity(const Embedding& e, double tol = 1e-9) {
  ConvexityReport r;
  for (std::size_t f = 0; f < e.faces.size(); ++f) {
    const double d = convexity_defect(e.polygon(f));
    r.defects.push_back(d);
    if (d > r.max_defect) {
      r.max_defect = d;
      r.worst_face = static_cast<int>(f);
    }
  }
  r.passed = r.max_defect <= tol;
  return r;
}

/// Same check with the faces read off the map rather than the embedding.
inline ConvexityReport face_convexity(const Embedding& e, const PlanarMap& map, double tol = 1e-9) {
  Embedding copy = e;
  copy.faces.clear();
  for (int f = 0; f < map.face_count(); ++f) {
    if (f == map.external_face()) continue;
    std::vector<VertexKey> cycle;
    for (int v : map.face_vertices(f)) cycle.push_back(static_cast<VertexKey>(v));
    copy.faces.push_back(std::move(cycle));
  }
  return face_convexity(copy, tol);
}

/// Largest |H(v)|; the maximum principle keeps it at most 1.
inline double max_modulus(const Embedding& e) {
  double m = 0.0;
  for (const Point& p : e.positions) m = std::max(m, std::abs(p));
  return m;
}

/// Harmonic measure recovered from the positions of consecutive boundary vertices.
inline std::vector<double> hm_from_angles(const Embedding& e) {
  std::vector<double> out;
  Point previous{1.0, 0.0};
  for (VertexKey y : e.boundary) {
    const Point p = e.at(y);
    double a = std::arg(p / previous);
    if (a < -1e-9) a += 2.0 * std::numbers::pi;  // increments lie in [0, 2π); rounding can dip below 0
    a = std::max(a, 0.0);
    out.push_back(a / (2.0 * std::numbers::pi));
    previous = p;
  }
  return out;
}

struct EndImage {
  std::vector<std::vector<Point>> polygons;
  double diameter = 0.0;
  int level = 0;
};

/// End prefix of a window vertex v outside V_n.
inline EndPrefix end_prefix(const MapOracle& map, VertexKey v, int n, int probe_depth) {
  const ComplementStructure s(map.graph, map.exhaustion, n, probe_depth);
  auto p = s.prefix(v);
  if (!p) throw ConstructionError("vertex " + map.graph.format(v) + " is not outside V_" + std::to_string(n) + " within the probe window");
  return *p;
}

/// Union of the images of the faces lying inside the level-n component of the end, restricted to
/// the faces within the embedding window.
inline EndImage end_image(const MapOracle& map, const Embedding& e, const EndPrefix& prefix, int n) {
  if (n < 1 || prefix.size() != static_cast<std::size_t>(n)) throw ConstructionError("end prefix does not have length n");
  if (e.window_level < n + 1) throw ConstructionError("embedding window must reach past level n");
  const ComplementStructure s(map.graph, map.exhaustion, n, e.window_level);
  std::unordered_set<VertexKey> component;
  std::vector<VertexKey> seeds;
  for (VertexKey v : e.vertices) {
    auto p = s.prefix(v);
    if (p && *p == prefix) {
      component.insert(v);
      seeds.push_back(v);
    }
  }
  if (component.empty()) throw ConstructionError("end prefix is not valid at level " + std::to_string(n));
  EndImage out;
  out.level = n;
  std::vector<Point> points;
  for (const auto& face : detail::faces_within(map, component, seeds)) {
    std::vector<Point> poly;
    for (VertexKey v : face) poly.push_back(e.at(v));
    points.insert(points.end(), poly.begin(), poly.end());
    out.polygons.push_back(std::move(poly));
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) out.diameter = std::max(out.diameter, std::abs(points[i] - points[j]));
  }
  return out;
}

/// A finite map has no ends, so every end image is empty.
inline EndImage end_image(const PlanarMap&, const Embedding&, const EndPrefix&, int n) {
  EndImage out;
  out.level = n;
  return out;
}

struct SvgOptions {
  int size = 512;  // pixels
  double edge_width = 0.004;
  double circle_width = 0.006;
  double vertex_radius = 0.012;
  bool fill_faces = false;
};

namespace detail {

inline std::string fixed(double x) {
  if (std::abs(x) < 5e-7) x = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace detail

/// Deterministic SVG drawing in the unit disk (y axis pointing up). Edges whose endpoints coincide
/// are drawn as points.
inline std::string render_svg(const Embedding& e, const SvgOptions& o = {}) {
  using detail::fixed;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.size << "\" height=\"" << o.size
    << "\" viewBox=\"-1.05 -1.05 2.1 2.1\">\n";
  s << "<circle cx=\"0\" cy=\"0\" r=\"1\" fill=\"none\" stroke=\"#999999\" stroke-width=\"" << fixed(o.circle_width) << "\"/>\n";
  if (o.fill_faces) {
    for (std::size_t f = 0; f < e.faces.size(); ++f) {
      s << "<polygon class=\"face\" fill=\"#dde6f2\" stroke=\"none\" points=\"";
      const auto poly = e.polygon(f);
      for (std::size_t i = 0; i < poly.size(); ++i) s << (i ? " " : "") << fixed(poly[i].real()) << "," << fixed(-poly[i].imag());
      s << "\"/>\n";
    }
  }
  for (auto [u, v] : e.edges) {
    const Point a = e.at(u), b = e.at(v);
    if (std::abs(a - b) < 1e-12) {
      s << "<circle class=\"point\" cx=\"" << fixed(a.real()) << "\" cy=\"" << fixed(-a.imag()) << "\" r=\""
        << fixed(o.edge_width) << "\" fill=\"#000000\"/>\n";
      continue;
    }
    s << "<line x1=\"" << fixed(a.real()) << "\" y1=\"" << fixed(-a.imag()) << "\" x2=\"" << fixed(b.real()) << "\" y2=\""
      << fixed(-b.imag()) << "\" stroke=\"#000000\" stroke-width=\"" << fixed(o.edge_width) << "\"/>\n";
  }
  std::unordered_set<VertexKey> boundary(e.boundary.begin(), e.boundary.end());
  for (std::size_t i = 0; i < e.vertices.size(); ++i) {
    const bool b = boundary.count(e.vertices[i]) > 0;
    s << "<circle class=\"" << (b ? "boundary" : "vertex") << "\" cx=\"" << fixed(e.positions[i].real()) << "\" cy=\""
      << fixed(-e.positions[i].imag()) << "\" r=\"" << fixed(o.vertex_radius) << "\" fill=\"" << (b ? "#c0392b" : "#2c3e50")
      << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

inline void export_svg(const Embedding& e, const std::filesystem::path& path, const SvgOptions& o = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << render_svg(e, o);
  if (!out) throw IoError("failed writing " + path.string());
}

inline nlohmann::json to_json(const PlanarMap& map) {
  nlohmann::json j;
  j["half_edges"] = nlohmann::json::array();
  bool unit = true;
  for (int h = 0; h < map.half_edge_count(); ++h) {
    const HalfEdge& e = map.half_edge(h);
    j["half_edges"].push_back({{"twin", e.twin}, {"next", e.next}, {"origin", e.origin}});
    unit = unit && map.conductance(h) == 1.0;
  }
  j["external_face_half_edge"] = map.external_half_edge();
  j["marks"] = {{"x", map.x_hat()}, {"y", map.y_hat()}};
  if (!unit) {
    j["conductances"] = nlohmann::json::array();
    for (int h = 0; h < map.half_edge_count(); ++h) j["conductances"].push_back(map.conductance(h));
  }
  return j;
}

/// Reads {half_edges: [{twin, next, origin}], external_face_half_edge, marks: {x, y}} with optional
/// per-half-edge "conductances".
inline PlanarMap planar_map_from_json(const nlohmann::json& j) {
  try {
    std::vector<HalfEdge> h;
    for (const auto& e : j.at("half_edges")) h.push_back({e.at("twin").get<int>(), e.at("next").get<int>(), e.at("origin").get<int>()});
    std::vector<double> c;
    if (j.contains("conductances")) c = j.at("conductances").get<std::vector<double>>();
    return PlanarMap(std::move(h), j.at("external_face_half_edge").get<int>(), j.at("marks").at("x").get<int>(),
                     j.at("marks").at("y").get<int>(), std::move(c));
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("malformed planar map: ") + ex.what());
  }
}

inline PlanarMap load_planar_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(path.string() + ": " + ex.what());
  }
  return planar_map_from_json(j);
}

namespace maps {

/// Wheel W_m: boundary cycle 0..m-1 counterclockwise, center m = x̂, ŷ = 0.
inline PlanarMap wheel(int m) {
  if (m < 3) throw ConstructionError("wheel needs m ≥ 3");
  std::vector<Point> pts;
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < m; ++i) {
    pts.push_back(std::polar(1.0, 2.0 * std::numbers::pi * i / m));
    edges.emplace_back(i, (i + 1) % m);
    edges.emplace_back(i, m);
  }
  pts.emplace_back(0.0, 0.0);
  return PlanarMap::from_points(pts, edges, 0, 1, m, 0);
}

/// w × h grid with vertex x + w y; outer cycle external, x̂ the central vertex, ŷ = 0.
inline PlanarMap grid(int w, int h) {
  if (w < 3 || h < 3) throw ConstructionError("grid map needs at least 3 × 3 vertices");
  std::vector<Point> pts;
  std::vector<std::pair<int, int>> edges;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      pts.emplace_back(x, y);
      if (x + 1 < w) edges.emplace_back(y * w + x, y * w + x + 1);
      if (y + 1 < h) edges.emplace_back(y * w + x, (y + 1) * w + x);
    }
  }
  return PlanarMap::from_points(pts, edges, 0, 1, (h / 2) * w + w / 2, 0);
}

/// Square 0..3 with center 4 joined to the corners.
inline PlanarMap square_with_center() {
  const std::vector<Point> pts{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}, {0, 0}};
  return PlanarMap::from_points(pts, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 4}, {1, 4}, {2, 4}, {3, 4}}, 0, 1, 4, 0);
}

/// square_with_center plus a pendant vertex 5 hanging off corner 1 into the external face.
inline PlanarMap pendant_square() {
  const std::vector<Point> pts{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}, {0, 0}, {2, -2}};
  return PlanarMap::from_points(pts, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 4}, {1, 4}, {2, 4}, {3, 4}, {1, 5}}, 0, 1, 4, 0);
}

inline PlanarMap triangle() {
  const std::vector<Point> pts{{0, 0}, {1, 0}, {0, 1}};
  return PlanarMap::from_points(pts, {{0, 1}, {1, 2}, {2, 0}}, 0, 1, 0, 0);
}

namespace detail {

// corner c of a square: ccw rotation is c+1, inward, c-1, outward
inline std::vector<Neighbor> square_corner(VertexKey node, int c, std::optional<VertexKey> in, std::optional<VertexKey> out) {
  std::vector<Neighbor> r;
  r.push_back({4 * node + static_cast<VertexKey>((c + 1) % 4), 1.0});
  if (in) r.push_back({*in, 1.0});
  r.push_back({4 * node + static_cast<VertexKey>((c + 3) % 4), 1.0});
  if (out) r.push_back({*out, 1.0});
  return r;
}

inline std::string corner_name(VertexKey v) {
  return "s" + std::to_string(v / 4) + "." + std::to_string(v % 4);
}

}  // namespace detail

/// Nested squares 4k..4k+3 joined corner to corner. One end, at the common center.
inline MapOracle nested_squares() {
  GraphOracle g("nested_squares", 0, [](VertexKey v) {
    const VertexKey k = v / 4;
    const int c = static_cast<int>(v % 4);
    std::optional<VertexKey> out;
    if (k > 0) out = v - 4;
    return detail::square_corner(k, c, v + 4, out);
  }, detail::corner_name);
  Exhaustion e = Exhaustion::custom([](int n) {
    std::vector<VertexKey> out;
    for (VertexKey v = 0; v < 4 * static_cast<VertexKey>(n); ++v) out.push_back(v);
    return out;
  });
  return {g, e, 0, 1, 4, 0};
}

/// Binary tree of squares: node v (heap order) is a square whose interior holds the squares of
/// its children 2v+1 (left) and 2v+2 (right). Every face is a quadrilateral or hexagon; the ends
/// are the infinite descending paths.
inline MapOracle binary_tree_faces() {
  GraphOracle g("binary_tree_faces", 0, [](VertexKey v) {
    const VertexKey node = v / 4;
    const int c = static_cast<int>(v % 4);
    const VertexKey child = (c == 0 || c == 3) ? 2 * node + 1 : 2 * node + 2;
    if (child > (std::numeric_limits<VertexKey>::max() >> 3)) throw ConstructionError("binary_tree_faces key overflow");
    std::optional<VertexKey> out;
    if (node > 0) {
      const bool left = node % 2 == 1;
      const VertexKey parent = (node - 1) / 2;
      if (left) {
        if (c == 0 || c == 3) out = 4 * parent + c;
        else out = 4 * (node + 1) + (c == 1 ? 0 : 3);
      } else {
        if (c == 1 || c == 2) out = 4 * parent + c;
        else out = 4 * (node - 1) + (c == 0 ? 1 : 2);
      }
    }
    return detail::square_corner(node, c, 4 * child + c, out);
  }, detail::corner_name);
  Exhaustion e = Exhaustion::custom([](int n) {
    std::vector<VertexKey> out;
    const VertexKey nodes = (VertexKey{1} << n) - 1;  // depths 0..n-1
    for (VertexKey v = 0; v < 4 * nodes; ++v) out.push_back(v);
    return out;
  });
  return {g, e, 0, 1, 4, 0};
}

}  // namespace maps

}  // namespace refwalk
