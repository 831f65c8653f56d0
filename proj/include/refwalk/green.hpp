#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "refwalk/errors.hpp"
#include "refwalk/graph.hpp"
#include "refwalk/harmonic.hpp"
#include "refwalk/linalg.hpp"
#include "refwalk/rng.hpp"
#include "refwalk/zoo.hpp"

namespace refwalk {

/// G_A(x, y) for x, y in a window: expected visits to y before hitting A.
struct GreenMatrix {
  std::vector<VertexKey> window;
  std::vector<VertexKey> A;
  std::vector<double> pi;  // π(y) for the window vertices
  Eigen::MatrixXd values;  // |W| × |W|
  double achieved_tolerance = 0.0;
  int level_low = 0;
  int level_high = 0;
  bool empirical_tolerance = true;

  std::optional<int> find(VertexKey k) const {
    auto it = std::find(window.begin(), window.end(), k);
    if (it == window.end()) return std::nullopt;
    return static_cast<int>(it - window.begin());
  }

  double operator()(VertexKey x, VertexKey y) const { return values(*find(x), *find(y)); }

  /// Covariance kernel Σ(x, y) = G(x, y)/π(y).
  Eigen::MatrixXd covariance() const {
    Eigen::MatrixXd s = values;
    for (Eigen::Index j = 0; j < s.cols(); ++j) s.col(j) /= pi[static_cast<std::size_t>(j)];
    return s;
  }
};

namespace detail {

struct LevelWindow {
  InducedGraph g;
  std::vector<int> a_idx;
  std::vector<int> w_idx;
};

inline LevelWindow locate_window(const GraphOracle& oracle, const Exhaustion& exhaustion, std::span<const VertexKey> A,
                                 std::span<const VertexKey> window, int level) {
  LevelWindow lw{induced(oracle, exhaustion, level), {}, {}};
  auto locate = [&](VertexKey k) {
    auto i = lw.g.find(k);
    if (!i) throw ConstructionError("vertex " + oracle.format(k) + " is outside V_" + std::to_string(level));
    return *i;
  };
  for (VertexKey k : A) lw.a_idx.push_back(locate(k));
  for (VertexKey k : window) lw.w_idx.push_back(locate(k));
  return lw;
}

inline void check_green_inputs(std::span<const VertexKey> A, std::span<const VertexKey> window) {
  if (A.empty()) throw ConstructionError("killing set A must be nonempty");
  if (window.empty()) throw ConstructionError("window must be nonempty");
  std::unordered_set<VertexKey> seen;
  for (VertexKey w : window) {
    if (!seen.insert(w).second) throw ConstructionError("window lists a vertex twice");
  }
}

}  // namespace detail

/// Green's function of the walk on G_N killed on A: the fundamental matrix (I - P_UU)^{-1} of the
/// absorbing chain, i.e. G(x, y) = (L_UU^{-1})_{xy} π_N(y) with L_UU = diag(π_N) - C on U = V_N \ A.
inline Eigen::MatrixXd green_at_level(const GraphOracle& oracle, const Exhaustion& exhaustion,
                                      std::span<const VertexKey> A, std::span<const VertexKey> window, int level,
                                      SolverOptions options = {}) {
  detail::check_green_inputs(A, window);
  const detail::LevelWindow lw = detail::locate_window(oracle, exhaustion, A, window, level);
  const WeightedGraph& g = lw.g.graph;
  std::vector<char> killed(static_cast<std::size_t>(g.vertex_count()), 0);
  std::vector<int> pinned;
  for (int a : lw.a_idx) {
    if (!killed[a]) pinned.push_back(a);
    killed[a] = 1;
  }
  const auto k = static_cast<Eigen::Index>(window.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(k, k);
  std::vector<Eigen::Index> free_cols;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!killed[lw.w_idx[j]]) free_cols.push_back(j);
  }
  if (free_cols.empty()) return out;
  const PinnedLaplacian laplacian(g, pinned, options, static_cast<int>(free_cols.size()));
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(laplacian.unknown_count(), static_cast<Eigen::Index>(free_cols.size()));
  for (std::size_t c = 0; c < free_cols.size(); ++c) rhs(laplacian.local(lw.w_idx[free_cols[c]]), c) = 1.0;
  const Eigen::MatrixXd sol = laplacian.solve(rhs);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (killed[lw.w_idx[i]]) continue;
    for (std::size_t c = 0; c < free_cols.size(); ++c) {
      const Eigen::Index j = free_cols[c];
      out(i, j) = sol(laplacian.local(lw.w_idx[i]), c) * g.pi(lw.w_idx[j]);
    }
  }
  return out;
}

/// Same quantity by the hitting factorization G(x, y) = h^y(x) / (1 - S_y), where h^y is the
/// probability of reaching y before A and S_y = Σ_x p(y, x) h^y(x) the return probability.
/// One extension per column, so use it as a cross-check on small windows.
inline Eigen::MatrixXd green_by_hitting(const GraphOracle& oracle, const Exhaustion& exhaustion,
                                        std::span<const VertexKey> A, std::span<const VertexKey> window, int level,
                                        SolverOptions options = {}) {
  detail::check_green_inputs(A, window);
  const detail::LevelWindow lw = detail::locate_window(oracle, exhaustion, A, window, level);
  const WeightedGraph& g = lw.g.graph;
  std::vector<char> killed(static_cast<std::size_t>(g.vertex_count()), 0);
  std::vector<int> base;
  for (int a : lw.a_idx) {
    if (!killed[a]) base.push_back(a);
    killed[a] = 1;
  }
  const auto k = static_cast<Eigen::Index>(window.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const int y = lw.w_idx[j];
    if (killed[y]) continue;
    std::vector<int> pinned = base;
    pinned.push_back(y);
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pinned.size()), 1);
    phi(phi.rows() - 1, 0) = 1.0;
    std::vector<int> rows(lw.w_idx.begin(), lw.w_idx.end());
    for (const Arc& a : g.neighbors(y)) rows.push_back(a.to);
    const Eigen::MatrixXd h = extend_rows(g, pinned, phi, rows, options);
    double ret = 0.0;
    std::size_t r = lw.w_idx.size();
    for (const Arc& a : g.neighbors(y)) ret += a.c / g.pi(y) * h(static_cast<Eigen::Index>(r++), 0);
    if (!(ret < 1.0)) throw SolverError("return probability is not below 1", ret);
    for (Eigen::Index i = 0; i < k; ++i) out(i, j) = h(i, 0) / (1.0 - ret);
  }
  return out;
}

/// Level-escalated Green's function on W × W, stopped by the entrywise Cauchy rule.
inline GreenMatrix green(const GraphOracle& oracle, const Exhaustion& exhaustion, std::span<const VertexKey> A,
                         std::span<const VertexKey> window, const LevelOptions& options = {}) {
  detail::check_green_inputs(A, window);
  std::vector<VertexKey> keys(A.begin(), A.end());
  keys.insert(keys.end(), window.begin(), window.end());
  const int n0 = detail::starting_level(exhaustion, keys, options);
  const LevelResult r = escalate(n0, options, "green", [&](int n) {
    return green_at_level(oracle, exhaustion, A, window, n, options.solver);
  });
  GreenMatrix G;
  G.window.assign(window.begin(), window.end());
  G.A.assign(A.begin(), A.end());
  for (VertexKey w : window) G.pi.push_back(oracle.pi(w));
  G.values = r.values;
  G.achieved_tolerance = r.achieved_tolerance;
  G.level_low = r.level_low;
  G.level_high = r.level_high;
  return G;
}

/// Green's function of a finite graph, exact (no escalation).
inline GreenMatrix green_finite(const WeightedGraph& graph, std::span<const int> A, std::span<const int> window,
                                SolverOptions options = {1e-12, 500, 0}) {
  const GraphOracle oracle = zoo::finite(graph);
  const Exhaustion exhaustion = Exhaustion::balls(oracle);
  std::vector<VertexKey> a(A.begin(), A.end()), w(window.begin(), window.end());
  GreenMatrix G;
  G.window = w;
  G.A = a;
  for (int v : window) G.pi.push_back(graph.pi(v));
  const int level = std::max(1, graph.vertex_count());
  G.values = green_at_level(oracle, exhaustion, a, w, level, options);
  G.level_low = G.level_high = level;
  G.empirical_tolerance = false;
  return G;
}

struct GreenReport {
  double harmonicity = 0.0;     // max |Σ_z c(x,z)(G(z,y) - G(x,y))| over x ∉ A ∪ {y}
  double laplacian = 0.0;       // max |Σ_x c(y,x)(G(x,y) - G(y,y)) + π(y)| over y ∉ A
  double symmetry = 0.0;        // max |G(x,y)/π(y) - G(y,x)/π(x)|
  double min_eigenvalue = 0.0;  // of the symmetrized Σ = G/π
  double max_eigenvalue = 0.0;
  double nonnegativity = 0.0;   // most negative entry, as a positive number
  int rows_checked = 0;         // window vertices whose neighborhood lies in the window
};

using ConductanceFn = std::function<std::vector<Neighbor>(VertexKey)>;

/// Checks the identities of a Green matrix against the graph given by `neighbors`. Rows are
/// checked only where the whole neighborhood lies in the window. With the neighbors of the level
/// graph the identities are exact; with the full graph the residual measures truncation drift.
inline GreenReport validate_green(const GreenMatrix& G, const ConductanceFn& neighbors) {
  GreenReport r;
  const auto k = static_cast<Eigen::Index>(G.window.size());
  std::unordered_map<VertexKey, int> pos;
  for (Eigen::Index i = 0; i < k; ++i) pos[G.window[i]] = static_cast<int>(i);
  const std::unordered_set<VertexKey> killed(G.A.begin(), G.A.end());

  // adjacency within the window, or nullopt when some neighbor is outside
  std::vector<std::optional<std::vector<std::pair<int, double>>>> local(static_cast<std::size_t>(k));
  std::vector<double> pi(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index i = 0; i < k; ++i) {
    std::vector<std::pair<int, double>> adj;
    bool inside = true;
    for (const Neighbor& nb : neighbors(G.window[i])) {
      pi[i] += nb.c;
      auto it = pos.find(nb.key);
      if (it == pos.end()) {
        inside = false;
      } else {
        adj.emplace_back(it->second, nb.c);
      }
    }
    if (inside) local[i] = std::move(adj);
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    if (local[i] && !killed.count(G.window[i])) ++r.rows_checked;
  }
  for (Eigen::Index y = 0; y < k; ++y) {
    if (killed.count(G.window[y])) continue;
    for (Eigen::Index x = 0; x < k; ++x) {
      if (!local[x] || killed.count(G.window[x])) continue;
      double s = 0.0;
      for (const auto& [z, c] : *local[x]) s += c * (G.values(z, y) - G.values(x, y));
      if (x == y) {
        r.laplacian = std::max(r.laplacian, std::abs(s + pi[x]));
      } else {
        r.harmonicity = std::max(r.harmonicity, std::abs(s));
      }
    }
  }
  const Eigen::MatrixXd sigma = G.covariance();
  r.symmetry = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  r.nonnegativity = std::max(0.0, -G.values.minCoeff());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (sigma + sigma.transpose()), Eigen::EigenvaluesOnly);
  r.min_eigenvalue = eig.eigenvalues().minCoeff();
  r.max_eigenvalue = eig.eigenvalues().maxCoeff();
  return r;
}

inline GreenReport validate_green(const GreenMatrix& G, const GraphOracle& oracle) {
  return validate_green(G, [&](VertexKey v) { return oracle.neighbors(v); });
}

inline GreenReport validate_green(const GreenMatrix& G, const WeightedGraph& graph) {
  return validate_green(G, [&](VertexKey v) {
    std::vector<Neighbor> out;
    for (const Arc& a : graph.neighbors(static_cast<int>(v))) out.push_back({static_cast<VertexKey>(a.to), a.c});
    return out;
  });
}

/// Neighbors inside V_N: the graph on which a level-N Green matrix is exact.
inline ConductanceFn level_neighbors(const GraphOracle& oracle, const Exhaustion& exhaustion, int level) {
  auto members = std::make_shared<std::unordered_set<VertexKey>>();
  for (VertexKey k : exhaustion.level(level)) members->insert(k);
  return [oracle, members](VertexKey v) {
    std::vector<Neighbor> out;
    for (const Neighbor& nb : oracle.neighbors(v)) {
      if (members->count(nb.key)) out.push_back(nb);
    }
    return out;
  };
}

struct KirkhoffResult {
  double probability = 0.0;
  double achieved_tolerance = 0.0;
  int level_low = 0;
  int level_high = 0;
};

/// P[{x,y} ∈ FSF] = c(x,y) G_{y}(x,x) / π(x).
inline KirkhoffResult kirkhoff_edge_prob(const GraphOracle& oracle, const Exhaustion& exhaustion, VertexKey x,
                                         VertexKey y, const LevelOptions& options = {}) {
  double c = 0.0;
  for (const Neighbor& nb : oracle.neighbors(x)) {
    if (nb.key == y) c = nb.c;
  }
  if (c == 0.0) throw ConstructionError(oracle.format(x) + " and " + oracle.format(y) + " are not adjacent");
  const VertexKey A[] = {y};
  const VertexKey W[] = {x};
  const GreenMatrix G = green(oracle, exhaustion, A, W, options);
  return {c * G.values(0, 0) / oracle.pi(x), G.achieved_tolerance, G.level_low, G.level_high};
}

/// Exact version on a finite graph.
inline double kirkhoff_edge_prob(const WeightedGraph& graph, int x, int y) {
  if (!graph.edge_index(x, y)) throw ConstructionError("not an edge");
  const int A[] = {y};
  const int W[] = {x};
  const GreenMatrix G = green_finite(graph, A, W);
  return graph.conductance(x, y) * G.values(0, 0) / graph.pi(x);
}

struct GffSampleSet {
  std::vector<VertexKey> window;
  std::vector<VertexKey> A;
  Eigen::MatrixXd samples;  // replicas × |W|
  std::uint64_t seed = 0;
  std::string factorization;
};

namespace detail {

// Symmetric factor F with F F^T = Σ on the free coordinates.
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& sigma, std::string& method) {
  const Eigen::MatrixXd s = 0.5 * (sigma + sigma.transpose());
  const Eigen::Index n = s.rows();
  if (n < 200) {
    method = "eigen";
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    if (eig.info() != Eigen::Success) throw CovarianceError("eigendecomposition failed", NAN);
    Eigen::VectorXd lambda = eig.eigenvalues();
    const double top = std::max(lambda.maxCoeff(), 0.0);
    const double floor = -1e-8 * top;
    if (lambda.minCoeff() < floor) {
      throw CovarianceError("covariance has a materially negative eigenvalue (Green tolerance too loose?)",
                            lambda.minCoeff());
    }
    for (Eigen::Index i = 0; i < n; ++i) lambda[i] = std::sqrt(std::max(lambda[i], 0.0));
    return eig.eigenvectors() * lambda.asDiagonal();
  }
  method = "cholesky";
  const double scale = s.diagonal().mean();
  double jitter = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    const Eigen::LLT<Eigen::MatrixXd> llt(s + jitter * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jitter = jitter == 0.0 ? 1e-12 * scale : jitter * 10.0;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
  throw CovarianceError("covariance is not positive definite even with jitter", eig.eigenvalues().minCoeff());
}

}  // namespace detail

/// Centered Gaussian samples with covariance G(x,y)/π(y) on the window, identically 0 on A.
/// Replica r uses stream (seed, r).
inline GffSampleSet gff_sample(const GreenMatrix& G, std::size_t replicas, std::uint64_t seed) {
  if (replicas < 1) throw ConstructionError("replicas must be ≥ 1");
  const std::unordered_set<VertexKey> killed(G.A.begin(), G.A.end());
  std::vector<Eigen::Index> free;
  for (std::size_t i = 0; i < G.window.size(); ++i) {
    if (!killed.count(G.window[i])) free.push_back(static_cast<Eigen::Index>(i));
  }
  GffSampleSet out;
  out.window = G.window;
  out.A = G.A;
  out.seed = seed;
  out.samples = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(replicas), static_cast<Eigen::Index>(G.window.size()));
  if (free.empty()) return out;
  const Eigen::MatrixXd full = G.covariance();
  const auto m = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd sigma(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) sigma(i, j) = full(free[i], free[j]);
  }
  const Eigen::MatrixXd F = detail::covariance_factor(sigma, out.factorization);
  Eigen::VectorXd z(F.cols());
  for (std::size_t r = 0; r < replicas; ++r) {
    Stream rng(seed, r);
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    const Eigen::VectorXd x = F * z;
    for (Eigen::Index i = 0; i < m; ++i) out.samples(static_cast<Eigen::Index>(r), free[i]) = x[i];
  }
  return out;
}

}  // namespace refwalk
