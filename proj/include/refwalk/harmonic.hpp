#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "refwalk/errors.hpp"
#include "refwalk/graph.hpp"
#include "refwalk/linalg.hpp"

// Energy-minimizing extensions on infinite graphs are computed on the induced subgraphs G_N
// with a free boundary: a vertex of G_N is harmonic with respect to its neighbors inside G_N
// only, and nothing is imposed at the cut. Pinning the cut to zero instead would give the
// walk killed on exiting G_N, which is a different object.

namespace refwalk {

struct DirichletProblem {
  const WeightedGraph* graph = nullptr;
  std::vector<int> A;
  std::vector<double> phi;
};

namespace detail {

inline void check_boundary(const WeightedGraph& g, std::span<const int> A, std::size_t phi_rows) {
  if (A.empty()) throw ConstructionError("boundary set A must be nonempty");
  if (phi_rows != A.size()) throw ConstructionError("boundary data size does not match A");
  std::vector<char> seen(static_cast<std::size_t>(g.vertex_count()), 0);
  for (int a : A) {
    if (a < 0 || a >= g.vertex_count()) throw ConstructionError("boundary vertex out of range");
    if (seen[a]++) throw ConstructionError("boundary vertex listed twice");
  }
}

}  // namespace detail

/// Values at `rows` of the harmonic extensions of the columns of `phi` (|A| × k) off A.
/// Uses whichever of the direct (k columns) or adjoint (one solve per unpinned row) formulation
/// needs fewer solves; both share one factorization.
inline Eigen::MatrixXd extend_rows(const WeightedGraph& g, std::span<const int> A, const Eigen::MatrixXd& phi,
                                   std::span<const int> rows, SolverOptions options = {}) {
  detail::check_boundary(g, A, static_cast<std::size_t>(phi.rows()));
  std::vector<int> pinned_pos(static_cast<std::size_t>(g.vertex_count()), -1);
  for (std::size_t i = 0; i < A.size(); ++i) pinned_pos[A[i]] = static_cast<int>(i);

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), phi.cols());
  std::vector<int> free_rows;    // positions in `rows`
  std::vector<int> free_locals;  // local unknown index
  std::vector<char> is_pinned(static_cast<std::size_t>(g.vertex_count()), 0);
  for (int a : A) is_pinned[a] = 1;

  // local unknown numbering matches PinnedLaplacian (increasing vertex id)
  std::vector<int> local(static_cast<std::size_t>(g.vertex_count()), -1);
  int unknowns = 0;
  for (int v = 0; v < g.vertex_count(); ++v) {
    if (!is_pinned[v]) local[v] = unknowns++;
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int v = rows[r];
    if (v < 0 || v >= g.vertex_count()) throw ConstructionError("requested vertex out of range");
    if (pinned_pos[v] >= 0) {
      out.row(static_cast<Eigen::Index>(r)) = phi.row(pinned_pos[v]);
    } else {
      free_rows.push_back(static_cast<int>(r));
      free_locals.push_back(local[v]);
    }
  }
  if (free_rows.empty() || phi.cols() == 0) return out;

  // coupling C(u, a) = c(u, a) for unpinned u adjacent to a ∈ A
  Eigen::SparseMatrix<double> coupling(unknowns, static_cast<Eigen::Index>(A.size()));
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < A.size(); ++i) {
    for (const Arc& arc : g.neighbors(A[i])) {
      if (local[arc.to] >= 0) triplets.emplace_back(local[arc.to], static_cast<int>(i), arc.c);
    }
  }
  coupling.setFromTriplets(triplets.begin(), triplets.end());

  const bool adjoint = free_rows.size() < static_cast<std::size_t>(phi.cols());
  const int solves = static_cast<int>(adjoint ? free_rows.size() : phi.cols());
  const PinnedLaplacian laplacian(g, A, options, solves);
  constexpr Eigen::Index block = 64;  // bounds the dense |U| × block work arrays
  if (!adjoint) {
    for (Eigen::Index j0 = 0; j0 < phi.cols(); j0 += block) {
      const Eigen::Index w = std::min(block, phi.cols() - j0);
      const Eigen::MatrixXd rhs = coupling * phi.middleCols(j0, w);
      const Eigen::MatrixXd sol = laplacian.solve(rhs);
      for (std::size_t i = 0; i < free_rows.size(); ++i) out.row(free_rows[i]).segment(j0, w) = sol.row(free_locals[i]);
    }
  } else {
    const auto count = static_cast<Eigen::Index>(free_locals.size());
    for (Eigen::Index i0 = 0; i0 < count; i0 += block) {
      const Eigen::Index w = std::min(block, count - i0);
      Eigen::MatrixXd units = Eigen::MatrixXd::Zero(unknowns, w);
      for (Eigen::Index i = 0; i < w; ++i) units(free_locals[i0 + i], i) = 1.0;
      const Eigen::MatrixXd z = laplacian.solve(units);
      const Eigen::MatrixXd vals = (z.transpose() * coupling) * phi;
      for (Eigen::Index i = 0; i < w; ++i) out.row(free_rows[i0 + i]) = vals.row(i);
    }
  }
  return out;
}

/// Energy-minimizing extension on a finite graph: f = φ on A, harmonic elsewhere.
inline std::vector<double> solve_free_dirichlet(const DirichletProblem& problem, double tol = 1e-8) {
  if (problem.graph == nullptr) throw ConstructionError("Dirichlet problem without a graph");
  const WeightedGraph& g = *problem.graph;
  const Eigen::MatrixXd phi = Eigen::Map<const Eigen::VectorXd>(problem.phi.data(), static_cast<Eigen::Index>(problem.phi.size()));
  std::vector<int> all(static_cast<std::size_t>(g.vertex_count()));
  for (int v = 0; v < g.vertex_count(); ++v) all[v] = v;
  SolverOptions options;
  options.tol = tol;
  const Eigen::MatrixXd values = extend_rows(g, problem.A, phi, all, options);
  std::vector<double> f(static_cast<std::size_t>(g.vertex_count()));
  for (int v = 0; v < g.vertex_count(); ++v) f[v] = values(v, 0);
  for (std::size_t i = 0; i < problem.A.size(); ++i) f[problem.A[i]] = problem.phi[i];
  return f;
}

struct EnergyReport {
  double energy = 0.0;
  /// ∇f(u,v) = c(u,v)(f(v) - f(u)) for each stored edge (u < v).
  std::vector<double> gradient;
};

inline EnergyReport energy_report(const WeightedGraph& g, std::span<const double> f) {
  EnergyReport r;
  for (const Edge& e : g.edges()) {
    const double d = f[e.v] - f[e.u];
    r.gradient.push_back(e.c * d);
    r.energy += e.c * d * d;
  }
  return r;
}

/// Largest |Σ_y c(x,y)(f(y) - f(x))| / π(x) over x ∉ A.
inline double harmonic_residual(const WeightedGraph& g, std::span<const int> A, std::span<const double> f) {
  std::vector<char> pinned(static_cast<std::size_t>(g.vertex_count()), 0);
  for (int a : A) pinned[a] = 1;
  double worst = 0.0;
  for (int x = 0; x < g.vertex_count(); ++x) {
    if (pinned[x]) continue;
    double s = 0.0;
    for (const Arc& arc : g.neighbors(x)) s += arc.c * (f[arc.to] - f[x]);
    worst = std::max(worst, std::abs(s) / g.pi(x));
  }
  return worst;
}

struct CycleReport {
  /// max over x ∉ A of |⟨∇f, ∇1_x⟩|, i.e. the component of ∇f along gradients vanishing on A.
  double max_inner_product = 0.0;
  /// Energy(f) - Energy(h) for the minimizer h with the same values on A; equals Energy(f - h).
  double energy_gap = 0.0;
  int directions_checked = 0;
};

/// Tests whether ∇f lies in the closed span of cycles modulo A, i.e. is orthogonal to every
/// gradient of a function vanishing on A. The indicator gradients ∇1_x (x ∉ A) span that space,
/// so the minimizer reports zero up to solver accuracy and anything else reports a positive value.
inline CycleReport cycle_orthogonality_check(const WeightedGraph& g, std::span<const int> A, std::span<const double> f,
                                             double tol = 1e-12) {
  if (A.empty()) throw ConstructionError("boundary set A must be nonempty");
  CycleReport report;
  std::vector<char> pinned(static_cast<std::size_t>(g.vertex_count()), 0);
  for (int a : A) pinned[a] = 1;
  for (int x = 0; x < g.vertex_count(); ++x) {
    if (pinned[x]) continue;
    // Σ over oriented edges of ∇f(e)∇1_x(e)/c(e) = 2 Σ_y c(x,y)(f(x) - f(y))
    double s = 0.0;
    for (const Arc& arc : g.neighbors(x)) s += arc.c * (f[x] - f[arc.to]);
    report.max_inner_product = std::max(report.max_inner_product, std::abs(2.0 * s));
    ++report.directions_checked;
  }
  std::vector<double> phi;
  for (int a : A) phi.push_back(f[a]);
  DirichletProblem problem{&g, std::vector<int>(A.begin(), A.end()), phi};
  const std::vector<double> h = solve_free_dirichlet(problem, tol);
  report.energy_gap = std::max(0.0, g.energy(f) - g.energy(h));
  return report;
}

struct LevelOptions {
  double tol = 1e-6;  // sup-norm Cauchy tolerance between successive levels
  int n_max = 12;
  int stride = 2;
  std::optional<int> n_start;  // first level tried, default = smallest level covering the inputs
  SolverOptions solver{1e-12, 500, 0};
};

/// Outcome of a level-escalated computation. The stopping rule is a Cauchy criterion without
/// a proven rate, so the reported tolerance is empirical.
struct LevelResult {
  Eigen::MatrixXd values;
  double achieved_tolerance = 0.0;
  int level_low = 0;
  int level_high = 0;
  bool empirical_tolerance = true;
};

namespace detail {

inline int starting_level(const Exhaustion& exhaustion, std::span<const VertexKey> keys, const LevelOptions& options) {
  const auto cover = exhaustion.covering_level(keys, options.n_max);
  if (!cover) throw ConstructionError("inputs are not covered by exhaustion level n_max = " + std::to_string(options.n_max));
  return std::max(*cover, options.n_start.value_or(1));
}

inline std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

}  // namespace detail

/// Runs `solve_at(N)` at N = n0, n0 + stride, ... until successive results differ by < tol.
template <class SolveAt>
LevelResult escalate(int n0, const LevelOptions& options, const std::string& what, SolveAt&& solve_at) {
  if (!(options.tol > 0.0)) throw ConstructionError("Cauchy tolerance must be positive");
  if (options.stride < 1) throw ConstructionError("level stride must be ≥ 1");
  if (n0 + options.stride > options.n_max) {
    throw NotCauchyError(what + ": n_max leaves no room for a second level", n0, n0, {}, {},
                         std::numeric_limits<double>::infinity());
  }
  Eigen::MatrixXd previous = solve_at(n0);
  int low = n0;
  Eigen::MatrixXd before;
  double gap = std::numeric_limits<double>::infinity();
  for (int n = n0 + options.stride; n <= options.n_max; n += options.stride) {
    Eigen::MatrixXd current = solve_at(n);
    gap = previous.size() == 0 ? 0.0 : (current - previous).cwiseAbs().maxCoeff();
    if (gap < options.tol) return {std::move(current), gap, low, n, true};
    before = std::move(previous);
    previous = std::move(current);
    low = n;
  }
  throw NotCauchyError(what + ": levels did not agree within tolerance", low - options.stride, low,
                       detail::flatten(before), detail::flatten(previous), gap);
}

/// Values on `window` of the energy-minimizing extension of φ from A, solved on G_N.
inline Eigen::MatrixXd extension_at_level(const GraphOracle& oracle, const Exhaustion& exhaustion,
                                          std::span<const VertexKey> A, const Eigen::MatrixXd& phi,
                                          std::span<const VertexKey> window, int level, SolverOptions options = {}) {
  const InducedGraph g = induced(oracle, exhaustion, level);
  auto locate = [&](VertexKey k) {
    auto i = g.find(k);
    if (!i) throw ConstructionError("vertex " + oracle.format(k) + " is outside V_" + std::to_string(level));
    return *i;
  };
  std::vector<int> a_idx, rows;
  for (VertexKey k : A) a_idx.push_back(locate(k));
  for (VertexKey k : window) rows.push_back(locate(k));
  return extend_rows(g.graph, a_idx, phi, rows, options);
}

struct ExtensionResult {
  std::vector<double> values;  // aligned with the window
  double achieved_tolerance = 0.0;
  int level_low = 0;
  int level_high = 0;
  bool empirical_tolerance = true;
};

/// Energy-minimizing extension of φ from A to the window W on an infinite graph, by
/// free-boundary solves on increasing levels until the window values stabilize.
inline ExtensionResult min_energy_extension(const GraphOracle& oracle, const Exhaustion& exhaustion,
                                            std::span<const VertexKey> A, std::span<const double> phi,
                                            std::span<const VertexKey> window, const LevelOptions& options = {}) {
  if (A.empty()) throw ConstructionError("boundary set A must be nonempty");
  if (phi.size() != A.size()) throw ConstructionError("boundary data size does not match A");
  std::vector<VertexKey> keys(A.begin(), A.end());
  keys.insert(keys.end(), window.begin(), window.end());
  const int n0 = detail::starting_level(exhaustion, keys, options);
  const Eigen::MatrixXd phi_m = Eigen::Map<const Eigen::VectorXd>(phi.data(), static_cast<Eigen::Index>(phi.size()));
  LevelResult r = escalate(n0, options, "min_energy_extension", [&](int n) {
    return extension_at_level(oracle, exhaustion, A, phi_m, window, n, options.solver);
  });
  ExtensionResult out;
  for (Eigen::Index i = 0; i < r.values.rows(); ++i) out.values.push_back(r.values(i, 0));
  out.achieved_tolerance = r.achieved_tolerance;
  out.level_low = r.level_low;
  out.level_high = r.level_high;
  return out;
}

/// Rows hm_A^x(·) for each x in `sources`, on the finite graph g with A given by local ids.
/// Columns of A that no unpinned vertex touches carry no mass from outside A and are skipped.
inline Eigen::MatrixXd harmonic_measure_rows(const WeightedGraph& g, std::span<const int> A, std::span<const int> sources,
                                             SolverOptions options = {}) {
  std::vector<char> pinned(static_cast<std::size_t>(g.vertex_count()), 0);
  for (int a : A) pinned[a] = 1;
  std::vector<int> active;  // positions in A with an unpinned neighbor
  for (std::size_t i = 0; i < A.size(); ++i) {
    for (const Arc& arc : g.neighbors(A[i])) {
      if (!pinned[arc.to]) {
        active.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(A.size()), static_cast<Eigen::Index>(active.size()));
  for (std::size_t j = 0; j < active.size(); ++j) phi(active[j], static_cast<Eigen::Index>(j)) = 1.0;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sources.size()), static_cast<Eigen::Index>(A.size()));
  std::vector<int> free_sources, free_pos;
  std::unordered_map<int, int> a_pos;
  for (std::size_t i = 0; i < A.size(); ++i) a_pos.emplace(A[i], static_cast<int>(i));
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (auto it = a_pos.find(sources[s]); it != a_pos.end()) {
      out(static_cast<Eigen::Index>(s), it->second) = 1.0;
    } else {
      free_sources.push_back(sources[s]);
      free_pos.push_back(static_cast<int>(s));
    }
  }
  if (free_sources.empty() || active.empty()) return out;
  const Eigen::MatrixXd vals = extend_rows(g, A, phi, free_sources, options);
  for (std::size_t s = 0; s < free_pos.size(); ++s) {
    for (std::size_t j = 0; j < active.size(); ++j) out(free_pos[s], active[j]) = vals(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
  }
  return out;
}

/// Checks that every row is a probability vector; no renormalization is applied.
inline void check_probability_rows(const Eigen::MatrixXd& rows, const std::string& what, double sum_tol = 1e-8,
                                   double entry_tol = 1e-10) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double s = rows.row(i).sum();
    if (std::abs(s - 1.0) > sum_tol) {
      throw ConsistencyError(what + ": row sums to " + std::to_string(s) + " instead of 1");
    }
    if (rows.row(i).minCoeff() < -entry_tol || rows.row(i).maxCoeff() > 1.0 + entry_tol) {
      throw ConsistencyError(what + ": entry outside [0,1]");
    }
  }
}

struct HarmonicMeasure {
  std::vector<VertexKey> A;
  VertexKey x = 0;
  std::vector<double> probabilities;  // aligned with A
  double achieved_tolerance = 0.0;
  int level_low = 0;
  int level_high = 0;
  bool empirical_tolerance = true;
};

/// Harmonic measure rows on A viewed from several sources, at a single level N.
inline Eigen::MatrixXd harmonic_measures_at_level(const GraphOracle& oracle, const Exhaustion& exhaustion,
                                                  std::span<const VertexKey> A, std::span<const VertexKey> sources,
                                                  int level, SolverOptions options = {}) {
  const InducedGraph g = induced(oracle, exhaustion, level);
  auto locate = [&](VertexKey k) {
    auto i = g.find(k);
    if (!i) throw ConstructionError("vertex " + oracle.format(k) + " is outside V_" + std::to_string(level));
    return *i;
  };
  std::vector<int> a_idx, s_idx;
  for (VertexKey k : A) a_idx.push_back(locate(k));
  for (VertexKey k : sources) s_idx.push_back(locate(k));
  return harmonic_measure_rows(g.graph, a_idx, s_idx, options);
}

/// Level-escalated harmonic measure rows for several sources; one solve batch per level.
inline LevelResult harmonic_measures(const GraphOracle& oracle, const Exhaustion& exhaustion,
                                     std::span<const VertexKey> A, std::span<const VertexKey> sources,
                                     const LevelOptions& options = {}) {
  if (A.empty()) throw ConstructionError("target set A must be nonempty");
  std::vector<VertexKey> keys(A.begin(), A.end());
  keys.insert(keys.end(), sources.begin(), sources.end());
  const int n0 = detail::starting_level(exhaustion, keys, options);
  LevelResult r = escalate(n0, options, "harmonic_measure", [&](int n) {
    return harmonic_measures_at_level(oracle, exhaustion, A, sources, n, options.solver);
  });
  check_probability_rows(r.values, "harmonic measure");
  return r;
}

inline HarmonicMeasure harmonic_measure(const GraphOracle& oracle, const Exhaustion& exhaustion,
                                        std::span<const VertexKey> A, VertexKey x, const LevelOptions& options = {}) {
  const VertexKey sources[] = {x};
  const LevelResult r = harmonic_measures(oracle, exhaustion, A, sources, options);
  HarmonicMeasure hm;
  hm.A.assign(A.begin(), A.end());
  hm.x = x;
  for (Eigen::Index j = 0; j < r.values.cols(); ++j) hm.probabilities.push_back(r.values(0, j));
  hm.achieved_tolerance = r.achieved_tolerance;
  hm.level_low = r.level_low;
  hm.level_high = r.level_high;
  return hm;
}

}  // namespace refwalk
