#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "refwalk/errors.hpp"
#include "refwalk/graph.hpp"
#include "refwalk/harmonic.hpp"
#include "refwalk/rng.hpp"
#include "refwalk/zoo.hpp"

namespace refwalk {

/// Exponential holding rates w(x) = base · growth^{level(x)}.
struct RateSchedule {
  double base = 1.0;
  double growth = 4.0;

  double rate(int level) const { return base * std::pow(growth, level); }

  void validate() const {
    if (!(base > 0.0) || !std::isfinite(base)) throw ConstructionError("rate base must be positive");
    if (!(growth >= 1.0) || !std::isfinite(growth)) throw ConstructionError("rate growth must be ≥ 1");
  }
};

struct KernelOptions {
  double hm_tol = 1e-6;  // Cauchy tolerance for the shell rows
  int extra_levels = 8;  // escalation budget above n+1
  int stride = 2;
  /// Solve every shell row once on G_N for this N ≥ n+1 instead of escalating.
  std::optional<int> resolution_level;
  bool end_labels = true;
  int probe_depth = 0;  // 0 = default_probe_depth(n)
  SolverOptions solver{1e-12, 500, 0};
};

/// Transition kernel p_n of the level-n chain on B_1 G_n. Core states step to a neighbor with
/// probability c(x,y)/π(x); shell states jump into V G_n according to harmonic measure.
/// State indices are those of the underlying LevelGraph.
class LevelChainKernel {
 public:
  int level() const noexcept { return graph_.level(); }
  const LevelGraph& graph() const noexcept { return graph_; }
  int size() const noexcept { return graph_.size(); }
  bool is_core(int i) const noexcept { return graph_.is_core(i); }
  VertexKey key(int i) const { return graph_.key(i); }
  std::optional<int> index(VertexKey k) const { return graph_.index(k); }

  std::span<const int> targets(int i) const { return {to_.data() + offsets_[i], to_.data() + offsets_[i + 1]}; }
  std::span<const double> probabilities(int i) const { return {p_.data() + offsets_[i], p_.data() + offsets_[i + 1]}; }

  /// Next state for a uniform draw u ∈ [0,1).
  int sample(int i, double u) const {
    const auto first = cum_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
    const auto last = cum_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
    const double scaled = u * *(last - 1);
    auto it = std::upper_bound(first, last, scaled);
    if (it == last) --it;
    return to_[offsets_[i] + static_cast<std::size_t>(it - first)];
  }

  /// End label at resolution n of a shell state; null when labels were not computed.
  const EndPrefix* end_prefix(int i) const {
    if (is_core(i) || end_prefixes_.empty()) return nullptr;
    return &end_prefixes_[static_cast<std::size_t>(i - graph_.core_count())];
  }

  /// Largest |row sum - 1| over all states.
  double row_error() const {
    double worst = 0.0;
    for (int i = 0; i < size(); ++i) {
      double s = 0.0;
      for (double p : probabilities(i)) s += p;
      worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
  }

  Eigen::SparseMatrix<double> transition_matrix() const {
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < size(); ++i) {
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) t.emplace_back(i, to_[k], p_[k]);
    }
    Eigen::SparseMatrix<double> m(size(), size());
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  /// Levels that produced the shell rows and the last Cauchy gap (0 for a fixed resolution).
  int resolution_low() const noexcept { return resolution_low_; }
  int resolution_high() const noexcept { return resolution_high_; }
  double hm_achieved_tolerance() const noexcept { return hm_tolerance_; }

 private:
  friend LevelChainKernel build_kernel(const GraphOracle&, const Exhaustion&, int, const KernelOptions&);

  LevelGraph graph_;
  std::vector<std::size_t> offsets_{0};
  std::vector<int> to_;
  std::vector<double> p_;
  std::vector<double> cum_;
  std::vector<EndPrefix> end_prefixes_;
  int resolution_low_ = 0;
  int resolution_high_ = 0;
  double hm_tolerance_ = 0.0;
};

inline LevelChainKernel build_kernel(const GraphOracle& oracle, const Exhaustion& exhaustion, int n,
                                     const KernelOptions& options = {}) {
  LevelChainKernel k;
  k.graph_ = truncate(oracle, exhaustion, n);
  const LevelGraph& g = k.graph_;

  auto push = [&](int to, double p) {
    k.to_.push_back(to);
    k.p_.push_back(p);
    const double prev = k.cum_.size() == k.offsets_.back() ? 0.0 : k.cum_.back();
    k.cum_.push_back(prev + p);
  };
  for (int i = 0; i < g.core_count(); ++i) {
    for (const Arc& a : g.neighbors(i)) push(a.to, a.c / g.pi(i));
    k.offsets_.push_back(k.to_.size());
  }

  if (g.shell_count() > 0) {
    const std::vector<VertexKey> core(g.core_keys().begin(), g.core_keys().end());
    const std::vector<VertexKey> shell(g.shell_keys().begin(), g.shell_keys().end());
    Eigen::MatrixXd rows;
    if (options.resolution_level) {
      if (*options.resolution_level < n + 1) throw ConstructionError("resolution level must be ≥ n+1");
      rows = harmonic_measures_at_level(oracle, exhaustion, core, shell, *options.resolution_level, options.solver);
      check_probability_rows(rows, "shell kernel");
      k.resolution_low_ = k.resolution_high_ = *options.resolution_level;
    } else {
      LevelOptions lo;
      lo.tol = options.hm_tol;
      lo.stride = options.stride;
      lo.n_start = n + 1;
      lo.n_max = n + 1 + options.extra_levels;
      lo.solver = options.solver;
      const LevelResult r = harmonic_measures(oracle, exhaustion, core, shell, lo);
      rows = r.values;
      k.resolution_low_ = r.level_low;
      k.resolution_high_ = r.level_high;
      k.hm_tolerance_ = r.achieved_tolerance;
    }
    for (Eigen::Index s = 0; s < rows.rows(); ++s) {
      double total = 0.0;
      for (Eigen::Index j = 0; j < rows.cols(); ++j) {
        const double p = rows(s, j);
        if (p > 0.0) {
          push(static_cast<int>(j), p);
          total += p;
        }
      }
      if (std::abs(total - 1.0) > 1e-10) {
        throw ConsistencyError("shell row of " + oracle.format(shell[static_cast<std::size_t>(s)]) + " sums to " +
                               std::to_string(total));
      }
      k.offsets_.push_back(k.to_.size());
    }
    if (options.end_labels) {
      const int probe = options.probe_depth > 0 ? options.probe_depth : default_probe_depth(n);
      const ComplementStructure structure(oracle, exhaustion, n, probe);
      for (VertexKey s : shell) k.end_prefixes_.push_back(*structure.prefix(s));
    }
  }
  return k;
}

/// Kernel of the plain random walk on a finite graph: one level covers everything, so there is no shell.
inline LevelChainKernel finite_kernel(const WeightedGraph& graph, VertexKey root = 0) {
  const GraphOracle oracle = zoo::finite(graph, root);
  return build_kernel(oracle, Exhaustion::balls(oracle), std::max(1, graph.vertex_count()));
}

struct VertexVisit {
  VertexKey vertex = 0;
  double hold = 0.0;
};

/// Passage through infinity: the walk left V G_n from `exit` into the shell vertex `shell`
/// (whose complement component gives the end label) and re-entered at `entry`.
struct InfinityPass {
  EndPrefix end_prefix;
  VertexKey exit = 0;
  VertexKey shell = 0;
  VertexKey entry = 0;
};

using TrajectoryEvent = std::variant<VertexVisit, InfinityPass>;

struct Trajectory {
  std::vector<TrajectoryEvent> events;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  int level = 0;
  std::size_t steps = 0;  // kernel transitions taken

  std::vector<VertexKey> vertex_sequence() const {
    std::vector<VertexKey> out;
    for (const auto& e : events) {
      if (const auto* v = std::get_if<VertexVisit>(&e)) out.push_back(v->vertex);
    }
    return out;
  }
};

struct StopRule {
  enum class Kind { HitSet, Steps, Cover };
  Kind kind = Kind::Steps;
  std::vector<VertexKey> vertices;
  std::size_t steps = 0;

  static StopRule hit(std::vector<VertexKey> set) { return {Kind::HitSet, std::move(set), 0}; }
  static StopRule after(std::size_t n) { return {Kind::Steps, {}, n}; }
  static StopRule cover(std::vector<VertexKey> set) { return {Kind::Cover, std::move(set), 0}; }
};

/// Step budget exhausted before the stop rule fired; carries what was simulated.
class SimulationTimeout : public BudgetError {
 public:
  SimulationTimeout(const std::string& what, Trajectory partial)
      : BudgetError(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const noexcept { return partial_; }

 private:
  Trajectory partial_;
};

namespace detail {

// Chain loop shared by simulate and the samplers. `done(state, steps)` is asked once per core visit.
template <class Done>
Trajectory run_chain(const LevelChainKernel& kernel, int start, Done&& done, const RateSchedule& rate, Stream& rng,
                     std::size_t step_budget) {
  Trajectory t;
  t.level = kernel.level();
  int cur = start;
  while (true) {
    const double w = rate.rate(kernel.graph().exhaustion_level(cur));
    if (done(cur, t.steps)) {
      t.events.push_back(VertexVisit{kernel.key(cur), rng.exponential(w)});
      return t;
    }
    if (t.steps >= step_budget) {
      throw SimulationTimeout("stop rule not reached within " + std::to_string(step_budget) + " steps", std::move(t));
    }
    const double u = rng.uniform();
    t.events.push_back(VertexVisit{kernel.key(cur), rng.exponential(w)});
    int next = kernel.sample(cur, u);
    ++t.steps;
    if (!kernel.is_core(next)) {
      const int entry = kernel.sample(next, rng.uniform());
      ++t.steps;
      const EndPrefix* prefix = kernel.end_prefix(next);
      t.events.push_back(InfinityPass{prefix ? *prefix : EndPrefix{}, kernel.key(cur), kernel.key(next), kernel.key(entry)});
      next = entry;
    }
    cur = next;
  }
}

}  // namespace detail

/// Runs the level-n chain from a core vertex. Per core visit the step draw comes first and the
/// holding draw second, so the vertex order does not depend on the rate schedule. Shell states
/// are not recorded as visits; they appear as the InfinityPass between exit and entry.
inline Trajectory simulate(const LevelChainKernel& kernel, VertexKey start, const StopRule& stop,
                           const RateSchedule& rate, Stream& rng, std::size_t step_budget = 100'000'000) {
  rate.validate();
  const auto s = kernel.index(start);
  if (!s || !kernel.is_core(*s)) throw ConstructionError("start must be a core vertex");
  std::vector<char> marked(static_cast<std::size_t>(kernel.size()), 0);
  std::size_t remaining = 0;
  for (VertexKey v : stop.vertices) {
    const auto i = kernel.index(v);
    if (!i || !kernel.is_core(*i)) throw ConstructionError("stop-rule vertices must be core vertices");
    if (!marked[*i]) {
      marked[*i] = 1;
      ++remaining;
    }
  }
  if (stop.kind != StopRule::Kind::Steps && remaining == 0) throw ConstructionError("stop-rule set is empty");

  auto done = [&](int cur, std::size_t steps) {
    switch (stop.kind) {
      case StopRule::Kind::HitSet:
        return marked[cur] != 0;
      case StopRule::Kind::Steps:
        return steps >= stop.steps;
      case StopRule::Kind::Cover:
        if (marked[cur]) {
          marked[cur] = 0;
          --remaining;
        }
        return remaining == 0;
    }
    return true;
  };
  return detail::run_chain(kernel, *s, done, rate, rng, step_budget);
}

inline Trajectory simulate(const LevelChainKernel& kernel, VertexKey start, const StopRule& stop,
                           const RateSchedule& rate, std::uint64_t seed, std::uint64_t stream = 0,
                           std::size_t step_budget = 100'000'000) {
  Stream rng(seed, stream);
  try {
    Trajectory t = simulate(kernel, start, stop, rate, rng, step_budget);
    t.seed = seed;
    t.stream = stream;
    return t;
  } catch (SimulationTimeout& e) {
    Trajectory partial = e.partial();
    partial.seed = seed;
    partial.stream = stream;
    throw SimulationTimeout(e.what(), std::move(partial));
  }
}

/// First state of `targets` hit by the chain from `start` (state indices). Returns the state.
inline int first_hit(const LevelChainKernel& kernel, int start, const std::vector<char>& targets, Stream& rng,
                     std::size_t step_budget = 100'000'000) {
  int cur = start;
  for (std::size_t step = 0; step < step_budget; ++step) {
    if (targets[cur]) return cur;
    cur = kernel.sample(cur, rng.uniform());
  }
  throw BudgetError("target set not hit within " + std::to_string(step_budget) + " steps");
}

/// Checks the trajectory invariants: consecutive visits are adjacent unless an InfinityPass
/// separates them, and every pass leaves from a vertex adjacent to its shell vertex.
inline bool trajectory_is_consistent(const Trajectory& t, const GraphOracle& oracle) {
  auto adjacent = [&](VertexKey a, VertexKey b) {
    for (const Neighbor& nb : oracle.neighbors(a)) {
      if (nb.key == b) return true;
    }
    return false;
  };
  std::optional<VertexKey> last;
  bool crossed = false;
  for (const auto& e : t.events) {
    if (const auto* v = std::get_if<VertexVisit>(&e)) {
      if (v->hold < 0.0) return false;
      if (last && !crossed && !adjacent(*last, v->vertex)) return false;
      last = v->vertex;
      crossed = false;
    } else {
      const auto& p = std::get<InfinityPass>(e);
      if (!last || *last != p.exit || !adjacent(p.exit, p.shell)) return false;
      crossed = true;
    }
  }
  return true;
}

struct ConsistencyReport {
  double max_deviation = 0.0;
  double core_deviation = 0.0;
  double shell_deviation = 0.0;
  int resolution_level = 0;
  int states_compared = 0;
};

/// Exact check that Y^n watched on B_1 G_m has the law of Y^m. Core rows are compared directly;
/// for a shell vertex of level m the first-hit law of V G_m under p_n is obtained from the
/// absorbing-chain system (I - Q) X = R. Both kernels take their shell rows from the same
/// resolution level N, where the identity is exact up to solver error.
inline ConsistencyReport consistency_check(const GraphOracle& oracle, const Exhaustion& exhaustion, int m, int n,
                                           KernelOptions options = {}) {
  if (m < 1 || n < m) throw ConstructionError("consistency_check needs 1 ≤ m ≤ n");
  ConsistencyReport report;
  if (n == m) return report;
  if (!options.resolution_level) options.resolution_level = n + 2;
  if (*options.resolution_level < n + 1) throw ConstructionError("resolution level must be ≥ n+1");
  options.end_labels = false;
  report.resolution_level = *options.resolution_level;
  const LevelChainKernel pn = build_kernel(oracle, exhaustion, n, options);
  const LevelChainKernel pm = build_kernel(oracle, exhaustion, m, options);

  auto row_of = [](const LevelChainKernel& k, int i) {
    std::unordered_map<VertexKey, double> row;
    const auto to = k.targets(i);
    const auto p = k.probabilities(i);
    for (std::size_t j = 0; j < to.size(); ++j) row[k.key(to[j])] += p[j];
    return row;
  };
  auto deviation = [](const std::unordered_map<VertexKey, double>& a, const std::unordered_map<VertexKey, double>& b) {
    double worst = 0.0;
    for (const auto& [key, p] : a) {
      auto it = b.find(key);
      worst = std::max(worst, std::abs(p - (it == b.end() ? 0.0 : it->second)));
    }
    for (const auto& [key, p] : b) {
      if (!a.count(key)) worst = std::max(worst, std::abs(p));
    }
    return worst;
  };

  for (int i = 0; i < pm.graph().core_count(); ++i) {
    const auto j = pn.index(pm.key(i));
    if (!j) throw ConsistencyError("core vertex of level m missing at level n");
    report.core_deviation = std::max(report.core_deviation, deviation(row_of(pm, i), row_of(pn, *j)));
    ++report.states_compared;
  }

  // absorbing chain on the level-n states with V G_m absorbing
  std::vector<int> transient_pos(static_cast<std::size_t>(pn.size()), -1);
  std::vector<int> absorbing_pos(static_cast<std::size_t>(pn.size()), -1);
  int nt = 0, na = 0;
  for (int i = 0; i < pn.size(); ++i) {
    const auto j = pm.index(pn.key(i));
    if (j && pm.is_core(*j)) {
      absorbing_pos[i] = na++;
    } else {
      transient_pos[i] = nt++;
    }
  }
  std::vector<int> absorbing_state(static_cast<std::size_t>(na));
  for (int i = 0; i < pn.size(); ++i) {
    if (absorbing_pos[i] >= 0) absorbing_state[absorbing_pos[i]] = i;
  }
  std::vector<Eigen::Triplet<double>> qt;
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(nt, na);
  for (int i = 0; i < pn.size(); ++i) {
    if (transient_pos[i] < 0) continue;
    qt.emplace_back(transient_pos[i], transient_pos[i], 1.0);
    const auto to = pn.targets(i);
    const auto p = pn.probabilities(i);
    for (std::size_t k = 0; k < to.size(); ++k) {
      if (transient_pos[to[k]] >= 0) {
        qt.emplace_back(transient_pos[i], transient_pos[to[k]], -p[k]);
      } else {
        r(transient_pos[i], absorbing_pos[to[k]]) += p[k];
      }
    }
  }
  Eigen::SparseMatrix<double> iq(nt, nt);
  iq.setFromTriplets(qt.begin(), qt.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(iq);
  if (lu.info() != Eigen::Success) throw SolverError("absorbing-chain system is singular", 0.0);
  const Eigen::MatrixXd hit = lu.solve(r);

  for (int i = pm.graph().core_count(); i < pm.size(); ++i) {
    const auto j = pn.index(pm.key(i));
    if (!j || transient_pos[*j] < 0) throw ConsistencyError("shell vertex of level m is not a level-n state");
    std::unordered_map<VertexKey, double> induced;
    for (int a = 0; a < na; ++a) {
      const double p = hit(transient_pos[*j], a);
      if (p != 0.0) induced[pn.key(absorbing_state[a])] = p;
    }
    report.shell_deviation = std::max(report.shell_deviation, deviation(row_of(pm, i), induced));
    ++report.states_compared;
  }
  report.max_deviation = std::max(report.core_deviation, report.shell_deviation);
  return report;
}

/// Expected return time to `start` for the continuous-time chain with holding rates w: solves
/// m(x) = 1/w(x) + Σ_y p(x,y) m(y) with m(start) = 0 and returns 1/w(start) + Σ_y p(start,y) m(y).
inline double expected_excursion_time(const LevelChainKernel& kernel, const RateSchedule& rate, VertexKey start) {
  rate.validate();
  const auto s = kernel.index(start);
  if (!s) throw ConstructionError("start is not a state of the kernel");
  const int n = kernel.size();
  auto hold = [&](int i) { return 1.0 / rate.rate(kernel.graph().exhaustion_level(i)); };
  auto pos = [&](int i) { return i < *s ? i : i - 1; };
  double total = hold(*s);
  if (n > 1) {
    std::vector<Eigen::Triplet<double>> t;
    Eigen::VectorXd b(n - 1);
    for (int i = 0; i < n; ++i) {
      if (i == *s) continue;
      t.emplace_back(pos(i), pos(i), 1.0);
      b[pos(i)] = hold(i);
      const auto to = kernel.targets(i);
      const auto p = kernel.probabilities(i);
      for (std::size_t k = 0; k < to.size(); ++k) {
        if (to[k] != *s) t.emplace_back(pos(i), pos(to[k]), -p[k]);
      }
    }
    Eigen::SparseMatrix<double> a(n - 1, n - 1);
    a.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw SolverError("return-time system is singular (chain not irreducible?)", 0.0);
    const Eigen::VectorXd m = lu.solve(b);
    const auto to = kernel.targets(*s);
    const auto p = kernel.probabilities(*s);
    for (std::size_t k = 0; k < to.size(); ++k) {
      if (to[k] != *s) total += p[k] * m[pos(to[k])];
    }
  }
  return total;
}

struct ExcursionProfile {
  std::vector<int> levels;
  std::vector<double> times;
  std::vector<double> increments;  // times[i+1] - times[i]
};

/// Expected excursion times from `start` at several levels, for calibrating the rate growth.
inline ExcursionProfile excursion_profile(const GraphOracle& oracle, const Exhaustion& exhaustion,
                                          std::span<const int> levels, const RateSchedule& rate, VertexKey start,
                                          KernelOptions options = {}) {
  options.end_labels = false;
  ExcursionProfile out;
  for (int n : levels) {
    const LevelChainKernel k = build_kernel(oracle, exhaustion, n, options);
    out.levels.push_back(n);
    out.times.push_back(expected_excursion_time(k, rate, start));
  }
  for (std::size_t i = 1; i < out.times.size(); ++i) out.increments.push_back(out.times[i] - out.times[i - 1]);
  return out;
}

}  // namespace refwalk
