#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "refwalk/forest.hpp"
#include "refwalk/green.hpp"
#include "refwalk/parallel.hpp"
#include "refwalk/planar.hpp"
#include "refwalk/stats.hpp"
#include "refwalk/walk.hpp"
#include "refwalk/zoo.hpp"

/// Acceptance suites shared by `refwalk verify` and the acceptance test binary. Every suite is a
/// pure function of its settings: replicas use Stream(seed, index) and results are merged by
/// index, so reports do not depend on the thread count.
namespace refwalk::verify {

using Json = nlohmann::ordered_json;

struct Settings {
  std::uint64_t seed = 1;
  int threads = 1;
  double replica_scale = 1.0;  // < 1 for smoke runs; acceptance uses 1

  std::uint64_t replicas(std::uint64_t nominal) const {
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(static_cast<double>(nominal) * replica_scale)));
  }
};

struct Check {
  std::string name;
  bool passed = false;
  Json stats;
};

struct SuiteReport {
  std::string suite;
  int criterion = 0;
  std::uint64_t seed = 0;
  std::vector<Check> checks;
  Json diagnostics = Json::object();  // reported only, never part of the verdict

  bool passed() const {
    for (const Check& c : checks) {
      if (!c.passed) return false;
    }
    return !checks.empty();
  }

  Json to_json() const {
    Json j;
    j["suite"] = suite;
    j["criterion"] = criterion;
    j["seed"] = seed;
    j["passed"] = passed();
    j["checks"] = Json::array();
    for (const Check& c : checks) j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"stats", c.stats}});
    if (!diagnostics.empty()) j["diagnostics"] = diagnostics;
    return j;
  }

  std::string summary() const {
    int ok = 0;
    for (const Check& c : checks) ok += c.passed;
    std::string s = suite + ": " + std::to_string(ok) + "/" + std::to_string(checks.size()) + " checks";
    for (const Check& c : checks) {
      if (!c.passed) s += "; failed " + c.name;
    }
    return s;
  }
};

namespace detail {

inline WeightedGraph weighted_triangle() { return WeightedGraph(3, {{0, 1, 1.0}, {1, 2, 2.0}, {0, 2, 3.0}}); }

inline std::vector<VertexKey> all_keys(const WeightedGraph& g) {
  std::vector<VertexKey> out;
  for (int v = 0; v < g.vertex_count(); ++v) out.push_back(static_cast<VertexKey>(v));
  return out;
}

// Tallies sampled edge sets into cells numbered by first appearance in replica order.
struct CellCounter {
  std::map<std::vector<UndirectedEdge>, std::size_t> cell;
  std::vector<std::vector<std::uint64_t>> counts;

  explicit CellCounter(std::size_t samples) : counts(samples) {}

  void add(std::size_t sample, const std::vector<UndirectedEdge>& edges) {
    auto [it, fresh] = cell.emplace(edges, cell.size());
    if (fresh) {
      for (auto& c : counts) c.push_back(0);
    }
    ++counts[sample][it->second];
  }
};

}  // namespace detail

/// Aldous-Broder and Wilson against exact enumeration on small finite graphs.
inline SuiteReport finite_ust(const Settings& s) {
  SuiteReport r{"finite-ust", 1, s.seed, {}};
  const std::vector<std::pair<std::string, WeightedGraph>> graphs{{"K3", zoo::complete_graph(3)},
                                                                  {"K4", zoo::complete_graph(4)},
                                                                  {"weighted_triangle", detail::weighted_triangle()},
                                                                  {"C4", zoo::cycle_graph(4)}};
  const std::uint64_t replicas = s.replicas(100000);
  std::uint64_t stream_base = 0;
  for (const auto& [name, g] : graphs) {
    const TreeDistribution d = enumerate_ust(g);
    const LevelChainKernel k = finite_kernel(g);
    const auto all = detail::all_keys(g);
    for (const char* sampler : {"aldous_broder", "wilson"}) {
      const bool ab = std::string(sampler) == "aldous_broder";
      std::vector<long> index(replicas, -1);
      const std::uint64_t base = stream_base;
      parallel_for(replicas, s.threads, [&](std::size_t i) {
        Stream rng(s.seed, base + i);
        const Forest f = ab ? aldous_broder_window(k, 0, all, all, rng) : wilson_sample(k, all, rng);
        const auto idx = d.find(f.edges());
        index[i] = idx ? static_cast<long>(*idx) : -1;
      });
      stream_base += replicas;
      std::vector<std::uint64_t> counts(d.trees.size(), 0);
      std::uint64_t invalid = 0;
      for (long i : index) {
        if (i < 0) ++invalid;
        else ++counts[static_cast<std::size_t>(i)];
      }
      const auto chi = stats::chi_square_gof(counts, d.probabilities);
      r.checks.push_back({name + "/" + sampler, invalid == 0 && chi.p_value > 0.01,
                          Json{{"replicas", replicas}, {"trees", d.trees.size()}, {"non_trees", invalid},
                               {"chi_square", chi.statistic}, {"dof", chi.dof}, {"p_value", chi.p_value}}});
    }
  }
  return r;
}

/// Green-function edge probability against the matrix-tree contraction ratio.
inline SuiteReport kirkhoff(const Settings& s) {
  SuiteReport r{"kirkhoff", 2, s.seed, {}};
  std::mt19937_64 rng(s.seed);
  std::uniform_int_distribution<int> size(4, 8);
  double worst = 0.0;
  int edges = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const WeightedGraph g = zoo::random_connected(rng, size(rng));
    for (const Edge& e : g.edges()) {
      worst = std::max(worst, std::abs(kirkhoff_edge_prob(g, e.u, e.v) - matrix_tree_edge_prob(g, e.u, e.v)));
      ++edges;
    }
  }
  r.checks.push_back({"random_graphs", worst <= 1e-9, Json{{"graphs", 100}, {"edges", edges}, {"max_abs_error", worst}}});
  return r;
}

/// Exact level consistency on the binary tree and Z^3.
inline SuiteReport consistency(const Settings& s) {
  SuiteReport r{"consistency", 3, s.seed, {}};
  const std::vector<std::pair<std::string, GraphOracle>> graphs{{"binary_tree", zoo::regular_tree(2)},
                                                                {"Z3", zoo::lattice_zd(3)}};
  for (const auto& [name, g] : graphs) {
    const Exhaustion e = Exhaustion::balls(g);
    for (auto [m, n] : {std::pair{1, 3}, std::pair{2, 4}}) {
      const ConsistencyReport c = consistency_check(g, e, m, n);
      r.checks.push_back({name + "/(" + std::to_string(m) + "," + std::to_string(n) + ")", c.max_deviation <= 1e-6,
                          Json{{"max_deviation", c.max_deviation}, {"core_deviation", c.core_deviation},
                               {"shell_deviation", c.shell_deviation}, {"resolution_level", c.resolution_level},
                               {"states_compared", c.states_compared}}});
    }
  }
  return r;
}

/// First-hit law of the level chain against the energy-minimizing harmonic measure.
inline SuiteReport hitting_law(const Settings& s) {
  SuiteReport r{"hitting-law", 4, s.seed, {}};
  const GraphOracle t = zoo::regular_tree(3);
  const Exhaustion e = Exhaustion::balls(t);
  const LevelChainKernel k = build_kernel(t, e, 6);
  // two children of the root and a grandchild below the third child
  const std::vector<VertexKey> A{1, 2, 12};
  const VertexKey x = 0;
  const HarmonicMeasure hm = harmonic_measure(t, e, A, x);
  std::vector<char> target(static_cast<std::size_t>(k.size()), 0);
  std::map<int, std::size_t> cell;
  for (std::size_t a = 0; a < A.size(); ++a) {
    target[*k.index(A[a])] = 1;
    cell[*k.index(A[a])] = a;
  }
  const std::uint64_t replicas = s.replicas(100000);
  std::vector<int> hit(replicas);
  parallel_for(replicas, s.threads, [&](std::size_t i) {
    Stream rng(s.seed, i);
    hit[i] = first_hit(k, *k.index(x), target, rng);
  });
  std::vector<std::uint64_t> counts(A.size(), 0);
  for (int h : hit) ++counts[cell.at(h)];
  const auto chi = stats::chi_square_gof(counts, hm.probabilities);
  Json observed = Json::array(), expected = Json::array();
  for (std::size_t a = 0; a < A.size(); ++a) {
    observed.push_back(static_cast<double>(counts[a]) / static_cast<double>(replicas));
    expected.push_back(hm.probabilities[a]);
  }
  r.checks.push_back({"regular_tree(3)/level6", chi.p_value > 0.01,
                      Json{{"replicas", replicas}, {"A", A}, {"x", x}, {"empirical", observed}, {"harmonic_measure", expected},
                           {"hm_tolerance", hm.achieved_tolerance}, {"chi_square", chi.statistic}, {"p_value", chi.p_value}}});
  return r;
}

/// Symmetry, Laplacian identity and positive semidefiniteness of G_A / π.
inline SuiteReport green_identities(const Settings& s) {
  SuiteReport r{"green", 5, s.seed, {}};
  auto judge = [](const GreenReport& g) {
    return g.symmetry <= 1e-9 && g.laplacian <= 1e-8 && g.min_eigenvalue >= -1e-8 * g.max_eigenvalue;
  };
  auto to_json = [](const GreenReport& g) {
    return Json{{"symmetry", g.symmetry}, {"laplacian", g.laplacian}, {"harmonicity", g.harmonicity},
                {"min_eigenvalue", g.min_eigenvalue}, {"max_eigenvalue", g.max_eigenvalue}, {"rows_checked", g.rows_checked}};
  };
  std::mt19937_64 rng(s.seed);
  GreenReport worst;
  worst.min_eigenvalue = 0.0;
  bool all = true;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 4 + trial % 12;
    const WeightedGraph g = zoo::random_connected(rng, n);
    std::vector<int> A{static_cast<int>(rng() % static_cast<std::uint64_t>(n))};
    if (trial % 3 == 0) A.push_back((A[0] + 1) % n);
    std::vector<int> W(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) W[i] = i;
    const GreenReport rep = validate_green(green_finite(g, A, W), g);
    all = all && judge(rep);
    worst.symmetry = std::max(worst.symmetry, rep.symmetry);
    worst.laplacian = std::max(worst.laplacian, rep.laplacian);
    worst.harmonicity = std::max(worst.harmonicity, rep.harmonicity);
    worst.min_eigenvalue = std::min(worst.min_eigenvalue, rep.min_eigenvalue / rep.max_eigenvalue);
    worst.rows_checked += rep.rows_checked;
  }
  Json finite = to_json(worst);
  finite.erase("max_eigenvalue");
  finite["min_relative_eigenvalue"] = finite["min_eigenvalue"];
  finite.erase("min_eigenvalue");
  finite["graphs"] = 50;
  r.checks.push_back({"random_finite_graphs", all, finite});

  const GraphOracle t = zoo::regular_tree(3);
  const Exhaustion e = Exhaustion::balls(t);
  for (auto [window_level, level] : {std::pair{2, 3}, std::pair{2, 5}, std::pair{3, 5}}) {
    GreenMatrix G;
    G.A = {0};
    G.window = e.level(window_level);
    const ConductanceFn nb = level_neighbors(t, e, level);
    for (VertexKey w : G.window) {
      double pi = 0.0;
      for (const Neighbor& x : nb(w)) pi += x.c;
      G.pi.push_back(pi);
    }
    G.values = green_at_level(t, e, G.A, G.window, level, {1e-12, 500, 0});
    const GreenReport rep = validate_green(G, nb);
    Json j = to_json(rep);
    j["window"] = "V_" + std::to_string(window_level);
    j["level"] = level;
    r.checks.push_back({"regular_tree(3)/window" + std::to_string(window_level) + "/level" + std::to_string(level), judge(rep), j});
  }
  return r;
}

/// Empirical GFF covariance against G_A / π on a tree window.
inline SuiteReport gff_covariance(const Settings& s) {
  SuiteReport r{"gff", 6, s.seed, {}};
  const GraphOracle t = zoo::regular_tree(3);
  const Exhaustion e = Exhaustion::balls(t);
  const std::vector<VertexKey> A{0};
  const std::vector<VertexKey> W{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const GreenMatrix G = green(t, e, A, W);
  const Eigen::MatrixXd sigma = G.covariance();
  const std::uint64_t replicas = s.replicas(100000);
  const GffSampleSet samples = gff_sample(G, replicas, s.seed);
  double worst_z = 0.0;
  for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
    for (Eigen::Index j = i; j < sigma.cols(); ++j) {
      const Eigen::ArrayXd prod = samples.samples.col(i).array() * samples.samples.col(j).array();
      const double mean = prod.mean();
      const double n = static_cast<double>(replicas);
      const double se = std::sqrt((prod - mean).square().sum() / (n - 1.0) / n);
      const double diff = std::abs(mean - sigma(i, j));
      if (se == 0.0) {
        if (diff != 0.0) worst_z = std::numeric_limits<double>::infinity();
      } else {
        worst_z = std::max(worst_z, diff / se);
      }
    }
  }
  const double on_A = samples.samples.col(0).cwiseAbs().maxCoeff();
  r.checks.push_back({"covariance_within_5se", worst_z <= 5.0,
                      Json{{"replicas", replicas}, {"window", W.size()}, {"max_z", worst_z},
                           {"green_tolerance", G.achieved_tolerance}, {"factorization", samples.factorization}}});
  r.checks.push_back({"zero_on_A", on_A == 0.0, Json{{"max_abs_on_A", on_A}}});
  return r;
}

/// Wheel and grid embeddings: roots of unity, convex faces, exact boundary angles.
inline SuiteReport tutte(const Settings& s) {
  SuiteReport r{"tutte", 7, s.seed, {}};
  const PlanarMap w = maps::wheel(8);
  const Embedding ew = tutte_embed(w);
  double boundary_err = 0.0;
  for (int k = 0; k < 8; ++k) boundary_err = std::max(boundary_err, std::abs(ew.at(k) - std::polar(1.0, 2.0 * std::numbers::pi * k / 8)));
  const double center = std::abs(ew.at(8));
  r.checks.push_back({"wheel8/roots_of_unity", boundary_err <= 1e-10, Json{{"max_error", boundary_err}}});
  r.checks.push_back({"wheel8/center", center <= 1e-10, Json{{"abs_center", center}}});
  const PlanarMap g = maps::grid(3, 3);
  const Embedding eg = tutte_embed(g);
  for (const auto& [name, map, emb] : {std::tuple{"wheel8", &w, &ew}, std::tuple{"grid3x3", &g, &eg}}) {
    const ConvexityReport c = face_convexity(*emb, *map, 1e-9);
    r.checks.push_back({std::string(name) + "/convexity", c.passed, Json{{"max_defect", c.max_defect}, {"faces", c.defects.size()}}});
    const auto hm = hm_from_angles(*emb);
    double err = 0.0;
    for (std::size_t k = 0; k < hm.size(); ++k) err = std::max(err, std::abs(hm[k] - emb->boundary_hm[k]));
    r.checks.push_back({std::string(name) + "/hm_from_angles", err <= 1e-12, Json{{"max_error", err}}});
  }
  return r;
}

/// Aldous-Broder window marginal on E(G_2) at two levels of the regular tree.
inline SuiteReport level_stability(const Settings& s) {
  SuiteReport r{"level-stability", 8, s.seed, {}};
  const GraphOracle t = zoo::regular_tree(3);
  const Exhaustion e = Exhaustion::balls(t);
  const auto window = e.level(2);
  const auto cover = e.level(3);
  const std::uint64_t replicas = s.replicas(50000);
  const int levels[] = {4, 6};
  detail::CellCounter counter(2);
  Json per_level = Json::array();
  for (int which = 0; which < 2; ++which) {
    const LevelChainKernel k = build_kernel(t, e, levels[which]);
    std::vector<std::vector<UndirectedEdge>> edges(replicas);
    std::vector<std::size_t> unresolved(replicas);
    parallel_for(replicas, s.threads, [&](std::size_t i) {
      Stream rng(s.seed, static_cast<std::uint64_t>(which) * replicas + i);
      const Forest f = aldous_broder_window(k, 0, window, cover, rng);
      edges[i] = f.edges_within(window);
      unresolved[i] = f.unresolved_parents;
    });
    std::size_t unresolved_total = 0;
    for (std::size_t i = 0; i < replicas; ++i) {
      counter.add(static_cast<std::size_t>(which), edges[i]);
      unresolved_total += unresolved[i];
    }
    per_level.push_back({{"level", levels[which]}, {"unresolved_parents", unresolved_total}});
  }
  const auto chi = stats::chi_square_two_sample(counter.counts[0], counter.counts[1]);
  r.checks.push_back({"regular_tree(3)/levels4-6", chi.p_value > 0.01,
                      Json{{"replicas_per_level", replicas}, {"distinct_marginals", counter.cell.size()},
                           {"chi_square", chi.statistic}, {"dof", chi.dof}, {"p_value", chi.p_value}, {"levels", per_level}}});
  return r;
}

/// Runs of Wilson's algorithm with at least one branch whose loop erasure keeps a pass through
/// infinity. The verdict is on the regular tree; a Z^3 run is reported alongside.
inline SuiteReport wilson_escape(const Settings& s) {
  SuiteReport r{"wilson-escape", 9, s.seed, {}};
  auto count_escapes = [&](const LevelChainKernel& k, std::span<const VertexKey> order, std::uint64_t runs,
                           std::uint64_t stream_offset) {
    std::vector<char> escaped(runs, 0);
    std::vector<std::size_t> branches(runs, 0);
    parallel_for(runs, s.threads, [&](std::size_t i) {
      Stream rng(s.seed, stream_offset + i);
      const Forest f = wilson_sample(k, order, rng);
      escaped[i] = f.any_escaped() ? 1 : 0;
      branches[i] = static_cast<std::size_t>(std::count(f.escaped.begin(), f.escaped.end(), 1));
    });
    std::uint64_t events = 0, total_branches = 0;
    for (std::size_t i = 0; i < runs; ++i) {
      events += escaped[i];
      total_branches += branches[i];
    }
    return std::pair{events, total_branches};
  };

  const GraphOracle t = zoo::regular_tree(3);
  const Exhaustion e = Exhaustion::balls(t);
  const LevelChainKernel k = build_kernel(t, e, 6);
  const auto order = exhaustion_order(e, 6);
  const std::uint64_t runs = s.replicas(10000);
  const auto [events, branches] = count_escapes(k, order, runs, 0);
  r.checks.push_back({"regular_tree(3)/level6", events >= 10,
                      Json{{"runs", runs}, {"runs_with_escape", events}, {"escaped_branches", branches},
                           {"frequency", static_cast<double>(events) / static_cast<double>(runs)}}});

  const GraphOracle z = zoo::lattice_zd(3);
  const Exhaustion ez = Exhaustion::balls(z);
  KernelOptions o;
  o.resolution_level = 4;
  const LevelChainKernel kz = build_kernel(z, ez, 2, o);
  const auto zorder = exhaustion_order(ez, 2);
  const std::uint64_t zruns = s.replicas(1000);
  const auto [zevents, zbranches] = count_escapes(kz, zorder, zruns, runs);
  r.diagnostics["Z3/level2/resolution4"] = Json{{"runs", zruns}, {"runs_with_escape", zevents}, {"escaped_branches", zbranches},
                                                {"frequency", static_cast<double>(zevents) / static_cast<double>(zruns)}};
  return r;
}

struct Suite {
  std::string name;
  int criterion;
  double time_limit_seconds;
  std::function<SuiteReport(const Settings&)> run;
};

inline const std::vector<Suite>& suites() {
  static const std::vector<Suite> all{
      {"finite-ust", 1, 60.0, finite_ust},         {"kirkhoff", 2, 30.0, kirkhoff},
      {"consistency", 3, 60.0, consistency},       {"hitting-law", 4, 120.0, hitting_law},
      {"green", 5, 60.0, green_identities},        {"gff", 6, 60.0, gff_covariance},
      {"tutte", 7, 10.0, tutte},                   {"level-stability", 8, 300.0, level_stability},
      {"wilson-escape", 9, 600.0, wilson_escape},
  };
  return all;
}

inline const Suite* find_suite(const std::string& name) {
  for (const Suite& s : suites()) {
    if (s.name == name || std::to_string(s.criterion) == name) return &s;
  }
  return nullptr;
}

}  // namespace refwalk::verify
