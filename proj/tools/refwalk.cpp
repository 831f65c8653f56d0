// refwalk command-line tool. Every stochastic subcommand needs an explicit --seed; outputs are
// merged by replica index so they do not depend on --threads.
//
// Exit codes: 0 success, 1 usage or input error, 2 numerical failure, 3 verification failure.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "refwalk/forest.hpp"
#include "refwalk/green.hpp"
#include "refwalk/harmonic.hpp"
#include "refwalk/parallel.hpp"
#include "refwalk/planar.hpp"
#include "refwalk/verify.hpp"
#include "refwalk/walk.hpp"
#include "refwalk/zoo.hpp"

namespace {

using namespace refwalk;
using Json = nlohmann::ordered_json;

constexpr int kUsage = 1;
constexpr int kNumerical = 2;
constexpr int kVerification = 3;

struct GraphSource {
  std::string spec;
  GraphOracle oracle;
  Exhaustion exhaustion;
  std::optional<WeightedGraph> finite;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string piece; std::getline(in, piece, sep);) out.push_back(piece);
  return out;
}

int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConstructionError("bad " + what + ": '" + s + "'");
}

/// Weighted graph file: {"vertices": n, "edges": [[u, v], [u, v, c], ...]}.
WeightedGraph load_weighted_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    nlohmann::json j;
    in >> j;
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      const double c = e.size() > 2 ? e.at(2).get<double>() : 1.0;
      edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), c});
    }
    return WeightedGraph(j.at("vertices").get<int>(), edges);
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(path + ": " + ex.what());
  }
}

GraphSource load_graph(const std::string& spec) {
  auto from_finite = [&](WeightedGraph g) {
    GraphOracle o = zoo::finite(g);
    Exhaustion e = Exhaustion::balls(o);
    return GraphSource{spec, o, e, std::move(g)};
  };
  auto from_oracle = [&](GraphOracle o) {
    Exhaustion e = Exhaustion::balls(o);
    return GraphSource{spec, o, e, std::nullopt};
  };
  if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".json") return from_finite(load_weighted_graph(spec));
  const auto parts = split(spec, ':');
  const std::string& kind = parts.empty() ? spec : parts[0];
  auto arg = [&](std::size_t i) {
    if (parts.size() <= i) throw ConstructionError("graph spec '" + spec + "' is missing a parameter");
    return to_int(parts[i], "graph parameter");
  };
  if (kind == "lattice") return from_oracle(zoo::lattice_zd(arg(1)));
  if (kind == "tree") return from_oracle(zoo::regular_tree(arg(1)));
  if (kind == "biased_tree") {
    if (parts.size() < 3) throw ConstructionError("biased_tree needs b and lambda");
    return from_oracle(zoo::biased_tree(arg(1), std::stod(parts[2])));
  }
  if (kind == "complete") return from_finite(zoo::complete_graph(arg(1)));
  if (kind == "cycle") return from_finite(zoo::cycle_graph(arg(1)));
  if (kind == "path") return from_finite(zoo::path_graph(arg(1)));
  throw ConstructionError("unknown graph '" + spec + "' (lattice:d, tree:b, biased_tree:b:lambda, complete:n, cycle:n, path:n, or a .json file)");
}

VertexKey parse_key(const GraphSource& g, const std::string& text) {
  auto k = g.oracle.parse(text);
  if (!k) throw ConstructionError("cannot parse vertex '" + text + "' for " + g.oracle.name());
  return *k;
}

std::vector<VertexKey> parse_keys(const GraphSource& g, const std::vector<std::string>& texts) {
  std::vector<VertexKey> out;
  for (const auto& t : texts) out.push_back(parse_key(g, t));
  return out;
}

Json keys_json(const GraphSource& g, std::span<const VertexKey> keys) {
  Json out = Json::array();
  for (VertexKey k : keys) out.push_back(g.oracle.format(k));
  return out;
}

/// Writes to --out if given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw IoError("cannot open " + path + " for writing");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

struct Common {
  std::string graph;
  std::string out;
  int threads = 1;
  double tol = 1e-6;
  int n_max = 12;
  int stride = 2;

  LevelOptions level_options() const {
    if (!(tol > 0.0)) throw ConstructionError("tolerance must be positive");
    LevelOptions o;
    o.tol = tol;
    o.n_max = n_max;
    o.stride = stride;
    return o;
  }
};

void add_level_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--tol", c.tol, "Cauchy tolerance between levels")->capture_default_str();
  cmd->add_option("--n-max", c.n_max, "largest level tried")->capture_default_str();
  cmd->add_option("--stride", c.stride, "level increment")->capture_default_str();
}

// ---- zoo -------------------------------------------------------------------------------------

int run_zoo(const Common& c, int level) {
  const GraphSource g = load_graph(c.graph);
  const LevelGraph lg = truncate(g.oracle, g.exhaustion, level);
  Json j;
  j["graph"] = g.oracle.name();
  j["level"] = level;
  j["root"] = g.oracle.format(g.oracle.root());
  j["core"] = lg.core_count();
  j["shell"] = lg.shell_count();
  std::set<VertexKey> components;
  for (const auto& [v, comp] : complement_components(g.oracle, g.exhaustion, level)) components.insert(comp);
  j["complement_components"] = components.size();
  Output out(c.out);
  out.stream() << j.dump(2) << "\n";
  return 0;
}

// ---- harmonic --------------------------------------------------------------------------------

int run_harmonic(const Common& c, const std::vector<std::string>& A_text, const std::string& x_text) {
  const GraphSource g = load_graph(c.graph);
  const auto A = parse_keys(g, A_text);
  const VertexKey x = parse_key(g, x_text);
  Json j;
  j["graph"] = g.oracle.name();
  j["A"] = keys_json(g, A);
  j["x"] = g.oracle.format(x);
  if (g.finite) {
    std::vector<int> a_idx(A.begin(), A.end());
    const int src[] = {static_cast<int>(x)};
    const Eigen::MatrixXd hm = harmonic_measure_rows(*g.finite, a_idx, src);
    std::vector<double> p;
    for (Eigen::Index col = 0; col < hm.cols(); ++col) p.push_back(hm(0, col));
    j["probabilities"] = p;
    j["achieved_tolerance"] = 0.0;
  } else {
    const HarmonicMeasure hm = harmonic_measure(g.oracle, g.exhaustion, A, x, c.level_options());
    j["probabilities"] = hm.probabilities;
    j["achieved_tolerance"] = hm.achieved_tolerance;
    j["levels"] = {hm.level_low, hm.level_high};
    j["empirical_tolerance"] = true;
  }
  Output out(c.out);
  out.stream() << j.dump(2) << "\n";
  return 0;
}

int run_extend(const Common& c, const std::vector<std::string>& A_text, const std::vector<double>& phi, int window_level) {
  const GraphSource g = load_graph(c.graph);
  const auto A = parse_keys(g, A_text);
  if (phi.size() != A.size()) throw ConstructionError("--phi needs one value per vertex of --A");
  Json j;
  j["graph"] = g.oracle.name();
  j["A"] = keys_json(g, A);
  j["phi"] = phi;
  if (g.finite) {
    DirichletProblem problem{&*g.finite, std::vector<int>(A.begin(), A.end()), phi};
    std::vector<VertexKey> all;
    for (int v = 0; v < g.finite->vertex_count(); ++v) all.push_back(static_cast<VertexKey>(v));
    j["window"] = keys_json(g, all);
    j["values"] = solve_free_dirichlet(problem);
  } else {
    const auto window = g.exhaustion.level(window_level);
    const ExtensionResult r = min_energy_extension(g.oracle, g.exhaustion, A, phi, window, c.level_options());
    j["window"] = keys_json(g, window);
    j["values"] = r.values;
    j["achieved_tolerance"] = r.achieved_tolerance;
    j["levels"] = {r.level_low, r.level_high};
    j["empirical_tolerance"] = true;
  }
  Output out(c.out);
  out.stream() << j.dump(2) << "\n";
  return 0;
}

// ---- walk ------------------------------------------------------------------------------------

struct WalkArgs {
  int level = 2;
  std::optional<int> resolution;
  std::string start;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t replicas = 1;
  std::size_t steps = 0;
  std::vector<std::string> hit;
  int cover_level = 0;
  double rate_base = 1.0;
  double rate_growth = 4.0;
  std::size_t budget = 100'000'000;
};

KernelOptions kernel_options(const Common& c, std::optional<int> resolution) {
  KernelOptions o;
  o.hm_tol = c.tol;
  if (resolution) o.resolution_level = *resolution;
  return o;
}

// One header line per replica, then one line per event.
std::string trajectory_lines(const GraphSource& g, const Trajectory& t, std::uint64_t replica) {
  std::string out = Json{{"replica", replica}, {"seed", t.seed}, {"level", t.level}, {"steps", t.steps},
                         {"events", t.events.size()}}.dump() + "\n";
  for (const auto& e : t.events) {
    Json line{{"replica", replica}};
    if (const auto* v = std::get_if<VertexVisit>(&e)) {
      line["visit"] = g.oracle.format(v->vertex);
      line["hold"] = v->hold;
    } else {
      const auto& p = std::get<InfinityPass>(e);
      line["infinity"] = {{"exit", g.oracle.format(p.exit)}, {"shell", g.oracle.format(p.shell)},
                          {"entry", g.oracle.format(p.entry)}, {"end", keys_json(g, p.end_prefix)}};
    }
    out += line.dump() + "\n";
  }
  return out;
}

int run_walk_simulate(const Common& c, const WalkArgs& w) {
  const GraphSource g = load_graph(c.graph);
  const LevelChainKernel k = build_kernel(g.oracle, g.exhaustion, w.level, kernel_options(c, w.resolution));
  const VertexKey start = w.start.empty() ? g.oracle.root() : parse_key(g, w.start);
  StopRule stop = StopRule::after(w.steps);
  if (!w.hit.empty()) stop = StopRule::hit(parse_keys(g, w.hit));
  if (w.cover_level > 0) stop = StopRule::cover(g.exhaustion.level(w.cover_level));
  if (w.hit.empty() && w.cover_level == 0 && w.steps == 0) throw ConstructionError("give --steps, --hit or --cover-level");
  const RateSchedule rate{w.rate_base, w.rate_growth};
  std::vector<std::string> lines(w.replicas);
  parallel_for(w.replicas, c.threads, [&](std::size_t i) {
    const Trajectory t = simulate(k, start, stop, rate, w.seed, w.stream + i, w.budget);
    lines[i] = trajectory_lines(g, t, w.stream + i);
  });
  Output out(c.out);
  for (const auto& l : lines) out.stream() << l;
  return 0;
}

int run_walk_consistency(const Common& c, int m, int n, std::optional<int> resolution) {
  const GraphSource g = load_graph(c.graph);
  const ConsistencyReport r = consistency_check(g.oracle, g.exhaustion, m, n, kernel_options(c, resolution));
  Json j{{"graph", g.oracle.name()}, {"m", m}, {"n", n}, {"max_deviation", r.max_deviation},
         {"core_deviation", r.core_deviation}, {"shell_deviation", r.shell_deviation},
         {"resolution_level", r.resolution_level}, {"states_compared", r.states_compared}};
  Output out(c.out);
  out.stream() << j.dump(2) << "\n";
  return 0;
}

int run_walk_excursion(const Common& c, const std::vector<int>& levels, const WalkArgs& w) {
  const GraphSource g = load_graph(c.graph);
  const VertexKey start = w.start.empty() ? g.oracle.root() : parse_key(g, w.start);
  const ExcursionProfile p = excursion_profile(g.oracle, g.exhaustion, levels, RateSchedule{w.rate_base, w.rate_growth}, start,
                                               kernel_options(c, w.resolution));
  Json j{{"graph", g.oracle.name()}, {"start", g.oracle.format(start)}, {"levels", p.levels}, {"times", p.times},
         {"increments", p.increments}};
  Output out(c.out);
  out.stream() << j.dump(2) << "\n";
  return 0;
}

// ---- forest ----------------------------------------------------------------------------------

int run_forest_exact(const Common& c) {
  const GraphSource g = load_graph(c.graph);
  if (!g.finite) throw ConstructionError("forest exact needs a finite graph");
  const TreeDistribution d = enumerate_ust(*g.finite);
  Json trees = Json::array();
  for (std::size_t t = 0; t < d.trees.size(); ++t) {
    Json edges = Json::array();
    for (int e : d.trees[t]) edges.push_back({d.edges[e].u, d.edges[e].v});
    trees.push_back({{"edges", edges}, {"probability", d.probabilities[t]}});
  }
  Json j{{"graph", c.graph}, {"tree_count", d.trees.size()}, {"trees", trees}};
  Output out(c.out);
  out.stream() << j.dump(2) << "\n";
  return 0;
}

struct ForestArgs {
  int level = 2;
  std::optional<int> resolution;
  int window = 1;
  int cover = 0;
  std::uint64_t seed = 0;
  std::uint64_t replicas = 1;
  std::string start;
};

int run_forest_sample(const Common& c, const ForestArgs& f, bool wilson) {
  const GraphSource g = load_graph(c.graph);
  const int level = g.finite ? std::max(1, g.finite->vertex_count()) : f.level;
  const LevelChainKernel k = build_kernel(g.oracle, g.exhaustion, level, kernel_options(c, f.resolution));
  const auto window = g.exhaustion.level(g.finite ? level : f.window);
  const auto cover = g.finite ? window : g.exhaustion.level(f.cover > 0 ? f.cover : f.window + 1);
  const auto order = wilson && !g.finite ? exhaustion_order(g.exhaustion, level) : window;
  const VertexKey start = f.start.empty() ? window.front() : parse_key(g, f.start);
  std::vector<std::string> lines(f.replicas);
  parallel_for(f.replicas, c.threads, [&](std::size_t i) {
    Stream rng(f.seed, i);
    const Forest forest = wilson ? wilson_sample(k, order, rng) : aldous_broder_window(k, start, window, cover, rng);
    Json edges = Json::array();
    for (const auto& [a, b] : forest.edges_within(window)) edges.push_back({g.oracle.format(a), g.oracle.format(b)});
    Json j{{"replica", i}, {"edges", edges}, {"steps", forest.steps}};
    if (wilson) {
      j["escaped_branches"] = std::count(forest.escaped.begin(), forest.escaped.end(), 1);
      j["components"] = forest.components.empty() ? 1 : forest.components.back();
    } else {
      j["unresolved_parents"] = forest.unresolved_parents;
    }
    lines[i] = j.dump();
  });
  Output out(c.out);
  for (const auto& l : lines) out.stream() << l << "\n";
  return 0;
}

// ---- green / gff -----------------------------------------------------------------------------

GreenMatrix compute_green(const Common& c, const GraphSource& g, const std::vector<std::string>& A_text, int window_level) {
  const auto A = parse_keys(g, A_text);
  if (g.finite) {
    std::vector<int> a(A.begin(), A.end());
    std::vector<int> w;
    for (int v = 0; v < g.finite->vertex_count(); ++v) w.push_back(v);
    return green_finite(*g.finite, a, w);
  }
  return green(g.oracle, g.exhaustion, A, g.exhaustion.level(window_level), c.level_options());
}

void write_matrix_csv(std::ostream& os, const GraphSource& g, std::span<const VertexKey> header, const Eigen::MatrixXd& m) {
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << '"' << g.oracle.format(header[i]) << '"';
  os << "\n";
  char buf[32];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index col = 0; col < m.cols(); ++col) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, col));
      os << (col ? "," : "") << buf;
    }
    os << "\n";
  }
}

int run_green(const Common& c, const std::vector<std::string>& A, int window_level, const std::string& format) {
  const GraphSource g = load_graph(c.graph);
  const GreenMatrix G = compute_green(c, g, A, window_level);
  Output out(c.out);
  if (format == "csv") {
    write_matrix_csv(out.stream(), g, G.window, G.values);
    return 0;
  }
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < G.values.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index col = 0; col < G.values.cols(); ++col) row.push_back(G.values(r, col));
    rows.push_back(row);
  }
  const GreenReport rep = g.finite ? validate_green(G, *g.finite) : validate_green(G, g.oracle);
  Json j{{"graph", g.oracle.name()}, {"A", keys_json(g, G.A)}, {"window", keys_json(g, G.window)}, {"pi", G.pi},
         {"G", rows}, {"achieved_tolerance", G.achieved_tolerance}, {"levels", {G.level_low, G.level_high}},
         {"checks", {{"symmetry", rep.symmetry}, {"laplacian", rep.laplacian}, {"harmonicity", rep.harmonicity},
                     {"min_eigenvalue", rep.min_eigenvalue}, {"max_eigenvalue", rep.max_eigenvalue}}}};
  out.stream() << j.dump(2) << "\n";
  return 0;
}

int run_gff(const Common& c, const std::vector<std::string>& A, int window_level, std::uint64_t seed, std::uint64_t replicas) {
  const GraphSource g = load_graph(c.graph);
  const GreenMatrix G = compute_green(c, g, A, window_level);
  const GffSampleSet s = gff_sample(G, replicas, seed);
  Output out(c.out);
  write_matrix_csv(out.stream(), g, s.window, s.samples);
  return 0;
}

int run_kirkhoff(const Common& c, const std::string& x_text, const std::string& y_text) {
  const GraphSource g = load_graph(c.graph);
  const VertexKey x = parse_key(g, x_text), y = parse_key(g, y_text);
  Json j{{"graph", g.oracle.name()}, {"x", g.oracle.format(x)}, {"y", g.oracle.format(y)}};
  if (g.finite) {
    j["probability"] = kirkhoff_edge_prob(*g.finite, static_cast<int>(x), static_cast<int>(y));
    j["matrix_tree"] = matrix_tree_edge_prob(*g.finite, static_cast<int>(x), static_cast<int>(y));
  } else {
    const KirkhoffResult r = kirkhoff_edge_prob(g.oracle, g.exhaustion, x, y, c.level_options());
    j["probability"] = r.probability;
    j["achieved_tolerance"] = r.achieved_tolerance;
    j["levels"] = {r.level_low, r.level_high};
  }
  Output out(c.out);
  out.stream() << j.dump(2) << "\n";
  return 0;
}

// ---- embed -----------------------------------------------------------------------------------

struct EmbedArgs {
  std::string map;
  std::string builtin;
  int window_level = 4;
  std::string svg;
  bool fill = false;
  double edge_width = SvgOptions{}.edge_width;
  double vertex_radius = SvgOptions{}.vertex_radius;
  std::string end_vertex;
  std::vector<int> end_levels;
  std::string save_map;
};

Json embedding_json(const Embedding& e) {
  Json pos = Json::array();
  for (std::size_t i = 0; i < e.vertices.size(); ++i) pos.push_back({e.vertices[i], e.positions[i].real(), e.positions[i].imag()});
  const ConvexityReport conv = face_convexity(e);
  return Json{{"boundary", e.boundary}, {"boundary_hm", e.boundary_hm}, {"positions", pos},
              {"achieved_tolerance", e.achieved_tolerance}, {"empirical_tolerance", e.empirical_tolerance},
              {"levels", {e.level_low, e.level_high}}, {"max_modulus", max_modulus(e)},
              {"max_convexity_defect", conv.max_defect}};
}

int run_embed(const Common& c, const EmbedArgs& a) {
  if (a.map.empty() == a.builtin.empty()) throw ConstructionError("give exactly one of --map or --builtin");
  Embedding e;
  std::optional<MapOracle> infinite;
  std::optional<PlanarMap> finite;
  if (!a.map.empty()) {
    finite = load_planar_map(a.map);
  } else {
    const auto parts = split(a.builtin, ':');
    const std::string& kind = parts[0];
    if (kind == "wheel") {
      finite = maps::wheel(parts.size() > 1 ? to_int(parts[1], "wheel size") : 8);
    } else if (kind == "grid") {
      const auto dims = parts.size() > 1 ? split(parts[1], 'x') : std::vector<std::string>{"3", "3"};
      if (dims.size() != 2) throw ConstructionError("grid needs WxH");
      finite = maps::grid(to_int(dims[0], "grid width"), to_int(dims[1], "grid height"));
    } else if (kind == "square") {
      finite = maps::square_with_center();
    } else if (kind == "pendant") {
      finite = maps::pendant_square();
    } else if (kind == "binary_tree_faces" || kind == "nested_squares") {
      infinite = kind == "binary_tree_faces" ? maps::binary_tree_faces() : maps::nested_squares();
      e = tutte_embed(*infinite, a.window_level, c.level_options());
    } else {
      throw ConstructionError("unknown builtin map '" + a.builtin + "' (wheel:m, grid:WxH, square, pendant, binary_tree_faces, nested_squares)");
    }
  }
  if (finite) {
    e = tutte_embed(*finite);
    if (!a.save_map.empty()) {
      std::ofstream f(a.save_map, std::ios::binary);
      if (!f) throw IoError("cannot open " + a.save_map + " for writing");
      f << to_json(*finite).dump(2) << "\n";
    }
  } else if (!a.save_map.empty()) {
    throw ConstructionError("--save-map needs a finite map");
  }
  Json j = embedding_json(e);
  if (!a.end_levels.empty()) {
    if (!infinite) throw ConstructionError("end images need an infinite builtin map");
    const VertexKey v = parse_key(GraphSource{"", infinite->graph, infinite->exhaustion, std::nullopt}, a.end_vertex);
    Json ends = Json::array();
    for (int n : a.end_levels) {
      const EndImage img = end_image(*infinite, e, end_prefix(*infinite, v, n, e.window_level), n);
      ends.push_back({{"level", n}, {"faces", img.polygons.size()}, {"diameter", img.diameter}});
    }
    j["end_images"] = ends;
  }
  if (!a.svg.empty()) {
    SvgOptions o;
    o.fill_faces = a.fill;
    o.edge_width = a.edge_width;
    o.vertex_radius = a.vertex_radius;
    export_svg(e, a.svg, o);
  }
  Output out(c.out);
  out.stream() << j.dump(2) << "\n";
  return 0;
}

// ---- verify ----------------------------------------------------------------------------------

int run_verify(const Common& c, const std::vector<std::string>& names, std::uint64_t seed, double scale) {
  std::vector<const verify::Suite*> chosen;
  if (names.empty() || (names.size() == 1 && names[0] == "all")) {
    for (const auto& s : verify::suites()) chosen.push_back(&s);
  } else {
    for (const auto& n : names) {
      const verify::Suite* s = verify::find_suite(n);
      if (!s) throw ConstructionError("unknown suite '" + n + "'");
      chosen.push_back(s);
    }
  }
  if (!(scale > 0.0)) throw ConstructionError("--scale must be positive");
  verify::Settings settings{seed, c.threads, scale};
  Json report;
  report["seed"] = seed;
  report["replica_scale"] = scale;
  report["suites"] = Json::array();
  bool all = true;
  for (const verify::Suite* s : chosen) {
    const verify::SuiteReport r = s->run(settings);
    all = all && r.passed();
    report["suites"].push_back(r.to_json());
    std::cerr << (r.passed() ? "PASS " : "FAIL ") << r.summary() << "\n";
  }
  report["passed"] = all;
  Output out(c.out);
  out.stream() << report.dump(2) << "\n";
  return all ? 0 : kVerification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"refwalk: random walk reflected off infinity, spanning forests, Green functions and Tutte embeddings"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML configuration file; command-line flags take precedence");
  Common c;
  app.add_option("--threads", c.threads, "worker threads for replicas")->capture_default_str()->check(CLI::PositiveNumber);

  auto graph_flag = [&](CLI::App* cmd) { return cmd->add_option("--graph", c.graph, "graph spec or .json file")->required(); };
  auto out_flag = [&](CLI::App* cmd) { cmd->add_option("--out", c.out, "output file (default stdout)"); };

  // zoo
  int zoo_level = 2;
  auto* zoo = app.add_subcommand("zoo", "describe the level-n truncation of a graph");
  graph_flag(zoo);
  out_flag(zoo);
  zoo->add_option("--level", zoo_level)->capture_default_str();

  // harmonic
  std::vector<std::string> hm_A;
  std::string hm_x;
  std::vector<double> phi;
  int extend_level = 2;
  auto* harmonic = app.add_subcommand("harmonic", "energy-minimizing harmonic functions");
  harmonic->require_subcommand(1);
  auto* hm_cmd = harmonic->add_subcommand("hm", "harmonic measure hm_A^x");
  graph_flag(hm_cmd);
  out_flag(hm_cmd);
  add_level_flags(hm_cmd, c);
  hm_cmd->add_option("--A", hm_A, "target vertices")->required();
  hm_cmd->add_option("--x", hm_x, "source vertex")->required();
  auto* extend_cmd = harmonic->add_subcommand("extend", "minimal-energy extension of boundary data");
  graph_flag(extend_cmd);
  out_flag(extend_cmd);
  add_level_flags(extend_cmd, c);
  extend_cmd->add_option("--A", hm_A, "boundary vertices")->required();
  extend_cmd->add_option("--phi", phi, "boundary values, one per vertex of --A")->required();
  extend_cmd->add_option("--window-level", extend_level, "report values on V_k (infinite graphs)")->capture_default_str();

  // walk
  WalkArgs w;
  int cons_m = 1, cons_n = 3;
  std::vector<int> excursion_levels;
  auto* walk = app.add_subcommand("walk", "level-n chain of the reflected walk");
  walk->require_subcommand(1);
  auto* simulate_cmd = walk->add_subcommand("simulate", "simulate trajectories (JSON lines)");
  graph_flag(simulate_cmd);
  out_flag(simulate_cmd);
  simulate_cmd->add_option("--level", w.level)->capture_default_str();
  simulate_cmd->add_option("--resolution", w.resolution, "solve shell rows once on G_N");
  simulate_cmd->add_option("--start", w.start, "start vertex (default root)");
  simulate_cmd->add_option("--seed", w.seed)->required();
  simulate_cmd->add_option("--stream", w.stream, "first replica stream")->capture_default_str();
  simulate_cmd->add_option("--replicas", w.replicas)->capture_default_str()->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--steps", w.steps, "stop after this many transitions");
  simulate_cmd->add_option("--hit", w.hit, "stop on hitting these vertices");
  simulate_cmd->add_option("--cover-level", w.cover_level, "stop once V_k is covered");
  simulate_cmd->add_option("--rate-base", w.rate_base)->capture_default_str();
  simulate_cmd->add_option("--rate-growth", w.rate_growth)->capture_default_str();
  simulate_cmd->add_option("--budget", w.budget, "step budget")->capture_default_str();
  simulate_cmd->add_option("--tol", c.tol, "Cauchy tolerance for shell rows")->capture_default_str();
  auto* consistency_cmd = walk->add_subcommand("consistency", "exact check that p_n watched on level m is p_m");
  graph_flag(consistency_cmd);
  out_flag(consistency_cmd);
  consistency_cmd->add_option("--m", cons_m)->capture_default_str();
  consistency_cmd->add_option("--n", cons_n)->capture_default_str();
  consistency_cmd->add_option("--resolution", w.resolution);
  auto* excursion_cmd = walk->add_subcommand("excursion", "expected excursion times across levels");
  graph_flag(excursion_cmd);
  out_flag(excursion_cmd);
  excursion_cmd->add_option("--levels", excursion_levels)->required();
  excursion_cmd->add_option("--start", w.start);
  excursion_cmd->add_option("--resolution", w.resolution);
  excursion_cmd->add_option("--rate-base", w.rate_base)->capture_default_str();
  excursion_cmd->add_option("--rate-growth", w.rate_growth)->capture_default_str();

  // forest
  ForestArgs f;
  auto* forest = app.add_subcommand("forest", "spanning trees and free spanning forests");
  forest->require_subcommand(1);
  auto* exact_cmd = forest->add_subcommand("exact", "enumerate the weighted spanning trees of a small graph");
  graph_flag(exact_cmd);
  out_flag(exact_cmd);
  auto* ab_cmd = forest->add_subcommand("ab", "Aldous-Broder window samples (JSON lines)");
  auto* wilson_cmd = forest->add_subcommand("wilson", "Wilson samples (JSON lines)");
  for (auto* cmd : {ab_cmd, wilson_cmd}) {
    graph_flag(cmd);
    out_flag(cmd);
    cmd->add_option("--level", f.level)->capture_default_str();
    cmd->add_option("--resolution", f.resolution);
    cmd->add_option("--window", f.window, "window level k; edges inside G_k are reported")->capture_default_str();
    cmd->add_option("--seed", f.seed)->required();
    cmd->add_option("--replicas", f.replicas)->capture_default_str()->check(CLI::PositiveNumber);
  }
  std::uint64_t verify_seed = 0;
  double scale = 1.0;
  auto* forest_verify_cmd = forest->add_subcommand("verify", "chi-square suites for the forest samplers");
  out_flag(forest_verify_cmd);
  forest_verify_cmd->add_option("--seed", verify_seed)->required();
  forest_verify_cmd->add_option("--scale", scale, "replica count multiplier")->capture_default_str();
  ab_cmd->add_option("--cover", f.cover, "cover level K (default window + 1)");
  ab_cmd->add_option("--start", f.start);

  // green / gff
  std::vector<std::string> green_A;
  int window_level = 2;
  std::string green_format = "json";
  std::uint64_t gff_seed = 0, gff_replicas = 1000;
  std::string kirk_x, kirk_y;
  auto* green_cmd = app.add_subcommand("green", "Green function of the walk killed on A");
  green_cmd->require_subcommand(1);
  auto* compute_cmd = green_cmd->add_subcommand("compute", "G_A on a window with identity checks");
  graph_flag(compute_cmd);
  out_flag(compute_cmd);
  add_level_flags(compute_cmd, c);
  compute_cmd->add_option("--A", green_A)->required();
  compute_cmd->add_option("--window-level", window_level)->capture_default_str();
  compute_cmd->add_option("--format", green_format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  auto* kirkhoff_cmd = green_cmd->add_subcommand("kirkhoff", "probability that the edge {x,y} is in the free spanning forest");
  graph_flag(kirkhoff_cmd);
  out_flag(kirkhoff_cmd);
  add_level_flags(kirkhoff_cmd, c);
  kirkhoff_cmd->add_option("--x", kirk_x)->required();
  kirkhoff_cmd->add_option("--y", kirk_y)->required();
  auto* gff_cmd = app.add_subcommand("gff", "Gaussian free field, zero on A and free at infinity");
  gff_cmd->require_subcommand(1);
  auto* sample_cmd = gff_cmd->add_subcommand("sample", "samples on a window, one replica per CSV row");
  graph_flag(sample_cmd);
  out_flag(sample_cmd);
  add_level_flags(sample_cmd, c);
  sample_cmd->add_option("--A", green_A)->required();
  sample_cmd->add_option("--window-level", window_level)->capture_default_str();
  sample_cmd->add_option("--seed", gff_seed)->required();
  sample_cmd->add_option("--replicas", gff_replicas)->capture_default_str()->check(CLI::PositiveNumber);

  // embed
  EmbedArgs e;
  auto* embed = app.add_subcommand("embed", "Tutte embedding of a planar map");
  out_flag(embed);
  add_level_flags(embed, c);
  embed->add_option("--map", e.map, "planar map JSON file");
  embed->add_option("--builtin", e.builtin, "wheel:m, grid:WxH, square, pendant, binary_tree_faces, nested_squares");
  embed->add_option("--window-level", e.window_level, "window for infinite maps")->capture_default_str();
  embed->add_option("--svg", e.svg, "write an SVG drawing");
  embed->add_option("--save-map", e.save_map, "write the finite map as planar-map JSON");
  embed->add_flag("--fill", e.fill, "fill faces in the SVG");
  embed->add_option("--edge-width", e.edge_width)->capture_default_str();
  embed->add_option("--vertex-radius", e.vertex_radius)->capture_default_str();
  embed->add_option("--end-vertex", e.end_vertex, "vertex selecting an end for end images");
  embed->add_option("--end-levels", e.end_levels, "levels n at which to report end images")->needs("--end-vertex");

  // verify
  std::vector<std::string> suites;
  auto* verify_cmd = app.add_subcommand("verify", "run acceptance suites and write a JSON report");
  out_flag(verify_cmd);
  verify_cmd->add_option("--suite", suites, "suite names or criterion numbers (default all)");
  verify_cmd->add_option("--seed", verify_seed)->required();
  verify_cmd->add_option("--scale", scale, "replica count multiplier")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*zoo) return run_zoo(c, zoo_level);
    if (*hm_cmd) return run_harmonic(c, hm_A, hm_x);
    if (*extend_cmd) return run_extend(c, hm_A, phi, extend_level);
    if (*simulate_cmd) return run_walk_simulate(c, w);
    if (*consistency_cmd) return run_walk_consistency(c, cons_m, cons_n, w.resolution);
    if (*excursion_cmd) return run_walk_excursion(c, excursion_levels, w);
    if (*exact_cmd) return run_forest_exact(c);
    if (*ab_cmd) return run_forest_sample(c, f, false);
    if (*wilson_cmd) return run_forest_sample(c, f, true);
    if (*compute_cmd) return run_green(c, green_A, window_level, green_format);
    if (*kirkhoff_cmd) return run_kirkhoff(c, kirk_x, kirk_y);
    if (*sample_cmd) return run_gff(c, green_A, window_level, gff_seed, gff_replicas);
    if (*forest_verify_cmd) return run_verify(c, {"finite-ust", "level-stability"}, verify_seed, scale);
    if (*embed) return run_embed(c, e);
    if (*verify_cmd) return run_verify(c, suites, verify_seed, scale);
  } catch (const ConstructionError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kUsage;
  } catch (const IoError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kUsage;
  } catch (const std::exception& ex) {
    std::cerr << "numerical failure: " << ex.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}
