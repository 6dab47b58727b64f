#include "smf/apps/config.hpp"

#include <algorithm>
#include <fstream>
#include <memory>

namespace smf::apps {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

const json& section(const json& doc, const char* name) {
  static const json empty = json::object();
  if (!doc.contains(name)) return empty;
  const json& s = doc.at(name);
  if (!s.is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
  return s;
}

GraphConfig parse_graph(const json& g) {
  GraphConfig out;
  if (g.is_null()) return out;
  if (g.is_string()) {
    out.type = g.get<std::string>();
  } else if (g.is_object()) {
    out.type = get_or<std::string>(g, "type", "none");
    out.height = get_or<Index>(g, "height", 0);
    out.width = get_or<Index>(g, "width", 0);
    out.nodes = get_or<Index>(g, "nodes", 0);
    if (g.contains("edges")) {
      for (const auto& e : g.at("edges")) {
        if (!e.is_array() || e.size() != 2) throw ConfigError("graph edges must be [a, b] pairs");
        out.edges.push_back(Edge{e[0].get<Index>(), e[1].get<Index>()});
      }
    }
  } else {
    throw ConfigError("graph must be a string or an object");
  }
  static const std::vector<std::string> known{"none", "chain", "lattice4", "lattice8", "edges"};
  if (std::find(known.begin(), known.end(), out.type) == known.end()) {
    throw ConfigError("unknown graph type '" + out.type + "'");
  }
  return out;
}

GaugeConfig parse_gauge(const json& g) {
  if (!g.is_object()) throw ConfigError("gauge must be an object");
  GaugeConfig out;
  out.nu1 = get_or<double>(g, "nu1", 0.0);
  out.nu_tv = get_or<double>(g, "nu_tv", 0.0);
  out.nu2 = get_or<double>(g, "nu2", 0.0);
  out.nonneg = get_or<bool>(g, "nonneg", false);
  if (g.contains("graph")) out.graph = parse_graph(g.at("graph"));
  return out;
}

OperatorConfig parse_operator(const json& o) {
  OperatorConfig out;
  if (o.is_null()) return out;
  if (o.is_string()) {
    out.type = o.get<std::string>();
  } else if (o.is_object()) {
    out.type = get_or<std::string>(o, "type", "identity");
    out.tau = get_or<double>(o, "tau", out.tau);
    out.dt = get_or<double>(o, "dt", out.dt);
    out.height = get_or<Index>(o, "height", 0);
    out.width = get_or<Index>(o, "width", 0);
    out.sample_ratio = get_or<Index>(o, "sample_ratio", 1);
    out.seed = get_or<std::uint64_t>(o, "seed", 0);
  } else {
    throw ConfigError("operator must be a string or an object");
  }
  if (out.type != "identity" && out.type != "temporal_conv" && out.type != "random_phase_conv") {
    throw ConfigError("unknown operator type '" + out.type + "'");
  }
  return out;
}

InitStrategy parse_init(const json& i) {
  std::string type = "zeros";
  Index count = -1;
  if (i.is_string()) {
    type = i.get<std::string>();
  } else if (i.is_object()) {
    type = get_or<std::string>(i, "type", "zeros");
    count = get_or<Index>(i, "count", -1);
  } else {
    throw ConfigError("solver.init must be a string or an object");
  }
  if (type == "zeros") return init::Zeros{count < 0 ? 1 : count};
  if (type == "identity") return init::IdentityColumns{count < 0 ? 0 : count};
  if (type == "uniform") return init::UniformRandom{count < 0 ? 1 : count};
  throw ConfigError("unknown init type '" + type + "'");
}

}  // namespace

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  try {
    const json& problem = section(doc, "problem");
    if (!problem.contains("data")) throw ConfigError("problem.data is required");
    cfg.data = get_or<std::string>(problem, "data", "");
    if (cfg.data.is_relative() && !base_dir.empty()) cfg.data = base_dir / cfg.data;
    if (problem.contains("operator")) cfg.op = parse_operator(problem.at("operator"));
    cfg.background = get_or<bool>(problem, "background", false);
    if (!problem.contains("lambda")) throw ConfigError("problem.lambda is required");
    cfg.lambda = get_or<double>(problem, "lambda", 0.0);
    if (!(cfg.lambda > 0.0)) throw ConfigError("problem.lambda must be > 0");

    const json& reg = section(doc, "regularizer");
    const std::string form = get_or<std::string>(reg, "form", "product");
    if (form == "product") {
      cfg.form = RegularizerForm::Product;
    } else if (form == "sum") {
      cfg.form = RegularizerForm::Sum;
    } else {
      throw ConfigError("regularizer.form must be 'product' or 'sum'");
    }
    cfg.u_gauge = reg.contains("u_gauge") ? parse_gauge(reg.at("u_gauge")) : GaugeConfig{};
    cfg.v_gauge = reg.contains("v_gauge") ? parse_gauge(reg.at("v_gauge")) : GaugeConfig{};

    const json& solver = section(doc, "solver");
    if (solver.contains("init")) cfg.solver.init = parse_init(solver.at("init"));
    cfg.solver.max_iter = get_or<int>(solver, "max_iter", cfg.solver.max_iter);
    cfg.solver.tol_rel_obj = get_or<double>(solver, "tol_rel_obj", cfg.solver.tol_rel_obj);
    cfg.solver.seed = get_or<std::uint64_t>(solver, "seed", cfg.solver.seed);
    cfg.solver.prox_cfg.max_sweeps = get_or<int>(solver, "prox_max_sweeps", cfg.solver.prox_cfg.max_sweeps);
    cfg.solver.prox_cfg.gap_tol = get_or<double>(solver, "prox_gap_tol", cfg.solver.prox_cfg.gap_tol);
    const std::string extrap = get_or<std::string>(solver, "extrapolation", "damped");
    if (extrap == "damped") {
      cfg.solver.extrapolation = Extrapolation::Damped;
    } else if (extrap == "classical") {
      cfg.solver.extrapolation = Extrapolation::Classical;
    } else {
      throw ConfigError("solver.extrapolation must be 'damped' or 'classical'");
    }
    if (cfg.solver.max_iter < 0) throw ConfigError("solver.max_iter must be >= 0");

    const json& meta = section(doc, "meta");
    cfg.meta.enabled = get_or<bool>(meta, "enabled", false);
    cfg.meta.max_rounds = get_or<int>(meta, "max_rounds", cfg.meta.max_rounds);
    cfg.meta.polar_restarts = get_or<int>(meta, "polar_restarts", cfg.meta.polar_restarts);
    if (cfg.meta.max_rounds < 1 || cfg.meta.polar_restarts < 1) {
      throw ConfigError("meta.max_rounds and meta.polar_restarts must be >= 1");
    }

    const json& output = section(doc, "output");
    cfg.output = get_or<std::string>(output, "directory", "out");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config: " + path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(doc, path.parent_path());
}

LinearOperator build_operator(const OperatorConfig& op, Index frames) {
  if (op.type == "identity") return LinearOperator(op::Identity{});
  if (op.type == "temporal_conv") return LinearOperator(op::TemporalConv{op.tau, op.dt, frames});
  if (op.type == "random_phase_conv") {
    return LinearOperator(op::RandomPhaseConv{op.height, op.width, op.sample_ratio, op.seed});
  }
  throw ConfigError("unknown operator type '" + op.type + "'");
}

GaugeSpec build_gauge(const GaugeConfig& g, Index dim) {
  std::shared_ptr<const NeighborGraph> graph;
  const GraphConfig& gc = g.graph;
  if (gc.type == "chain") {
    graph = std::make_shared<const NeighborGraph>(NeighborGraph::chain(dim));
  } else if (gc.type == "lattice4" || gc.type == "lattice8") {
    if (gc.height * gc.width != dim) throw ConfigError("lattice graph size does not match factor length");
    graph = std::make_shared<const NeighborGraph>(NeighborGraph::lattice(
        gc.height, gc.width, gc.type == "lattice4" ? Connectivity::Four : Connectivity::Eight));
  } else if (gc.type == "edges") {
    graph = std::make_shared<const NeighborGraph>(gc.nodes > 0 ? gc.nodes : dim, gc.edges);
  }
  try {
    return GaugeSpec(g.nu1, g.nu_tv, g.nu2, g.nonneg, graph);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("gauge: ") + e.what());
  }
}

ProblemSpec build_problem(const RunConfig& cfg, Matrix Y) {
  const Index frames = Y.rows();
  LinearOperator A = build_operator(cfg.op, frames);
  std::optional<LinearOperator> B;
  if (cfg.background) B = LinearOperator(op::OuterOnes{frames});
  const Index x_cols = cfg.op.type == "random_phase_conv" ? cfg.op.height * cfg.op.width : Y.cols();
  Rank1Regularizer reg(cfg.form, build_gauge(cfg.u_gauge, frames), build_gauge(cfg.v_gauge, x_cols));
  try {
    return ProblemSpec(std::move(Y), std::move(A), std::move(B), std::move(reg), cfg.lambda);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
}

namespace presets {

RegPreset sparse() { return {"sparse", 2.0, {1, 0, 0}, {1, 0, 0}}; }
RegPreset sparse_low_rank() { return {"sparse-low-rank", 1.75, {1, 0, 1}, {1, 0, 1}}; }
RegPreset slrtv() { return {"slrtv", 0.5, {1, 0, 2.5}, {1, 0.5, 1}}; }
RegPreset phantom_slr() { return {"phantom-slr", 1.5, {1, 0, 1}, {1, 0, 1}, true}; }
RegPreset phantom_slrtv() { return {"phantom-slrtv", 0.4, {1, 0, 1}, {1, 1, 1}, true}; }
RegPreset phantom_slrtv_desk() { return {"phantom-slrtv-desk", 1.0, {1, 0, 1}, {1, 1, 1}, true}; }

std::optional<RegPreset> by_name(const std::string& name) {
  for (auto make : {sparse, sparse_low_rank, slrtv, phantom_slr, phantom_slrtv, phantom_slrtv_desk}) {
    RegPreset p = make();
    if (p.name == name) return p;
  }
  return std::nullopt;
}

}  // namespace presets

}  // namespace smf::apps
