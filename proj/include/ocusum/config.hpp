#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ocusum/errors.hpp"
#include "ocusum/montecarlo.hpp"
#include "ocusum/scenario.hpp"

namespace ocusum {

using Json = nlohmann::ordered_json;

/// Fully parsed config file. The graph section is always required;
/// model/detection become mandatory only for commands that simulate.
struct ConfigFile {
  ExperimentConfig experiment;
  bool has_model = false;
  bool has_detection = false;

  std::optional<SweepVariable> sweep_variable;
  std::vector<double> sweep_values;

  std::string output_dir = "out";
  bool per_slot = false;
};

namespace detail {

inline void require_keys(const Json& obj, const std::string& section,
                         std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ParseError("section '" + section + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw ParseError("unknown key '" + it.key() + "' in section '" + section + "'");
  }
}

inline double as_number(const Json& j, const std::string& name) {
  if (!j.is_number()) throw ParseError("'" + name + "' must be a number");
  return j.get<double>();
}

inline std::int64_t as_integer(const Json& j, const std::string& name) {
  if (!j.is_number_integer()) throw ParseError("'" + name + "' must be an integer");
  return j.get<std::int64_t>();
}

inline GraphSpec parse_single_graph(const Json& j, const std::string& section) {
  require_keys(j, section, {"kind", "K", "M", "edges"});
  if (!j.contains("kind")) throw ParseError("'" + section + ".kind' is required");
  const std::string kind = j.at("kind").get<std::string>();
  GraphSpec spec;
  if (kind == "chain" || kind == "tree") {
    spec.kind = kind == "chain" ? GraphSpec::Kind::chain : GraphSpec::Kind::tree;
    if (!j.contains("K")) throw ParseError("'" + section + ".K' is required for " + kind);
    spec.clique_count = static_cast<int>(as_integer(j.at("K"), section + ".K"));
    if (j.contains("M") || j.contains("edges")) {
      throw ParseError("'" + section + "': M/edges only apply to explicit graphs");
    }
  } else if (kind == "explicit") {
    spec.kind = GraphSpec::Kind::explicit_edges;
    if (!j.contains("M") || !j.contains("edges")) {
      throw ParseError("'" + section + "': explicit graphs need M and edges");
    }
    spec.vertex_count = static_cast<int>(as_integer(j.at("M"), section + ".M"));
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) {
        throw ParseError("'" + section + ".edges' entries must be [i, j] pairs");
      }
      spec.edges.emplace_back(static_cast<int>(as_integer(e[0], "edge endpoint")),
                              static_cast<int>(as_integer(e[1], "edge endpoint")));
    }
  } else {
    throw ParseError("'" + section + ".kind' must be chain, tree or explicit");
  }
  return spec;
}

inline Eigen::VectorXd parse_vector(const Json& j, const std::string& name) {
  if (!j.is_array()) throw ParseError("'" + name + "' must be an array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = as_number(j[i], name);
  return v;
}

inline Eigen::MatrixXd parse_matrix(const Json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) throw ParseError("'" + name + "' must be a nested array");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw ParseError("'" + name + "' rows must all have equal length");
    }
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = as_number(j[r][c], name);
  }
  return m;
}

inline Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

inline Json graph_to_json(const GraphSpec& spec) {
  Json out;
  switch (spec.kind) {
    case GraphSpec::Kind::chain:
      out["kind"] = "chain";
      out["K"] = spec.clique_count;
      break;
    case GraphSpec::Kind::tree:
      out["kind"] = "tree";
      out["K"] = spec.clique_count;
      break;
    case GraphSpec::Kind::explicit_edges: {
      out["kind"] = "explicit";
      out["M"] = spec.vertex_count;
      Json edges = Json::array();
      for (auto [i, j] : spec.edges) edges.push_back(Json::array({i, j}));
      out["edges"] = edges;
      break;
    }
  }
  return out;
}

}  // namespace detail

inline ConfigFile parse_config(const Json& root) {
  detail::require_keys(root, "(top level)", {"graph", "model", "detection", "sweep", "output"});
  ConfigFile config;

  if (!root.contains("graph")) throw ParseError("'graph' section is required");
  const Json& graph = root.at("graph");
  if (graph.is_object() && graph.contains("kind") && graph.at("kind") == "pair") {
    detail::require_keys(graph, "graph", {"kind", "pre", "post"});
    if (!graph.contains("pre") || !graph.contains("post")) {
      throw ParseError("'graph': pair needs pre and post subgraphs");
    }
    config.experiment.scenario.graph = detail::parse_single_graph(graph.at("pre"), "graph.pre");
    config.experiment.scenario.post_graph =
        detail::parse_single_graph(graph.at("post"), "graph.post");
  } else {
    config.experiment.scenario.graph = detail::parse_single_graph(graph, "graph");
  }

  if (root.contains("model")) {
    config.has_model = true;
    const Json& model = root.at("model");
    detail::require_keys(model, "model",
                         {"kind", "c", "x", "mu0", "sigma0", "mu1", "sigma1"});
    if (!model.contains("kind")) throw ParseError("'model.kind' is required");
    const std::string kind = model.at("kind").get<std::string>();
    auto& spec = config.experiment.scenario;
    if (kind == "mean_shift") {
      spec.model = ScenarioSpec::ModelKind::mean_shift;
      if (!model.contains("c")) throw ParseError("'model.c' is required for mean_shift");
      spec.c = detail::as_number(model.at("c"), "model.c");
    } else if (kind == "cov_change") {
      spec.model = ScenarioSpec::ModelKind::cov_change;
      if (!model.contains("x")) throw ParseError("'model.x' is required for cov_change");
      spec.x = detail::as_number(model.at("x"), "model.x");
    } else if (kind == "explicit") {
      spec.model = ScenarioSpec::ModelKind::explicit_params;
      for (const char* key : {"mu0", "sigma0", "mu1", "sigma1"}) {
        if (!model.contains(key)) {
          throw ParseError(std::string("'model.") + key + "' is required for explicit");
        }
      }
      spec.mu0 = detail::parse_vector(model.at("mu0"), "model.mu0");
      spec.mu1 = detail::parse_vector(model.at("mu1"), "model.mu1");
      spec.sigma0 = detail::parse_matrix(model.at("sigma0"), "model.sigma0");
      spec.sigma1 = detail::parse_matrix(model.at("sigma1"), "model.sigma1");
    } else {
      throw ParseError("'model.kind' must be mean_shift, cov_change or explicit");
    }
  }

  if (root.contains("detection")) {
    config.has_detection = true;
    const Json& det = root.at("detection");
    detail::require_keys(det, "detection",
                         {"gamma", "b", "tau", "horizon", "runs", "xi", "eta", "master_seed"});
    auto& exp = config.experiment;
    if (det.contains("gamma")) exp.gamma = detail::as_number(det.at("gamma"), "detection.gamma");
    if (det.contains("b")) {
      const Json& b = det.at("b");
      if (b.is_string() && b == "calibrate") {
        exp.b.reset();
      } else {
        exp.b = detail::as_number(b, "detection.b");
      }
    }
    if (det.contains("tau")) {
      const Json& tau = det.at("tau");
      if (tau.is_string() && tau == "inf") {
        exp.tau = kNoChange;
      } else {
        exp.tau = detail::as_integer(tau, "detection.tau");
      }
    }
    if (det.contains("horizon")) {
      exp.horizon = detail::as_integer(det.at("horizon"), "detection.horizon");
    }
    if (det.contains("runs")) {
      exp.runs = static_cast<int>(detail::as_integer(det.at("runs"), "detection.runs"));
    }
    if (det.contains("xi")) {
      const Json& xi = det.at("xi");
      if (xi.is_string() && xi == "auto") {
        exp.xi.reset();
      } else {
        exp.xi = detail::as_number(xi, "detection.xi");
      }
    }
    if (det.contains("eta")) exp.eta = detail::as_number(det.at("eta"), "detection.eta");
    if (det.contains("master_seed")) {
      exp.master_seed =
          static_cast<std::uint64_t>(detail::as_integer(det.at("master_seed"), "master_seed"));
    }
  }

  if (root.contains("sweep")) {
    const Json& sweep = root.at("sweep");
    detail::require_keys(sweep, "sweep", {"variable", "values"});
    if (!sweep.contains("variable") || !sweep.contains("values")) {
      throw ParseError("'sweep' needs variable and values");
    }
    const std::string var = sweep.at("variable").get<std::string>();
    if (var == "c") {
      config.sweep_variable = SweepVariable::c;
    } else if (var == "x") {
      config.sweep_variable = SweepVariable::x;
    } else if (var == "K") {
      config.sweep_variable = SweepVariable::K;
    } else {
      throw ParseError("'sweep.variable' must be c, x or K");
    }
    for (const auto& v : sweep.at("values")) {
      config.sweep_values.push_back(detail::as_number(v, "sweep.values"));
    }
    if (config.sweep_values.empty()) throw ParseError("'sweep.values' must be nonempty");
  }

  if (root.contains("output")) {
    const Json& output = root.at("output");
    detail::require_keys(output, "output", {"dir", "per_slot"});
    if (output.contains("dir")) config.output_dir = output.at("dir").get<std::string>();
    if (output.contains("per_slot")) {
      if (!output.at("per_slot").is_boolean()) throw ParseError("'output.per_slot' must be a bool");
      config.per_slot = output.at("per_slot").get<bool>();
    }
  }
  return config;
}

inline ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  Json root;
  try {
    root = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid JSON in " + path + ": " + e.what());
  }
  return parse_config(root);
}

/// Serializes the fully resolved configuration (seed/run overrides
/// applied, all defaults spelled out). Re-running a command on this block
/// reproduces the original outputs byte for byte.
inline Json effective_config(const ConfigFile& config) {
  Json root;
  const auto& spec = config.experiment.scenario;
  if (spec.post_graph) {
    Json graph;
    graph["kind"] = "pair";
    graph["pre"] = detail::graph_to_json(spec.graph);
    graph["post"] = detail::graph_to_json(*spec.post_graph);
    root["graph"] = graph;
  } else {
    root["graph"] = detail::graph_to_json(spec.graph);
  }
  if (config.has_model) {
    Json model;
    switch (spec.model) {
      case ScenarioSpec::ModelKind::mean_shift:
        model["kind"] = "mean_shift";
        model["c"] = spec.c;
        break;
      case ScenarioSpec::ModelKind::cov_change:
        model["kind"] = "cov_change";
        model["x"] = spec.x;
        break;
      case ScenarioSpec::ModelKind::explicit_params:
        model["kind"] = "explicit";
        model["mu0"] = detail::vector_to_json(spec.mu0);
        model["sigma0"] = detail::matrix_to_json(spec.sigma0);
        model["mu1"] = detail::vector_to_json(spec.mu1);
        model["sigma1"] = detail::matrix_to_json(spec.sigma1);
        break;
    }
    root["model"] = model;
  }
  if (config.has_detection) {
    const auto& exp = config.experiment;
    Json det;
    det["gamma"] = exp.gamma;
    if (exp.b) {
      det["b"] = *exp.b;
    } else {
      det["b"] = "calibrate";
    }
    if (exp.tau == kNoChange) {
      det["tau"] = "inf";
    } else {
      det["tau"] = exp.tau;
    }
    det["horizon"] = exp.horizon;
    det["runs"] = exp.runs;
    if (exp.xi) {
      det["xi"] = *exp.xi;
    } else {
      det["xi"] = "auto";
    }
    det["eta"] = exp.eta;
    det["master_seed"] = exp.master_seed;
    root["detection"] = det;
  }
  if (config.sweep_variable) {
    Json sweep;
    sweep["variable"] = *config.sweep_variable == SweepVariable::c   ? "c"
                        : *config.sweep_variable == SweepVariable::x ? "x"
                                                                     : "K";
    sweep["values"] = config.sweep_values;
    root["sweep"] = sweep;
  }
  Json output;
  output["dir"] = config.output_dir;
  output["per_slot"] = config.per_slot;
  root["output"] = output;
  return root;
}

}  // namespace ocusum
