#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ocusum/errors.hpp"
#include "ocusum/graph.hpp"
#include "ocusum/model.hpp"

namespace ocusum {

/// Declarative graph description as it appears in config files.
struct GraphSpec {
  enum class Kind { chain, tree, explicit_edges };
  Kind kind = Kind::chain;
  int clique_count = 1;                      // chain/tree
  int vertex_count = 0;                      // explicit
  std::vector<std::pair<int, int>> edges;    // explicit
};

inline UndirectedGraph build_graph(const GraphSpec& spec) {
  switch (spec.kind) {
    case GraphSpec::Kind::chain:
      return chain_graph(spec.clique_count);
    case GraphSpec::Kind::tree:
      return tree_graph(spec.clique_count);
    case GraphSpec::Kind::explicit_edges:
      return UndirectedGraph(spec.vertex_count, spec.edges);
  }
  throw ValidationError("unknown graph kind");
}

/// Declarative scenario description: a graph (or a pre/post pair whose
/// union drives the detection process) plus the observation model.
struct ScenarioSpec {
  enum class ModelKind { mean_shift, cov_change, explicit_params };

  GraphSpec graph;                      // single graph, or the pre graph of a pair
  std::optional<GraphSpec> post_graph;  // set => structure-change pair
  ModelKind model = ModelKind::mean_shift;
  double c = 1.0;  // mean_shift
  double x = 1.0;  // cov_change
  Eigen::VectorXd mu0, mu1;             // explicit_params
  Eigen::MatrixXd sigma0, sigma1;       // explicit_params
};

inline GaussianScenario build_scenario(const ScenarioSpec& spec) {
  if (spec.post_graph) {
    UndirectedGraph pre = build_graph(spec.graph);
    UndirectedGraph post = build_graph(*spec.post_graph);
    switch (spec.model) {
      case ScenarioSpec::ModelKind::mean_shift:
        return build_mean_shift_scenario(pre, post, spec.c);
      case ScenarioSpec::ModelKind::explicit_params:
        return make_scenario(union_graph(pre, post), spec.mu0, spec.sigma0, spec.mu1,
                             spec.sigma1);
      case ScenarioSpec::ModelKind::cov_change:
        throw ValidationError("cov_change model requires a single graph");
    }
  }
  UndirectedGraph graph = build_graph(spec.graph);
  switch (spec.model) {
    case ScenarioSpec::ModelKind::mean_shift:
      return build_mean_shift_scenario(graph, spec.c);
    case ScenarioSpec::ModelKind::cov_change:
      return build_cov_change_scenario(graph, spec.x);
    case ScenarioSpec::ModelKind::explicit_params:
      return make_scenario(std::move(graph), spec.mu0, spec.sigma0, spec.mu1, spec.sigma1);
  }
  throw ValidationError("unknown model kind");
}

}  // namespace ocusum
