#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace dagsched {

/// Data dependency: task `src` produces `data` units consumed by task `dst`.
struct TaskEdge {
  int src = 0;
  int dst = 0;
  double data = 0.0;
};

/// Immutable DAG of tasks. Task ids are dense integers 0..n-1; `compute[i]`
/// is the computation amount of task i. Edges are kept sorted by (src, dst).
/// `external_ids` remembers the original labels when a JSON file used
/// non-dense or string ids.
struct TaskGraph {
  std::vector<double> compute;
  std::vector<TaskEdge> edges;
  std::vector<std::string> external_ids;

  int num_tasks() const { return static_cast<int>(compute.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
};

/// Per-node edge-index lists, built once and reused by evaluators/schedulers.
struct Adjacency {
  std::vector<std::vector<int>> in_edges;   // edge indices ending at node
  std::vector<std::vector<int>> out_edges;  // edge indices starting at node
};

Adjacency build_adjacency(const TaskGraph& g);

enum class GenMethod { EdgeProbability, WidthDepth };

/// Parameters for the two random-DAG generators.
struct GenSpec {
  GenMethod method = GenMethod::EdgeProbability;
  int n_tasks = 0;        // EdgeProbability
  double edge_prob = 0.0; // EdgeProbability
  int width = 0;          // WidthDepth
  int depth = 0;          // WidthDepth
  double compute_lo = 10.0;
  double compute_hi = 100.0;
  double data_value = 20.0;
  std::uint64_t seed = 0;
};

/// Random DAG: each pair {u,v} gets an edge with probability `edge_prob`,
/// kept directed u->v with u<v so the result is always acyclic.
TaskGraph generate_ep(const GenSpec& spec);

/// Layered DAG of width x depth tasks; every task in a non-final layer gets
/// between 1 and `width` distinct successors in the next layer.
TaskGraph generate_layered(const GenSpec& spec);

/// Topological order with ties broken by ascending task id.
/// Throws CycleError if the graph has a cycle.
std::vector<int> topological_order(const TaskGraph& g);

/// Relabels the inputs into one graph with no cross edges. Returns the graph
/// and the start offset of each component; component of task t is the last
/// offset <= t.
std::pair<TaskGraph, std::vector<int>> disjoint_union(
    const std::vector<TaskGraph>& graphs);

/// Copy of the id range [lo, hi) as a standalone graph (edges fully inside
/// the range only). Inverse of disjoint_union for one component.
TaskGraph subgraph_range(const TaskGraph& g, int lo, int hi);

struct ValidationReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
};

/// Checks every TaskGraph invariant and reports each violation.
ValidationReport validate(const TaskGraph& g);

nlohmann::json to_json(const TaskGraph& g);
TaskGraph taskgraph_from_json(const nlohmann::json& j);

}  // namespace dagsched
