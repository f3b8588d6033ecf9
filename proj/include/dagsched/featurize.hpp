#pragma once

#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dagsched/evaluator.hpp"
#include "dagsched/network.hpp"
#include "dagsched/taskgraph.hpp"

namespace dagsched {

/// Model input built from a task graph and a network: the same vertices and
/// edges, node feature i = execution time of task i on every machine
/// (length n_machines), edge feature (u,v) = transfer time of d_{u,v} over
/// every ordered machine pair, row-major (length n_machines^2). Labels, when
/// present, are the teacher's machine index per task, and each edge carries
/// its source node's label.
struct LabeledInputGraph {
  TaskGraph graph;
  int n_machines = 0;
  std::vector<std::vector<double>> node_features;
  std::vector<std::vector<double>> edge_features;
  std::vector<int> node_labels;   // empty until labeled
  std::vector<int> edge_labels;   // empty until labeled
  std::vector<int> component_id;  // split bookkeeping, one entry per task

  bool labeled() const { return !node_labels.empty(); }
};

/// Feature value used where a transfer is impossible (zero bandwidth);
/// keeps training arithmetic finite.
constexpr double kZeroBandwidthFeature = 1e6;

LabeledInputGraph build_input_graph(
    const TaskGraph& g, const ComputeNetwork& net,
    double zero_bw_sentinel = kZeroBandwidthFeature);

/// Copies the teacher's mapping into node labels and stamps each edge with
/// its source node's label. Idempotent for a fixed schedule.
LabeledInputGraph label_with_teacher(LabeledInputGraph ig, const Schedule& s);

/// Opt-in per-dataset min-max normalization of node and edge features (in
/// place, shared stats across all records). Models trained on normalized
/// data expect identically normalized inputs at inference.
void minmax_normalize(std::vector<LabeledInputGraph>& dataset);

nlohmann::json to_json(const LabeledInputGraph& ig);
LabeledInputGraph input_graph_from_json(const nlohmann::json& j);

/// Dataset files hold an array of records; component ids follow record
/// order.
void save_dataset(const std::string& path,
                  const std::vector<LabeledInputGraph>& dataset);
std::vector<LabeledInputGraph> load_dataset(const std::string& path);

}  // namespace dagsched
