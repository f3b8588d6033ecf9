#include "dagsched/featurize.hpp"

#include <algorithm>
#include <string>

#include <nlohmann/json.hpp>

#include "dagsched/errors.hpp"
#include "dagsched/json_io.hpp"

namespace dagsched {

LabeledInputGraph build_input_graph(const TaskGraph& g,
                                    const ComputeNetwork& net,
                                    double zero_bw_sentinel) {
  const int n = g.num_tasks();
  const int m = net.num_machines();

  LabeledInputGraph ig;
  ig.graph = g;
  ig.n_machines = m;
  ig.component_id.assign(n, 0);

  ig.node_features.resize(n);
  for (int t = 0; t < n; ++t) {
    ig.node_features[t].resize(m);
    for (int j = 0; j < m; ++j) {
      ig.node_features[t][j] = g.compute[t] / net.speeds[j];
    }
  }

  ig.edge_features.resize(g.num_edges());
  for (int k = 0; k < g.num_edges(); ++k) {
    const double d = g.edges[k].data;
    auto& feat = ig.edge_features[k];
    feat.resize(m * m);
    for (int q = 0; q < m; ++q) {
      for (int r = 0; r < m; ++r) {
        double value;
        if (q == r || d == 0.0) {
          value = 0.0;
        } else if (net.bandwidth[q][r] > 0.0) {
          value = d / net.bandwidth[q][r];
        } else {
          value = zero_bw_sentinel;
        }
        feat[q * m + r] = value;
      }
    }
  }
  return ig;
}

LabeledInputGraph label_with_teacher(LabeledInputGraph ig, const Schedule& s) {
  const int n = ig.graph.num_tasks();
  if (static_cast<int>(s.mapping.size()) != n) {
    throw ValidationError("teacher mapping must cover every task");
  }
  for (int t = 0; t < n; ++t) {
    if (s.mapping[t] < 0 || s.mapping[t] >= ig.n_machines) {
      throw ValidationError("teacher mapping uses an unknown machine");
    }
  }
  ig.node_labels = s.mapping;
  ig.edge_labels.resize(ig.graph.num_edges());
  for (int k = 0; k < ig.graph.num_edges(); ++k) {
    ig.edge_labels[k] = s.mapping[ig.graph.edges[k].src];
  }
  return ig;
}

void minmax_normalize(std::vector<LabeledInputGraph>& dataset) {
  if (dataset.empty()) return;
  auto normalize = [](std::vector<std::vector<double>*>& rows) {
    double lo = kInfiniteTime;
    double hi = -kInfiniteTime;
    for (auto* row : rows) {
      for (double v : *row) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (!(hi > lo)) return;
    const double span = hi - lo;
    for (auto* row : rows) {
      for (double& v : *row) v = (v - lo) / span;
    }
  };
  std::vector<std::vector<double>*> node_rows;
  std::vector<std::vector<double>*> edge_rows;
  for (auto& ig : dataset) {
    for (auto& row : ig.node_features) node_rows.push_back(&row);
    for (auto& row : ig.edge_features) edge_rows.push_back(&row);
  }
  normalize(node_rows);
  normalize(edge_rows);
}

nlohmann::json to_json(const LabeledInputGraph& ig) {
  nlohmann::json j{{"graph", to_json(ig.graph)},
                   {"node_features", ig.node_features},
                   {"edge_features", ig.edge_features},
                   {"n_machines", ig.n_machines}};
  j["node_labels"] = ig.node_labels;
  j["edge_labels"] = ig.edge_labels;
  return j;
}

LabeledInputGraph input_graph_from_json(const nlohmann::json& j) {
  for (const char* field :
       {"graph", "node_features", "edge_features", "n_machines"}) {
    if (!j.contains(field)) {
      throw IoError(std::string("input graph JSON: missing '") + field + "'");
    }
  }
  LabeledInputGraph ig;
  try {
    ig.graph = taskgraph_from_json(j["graph"]);
    ig.node_features = j["node_features"].get<std::vector<std::vector<double>>>();
    ig.edge_features = j["edge_features"].get<std::vector<std::vector<double>>>();
    ig.n_machines = j["n_machines"].get<int>();
    if (j.contains("node_labels")) {
      ig.node_labels = j["node_labels"].get<std::vector<int>>();
    }
    if (j.contains("edge_labels")) {
      ig.edge_labels = j["edge_labels"].get<std::vector<int>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("input graph JSON: ") + e.what());
  }

  const size_t n = ig.graph.compute.size();
  const size_t e = ig.graph.edges.size();
  if (ig.node_features.size() != n || ig.edge_features.size() != e) {
    throw IoError("input graph JSON: feature row counts do not match graph");
  }
  if (!ig.node_labels.empty() &&
      (ig.node_labels.size() != n || ig.edge_labels.size() != e)) {
    throw IoError("input graph JSON: label counts do not match graph");
  }
  ig.component_id.assign(n, 0);
  return ig;
}

void save_dataset(const std::string& path,
                  const std::vector<LabeledInputGraph>& dataset) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& ig : dataset) j.push_back(to_json(ig));
  save_json_file(path, j);
}

std::vector<LabeledInputGraph> load_dataset(const std::string& path) {
  const nlohmann::json j = load_json_file(path);
  if (!j.is_array()) throw IoError(path + ": dataset must be a JSON array");
  std::vector<LabeledInputGraph> dataset;
  dataset.reserve(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    LabeledInputGraph ig = input_graph_from_json(j[i]);
    ig.component_id.assign(ig.graph.num_tasks(), static_cast<int>(i));
    dataset.push_back(std::move(ig));
  }
  return dataset;
}

}  // namespace dagsched
