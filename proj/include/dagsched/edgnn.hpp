#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dagsched/evaluator.hpp"
#include "dagsched/featurize.hpp"

namespace dagsched {

/// One message-passing layer. Node updates combine the node's own embedding,
/// the sum of neighbor embeddings, and separate sums of incoming- and
/// outgoing-edge embeddings; edge updates combine the edge's own embedding
/// with its endpoint node embeddings.
struct LayerWeights {
  Eigen::MatrixXd w_self;       // node <- itself
  Eigen::MatrixXd w_nbr;        // node <- neighbor nodes (in and out)
  Eigen::MatrixXd w_in_edge;    // node <- incoming edge embeddings
  Eigen::MatrixXd w_out_edge;   // node <- outgoing edge embeddings
  Eigen::MatrixXd w_edge_self;  // edge <- itself
  Eigen::MatrixXd w_edge_src;   // edge <- source node
  Eigen::MatrixXd w_edge_dst;   // edge <- target node
  Eigen::VectorXd b_node;
  Eigen::VectorXd b_edge;
};

/// All trainable arrays, separated from hyperparameters so gradients and
/// optimizer moments can share the shape.
struct ModelWeights {
  Eigen::MatrixXd proj_node;    // input node features -> hidden
  Eigen::MatrixXd proj_edge;    // input edge features -> hidden
  Eigen::VectorXd proj_node_b;
  Eigen::VectorXd proj_edge_b;
  std::vector<LayerWeights> layers;
  Eigen::MatrixXd head_node;    // hidden -> machine classes
  Eigen::MatrixXd head_edge;
  Eigen::VectorXd head_node_b;
  Eigen::VectorXd head_edge_b;
};

struct EdgnnModel {
  int n_machines = 0;
  int hidden = 128;
  int n_layers = 4;
  bool mean_aggregation = false;  // false: plain sums over neighbors/edges
  double edge_loss_weight = 1.0;
  ModelWeights w;

  int node_in_dim() const { return n_machines; }
  int edge_in_dim() const { return n_machines * n_machines; }
};

/// Glorot-uniform weights, zero biases, deterministic in `seed`.
EdgnnModel init_model(int n_machines, int hidden, int n_layers,
                      std::uint64_t seed, bool mean_aggregation = false,
                      double edge_loss_weight = 1.0);

/// Flat views over every trainable array, in a fixed order shared by the
/// optimizer, serialization and gradient checks.
struct ParamView {
  double* data;
  Eigen::Index size;
};
std::vector<ParamView> param_views(ModelWeights& w);
ModelWeights zeros_like(const ModelWeights& w);

/// Baseline graph-convolution update over undirected neighbors:
/// relu(h W_self + agg(neighbors) W_nbr + b).
Eigen::MatrixXd gcn_layer_forward(
    const Eigen::MatrixXd& node_embeds,
    const std::vector<std::pair<int, int>>& edges,
    const Eigen::MatrixXd& w_self, const Eigen::MatrixXd& w_nbr,
    const Eigen::VectorXd& bias, bool mean_aggregation = false);

/// Full edge-aware update; returns the next node and edge embeddings.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> edgnn_layer_forward(
    const Eigen::MatrixXd& node_embeds, const Eigen::MatrixXd& edge_embeds,
    const std::vector<std::pair<int, int>>& edges, const LayerWeights& weights,
    bool mean_aggregation = false);

struct ForwardResult {
  Eigen::MatrixXd node_logits;  // n_tasks x n_machines
  Eigen::MatrixXd edge_logits;  // n_edges x n_machines
};

ForwardResult model_forward(const EdgnnModel& model,
                            const LabeledInputGraph& ig);

/// Mean node cross-entropy plus `edge_loss_weight` times mean edge
/// cross-entropy.
double loss(const Eigen::MatrixXd& node_logits,
            const Eigen::MatrixXd& edge_logits,
            const std::vector<int>& node_labels,
            const std::vector<int>& edge_labels, double edge_loss_weight);

struct BackwardResult {
  double loss = 0.0;
  ModelWeights grads;
};

/// Loss and exact reverse-mode gradients for every weight and bias.
/// Requires a labeled input graph.
BackwardResult backward(const EdgnnModel& model, const LabeledInputGraph& ig);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 300;
  int patience = 30;
  std::uint64_t seed = 0;
  double edge_loss_weight = 1.0;
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;
  int hidden = 128;
  int n_layers = 4;
  bool mean_aggregation = false;
  bool verbose = false;
};

struct TrainReport {
  std::vector<double> train_loss;    // per epoch, before that epoch's update
  std::vector<double> val_node_acc;  // per epoch
  std::vector<double> val_edge_acc;
  double test_node_acc = 0.0;
  double test_edge_acc = 0.0;
  int best_epoch = -1;  // index into the curves
  double wall_seconds = 0.0;
  int n_train = 0, n_val = 0, n_test = 0;  // record counts per split
};

/// Trains on a dataset of labeled disjoint graphs. Records are split by
/// component into train/val/test fractions, each split is concatenated into
/// one disjoint-union graph, and full-graph Adam steps run with early
/// stopping on validation node accuracy. Returns the best-validation model.
std::pair<EdgnnModel, TrainReport> train(
    const std::vector<LabeledInputGraph>& dataset, const TrainConfig& cfg);

/// Argmax of node logits as the mapping (ties to the lowest machine index);
/// per-machine order follows the task graph's topological order.
Schedule infer_schedule(const EdgnnModel& model, const LabeledInputGraph& ig);

void save_model(const EdgnnModel& model, const std::string& path);
EdgnnModel load_model(const std::string& path);

nlohmann::json to_json(const TrainReport& r);

}  // namespace dagsched
