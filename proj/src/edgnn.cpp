#include "dagsched/edgnn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include <nlohmann/json.hpp>

#include "dagsched/errors.hpp"
#include "dagsched/heuristics.hpp"
#include "dagsched/json_io.hpp"
#include "dagsched/rng.hpp"

namespace dagsched {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// tensor assembly

struct GraphTensors {
  MatrixXd x_node;  // N x n_machines
  MatrixXd x_edge;  // E x n_machines^2
  std::vector<std::pair<int, int>> edges;
  std::vector<int> node_labels;
  std::vector<int> edge_labels;
  std::vector<int> deg, indeg, outdeg;
  int n_machines = 0;

  int n_nodes() const { return static_cast<int>(x_node.rows()); }
  int n_edges() const { return static_cast<int>(edges.size()); }
};

void check_compatible(const EdgnnModel& model, const LabeledInputGraph& ig) {
  if (ig.n_machines != model.n_machines) {
    throw IncompatibilityError(
        "model expects " + std::to_string(model.n_machines) +
        " machines, input graph has " + std::to_string(ig.n_machines));
  }
  for (const auto& row : ig.node_features) {
    if (static_cast<int>(row.size()) != model.node_in_dim()) {
      throw IncompatibilityError("node feature width does not match model");
    }
  }
  for (const auto& row : ig.edge_features) {
    if (static_cast<int>(row.size()) != model.edge_in_dim()) {
      throw IncompatibilityError("edge feature width does not match model");
    }
  }
}

GraphTensors make_tensors(const std::vector<const LabeledInputGraph*>& parts) {
  GraphTensors t;
  int n_total = 0;
  int e_total = 0;
  for (const auto* ig : parts) {
    n_total += ig->graph.num_tasks();
    e_total += ig->graph.num_edges();
  }
  t.n_machines = parts.empty() ? 0 : parts.front()->n_machines;
  const int nf = t.n_machines;
  t.x_node.resize(n_total, nf);
  t.x_edge.resize(e_total, nf * nf);
  t.edges.reserve(e_total);

  int node_off = 0;
  int edge_off = 0;
  for (const auto* ig : parts) {
    const int n = ig->graph.num_tasks();
    const int e = ig->graph.num_edges();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < nf; ++j) t.x_node(node_off + i, j) = ig->node_features[i][j];
    }
    for (int k = 0; k < e; ++k) {
      for (int j = 0; j < nf * nf; ++j) {
        t.x_edge(edge_off + k, j) = ig->edge_features[k][j];
      }
      t.edges.emplace_back(ig->graph.edges[k].src + node_off,
                           ig->graph.edges[k].dst + node_off);
    }
    if (!ig->node_labels.empty()) {
      t.node_labels.insert(t.node_labels.end(), ig->node_labels.begin(),
                           ig->node_labels.end());
      t.edge_labels.insert(t.edge_labels.end(), ig->edge_labels.begin(),
                           ig->edge_labels.end());
    }
    node_off += n;
    edge_off += e;
  }

  t.deg.assign(n_total, 0);
  t.indeg.assign(n_total, 0);
  t.outdeg.assign(n_total, 0);
  for (auto [u, v] : t.edges) {
    ++t.deg[u];
    ++t.deg[v];
    ++t.outdeg[u];
    ++t.indeg[v];
  }
  return t;
}

GraphTensors make_tensors(const LabeledInputGraph& ig) {
  return make_tensors(std::vector<const LabeledInputGraph*>{&ig});
}

// ---------------------------------------------------------------------------
// aggregation primitives

// row v += sum of src rows over incident edges, both directions
MatrixXd scatter_neighbors(const MatrixXd& h,
                           const std::vector<std::pair<int, int>>& edges) {
  MatrixXd out = MatrixXd::Zero(h.rows(), h.cols());
  for (auto [u, v] : edges) {
    out.row(v) += h.row(u);
    out.row(u) += h.row(v);
  }
  return out;
}

MatrixXd scatter_by_dst(const MatrixXd& he, Eigen::Index n_nodes,
                        const std::vector<std::pair<int, int>>& edges) {
  MatrixXd out = MatrixXd::Zero(n_nodes, he.cols());
  for (size_t k = 0; k < edges.size(); ++k) out.row(edges[k].second) += he.row(k);
  return out;
}

MatrixXd scatter_by_src(const MatrixXd& he, Eigen::Index n_nodes,
                        const std::vector<std::pair<int, int>>& edges) {
  MatrixXd out = MatrixXd::Zero(n_nodes, he.cols());
  for (size_t k = 0; k < edges.size(); ++k) out.row(edges[k].first) += he.row(k);
  return out;
}

void scale_rows_by_count(MatrixXd& m, const std::vector<int>& counts) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (counts[i] > 1) m.row(i) /= static_cast<double>(counts[i]);
  }
}

// ---------------------------------------------------------------------------
// forward

struct ForwardCache {
  std::vector<MatrixXd> hn;  // hn[0] = projected inputs, hn[t] = layer t output
  std::vector<MatrixXd> he;
  MatrixXd node_logits;
  MatrixXd edge_logits;
};

void layer_forward_into(const MatrixXd& hn, const MatrixXd& he,
                        const GraphTensors& t, const LayerWeights& w,
                        bool mean_agg, MatrixXd& hn_out, MatrixXd& he_out) {
  MatrixXd a_nbr = scatter_neighbors(hn, t.edges);
  MatrixXd a_in = scatter_by_dst(he, hn.rows(), t.edges);
  MatrixXd a_out = scatter_by_src(he, hn.rows(), t.edges);
  if (mean_agg) {
    scale_rows_by_count(a_nbr, t.deg);
    scale_rows_by_count(a_in, t.indeg);
    scale_rows_by_count(a_out, t.outdeg);
  }

  MatrixXd s_n = hn * w.w_self;
  s_n.noalias() += a_nbr * w.w_nbr;
  s_n.noalias() += a_in * w.w_in_edge;
  s_n.noalias() += a_out * w.w_out_edge;
  s_n.rowwise() += w.b_node.transpose();
  hn_out = s_n.cwiseMax(0.0);

  MatrixXd s_e = he * w.w_edge_self;
  const MatrixXd p_src = hn * w.w_edge_src;
  const MatrixXd p_dst = hn * w.w_edge_dst;
  for (size_t k = 0; k < t.edges.size(); ++k) {
    s_e.row(k) += p_src.row(t.edges[k].first) + p_dst.row(t.edges[k].second);
  }
  s_e.rowwise() += w.b_edge.transpose();
  he_out = s_e.cwiseMax(0.0);
}

ForwardCache forward_pass(const EdgnnModel& model, const GraphTensors& t) {
  ForwardCache cache;
  cache.hn.resize(model.n_layers + 1);
  cache.he.resize(model.n_layers + 1);

  cache.hn[0] = t.x_node * model.w.proj_node;
  cache.hn[0].rowwise() += model.w.proj_node_b.transpose();
  cache.he[0] = t.x_edge * model.w.proj_edge;
  cache.he[0].rowwise() += model.w.proj_edge_b.transpose();

  for (int layer = 0; layer < model.n_layers; ++layer) {
    layer_forward_into(cache.hn[layer], cache.he[layer], t,
                       model.w.layers[layer], model.mean_aggregation,
                       cache.hn[layer + 1], cache.he[layer + 1]);
  }

  cache.node_logits = cache.hn.back() * model.w.head_node;
  cache.node_logits.rowwise() += model.w.head_node_b.transpose();
  cache.edge_logits = cache.he.back() * model.w.head_edge;
  cache.edge_logits.rowwise() += model.w.head_edge_b.transpose();
  return cache;
}

// ---------------------------------------------------------------------------
// loss

// mean cross-entropy; optionally writes softmax-minus-onehot (already divided
// by the row count) into d_logits
double mean_cross_entropy(const MatrixXd& logits,
                          const std::vector<int>& labels,
                          MatrixXd* d_logits) {
  const Eigen::Index n = logits.rows();
  if (n == 0) {
    if (d_logits) *d_logits = MatrixXd::Zero(0, logits.cols());
    return 0.0;
  }
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw ValidationError("label count does not match logit rows");
  }
  double total = 0.0;
  if (d_logits) d_logits->resize(n, logits.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      z += std::exp(logits(i, j) - m);
    }
    const double lse = m + std::log(z);
    total += lse - logits(i, labels[i]);
    if (d_logits) {
      for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        (*d_logits)(i, j) = std::exp(logits(i, j) - lse) * inv_n;
      }
      (*d_logits)(i, labels[i]) -= inv_n;
    }
  }
  return total * inv_n;
}

int argmax_row(const MatrixXd& logits, Eigen::Index row) {
  int best = 0;
  for (Eigen::Index j = 1; j < logits.cols(); ++j) {
    if (logits(row, j) > logits(row, best)) best = static_cast<int>(j);
  }
  return best;
}

double accuracy(const MatrixXd& logits, const std::vector<int>& labels) {
  if (logits.rows() == 0) return 1.0;
  int correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (argmax_row(logits, i) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

// ---------------------------------------------------------------------------
// backward

BackwardResult backward_pass(const EdgnnModel& model, const GraphTensors& t) {
  if (t.node_labels.empty() ||
      static_cast<int>(t.node_labels.size()) != t.n_nodes()) {
    throw ValidationError("backward requires node and edge labels");
  }
  const ForwardCache cache = forward_pass(model, t);

  BackwardResult result;
  result.grads = zeros_like(model.w);
  ModelWeights& g = result.grads;

  MatrixXd d_node_logits;
  MatrixXd d_edge_logits;
  const double node_ce =
      mean_cross_entropy(cache.node_logits, t.node_labels, &d_node_logits);
  const double edge_ce =
      mean_cross_entropy(cache.edge_logits, t.edge_labels, &d_edge_logits);
  result.loss = node_ce + model.edge_loss_weight * edge_ce;
  d_edge_logits *= model.edge_loss_weight;

  g.head_node.noalias() = cache.hn.back().transpose() * d_node_logits;
  g.head_node_b = d_node_logits.colwise().sum();
  g.head_edge.noalias() = cache.he.back().transpose() * d_edge_logits;
  g.head_edge_b = d_edge_logits.colwise().sum();

  MatrixXd d_hn = d_node_logits * model.w.head_node.transpose();
  MatrixXd d_he = d_edge_logits * model.w.head_edge.transpose();

  for (int layer = model.n_layers - 1; layer >= 0; --layer) {
    const LayerWeights& w = model.w.layers[layer];
    LayerWeights& gl = g.layers[layer];
    const MatrixXd& hn_prev = cache.hn[layer];
    const MatrixXd& he_prev = cache.he[layer];

    // relu mask from the stored outputs
    const MatrixXd d_sn =
        ((cache.hn[layer + 1].array() > 0.0).cast<double>() * d_hn.array())
            .matrix();
    const MatrixXd d_se =
        ((cache.he[layer + 1].array() > 0.0).cast<double>() * d_he.array())
            .matrix();

    MatrixXd a_nbr = scatter_neighbors(hn_prev, t.edges);
    MatrixXd a_in = scatter_by_dst(he_prev, hn_prev.rows(), t.edges);
    MatrixXd a_out = scatter_by_src(he_prev, hn_prev.rows(), t.edges);
    if (model.mean_aggregation) {
      scale_rows_by_count(a_nbr, t.deg);
      scale_rows_by_count(a_in, t.indeg);
      scale_rows_by_count(a_out, t.outdeg);
    }

    gl.w_self.noalias() = hn_prev.transpose() * d_sn;
    gl.w_nbr.noalias() = a_nbr.transpose() * d_sn;
    gl.w_in_edge.noalias() = a_in.transpose() * d_sn;
    gl.w_out_edge.noalias() = a_out.transpose() * d_sn;
    gl.b_node = d_sn.colwise().sum();

    gl.w_edge_self.noalias() = he_prev.transpose() * d_se;
    gl.w_edge_src.noalias() =
        hn_prev.transpose() * scatter_by_src(d_se, hn_prev.rows(), t.edges);
    gl.w_edge_dst.noalias() =
        hn_prev.transpose() * scatter_by_dst(d_se, hn_prev.rows(), t.edges);
    gl.b_edge = d_se.colwise().sum();

    // inputs of the node update
    MatrixXd d_hn_prev = d_sn * w.w_self.transpose();
    MatrixXd d_a_nbr = d_sn * w.w_nbr.transpose();
    MatrixXd d_a_in = d_sn * w.w_in_edge.transpose();
    MatrixXd d_a_out = d_sn * w.w_out_edge.transpose();
    if (model.mean_aggregation) {
      scale_rows_by_count(d_a_nbr, t.deg);
      scale_rows_by_count(d_a_in, t.indeg);
      scale_rows_by_count(d_a_out, t.outdeg);
    }
    d_hn_prev.noalias() += scatter_neighbors(d_a_nbr, t.edges);

    // inputs of the edge update
    const MatrixXd d_src = d_se * w.w_edge_src.transpose();
    const MatrixXd d_dst = d_se * w.w_edge_dst.transpose();
    MatrixXd d_he_prev = d_se * w.w_edge_self.transpose();
    for (size_t k = 0; k < t.edges.size(); ++k) {
      const auto [u, v] = t.edges[k];
      d_hn_prev.row(u) += d_src.row(k);
      d_hn_prev.row(v) += d_dst.row(k);
      d_he_prev.row(k) += d_a_in.row(v) + d_a_out.row(u);
    }

    d_hn = std::move(d_hn_prev);
    d_he = std::move(d_he_prev);
  }

  g.proj_node.noalias() = t.x_node.transpose() * d_hn;
  g.proj_node_b = d_hn.colwise().sum();
  g.proj_edge.noalias() = t.x_edge.transpose() * d_he;
  g.proj_edge_b = d_he.colwise().sum();
  return result;
}

// ---------------------------------------------------------------------------
// optimizer

struct Adam {
  ModelWeights m;
  ModelWeights v;
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int t = 0;

  Adam(const ModelWeights& shape, double learning_rate)
      : m(zeros_like(shape)), v(zeros_like(shape)), lr(learning_rate) {}

  void step(ModelWeights& weights, ModelWeights& grads) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    auto wv = param_views(weights);
    auto gv = param_views(grads);
    auto mv = param_views(m);
    auto vv = param_views(v);
    for (size_t p = 0; p < wv.size(); ++p) {
      for (Eigen::Index i = 0; i < wv[p].size; ++i) {
        const double grad = gv[p].data[i];
        mv[p].data[i] = beta1 * mv[p].data[i] + (1.0 - beta1) * grad;
        vv[p].data[i] = beta2 * vv[p].data[i] + (1.0 - beta2) * grad * grad;
        const double mhat = mv[p].data[i] / bc1;
        const double vhat = vv[p].data[i] / bc2;
        wv[p].data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
};

// ---------------------------------------------------------------------------
// serialization helpers

nlohmann::json matrix_to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_to_json(const VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

std::vector<double> doubles_from_base64(const std::string& text, size_t count,
                                        const std::string& field) {
  const std::vector<std::uint8_t> bytes = base64_decode(text);
  if (bytes.size() != count * sizeof(double)) {
    throw IoError("checkpoint field '" + field + "': expected " +
                  std::to_string(count * sizeof(double)) + " bytes, got " +
                  std::to_string(bytes.size()));
  }
  std::vector<double> values(count);
  std::memcpy(values.data(), bytes.data(), bytes.size());
  return values;
}

MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows,
                          Eigen::Index cols, const std::string& field) {
  MatrixXd m(rows, cols);
  if (j.is_string()) {
    const auto values = doubles_from_base64(j.get<std::string>(),
                                            static_cast<size_t>(rows * cols),
                                            field);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = values[i * cols + c];
    }
    return m;
  }
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw IoError("checkpoint field '" + field + "': expected " +
                  std::to_string(rows) + " rows");
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[i];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw IoError("checkpoint field '" + field + "': expected " +
                    std::to_string(cols) + " columns");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[c].is_number()) {
        throw IoError("checkpoint field '" + field + "': non-numeric entry");
      }
      m(i, c) = row[c].get<double>();
    }
  }
  return m;
}

VectorXd vector_from_json(const nlohmann::json& j, Eigen::Index size,
                          const std::string& field) {
  VectorXd v(size);
  if (j.is_string()) {
    const auto values = doubles_from_base64(j.get<std::string>(),
                                            static_cast<size_t>(size), field);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = values[i];
    return v;
  }
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size) {
    throw IoError("checkpoint field '" + field + "': expected " +
                  std::to_string(size) + " entries");
  }
  for (Eigen::Index i = 0; i < size; ++i) {
    if (!j[i].is_number()) {
      throw IoError("checkpoint field '" + field + "': non-numeric entry");
    }
    v(i) = j[i].get<double>();
  }
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// public api

std::vector<ParamView> param_views(ModelWeights& w) {
  std::vector<ParamView> views;
  auto add_m = [&](MatrixXd& m) { views.push_back({m.data(), m.size()}); };
  auto add_v = [&](VectorXd& v) { views.push_back({v.data(), v.size()}); };
  add_m(w.proj_node);
  add_v(w.proj_node_b);
  add_m(w.proj_edge);
  add_v(w.proj_edge_b);
  for (LayerWeights& l : w.layers) {
    add_m(l.w_self);
    add_m(l.w_nbr);
    add_m(l.w_in_edge);
    add_m(l.w_out_edge);
    add_m(l.w_edge_self);
    add_m(l.w_edge_src);
    add_m(l.w_edge_dst);
    add_v(l.b_node);
    add_v(l.b_edge);
  }
  add_m(w.head_node);
  add_v(w.head_node_b);
  add_m(w.head_edge);
  add_v(w.head_edge_b);
  return views;
}

ModelWeights zeros_like(const ModelWeights& w) {
  ModelWeights z;
  z.proj_node = MatrixXd::Zero(w.proj_node.rows(), w.proj_node.cols());
  z.proj_edge = MatrixXd::Zero(w.proj_edge.rows(), w.proj_edge.cols());
  z.proj_node_b = VectorXd::Zero(w.proj_node_b.size());
  z.proj_edge_b = VectorXd::Zero(w.proj_edge_b.size());
  z.layers.resize(w.layers.size());
  for (size_t i = 0; i < w.layers.size(); ++i) {
    const LayerWeights& l = w.layers[i];
    LayerWeights& o = z.layers[i];
    o.w_self = MatrixXd::Zero(l.w_self.rows(), l.w_self.cols());
    o.w_nbr = MatrixXd::Zero(l.w_nbr.rows(), l.w_nbr.cols());
    o.w_in_edge = MatrixXd::Zero(l.w_in_edge.rows(), l.w_in_edge.cols());
    o.w_out_edge = MatrixXd::Zero(l.w_out_edge.rows(), l.w_out_edge.cols());
    o.w_edge_self = MatrixXd::Zero(l.w_edge_self.rows(), l.w_edge_self.cols());
    o.w_edge_src = MatrixXd::Zero(l.w_edge_src.rows(), l.w_edge_src.cols());
    o.w_edge_dst = MatrixXd::Zero(l.w_edge_dst.rows(), l.w_edge_dst.cols());
    o.b_node = VectorXd::Zero(l.b_node.size());
    o.b_edge = VectorXd::Zero(l.b_edge.size());
  }
  z.head_node = MatrixXd::Zero(w.head_node.rows(), w.head_node.cols());
  z.head_edge = MatrixXd::Zero(w.head_edge.rows(), w.head_edge.cols());
  z.head_node_b = VectorXd::Zero(w.head_node_b.size());
  z.head_edge_b = VectorXd::Zero(w.head_edge_b.size());
  return z;
}

EdgnnModel init_model(int n_machines, int hidden, int n_layers,
                      std::uint64_t seed, bool mean_aggregation,
                      double edge_loss_weight) {
  if (n_machines < 1 || hidden < 1 || n_layers < 1) {
    throw ValidationError("model dims must be positive");
  }
  EdgnnModel model;
  model.n_machines = n_machines;
  model.hidden = hidden;
  model.n_layers = n_layers;
  model.mean_aggregation = mean_aggregation;
  model.edge_loss_weight = edge_loss_weight;

  Rng rng(seed);
  auto glorot = [&rng](Eigen::Index rows, Eigen::Index cols) {
    MatrixXd m(rows, cols);
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        m(i, j) = rng.uniform_real(-limit, limit);
      }
    }
    return m;
  };

  const int d = hidden;
  model.w.proj_node = glorot(model.node_in_dim(), d);
  model.w.proj_node_b = VectorXd::Zero(d);
  model.w.proj_edge = glorot(model.edge_in_dim(), d);
  model.w.proj_edge_b = VectorXd::Zero(d);
  model.w.layers.resize(n_layers);
  for (LayerWeights& l : model.w.layers) {
    l.w_self = glorot(d, d);
    l.w_nbr = glorot(d, d);
    l.w_in_edge = glorot(d, d);
    l.w_out_edge = glorot(d, d);
    l.w_edge_self = glorot(d, d);
    l.w_edge_src = glorot(d, d);
    l.w_edge_dst = glorot(d, d);
    l.b_node = VectorXd::Zero(d);
    l.b_edge = VectorXd::Zero(d);
  }
  model.w.head_node = glorot(d, n_machines);
  model.w.head_node_b = VectorXd::Zero(n_machines);
  model.w.head_edge = glorot(d, n_machines);
  model.w.head_edge_b = VectorXd::Zero(n_machines);
  return model;
}

Eigen::MatrixXd gcn_layer_forward(const MatrixXd& node_embeds,
                                  const std::vector<std::pair<int, int>>& edges,
                                  const MatrixXd& w_self, const MatrixXd& w_nbr,
                                  const VectorXd& bias, bool mean_aggregation) {
  if (w_self.rows() != node_embeds.cols() || w_nbr.rows() != node_embeds.cols() ||
      w_self.cols() != w_nbr.cols() || bias.size() != w_self.cols()) {
    throw IncompatibilityError("gcn layer weight shapes are inconsistent");
  }
  MatrixXd agg = scatter_neighbors(node_embeds, edges);
  if (mean_aggregation) {
    std::vector<int> deg(node_embeds.rows(), 0);
    for (auto [u, v] : edges) {
      ++deg[u];
      ++deg[v];
    }
    scale_rows_by_count(agg, deg);
  }
  MatrixXd s = node_embeds * w_self;
  s.noalias() += agg * w_nbr;
  s.rowwise() += bias.transpose();
  return s.cwiseMax(0.0);
}

std::pair<MatrixXd, MatrixXd> edgnn_layer_forward(
    const MatrixXd& node_embeds, const MatrixXd& edge_embeds,
    const std::vector<std::pair<int, int>>& edges, const LayerWeights& weights,
    bool mean_aggregation) {
  if (weights.w_self.rows() != node_embeds.cols() ||
      weights.w_edge_self.rows() != edge_embeds.cols() ||
      edge_embeds.rows() != static_cast<Eigen::Index>(edges.size())) {
    throw IncompatibilityError("edgnn layer shapes are inconsistent");
  }
  GraphTensors t;
  t.edges = edges;
  const int n = static_cast<int>(node_embeds.rows());
  t.deg.assign(n, 0);
  t.indeg.assign(n, 0);
  t.outdeg.assign(n, 0);
  for (auto [u, v] : edges) {
    ++t.deg[u];
    ++t.deg[v];
    ++t.outdeg[u];
    ++t.indeg[v];
  }
  std::pair<MatrixXd, MatrixXd> out;
  layer_forward_into(node_embeds, edge_embeds, t, weights, mean_aggregation,
                     out.first, out.second);
  return out;
}

ForwardResult model_forward(const EdgnnModel& model,
                            const LabeledInputGraph& ig) {
  check_compatible(model, ig);
  const GraphTensors t = make_tensors(ig);
  ForwardCache cache = forward_pass(model, t);
  return {std::move(cache.node_logits), std::move(cache.edge_logits)};
}

double loss(const MatrixXd& node_logits, const MatrixXd& edge_logits,
            const std::vector<int>& node_labels,
            const std::vector<int>& edge_labels, double edge_loss_weight) {
  if (node_labels.empty() && node_logits.rows() > 0) {
    throw ValidationError("loss requires labels");
  }
  return mean_cross_entropy(node_logits, node_labels, nullptr) +
         edge_loss_weight * mean_cross_entropy(edge_logits, edge_labels, nullptr);
}

BackwardResult backward(const EdgnnModel& model, const LabeledInputGraph& ig) {
  check_compatible(model, ig);
  if (!ig.labeled()) throw ValidationError("backward requires a labeled graph");
  return backward_pass(model, make_tensors(ig));
}

std::pair<EdgnnModel, TrainReport> train(
    const std::vector<LabeledInputGraph>& dataset, const TrainConfig& cfg) {
  if (dataset.empty()) throw ValidationError("empty dataset");
  if (!(cfg.learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
  if (cfg.epochs < 1 || cfg.patience < 1) {
    throw ValidationError("epochs and patience must be >= 1");
  }
  if (std::abs(cfg.train_frac + cfg.val_frac + cfg.test_frac - 1.0) > 1e-9) {
    throw ValidationError("split fractions must sum to 1");
  }
  const int n_machines = dataset.front().n_machines;
  for (const auto& ig : dataset) {
    if (ig.n_machines != n_machines) {
      throw ValidationError("dataset mixes machine counts");
    }
    if (!ig.labeled()) throw ValidationError("dataset record is unlabeled");
  }

  const int n = static_cast<int>(dataset.size());
  const int n_train = std::max(1, static_cast<int>(std::floor(cfg.train_frac * n)));
  const int n_val = std::max(1, static_cast<int>(std::floor(cfg.val_frac * n)));
  const int n_test = n - n_train - n_val;
  if (n_test < 1) {
    throw ValidationError("dataset too small for a train/val/test split");
  }

  auto make_split = [&](int lo, int hi) {
    std::vector<const LabeledInputGraph*> parts;
    for (int i = lo; i < hi; ++i) parts.push_back(&dataset[i]);
    return make_tensors(parts);
  };
  const GraphTensors train_t = make_split(0, n_train);
  const GraphTensors val_t = make_split(n_train, n_train + n_val);
  const GraphTensors test_t = make_split(n_train + n_val, n);

  EdgnnModel model = init_model(n_machines, cfg.hidden, cfg.n_layers, cfg.seed,
                                cfg.mean_aggregation, cfg.edge_loss_weight);
  Adam adam(model.w, cfg.learning_rate);

  TrainReport report;
  report.n_train = n_train;
  report.n_val = n_val;
  report.n_test = n_test;

  EdgnnModel best_model = model;
  double best_acc = -1.0;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    BackwardResult step = backward_pass(model, train_t);
    adam.step(model.w, step.grads);

    const ForwardCache val_fwd = forward_pass(model, val_t);
    const double val_node = accuracy(val_fwd.node_logits, val_t.node_labels);
    const double val_edge = accuracy(val_fwd.edge_logits, val_t.edge_labels);

    report.train_loss.push_back(step.loss);
    report.val_node_acc.push_back(val_node);
    report.val_edge_acc.push_back(val_edge);

    if (val_node > best_acc) {
      best_acc = val_node;
      best_model = model;
      report.best_epoch = epoch;
    }
    if (cfg.verbose) {
      std::fprintf(stderr, "epoch %4d  loss %.6f  val_node %.4f  val_edge %.4f\n",
                   epoch, step.loss, val_node, val_edge);
    }
    if (epoch - report.best_epoch >= cfg.patience) break;
  }

  const ForwardCache test_fwd = forward_pass(best_model, test_t);
  report.test_node_acc = accuracy(test_fwd.node_logits, test_t.node_labels);
  report.test_edge_acc = accuracy(test_fwd.edge_logits, test_t.edge_labels);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(best_model), std::move(report)};
}

Schedule infer_schedule(const EdgnnModel& model, const LabeledInputGraph& ig) {
  const ForwardResult fwd = model_forward(model, ig);
  std::vector<int> mapping(ig.graph.num_tasks());
  for (int i = 0; i < ig.graph.num_tasks(); ++i) {
    mapping[i] = argmax_row(fwd.node_logits, i);
  }
  return schedule_from_mapping(ig.graph, model.n_machines, std::move(mapping));
}

void save_model(const EdgnnModel& model, const std::string& path) {
  nlohmann::json weights;
  weights["proj_node"] = matrix_to_json(model.w.proj_node);
  weights["proj_node_b"] = vector_to_json(model.w.proj_node_b);
  weights["proj_edge"] = matrix_to_json(model.w.proj_edge);
  weights["proj_edge_b"] = vector_to_json(model.w.proj_edge_b);
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerWeights& l : model.w.layers) {
    layers.push_back({{"w_self", matrix_to_json(l.w_self)},
                      {"w_nbr", matrix_to_json(l.w_nbr)},
                      {"w_in_edge", matrix_to_json(l.w_in_edge)},
                      {"w_out_edge", matrix_to_json(l.w_out_edge)},
                      {"w_edge_self", matrix_to_json(l.w_edge_self)},
                      {"w_edge_src", matrix_to_json(l.w_edge_src)},
                      {"w_edge_dst", matrix_to_json(l.w_edge_dst)},
                      {"b_node", vector_to_json(l.b_node)},
                      {"b_edge", vector_to_json(l.b_edge)}});
  }
  weights["layers"] = std::move(layers);
  weights["head_node"] = matrix_to_json(model.w.head_node);
  weights["head_node_b"] = vector_to_json(model.w.head_node_b);
  weights["head_edge"] = matrix_to_json(model.w.head_edge);
  weights["head_edge_b"] = vector_to_json(model.w.head_edge_b);

  const nlohmann::json j{{"format_version", 1},
                         {"n_machines", model.n_machines},
                         {"hidden", model.hidden},
                         {"layers", model.n_layers},
                         {"agg", model.mean_aggregation ? "mean" : "sum"},
                         {"lambda", model.edge_loss_weight},
                         {"weights", weights}};
  save_json_file(path, j);
}

EdgnnModel load_model(const std::string& path) {
  const nlohmann::json j = load_json_file(path);
  for (const char* field :
       {"format_version", "n_machines", "hidden", "layers", "agg", "lambda",
        "weights"}) {
    if (!j.contains(field)) {
      throw IoError(path + ": checkpoint missing '" + field + "'");
    }
  }
  if (j["format_version"].get<int>() != 1) {
    throw IoError(path + ": unsupported checkpoint format_version");
  }
  const std::string agg = j["agg"].get<std::string>();
  if (agg != "sum" && agg != "mean") {
    throw IoError(path + ": agg must be 'sum' or 'mean'");
  }

  EdgnnModel model;
  model.n_machines = j["n_machines"].get<int>();
  model.hidden = j["hidden"].get<int>();
  model.n_layers = j["layers"].get<int>();
  model.mean_aggregation = agg == "mean";
  model.edge_loss_weight = j["lambda"].get<double>();
  if (model.n_machines < 1 || model.hidden < 1 || model.n_layers < 1) {
    throw IoError(path + ": invalid checkpoint dimensions");
  }

  const int d = model.hidden;
  const nlohmann::json& w = j["weights"];
  try {
    model.w.proj_node =
        matrix_from_json(w.at("proj_node"), model.node_in_dim(), d, "proj_node");
    model.w.proj_node_b = vector_from_json(w.at("proj_node_b"), d, "proj_node_b");
    model.w.proj_edge =
        matrix_from_json(w.at("proj_edge"), model.edge_in_dim(), d, "proj_edge");
    model.w.proj_edge_b = vector_from_json(w.at("proj_edge_b"), d, "proj_edge_b");
    const nlohmann::json& layers = w.at("layers");
    if (!layers.is_array() ||
        static_cast<int>(layers.size()) != model.n_layers) {
      throw IoError(path + ": layer count does not match header");
    }
    model.w.layers.resize(model.n_layers);
    for (int i = 0; i < model.n_layers; ++i) {
      const nlohmann::json& lj = layers[i];
      LayerWeights& l = model.w.layers[i];
      const std::string prefix = "layers[" + std::to_string(i) + "].";
      l.w_self = matrix_from_json(lj.at("w_self"), d, d, prefix + "w_self");
      l.w_nbr = matrix_from_json(lj.at("w_nbr"), d, d, prefix + "w_nbr");
      l.w_in_edge = matrix_from_json(lj.at("w_in_edge"), d, d, prefix + "w_in_edge");
      l.w_out_edge =
          matrix_from_json(lj.at("w_out_edge"), d, d, prefix + "w_out_edge");
      l.w_edge_self =
          matrix_from_json(lj.at("w_edge_self"), d, d, prefix + "w_edge_self");
      l.w_edge_src =
          matrix_from_json(lj.at("w_edge_src"), d, d, prefix + "w_edge_src");
      l.w_edge_dst =
          matrix_from_json(lj.at("w_edge_dst"), d, d, prefix + "w_edge_dst");
      l.b_node = vector_from_json(lj.at("b_node"), d, prefix + "b_node");
      l.b_edge = vector_from_json(lj.at("b_edge"), d, prefix + "b_edge");
    }
    model.w.head_node =
        matrix_from_json(w.at("head_node"), d, model.n_machines, "head_node");
    model.w.head_node_b =
        vector_from_json(w.at("head_node_b"), model.n_machines, "head_node_b");
    model.w.head_edge =
        matrix_from_json(w.at("head_edge"), d, model.n_machines, "head_edge");
    model.w.head_edge_b =
        vector_from_json(w.at("head_edge_b"), model.n_machines, "head_edge_b");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": malformed checkpoint: " + e.what());
  }
  return model;
}

nlohmann::json to_json(const TrainReport& r) {
  return nlohmann::json{{"train_loss", r.train_loss},
                        {"val_node_acc", r.val_node_acc},
                        {"val_edge_acc", r.val_edge_acc},
                        {"test_node_acc", r.test_node_acc},
                        {"test_edge_acc", r.test_edge_acc},
                        {"best_epoch", r.best_epoch},
                        {"wall_seconds", r.wall_seconds},
                        {"n_train", r.n_train},
                        {"n_val", r.n_val},
                        {"n_test", r.n_test}};
}

}  // namespace dagsched
