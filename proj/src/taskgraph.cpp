#include "dagsched/taskgraph.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dagsched/errors.hpp"
#include "dagsched/rng.hpp"

namespace dagsched {

namespace {

void check_compute_range(const GenSpec& spec) {
  if (spec.compute_lo <= 0.0 || spec.compute_hi < spec.compute_lo) {
    throw ValidationError("compute_range must satisfy 0 < lo <= hi");
  }
  if (spec.data_value < 0.0) {
    throw ValidationError("data_value must be nonnegative");
  }
}

void sort_edges(std::vector<TaskEdge>& edges) {
  std::sort(edges.begin(), edges.end(), [](const TaskEdge& a, const TaskEdge& b) {
    return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
  });
}

}  // namespace

Adjacency build_adjacency(const TaskGraph& g) {
  Adjacency adj;
  adj.in_edges.resize(g.num_tasks());
  adj.out_edges.resize(g.num_tasks());
  for (int k = 0; k < g.num_edges(); ++k) {
    adj.out_edges[g.edges[k].src].push_back(k);
    adj.in_edges[g.edges[k].dst].push_back(k);
  }
  return adj;
}

TaskGraph generate_ep(const GenSpec& spec) {
  if (spec.n_tasks < 1) throw ValidationError("n_tasks must be >= 1");
  if (spec.edge_prob < 0.0 || spec.edge_prob > 1.0) {
    throw ValidationError("edge probability must be in [0, 1]");
  }
  check_compute_range(spec);

  Rng rng(spec.seed);
  TaskGraph g;
  g.compute.reserve(spec.n_tasks);
  for (int i = 0; i < spec.n_tasks; ++i) {
    g.compute.push_back(rng.uniform_real(spec.compute_lo, spec.compute_hi));
  }
  for (int u = 0; u < spec.n_tasks; ++u) {
    for (int v = u + 1; v < spec.n_tasks; ++v) {
      if (rng.bernoulli(spec.edge_prob)) {
        g.edges.push_back({u, v, spec.data_value});
      }
    }
  }
  return g;  // pair loop order already yields (src, dst)-sorted edges
}

TaskGraph generate_layered(const GenSpec& spec) {
  if (spec.width < 1 || spec.depth < 1) {
    throw ValidationError("width and depth must be >= 1");
  }
  check_compute_range(spec);

  Rng rng(spec.seed);
  TaskGraph g;
  const int n = spec.width * spec.depth;
  g.compute.reserve(n);
  for (int i = 0; i < n; ++i) {
    g.compute.push_back(rng.uniform_real(spec.compute_lo, spec.compute_hi));
  }

  std::vector<int> next_layer(spec.width);
  for (int layer = 0; layer + 1 < spec.depth; ++layer) {
    for (int t = layer * spec.width; t < (layer + 1) * spec.width; ++t) {
      const int count = static_cast<int>(rng.uniform_int(1, spec.width));
      for (int i = 0; i < spec.width; ++i) {
        next_layer[i] = (layer + 1) * spec.width + i;
      }
      // partial Fisher-Yates: the first `count` entries are the successors
      for (int i = 0; i < count; ++i) {
        const int j = static_cast<int>(rng.uniform_int(i, spec.width - 1));
        std::swap(next_layer[i], next_layer[j]);
        g.edges.push_back({t, next_layer[i], spec.data_value});
      }
    }
  }
  sort_edges(g.edges);
  return g;
}

std::vector<int> topological_order(const TaskGraph& g) {
  const int n = g.num_tasks();
  std::vector<int> indegree(n, 0);
  for (const TaskEdge& e : g.edges) ++indegree[e.dst];

  Adjacency adj = build_adjacency(g);
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }

  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    const int t = ready.top();
    ready.pop();
    order.push_back(t);
    for (int k : adj.out_edges[t]) {
      if (--indegree[g.edges[k].dst] == 0) ready.push(g.edges[k].dst);
    }
  }
  if (static_cast<int>(order.size()) != n) {
    throw CycleError("task graph contains a cycle");
  }
  return order;
}

std::pair<TaskGraph, std::vector<int>> disjoint_union(
    const std::vector<TaskGraph>& graphs) {
  if (graphs.empty()) throw ValidationError("disjoint_union of an empty list");

  TaskGraph out;
  std::vector<int> offsets;
  offsets.reserve(graphs.size());
  int offset = 0;
  for (const TaskGraph& g : graphs) {
    offsets.push_back(offset);
    out.compute.insert(out.compute.end(), g.compute.begin(), g.compute.end());
    for (const TaskEdge& e : g.edges) {
      out.edges.push_back({e.src + offset, e.dst + offset, e.data});
    }
    offset += g.num_tasks();
  }
  return {std::move(out), std::move(offsets)};
}

TaskGraph subgraph_range(const TaskGraph& g, int lo, int hi) {
  if (lo < 0 || hi > g.num_tasks() || lo > hi) {
    throw ValidationError("subgraph range out of bounds");
  }
  TaskGraph out;
  out.compute.assign(g.compute.begin() + lo, g.compute.begin() + hi);
  for (const TaskEdge& e : g.edges) {
    if (e.src >= lo && e.src < hi && e.dst >= lo && e.dst < hi) {
      out.edges.push_back({e.src - lo, e.dst - lo, e.data});
    }
  }
  return out;
}

ValidationReport validate(const TaskGraph& g) {
  ValidationReport report;
  const int n = g.num_tasks();
  if (n == 0) report.issues.push_back("graph has no tasks");

  for (int i = 0; i < n; ++i) {
    if (!(g.compute[i] > 0.0)) {
      report.issues.push_back("task " + std::to_string(i) +
                              ": compute must be > 0");
    }
  }

  bool endpoints_ok = true;
  std::set<std::pair<int, int>> seen;
  for (const TaskEdge& e : g.edges) {
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
      report.issues.push_back("edge (" + std::to_string(e.src) + "," +
                              std::to_string(e.dst) +
                              "): endpoint is not a task");
      endpoints_ok = false;
      continue;
    }
    if (e.src == e.dst) {
      report.issues.push_back("edge (" + std::to_string(e.src) + "," +
                              std::to_string(e.dst) + "): self-loop");
    }
    if (!seen.insert({e.src, e.dst}).second) {
      report.issues.push_back("edge (" + std::to_string(e.src) + "," +
                              std::to_string(e.dst) + "): duplicate");
    }
    if (e.data < 0.0) {
      report.issues.push_back("edge (" + std::to_string(e.src) + "," +
                              std::to_string(e.dst) + "): data must be >= 0");
    }
  }

  if (endpoints_ok) {
    try {
      topological_order(g);
    } catch (const CycleError&) {
      report.issues.push_back("graph contains a cycle");
    }
  }
  return report;
}

nlohmann::json to_json(const TaskGraph& g) {
  nlohmann::json tasks = nlohmann::json::array();
  for (int i = 0; i < g.num_tasks(); ++i) {
    nlohmann::json t;
    if (g.external_ids.empty()) {
      t["id"] = i;
    } else {
      t["id"] = g.external_ids[i];
    }
    t["compute"] = g.compute[i];
    tasks.push_back(std::move(t));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const TaskEdge& e : g.edges) {
    nlohmann::json out;
    if (g.external_ids.empty()) {
      out["src"] = e.src;
      out["dst"] = e.dst;
    } else {
      out["src"] = g.external_ids[e.src];
      out["dst"] = g.external_ids[e.dst];
    }
    out["data"] = e.data;
    edges.push_back(std::move(out));
  }
  return nlohmann::json{{"tasks", std::move(tasks)}, {"edges", std::move(edges)}};
}

namespace {

// Ids in files may be integers or strings; both are mapped to dense 0..n-1.
// Integer ids sort numerically, string ids lexicographically.
std::string id_key(const nlohmann::json& id, const char* where) {
  if (id.is_number_integer()) return std::to_string(id.get<long long>());
  if (id.is_string()) return id.get<std::string>();
  throw IoError(std::string(where) + ": id must be an integer or a string");
}

}  // namespace

TaskGraph taskgraph_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("tasks") || !j.contains("edges")) {
    throw IoError("task graph JSON must have 'tasks' and 'edges'");
  }

  struct Entry {
    bool is_int;
    long long num;
    std::string str;
    double compute;
  };
  std::vector<Entry> entries;
  bool all_int = true;
  for (size_t i = 0; i < j["tasks"].size(); ++i) {
    const auto& t = j["tasks"][i];
    const std::string where = "tasks[" + std::to_string(i) + "]";
    if (!t.contains("id") || !t.contains("compute")) {
      throw IoError(where + ": needs 'id' and 'compute'");
    }
    Entry e;
    e.is_int = t["id"].is_number_integer();
    all_int &= e.is_int;
    e.num = e.is_int ? t["id"].get<long long>() : 0;
    e.str = id_key(t["id"], where.c_str());
    if (!t["compute"].is_number()) {
      throw IoError(where + ".compute: must be a number");
    }
    e.compute = t["compute"].get<double>();
    entries.push_back(std::move(e));
  }

  std::vector<int> perm(entries.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  if (all_int) {
    std::sort(perm.begin(), perm.end(),
              [&](int a, int b) { return entries[a].num < entries[b].num; });
  } else {
    std::sort(perm.begin(), perm.end(),
              [&](int a, int b) { return entries[a].str < entries[b].str; });
  }

  TaskGraph g;
  std::map<std::string, int> dense;
  bool identity = all_int;
  for (size_t rank = 0; rank < perm.size(); ++rank) {
    const Entry& e = entries[perm[rank]];
    if (!dense.emplace(e.str, static_cast<int>(rank)).second) {
      throw IoError("tasks: duplicate id '" + e.str + "'");
    }
    g.compute.push_back(e.compute);
    identity = identity && e.num == static_cast<long long>(rank);
  }
  if (!identity) {
    for (int r : perm) g.external_ids.push_back(entries[r].str);
  }

  for (size_t i = 0; i < j["edges"].size(); ++i) {
    const auto& ej = j["edges"][i];
    const std::string where = "edges[" + std::to_string(i) + "]";
    if (!ej.contains("src") || !ej.contains("dst") || !ej.contains("data")) {
      throw IoError(where + ": needs 'src', 'dst' and 'data'");
    }
    TaskEdge e;
    auto lookup = [&](const char* field) {
      const std::string key = id_key(ej[field], (where + "." + field).c_str());
      auto it = dense.find(key);
      if (it == dense.end()) {
        throw IoError(where + "." + field + ": unknown task id '" + key + "'");
      }
      return it->second;
    };
    e.src = lookup("src");
    e.dst = lookup("dst");
    if (!ej["data"].is_number()) throw IoError(where + ".data: must be a number");
    e.data = ej["data"].get<double>();
    g.edges.push_back(e);
  }
  sort_edges(g.edges);
  return g;
}

}  // namespace dagsched
