#include "dagsched/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "dagsched/errors.hpp"

namespace dagsched {

namespace {

// JSON has no infinity literal; reports store it as the string "inf".
nlohmann::json json_time(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

nlohmann::json json_time_vec(const std::vector<double>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : v) out.push_back(json_time(x));
  return out;
}

}  // namespace

void validate_schedule(const TaskGraph& g, const ComputeNetwork& net,
                       const Schedule& s) {
  const int n = g.num_tasks();
  const int m = net.num_machines();
  if (static_cast<int>(s.mapping.size()) != n) {
    throw ValidationError("mapping must assign every task exactly once");
  }
  for (int t = 0; t < n; ++t) {
    if (s.mapping[t] < 0 || s.mapping[t] >= m) {
      throw ValidationError("task " + std::to_string(t) +
                            ": machine index out of range");
    }
  }
  if (static_cast<int>(s.order.size()) != m) {
    throw ValidationError("order must have one list per machine");
  }

  std::vector<int> position(n, -1);
  for (int q = 0; q < m; ++q) {
    for (size_t i = 0; i < s.order[q].size(); ++i) {
      const int t = s.order[q][i];
      if (t < 0 || t >= n) {
        throw ValidationError("order: unknown task " + std::to_string(t));
      }
      if (s.mapping[t] != q) {
        throw ValidationError("task " + std::to_string(t) +
                              " listed on a machine it is not mapped to");
      }
      if (position[t] != -1) {
        throw ValidationError("task " + std::to_string(t) +
                              " appears twice in order lists");
      }
      position[t] = static_cast<int>(i);
    }
  }
  for (int t = 0; t < n; ++t) {
    if (position[t] == -1) {
      throw ValidationError("task " + std::to_string(t) +
                            " missing from order lists");
    }
  }
  for (const TaskEdge& e : g.edges) {
    if (s.mapping[e.src] == s.mapping[e.dst] &&
        position[e.src] > position[e.dst]) {
      throw ValidationError("order on machine " +
                            std::to_string(s.mapping[e.src]) +
                            " contradicts edge (" + std::to_string(e.src) +
                            "," + std::to_string(e.dst) + ")");
    }
  }
}

MakespanReport simulate_makespan(const TaskGraph& g, const ComputeNetwork& net,
                                 const Schedule& s) {
  validate_schedule(g, net, s);
  const int n = g.num_tasks();
  const int m = net.num_machines();
  const Adjacency adj = build_adjacency(g);

  MakespanReport report;
  report.start.assign(n, 0.0);
  report.finish.assign(n, 0.0);
  report.busy.resize(m);

  std::vector<bool> done(n, false);
  std::vector<size_t> pos(m, 0);
  std::vector<double> avail(m, 0.0);
  int remaining = n;

  while (remaining > 0) {
    bool progressed = false;
    for (int q = 0; q < m; ++q) {
      while (pos[q] < s.order[q].size()) {
        const int t = s.order[q][pos[q]];
        bool ready = true;
        for (int k : adj.in_edges[t]) {
          if (!done[g.edges[k].src]) {
            ready = false;
            break;
          }
        }
        if (!ready) break;

        double est = avail[q];
        for (int k : adj.in_edges[t]) {
          const TaskEdge& e = g.edges[k];
          const double arrival =
              report.finish[e.src] + comm_time(net, e.data, s.mapping[e.src], q);
          est = std::max(est, arrival);
        }
        report.start[t] = est;
        report.finish[t] = est + g.compute[t] / net.speeds[q];
        report.busy[q].emplace_back(report.start[t], report.finish[t]);
        avail[q] = report.finish[t];
        done[t] = true;
        --remaining;
        ++pos[q];
        progressed = true;
      }
    }
    if (!progressed && remaining > 0) {
      throw InfeasibleError(
          "order lists deadlock: no machine can run its next task");
    }
  }

  double makespan = 0.0;
  for (int t = 0; t < n; ++t) makespan = std::max(makespan, report.finish[t]);
  report.makespan = makespan;
  return report;
}

std::vector<std::vector<double>> machine_traffic(const TaskGraph& g,
                                                 const ComputeNetwork& net,
                                                 const Schedule& s) {
  const int n = g.num_tasks();
  const int m = net.num_machines();
  if (static_cast<int>(s.mapping.size()) != n) {
    throw ValidationError("mapping must assign every task exactly once");
  }
  std::vector<std::vector<double>> traffic(m, std::vector<double>(m, 0.0));
  for (const TaskEdge& e : g.edges) {
    const int q = s.mapping[e.src];
    const int r = s.mapping[e.dst];
    if (q < 0 || q >= m || r < 0 || r >= m) {
      throw ValidationError("mapping references an unknown machine");
    }
    if (q != r) traffic[q][r] += e.data;
  }
  return traffic;
}

ThroughputReport evaluate_throughput(const TaskGraph& g,
                                     const ComputeNetwork& net,
                                     const Schedule& s) {
  const int n = g.num_tasks();
  const int m = net.num_machines();

  ThroughputReport report;
  report.traffic = machine_traffic(g, net, s);
  report.t_comp.assign(m, 0.0);
  report.t_out.assign(m, 0.0);
  report.t_in.assign(m, 0.0);
  report.pair_time.assign(m, std::vector<double>(m, 0.0));

  std::vector<double> load(m, 0.0);
  for (int t = 0; t < n; ++t) load[s.mapping[t]] += g.compute[t];

  double tau = 0.0;
  for (int q = 0; q < m; ++q) {
    report.t_comp[q] = load[q] / net.speeds[q];
    double out_total = 0.0;
    double in_total = 0.0;
    for (int r = 0; r < m; ++r) {
      out_total += report.traffic[q][r];
      in_total += report.traffic[r][q];
      if (q != r && report.traffic[q][r] > 0.0) {
        const double b = net.bandwidth[q][r];
        report.pair_time[q][r] =
            b > 0.0 ? report.traffic[q][r] / b : kInfiniteTime;
      }
    }
    report.t_out[q] = out_total / net.bw_out[q];
    report.t_in[q] = in_total / net.bw_in[q];
    tau = std::max({tau, report.t_comp[q], report.t_out[q], report.t_in[q]});
  }
  for (int q = 0; q < m; ++q) {
    for (int r = 0; r < m; ++r) tau = std::max(tau, report.pair_time[q][r]);
  }
  report.tau = tau;
  report.throughput = std::isinf(tau) ? 0.0 : 1.0 / tau;
  return report;
}

nlohmann::json to_json(const Schedule& s) {
  nlohmann::json mapping = nlohmann::json::array();
  for (size_t t = 0; t < s.mapping.size(); ++t) {
    mapping.push_back({{"task", t}, {"machine", s.mapping[t]}});
  }
  return nlohmann::json{{"mapping", std::move(mapping)}, {"order", s.order}};
}

Schedule schedule_from_json(const nlohmann::json& j) {
  if (!j.contains("mapping") || !j.contains("order")) {
    throw IoError("schedule JSON must have 'mapping' and 'order'");
  }
  Schedule s;
  std::vector<std::pair<int, int>> pairs;
  for (size_t i = 0; i < j["mapping"].size(); ++i) {
    const auto& e = j["mapping"][i];
    if (!e.contains("task") || !e.contains("machine")) {
      throw IoError("mapping[" + std::to_string(i) +
                    "]: needs 'task' and 'machine'");
    }
    pairs.emplace_back(e["task"].get<int>(), e["machine"].get<int>());
  }
  s.mapping.assign(pairs.size(), -1);
  for (auto [task, machine] : pairs) {
    if (task < 0 || task >= static_cast<int>(pairs.size()) ||
        s.mapping[task] != -1) {
      throw IoError("mapping: task ids must be dense and unique");
    }
    s.mapping[task] = machine;
  }
  try {
    s.order = j["order"].get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("schedule JSON: ") + e.what());
  }
  return s;
}

nlohmann::json to_json(const MakespanReport& r) {
  nlohmann::json busy = nlohmann::json::array();
  for (const auto& machine : r.busy) {
    nlohmann::json intervals = nlohmann::json::array();
    for (const auto& [b, e] : machine) {
      intervals.push_back({json_time(b), json_time(e)});
    }
    busy.push_back(std::move(intervals));
  }
  return nlohmann::json{{"start", json_time_vec(r.start)},
                        {"finish", json_time_vec(r.finish)},
                        {"busy", std::move(busy)},
                        {"makespan", json_time(r.makespan)}};
}

nlohmann::json to_json(const ThroughputReport& r) {
  nlohmann::json pair_time = nlohmann::json::array();
  for (const auto& row : r.pair_time) pair_time.push_back(json_time_vec(row));
  return nlohmann::json{{"t_comp", json_time_vec(r.t_comp)},
                        {"t_out", json_time_vec(r.t_out)},
                        {"t_in", json_time_vec(r.t_in)},
                        {"pair_time", std::move(pair_time)},
                        {"traffic", r.traffic},
                        {"tau", json_time(r.tau)},
                        {"throughput", r.throughput}};
}

}  // namespace dagsched
