#include "dagsched/heuristics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dagsched/errors.hpp"
#include "dagsched/rng.hpp"

namespace dagsched {

namespace {

// Tasks sorted by descending rank, ties by ascending id.
std::vector<int> rank_order(const RankTable& table) {
  std::vector<int> order(table.rank.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (table.rank[a] != table.rank[b]) return table.rank[a] > table.rank[b];
    return a < b;
  });
  return order;
}

double mean_inverse_bandwidth(const ComputeNetwork& net) {
  const int m = net.num_machines();
  double sum = 0.0;
  int count = 0;
  for (int q = 0; q < m; ++q) {
    for (int r = 0; r < m; ++r) {
      if (q != r && net.bandwidth[q][r] > 0.0) {
        sum += 1.0 / net.bandwidth[q][r];
        ++count;
      }
    }
  }
  return count == 0 ? 0.0 : sum / count;
}

}  // namespace

RankTable upward_rank(const TaskGraph& g, const ComputeNetwork& net) {
  const int n = g.num_tasks();
  const int m = net.num_machines();
  const double mean_inv_bw = mean_inverse_bandwidth(net);
  const Adjacency adj = build_adjacency(g);

  std::vector<double> mean_exec(n, 0.0);
  for (int t = 0; t < n; ++t) {
    double sum = 0.0;
    for (int j = 0; j < m; ++j) sum += g.compute[t] / net.speeds[j];
    mean_exec[t] = sum / m;
  }

  RankTable table;
  table.rank.assign(n, 0.0);
  const std::vector<int> topo = topological_order(g);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const int t = *it;
    double best = 0.0;
    for (int k : adj.out_edges[t]) {
      const TaskEdge& e = g.edges[k];
      best = std::max(best, e.data * mean_inv_bw + table.rank[e.dst]);
    }
    table.rank[t] = mean_exec[t] + best;
  }
  return table;
}

namespace {

struct BusySlot {
  double start;
  double end;
};

// Earliest start >= est on a machine whose committed slots are `timeline`,
// using the insertion policy: an idle gap may be used if the task fits
// entirely, otherwise the task goes after the last slot.
double insertion_start(const std::vector<BusySlot>& timeline, double est,
                       double exec) {
  double prev_end = 0.0;
  for (const BusySlot& slot : timeline) {
    const double candidate = std::max(est, prev_end);
    if (candidate + exec <= slot.start) return candidate;
    prev_end = slot.end;
  }
  return std::max(est, prev_end);
}

}  // namespace

HeftResult heft_detailed(const TaskGraph& g, const ComputeNetwork& net) {
  const int n = g.num_tasks();
  const int m = net.num_machines();
  const Adjacency adj = build_adjacency(g);
  const std::vector<int> priority = rank_order(upward_rank(g, net));

  HeftResult result;
  result.schedule.mapping.assign(n, -1);
  result.schedule.order.resize(m);
  result.start.assign(n, 0.0);
  result.finish.assign(n, 0.0);

  std::vector<std::vector<BusySlot>> timeline(m);
  std::vector<int> commit_seq(n, 0);

  int seq = 0;
  for (int t : priority) {
    int best_machine = -1;
    double best_start = 0.0;
    double best_eft = kInfiniteTime;
    for (int j = 0; j < m; ++j) {
      double est = 0.0;
      for (int k : adj.in_edges[t]) {
        const TaskEdge& e = g.edges[k];
        const double arrival =
            result.finish[e.src] +
            comm_time(net, e.data, result.schedule.mapping[e.src], j);
        est = std::max(est, arrival);
      }
      const double exec = g.compute[t] / net.speeds[j];
      double start;
      double eft;
      if (std::isinf(est)) {
        start = kInfiniteTime;
        eft = kInfiniteTime;
      } else {
        start = insertion_start(timeline[j], est, exec);
        eft = start + exec;
      }
      if (best_machine == -1 || eft < best_eft) {
        best_machine = j;
        best_start = start;
        best_eft = eft;
      }
    }

    result.schedule.mapping[t] = best_machine;
    result.start[t] = best_start;
    result.finish[t] = best_eft;
    commit_seq[t] = seq++;
    if (!std::isinf(best_start)) {
      auto& tl = timeline[best_machine];
      const BusySlot slot{best_start, best_eft};
      tl.insert(std::upper_bound(tl.begin(), tl.end(), slot,
                                 [](const BusySlot& a, const BusySlot& b) {
                                   return a.start < b.start;
                                 }),
                slot);
    }
    result.schedule.order[best_machine].push_back(t);
  }

  for (int q = 0; q < m; ++q) {
    std::sort(result.schedule.order[q].begin(), result.schedule.order[q].end(),
              [&](int a, int b) {
                if (result.start[a] != result.start[b]) {
                  return result.start[a] < result.start[b];
                }
                return commit_seq[a] < commit_seq[b];
              });
  }

  double makespan = 0.0;
  for (int t = 0; t < n; ++t) makespan = std::max(makespan, result.finish[t]);
  result.makespan = makespan;
  return result;
}

Schedule heft(const TaskGraph& g, const ComputeNetwork& net) {
  return heft_detailed(g, net).schedule;
}

namespace {

struct TpState {
  std::vector<double> comp_load;           // total compute per machine
  std::vector<std::vector<double>> traffic;
};

double tp_tau(const TpState& st, const ComputeNetwork& net) {
  const int m = net.num_machines();
  double tau = 0.0;
  for (int q = 0; q < m; ++q) {
    double out_total = 0.0;
    double in_total = 0.0;
    for (int r = 0; r < m; ++r) {
      out_total += st.traffic[q][r];
      in_total += st.traffic[r][q];
      if (q != r && st.traffic[q][r] > 0.0) {
        const double b = net.bandwidth[q][r];
        tau = std::max(tau, b > 0.0 ? st.traffic[q][r] / b : kInfiniteTime);
      }
    }
    tau = std::max({tau, st.comp_load[q] / net.speeds[q],
                    out_total / net.bw_out[q], in_total / net.bw_in[q]});
  }
  return tau;
}

}  // namespace

Schedule tp_heft(const TaskGraph& g, const ComputeNetwork& net) {
  const int n = g.num_tasks();
  const int m = net.num_machines();
  const Adjacency adj = build_adjacency(g);
  const std::vector<int> priority = rank_order(upward_rank(g, net));

  Schedule s;
  s.mapping.assign(n, -1);
  s.order.resize(m);

  TpState state;
  state.comp_load.assign(m, 0.0);
  state.traffic.assign(m, std::vector<double>(m, 0.0));

  auto apply_task = [&](TpState& st, int t, int q) {
    st.comp_load[q] += g.compute[t];
    for (int k : adj.in_edges[t]) {
      const TaskEdge& e = g.edges[k];
      const int r = s.mapping[e.src];
      if (r != -1 && r != q) st.traffic[r][q] += e.data;
    }
    for (int k : adj.out_edges[t]) {
      const TaskEdge& e = g.edges[k];
      const int r = s.mapping[e.dst];
      if (r != -1 && q != r) st.traffic[q][r] += e.data;
    }
  };

  for (int t : priority) {
    int best_machine = -1;
    double best_tau = kInfiniteTime;
    for (int q = 0; q < m; ++q) {
      TpState candidate = state;
      apply_task(candidate, t, q);
      const double tau = tp_tau(candidate, net);
      if (best_machine == -1 || tau < best_tau) {
        best_machine = q;
        best_tau = tau;
      }
    }
    apply_task(state, t, best_machine);
    s.mapping[t] = best_machine;
    s.order[best_machine].push_back(t);
  }
  return s;
}

Schedule schedule_from_mapping(const TaskGraph& g, int n_machines,
                               std::vector<int> mapping) {
  Schedule s;
  s.order.resize(n_machines);
  for (int t : topological_order(g)) s.order[mapping[t]].push_back(t);
  s.mapping = std::move(mapping);
  return s;
}

Schedule random_schedule(const TaskGraph& g, const ComputeNetwork& net,
                         std::uint64_t seed) {
  const int n = g.num_tasks();
  const int m = net.num_machines();
  Rng rng(seed);
  std::vector<int> mapping(n);
  for (int t = 0; t < n; ++t) {
    mapping[t] = static_cast<int>(rng.uniform_int(0, m - 1));
  }
  return schedule_from_mapping(g, m, std::move(mapping));
}

}  // namespace dagsched
