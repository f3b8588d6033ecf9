#pragma once

#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dagsched/network.hpp"
#include "dagsched/taskgraph.hpp"

namespace dagsched {

/// Total assignment of tasks to machines plus the execution order on each
/// machine. `mapping[t]` is the machine index of task t; `order[q]` lists the
/// tasks machine q runs, in order.
struct Schedule {
  std::vector<int> mapping;
  std::vector<std::vector<int>> order;
};

/// Throws ValidationError when the schedule is not a valid total assignment
/// for (g, net) or an intra-machine order contradicts a task-graph edge.
void validate_schedule(const TaskGraph& g, const ComputeNetwork& net,
                       const Schedule& s);

struct MakespanReport {
  std::vector<double> start;   // AST per task
  std::vector<double> finish;  // AFT per task
  std::vector<std::vector<std::pair<double, double>>> busy;  // per machine
  double makespan = 0.0;
};

/// Runs each machine's order list against the start-time recursion: a task
/// starts at max(machine available, latest predecessor finish + transfer
/// time) and finishes after compute/speed. Machines never reorder their
/// lists; they idle while the head task waits. Returns infinite times when a
/// required transfer crosses a zero-bandwidth pair. Throws InfeasibleError
/// when cross-machine order constraints deadlock.
MakespanReport simulate_makespan(const TaskGraph& g, const ComputeNetwork& net,
                                 const Schedule& s);

struct ThroughputReport {
  std::vector<double> t_comp;                 // per machine
  std::vector<double> t_out;                  // per machine
  std::vector<double> t_in;                   // per machine
  std::vector<std::vector<double>> pair_time; // per ordered machine pair
  std::vector<std::vector<double>> traffic;   // data moved q -> r
  double tau = 0.0;
  double throughput = 0.0;
};

/// Steady-state pipeline bottleneck: tau is the largest of all per-machine
/// compute/interface times and per-pair link times; throughput is 1/tau.
/// Depends only on s.mapping.
ThroughputReport evaluate_throughput(const TaskGraph& g,
                                     const ComputeNetwork& net,
                                     const Schedule& s);

/// traffic[q][r] = total data on task edges mapped q -> r (q != r).
std::vector<std::vector<double>> machine_traffic(const TaskGraph& g,
                                                 const ComputeNetwork& net,
                                                 const Schedule& s);

nlohmann::json to_json(const Schedule& s);
Schedule schedule_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MakespanReport& r);
nlohmann::json to_json(const ThroughputReport& r);

}  // namespace dagsched
