#pragma once

#include <cstdint>
#include <vector>

#include "dagsched/evaluator.hpp"
#include "dagsched/network.hpp"
#include "dagsched/taskgraph.hpp"

namespace dagsched {

/// Upward-rank priority per task: mean execution cost plus the most
/// expensive downstream path (mean transfer cost over connected machine
/// pairs). rank[i] >= rank of every successor.
struct RankTable {
  std::vector<double> rank;
};

RankTable upward_rank(const TaskGraph& g, const ComputeNetwork& net);

/// Makespan-oriented list scheduler: tasks in descending upward rank, each
/// placed on the machine with the earliest finish time, allowed to fill an
/// idle gap when it fits entirely. Deterministic; ties go to the lower
/// machine index, then the lower task id.
Schedule heft(const TaskGraph& g, const ComputeNetwork& net);

/// heft plus the internally computed task times, for exactness checks
/// against simulate_makespan.
struct HeftResult {
  Schedule schedule;
  std::vector<double> start;
  std::vector<double> finish;
  double makespan = 0.0;
};

HeftResult heft_detailed(const TaskGraph& g, const ComputeNetwork& net);

/// Throughput-oriented greedy: tasks in descending upward rank, each placed
/// on the machine that minimizes the bottleneck time of the partial
/// assignment. Order-free objective; order lists follow rank order.
Schedule tp_heft(const TaskGraph& g, const ComputeNetwork& net);

/// Uniform random mapping; per-machine order follows the global topological
/// order, so the result is always feasible.
Schedule random_schedule(const TaskGraph& g, const ComputeNetwork& net,
                         std::uint64_t seed);

/// Wraps a bare mapping into a Schedule by restricting the global
/// topological order to each machine.
Schedule schedule_from_mapping(const TaskGraph& g, int n_machines,
                               std::vector<int> mapping);

}  // namespace dagsched
