#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace dagsched {

constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

/// Heterogeneous machine network. `bandwidth[q][r]` is the directional link
/// bandwidth from machine q to machine r; the diagonal is stored as 0 but
/// means "same machine, transfer is free". An off-diagonal 0 means the
/// machines are not connected. `bw_out`/`bw_in` are per-machine interface
/// capacity caps.
struct ComputeNetwork {
  std::vector<double> speeds;
  std::vector<std::vector<double>> bandwidth;
  std::vector<double> bw_out;
  std::vector<double> bw_in;

  int num_machines() const { return static_cast<int>(speeds.size()); }
};

struct NetSpec {
  int n_machines = 1;
  double speed_lo = 1.0, speed_hi = 10.0;
  double bw_lo = 1.0, bw_hi = 10.0;
  double cap_lo = 5.0, cap_hi = 50.0;
  bool symmetric = true;
  std::uint64_t seed = 0;
};

ComputeNetwork generate_network(const NetSpec& spec);

/// Throws ValidationError when any invariant is broken.
void validate_network(const ComputeNetwork& net);

/// Time to move `data` units from machine q to machine r: 0 on the same
/// machine or for no data, data/B over a live link, infinite otherwise.
double comm_time(const ComputeNetwork& net, double data, int q, int r);

nlohmann::json to_json(const ComputeNetwork& net);
ComputeNetwork network_from_json(const nlohmann::json& j);

}  // namespace dagsched
