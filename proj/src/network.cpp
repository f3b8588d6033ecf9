#include "dagsched/network.hpp"

#include <string>

#include <nlohmann/json.hpp>

#include "dagsched/errors.hpp"
#include "dagsched/rng.hpp"

namespace dagsched {

namespace {

void check_range(double lo, double hi, const char* name) {
  if (!(lo > 0.0) || hi < lo) {
    throw ValidationError(std::string(name) + " must satisfy 0 < lo <= hi");
  }
}

}  // namespace

ComputeNetwork generate_network(const NetSpec& spec) {
  if (spec.n_machines < 1) throw ValidationError("n_machines must be >= 1");
  check_range(spec.speed_lo, spec.speed_hi, "speed_range");
  check_range(spec.bw_lo, spec.bw_hi, "bw_range");
  check_range(spec.cap_lo, spec.cap_hi, "cap_range");

  const int n = spec.n_machines;
  Rng rng(spec.seed);
  ComputeNetwork net;
  net.speeds.reserve(n);
  for (int i = 0; i < n; ++i) {
    net.speeds.push_back(rng.uniform_real(spec.speed_lo, spec.speed_hi));
  }
  net.bandwidth.assign(n, std::vector<double>(n, 0.0));
  if (spec.symmetric) {
    for (int q = 0; q < n; ++q) {
      for (int r = q + 1; r < n; ++r) {
        const double b = rng.uniform_real(spec.bw_lo, spec.bw_hi);
        net.bandwidth[q][r] = b;
        net.bandwidth[r][q] = b;
      }
    }
  } else {
    for (int q = 0; q < n; ++q) {
      for (int r = 0; r < n; ++r) {
        if (q != r) net.bandwidth[q][r] = rng.uniform_real(spec.bw_lo, spec.bw_hi);
      }
    }
  }
  net.bw_out.reserve(n);
  for (int i = 0; i < n; ++i) {
    net.bw_out.push_back(rng.uniform_real(spec.cap_lo, spec.cap_hi));
  }
  net.bw_in.reserve(n);
  for (int i = 0; i < n; ++i) {
    net.bw_in.push_back(rng.uniform_real(spec.cap_lo, spec.cap_hi));
  }
  return net;
}

void validate_network(const ComputeNetwork& net) {
  const size_t n = net.speeds.size();
  if (n == 0) throw ValidationError("network needs at least one machine");
  for (double s : net.speeds) {
    if (!(s > 0.0)) throw ValidationError("machine speeds must be > 0");
  }
  if (net.bandwidth.size() != n) {
    throw ValidationError("bandwidth matrix must be n x n");
  }
  for (const auto& row : net.bandwidth) {
    if (row.size() != n) throw ValidationError("bandwidth matrix must be n x n");
    for (double b : row) {
      if (b < 0.0) throw ValidationError("bandwidth must be >= 0");
    }
  }
  if (net.bw_out.size() != n || net.bw_in.size() != n) {
    throw ValidationError("bw_out/bw_in must have one entry per machine");
  }
  for (size_t i = 0; i < n; ++i) {
    if (!(net.bw_out[i] > 0.0) || !(net.bw_in[i] > 0.0)) {
      throw ValidationError("interface caps must be > 0");
    }
  }
}

double comm_time(const ComputeNetwork& net, double data, int q, int r) {
  if (q == r) return 0.0;
  if (data == 0.0) return 0.0;
  const double b = net.bandwidth[q][r];
  if (b > 0.0) return data / b;
  return kInfiniteTime;
}

nlohmann::json to_json(const ComputeNetwork& net) {
  return nlohmann::json{{"speeds", net.speeds},
                        {"bandwidth", net.bandwidth},
                        {"bw_out", net.bw_out},
                        {"bw_in", net.bw_in}};
}

ComputeNetwork network_from_json(const nlohmann::json& j) {
  for (const char* field : {"speeds", "bandwidth", "bw_out", "bw_in"}) {
    if (!j.contains(field)) {
      throw IoError(std::string("network JSON: missing '") + field + "'");
    }
  }
  ComputeNetwork net;
  try {
    net.speeds = j["speeds"].get<std::vector<double>>();
    net.bandwidth = j["bandwidth"].get<std::vector<std::vector<double>>>();
    net.bw_out = j["bw_out"].get<std::vector<double>>();
    net.bw_in = j["bw_in"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("network JSON: ") + e.what());
  }
  validate_network(net);
  return net;
}

}  // namespace dagsched
