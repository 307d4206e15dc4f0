#pragma once

#include <string>
#include <vector>

#include "slicewave/markov.hpp"

namespace slicewave {

struct DesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  uint64_t seed = 1;
  uint64_t num_flows = 300'000;    // arrivals generated per replication
  double warmup_fraction = 0.1;    // leading arrivals discarded from stats
  int replications = 10;
  bool lt_sticky = false;  // keep flows on still-permitted channels on LT change
  bool trace = false;      // record an event trace of the first replication
  uint64_t trace_limit = 20'000;
};

struct SampleStat {
  double mean = 0;
  double std_error = 0;
  double lo() const { return mean - 1.96 * std_error; }
  double hi() const { return mean + 1.96 * std_error; }
};

struct DesSliceStats {
  SampleStat blocking;
  SampleStat delay_s;       // admit -> completion
  SampleStat sojourn_s;     // buffer wait
  SampleStat service_s;     // in-service time
  SampleStat throughput_bps;
  SampleStat occupancy;  // time-averaged n, for Little's-law checks
};

struct DesReport {
  std::vector<DesSliceStats> slices;
  SampleStat total_delay_s;  // flow-weighted over all admitted flows
  uint64_t flows_per_replication = 0;
  std::vector<std::string> trace;
};

// current rate of a flow on channel (s, q): the location-averaged capacity
// under the true busy/idle pattern of its interfering channels
double channel_rate(const RadioModel& radio, int s, int q, int u,
                    const std::vector<std::vector<char>>& busy);

// Flow-level simulation of the whole scenario. Under the LT policy the
// per-component permission tables and their state spaces must be supplied
// (indexed like radio.overlap().components).
DesReport run_des(const RadioModel& radio, PolicyKind policy, const SimConfig& cfg,
                  const std::vector<const StateSpace*>& spaces = {},
                  const std::vector<const ChannelPermission*>& tables = {});

}  // namespace slicewave
