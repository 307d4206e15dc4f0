#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "slicewave/markov.hpp"

namespace slicewave {

struct AllocationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TableKind { Greedy, Exhaustive };

// Per-state binary channel-permission map. Rows are packed bitsets over
// the component's channels (slice-major, channel-minor); generated lazily
// and cached, or materialized up front.
class LookupTable : public ChannelPermission {
 public:
  struct Options {
    TableKind kind = TableKind::Greedy;
    uint64_t seed = 0;
    bool materialize = true;
    uint64_t exhaustive_budget = 200'000;  // joint choices per state
  };

  LookupTable(const RadioModel& radio, const StateSpace& space, Options opts);

  uint64_t permitted(uint64_t state_index, int global_slice) const override;
  uint64_t row(uint64_t state_index) const;
  uint64_t seed() const { return opts_.seed; }
  const StateSpace& space() const { return *space_; }
  int channel_offset(int local) const { return offset_[local]; }

  // sum over active channels of C_{s,q,u}(Delta) under this row
  double state_objective(uint64_t state_index) const;

  void save(const std::string& path) const;

  // slice processing order actually used for a state (for priority tests)
  std::vector<int> priority_order(uint64_t state_index) const;

 private:
  uint64_t build_row(uint64_t state_index) const;
  uint64_t build_greedy(const std::vector<int>& n_rh, uint64_t state_index) const;
  uint64_t build_exhaustive(const std::vector<int>& n_rh) const;
  uint64_t delta_from_row(int local, int q, uint64_t row_bits) const;

  const RadioModel* radio_;
  const StateSpace* space_;
  Options opts_;
  std::vector<int> offset_;  // first bit of each local slice
  int total_bits_ = 0;

  std::vector<uint64_t> rows_;  // materialized
  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<uint64_t, uint64_t> cache_;  // lazy
};

struct ComplexityCounts {
  uint64_t proposed = 0;
  uint64_t exhaustive = 0;
};

// exact integer counts via the per-slice factorization
ComplexityCounts complexity_counts(const StateSpace& space, const Scenario& sc);

// Monte-Carlo cross-check: per-state sampling estimate of the same counts
ComplexityCounts complexity_counts_sampled(const StateSpace& space, const Scenario& sc,
                                           int num_samples, uint64_t seed);

}  // namespace slicewave
