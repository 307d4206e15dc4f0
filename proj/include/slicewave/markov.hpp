#pragma once

#include <cstdint>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "slicewave/radio.hpp"
#include "slicewave/scenario.hpp"

namespace slicewave {

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// State space of one interacting component. States are the per-slice
// customer counts n_RH; n_LH is implied by n_LH + n_RH = Q^max.
class StateSpace {
 public:
  static constexpr uint64_t kDefaultMaxStates = 8'000'000;

  StateSpace(const Scenario& sc, std::vector<int> component_slices,
             uint64_t max_states = kDefaultMaxStates);

  uint64_t size() const { return size_; }
  int num_slices() const { return (int)slices_.size(); }
  const std::vector<int>& slices() const { return slices_; }  // global indices
  int qmax(int local) const { return qmax_[local]; }
  int local_of(int global_slice) const;  // -1 if not in this component

  void decode(uint64_t index, std::span<int> n_rh) const;
  uint64_t index_of(std::span<const int> n_rh) const;

 private:
  std::vector<int> slices_;
  std::vector<int> qmax_;
  std::vector<uint64_t> strides_;  // lexicographic, first slice most significant
  std::vector<int> local_;         // global -> local
  uint64_t size_ = 1;
};

// Two-part vector (x_LH, x_RH); entries of x_LH may reach -1 transiently
// when evaluating Psi at arrival predecessors.
struct TwoPartVec {
  std::vector<int> lh, rh;
};

// e(x): left part zero, e_s = 1 iff x_LH(s) + x_RH(s) != Q^max_s
std::vector<int> e_vector(const TwoPartVec& x, std::span<const int> qmax);

enum class PolicyKind { Random, LookupTable };

// Per-state channel permission map, implemented by allocation::LookupTable.
class ChannelPermission {
 public:
  virtual ~ChannelPermission() = default;
  // bit q set iff channel q of the slice may carry a flow in this state
  virtual uint64_t permitted(uint64_t state_index, int global_slice) const = 0;
};

// The state-dependent rate layer: Lambda, interference-vector
// probabilities, channel-averaged capacity and M.
class RateModel {
 public:
  RateModel(const RadioModel& radio, const StateSpace& space,
            std::vector<double> lambda, PolicyKind policy = PolicyKind::Random,
            const ChannelPermission* lt = nullptr);

  const StateSpace& space() const { return *space_; }
  const RadioModel& radio() const { return *radio_; }
  PolicyKind policy() const { return policy_; }
  double lambda(int local) const { return lambda_[local]; }

  // Lambda_{s,u}(n): lambda below capacity, 0 at the blocking boundary
  double arrival_rate(int local, int n) const;

  // Pr(Delta_{s,q}) for the component state n_rh
  double interference_vector_prob(int local, int q, uint64_t mask,
                                  std::span<const int> n_rh) const;

  // C_{s,u}(n_RH): harmonic mixing over interference states, then
  // channel averaging with Pr(q)
  double equivalent_capacity(int local, std::span<const int> n_rh) const;

  // M_{s,u}(n_RH); 1 in empty states by convention. Memoized.
  double service_rate(int local, std::span<const int> n_rh) const;

 private:
  uint64_t memo_key(int local, std::span<const int> n_rh) const;
  uint64_t lt_delta(int local, int q, uint64_t state_index) const;

  const RadioModel* radio_;
  const StateSpace* space_;
  std::vector<double> lambda_;  // per local slice
  PolicyKind policy_;
  const ChannelPermission* lt_;

  // locals whose occupancy can influence M of each slice (self + interferers)
  std::vector<std::vector<int>> relevant_;
  mutable std::mutex memo_mutex_;
  mutable std::vector<std::unordered_map<uint64_t, double>> memo_;
};

// exact binomial for small arguments
double binomial(int n, int k);

}  // namespace slicewave
