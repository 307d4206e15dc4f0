#include "slicewave/markov.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace slicewave {

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

StateSpace::StateSpace(const Scenario& sc, std::vector<int> component_slices,
                       uint64_t max_states)
    : slices_(std::move(component_slices)) {
  if (slices_.empty()) throw CapacityError("state space: empty component");
  std::sort(slices_.begin(), slices_.end());
  local_.assign(sc.num_slices(), -1);
  for (int i = 0; i < (int)slices_.size(); ++i) {
    qmax_.push_back(sc.slices[slices_[i]].queue_cap);
    local_[slices_[i]] = i;
  }
  size_ = 1;
  for (int q : qmax_) {
    uint64_t next = size_ * (uint64_t)(q + 1);
    if (next / (q + 1) != size_ || next > max_states)
      throw CapacityError("state space exceeds configured maximum of " +
                          std::to_string(max_states) + " states");
    size_ = next;
  }
  strides_.resize(qmax_.size());
  uint64_t stride = 1;
  for (int i = (int)qmax_.size() - 1; i >= 0; --i) {
    strides_[i] = stride;
    stride *= qmax_[i] + 1;
  }
}

int StateSpace::local_of(int global_slice) const { return local_[global_slice]; }

void StateSpace::decode(uint64_t index, std::span<int> n_rh) const {
  for (size_t i = 0; i < qmax_.size(); ++i) {
    n_rh[i] = (int)(index / strides_[i]);
    index %= strides_[i];
  }
}

uint64_t StateSpace::index_of(std::span<const int> n_rh) const {
  uint64_t idx = 0;
  for (size_t i = 0; i < qmax_.size(); ++i) idx += (uint64_t)n_rh[i] * strides_[i];
  return idx;
}

std::vector<int> e_vector(const TwoPartVec& x, std::span<const int> qmax) {
  std::vector<int> e(x.rh.size(), 0);
  for (size_t s = 0; s < x.rh.size(); ++s)
    e[s] = (x.lh[s] + x.rh[s] != qmax[s]) ? 1 : 0;
  return e;
}

RateModel::RateModel(const RadioModel& radio, const StateSpace& space,
                     std::vector<double> lambda, PolicyKind policy,
                     const ChannelPermission* lt)
    : radio_(&radio), space_(&space), lambda_(std::move(lambda)), policy_(policy), lt_(lt) {
  if (policy_ == PolicyKind::LookupTable && lt_ == nullptr)
    throw std::invalid_argument("LookupTable policy requires a lookup table");
  const auto& ov = radio.overlap();
  relevant_.resize(space.num_slices());
  memo_.resize(space.num_slices());
  for (int i = 0; i < space.num_slices(); ++i) {
    int g = space.slices()[i];
    std::vector<int> rel{i};
    for (const auto& per_q : ov.neighbor_slices[g])
      for (int sp : per_q) rel.push_back(space.local_of(sp));
    std::sort(rel.begin(), rel.end());
    rel.erase(std::unique(rel.begin(), rel.end()), rel.end());
    relevant_[i] = std::move(rel);
  }
}

double RateModel::arrival_rate(int local, int n) const {
  return (n >= 0 && n < space_->qmax(local)) ? lambda_[local] : 0.0;
}

uint64_t RateModel::lt_delta(int local, int q, uint64_t state_index) const {
  const int g = space_->slices()[local];
  const auto layout = radio_->overlap().delta_layout(g, q);
  uint64_t delta = 0;
  int prev_slice = -1;
  uint64_t prev_bits = 0;
  for (size_t j = 0; j < layout.size(); ++j) {
    if (layout[j].slice != prev_slice) {
      prev_slice = layout[j].slice;
      prev_bits = lt_->permitted(state_index, prev_slice);
    }
    if (prev_bits >> layout[j].channel & 1) delta |= 1ull << j;
  }
  return delta;
}

double RateModel::interference_vector_prob(int local, int q, uint64_t mask,
                                           std::span<const int> n_rh) const {
  const int g = space_->slices()[local];
  const auto layout = radio_->overlap().delta_layout(g, q);

  if (policy_ == PolicyKind::LookupTable)
    return mask == lt_delta(local, q, space_->index_of(n_rh)) ? 1.0 : 0.0;

  // random policy: product of per-interfering-slice hypergeometric factors
  double prob = 1.0;
  size_t j = 0;
  while (j < layout.size()) {
    const int sp = layout[j].slice;
    int dim = 0;
    int norm = 0;
    while (j < layout.size() && layout[j].slice == sp) {
      ++dim;
      if (mask >> j & 1) ++norm;
      ++j;
    }
    const int lp = space_->local_of(sp);
    const int n = n_rh[lp];
    const int Q = radio_->scenario().slices[sp].num_channels;
    double f;
    if (n > Q) {
      f = (norm == dim) ? 1.0 : 0.0;  // all servers busy: every channel active
    } else if (n - norm >= 0 && n - norm <= Q - dim) {
      f = binomial(Q - dim, n - norm) / binomial(Q, n);
    } else {
      f = 0.0;
    }
    prob *= f;
    if (prob == 0.0) return 0.0;
  }
  return prob;
}

double RateModel::equivalent_capacity(int local, std::span<const int> n_rh) const {
  const int g = space_->slices()[local];
  const auto& sl = radio_->scenario().slices[g];
  const int Q = sl.num_channels;
  const int u = sl.sp;

  if (policy_ == PolicyKind::LookupTable) {
    const uint64_t idx = space_->index_of(n_rh);
    const uint64_t perm = lt_->permitted(idx, g);
    const int busy = std::min(n_rh[local], Q);
    double cap = 0.0;
    for (int q = 0; q < Q; ++q)
      if (perm >> q & 1)
        cap += radio_->avg_capacity(g, q, u, lt_delta(local, q, idx)) / busy;
    return cap;
  }

  double cap = 0.0;
  for (int q = 0; q < Q; ++q) {
    const int dim = radio_->delta_dim(g, q);
    double inv = 0.0;
    for (uint64_t mask = 0; mask < (1ull << dim); ++mask) {
      double p = interference_vector_prob(local, q, mask, n_rh);
      if (p > 0) inv += p / radio_->avg_capacity(g, q, u, mask);
    }
    cap += (1.0 / inv) / Q;  // Pr(q) = 1/Q_s under random allocation
  }
  return cap;
}

uint64_t RateModel::memo_key(int local, std::span<const int> n_rh) const {
  if (policy_ == PolicyKind::LookupTable) return space_->index_of(n_rh);
  uint64_t key = 0;
  for (int r : relevant_[local]) key = key * (uint64_t)(space_->qmax(r) + 1) + n_rh[r];
  return key;
}

double RateModel::service_rate(int local, std::span<const int> n_rh) const {
  const int n = n_rh[local];
  if (n <= 0) return 1.0;  // neutral convention for empty queues

  const uint64_t key = memo_key(local, n_rh);
  {
    std::lock_guard lock(memo_mutex_);
    auto it = memo_[local].find(key);
    if (it != memo_[local].end()) return it->second;
  }
  const int g = space_->slices()[local];
  const auto& sl = radio_->scenario().slices[g];
  const double omega = radio_->scenario().sps[sl.sp].mean_flow_bits;
  double m = equivalent_capacity(local, n_rh) / omega * std::min(n, sl.num_channels);
  std::lock_guard lock(memo_mutex_);
  memo_[local].emplace(key, m);
  return m;
}

}  // namespace slicewave
