#include "slicewave/allocation.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <numeric>
#include <random>

#include "slicewave/solver.hpp"

namespace slicewave {

LookupTable::LookupTable(const RadioModel& radio, const StateSpace& space, Options opts)
    : radio_(&radio), space_(&space), opts_(opts) {
  const auto& sc = radio.scenario();
  offset_.resize(space.num_slices());
  for (int s = 0; s < space.num_slices(); ++s) {
    offset_[s] = total_bits_;
    total_bits_ += sc.slices[space.slices()[s]].num_channels;
  }
  if (total_bits_ > 64)
    throw AllocationError("lookup table: component has more than 64 channels");

  if (opts_.materialize) {
    rows_.resize(space.size());
    // per-state construction is independent; chunked for determinism
    parallel_chunks(space.size(), [&](uint64_t lo, uint64_t hi, int) {
      for (uint64_t i = lo; i < hi; ++i) rows_[i] = build_row(i);
    });
  }
}

uint64_t LookupTable::row(uint64_t state_index) const {
  if (!rows_.empty()) return rows_[state_index];
  {
    std::lock_guard lock(cache_mutex_);
    auto it = cache_.find(state_index);
    if (it != cache_.end()) return it->second;
  }
  uint64_t r = build_row(state_index);
  std::lock_guard lock(cache_mutex_);
  cache_.emplace(state_index, r);
  return r;
}

uint64_t LookupTable::permitted(uint64_t state_index, int global_slice) const {
  const int local = space_->local_of(global_slice);
  const int Q = radio_->scenario().slices[global_slice].num_channels;
  return (row(state_index) >> offset_[local]) & ((1ull << Q) - 1);
}

uint64_t LookupTable::delta_from_row(int local, int q, uint64_t row_bits) const {
  const int g = space_->slices()[local];
  const auto layout = radio_->overlap().delta_layout(g, q);
  uint64_t delta = 0;
  for (size_t j = 0; j < layout.size(); ++j) {
    int lp = space_->local_of(layout[j].slice);
    if (row_bits >> (offset_[lp] + layout[j].channel) & 1) delta |= 1ull << j;
  }
  return delta;
}

std::vector<int> LookupTable::priority_order(uint64_t state_index) const {
  const auto& sc = radio_->scenario();
  const int S = space_->num_slices();
  std::vector<int> n_rh(S);
  space_->decode(state_index, n_rh);

  std::vector<int> order(S);
  std::iota(order.begin(), order.end(), 0);
  // seeded shuffle first so that stable_sort breaks ratio ties randomly
  std::mt19937_64 rng(opts_.seed ^ state_index);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    double ra = (double)n_rh[a] / sc.slices[space_->slices()[a]].num_channels;
    double rb = (double)n_rh[b] / sc.slices[space_->slices()[b]].num_channels;
    return ra > rb;
  });
  return order;
}

uint64_t LookupTable::build_greedy(const std::vector<int>& n_rh, uint64_t state_index) const {
  const auto& sc = radio_->scenario();
  uint64_t row_bits = 0;
  for (int local : priority_order(state_index)) {
    const int g = space_->slices()[local];
    const auto& sl = sc.slices[g];
    const int take = std::min(n_rh[local], sl.num_channels);
    if (take == 0) continue;
    // rank channels by capacity under interference from already-set bits
    std::vector<std::pair<double, int>> ranked;
    for (int q = 0; q < sl.num_channels; ++q) {
      double c = radio_->avg_capacity(g, q, sl.sp, delta_from_row(local, q, row_bits));
      ranked.emplace_back(-c, q);  // ties by ascending channel id
    }
    std::sort(ranked.begin(), ranked.end());
    for (int k = 0; k < take; ++k) row_bits |= 1ull << (offset_[local] + ranked[k].second);
  }
  return row_bits;
}

uint64_t LookupTable::build_exhaustive(const std::vector<int>& n_rh) const {
  const auto& sc = radio_->scenario();
  const int S = space_->num_slices();

  // per-slice channel subsets of size min(n, Q)
  std::vector<std::vector<uint64_t>> choices(S);
  uint64_t joint = 1;
  for (int local = 0; local < S; ++local) {
    const auto& sl = sc.slices[space_->slices()[local]];
    const int take = std::min(n_rh[local], sl.num_channels);
    for (uint64_t m = 0; m < (1ull << sl.num_channels); ++m)
      if (std::popcount(m) == take) choices[local].push_back(m << offset_[local]);
    joint *= choices[local].size();
    if (joint > opts_.exhaustive_budget)
      throw AllocationError("exhaustive table: per-state choice count exceeds budget");
  }

  uint64_t best_row = 0;
  double best_score = -1.0;
  std::vector<size_t> pick(S, 0);
  for (uint64_t it = 0; it < joint; ++it) {
    uint64_t row_bits = 0;
    for (int local = 0; local < S; ++local) row_bits |= choices[local][pick[local]];
    double score = 0.0;
    for (int local = 0; local < S; ++local) {
      const int g = space_->slices()[local];
      const auto& sl = sc.slices[g];
      for (int q = 0; q < sl.num_channels; ++q)
        if (row_bits >> (offset_[local] + q) & 1)
          score += radio_->avg_capacity(g, q, sl.sp, delta_from_row(local, q, row_bits));
    }
    if (score > best_score) {
      best_score = score;
      best_row = row_bits;
    }
    for (int local = S - 1; local >= 0; --local) {
      if (++pick[local] < choices[local].size()) break;
      pick[local] = 0;
    }
  }
  return best_row;
}

uint64_t LookupTable::build_row(uint64_t state_index) const {
  std::vector<int> n_rh(space_->num_slices());
  space_->decode(state_index, n_rh);
  return opts_.kind == TableKind::Greedy ? build_greedy(n_rh, state_index)
                                         : build_exhaustive(n_rh);
}

double LookupTable::state_objective(uint64_t state_index) const {
  const auto& sc = radio_->scenario();
  const uint64_t row_bits = row(state_index);
  double score = 0.0;
  for (int local = 0; local < space_->num_slices(); ++local) {
    const int g = space_->slices()[local];
    const auto& sl = sc.slices[g];
    for (int q = 0; q < sl.num_channels; ++q)
      if (row_bits >> (offset_[local] + q) & 1)
        score += radio_->avg_capacity(g, q, sl.sp, delta_from_row(local, q, row_bits));
  }
  return score;
}

void LookupTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw AllocationError("lookup table: cannot open " + path);
  const char magic[6] = "SWLT1";
  out.write(magic, 5);
  auto w64 = [&](uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  w64(opts_.seed);
  w64((uint64_t)space_->num_slices());
  for (int s = 0; s < space_->num_slices(); ++s)
    w64((uint64_t)radio_->scenario().slices[space_->slices()[s]].num_channels);
  w64(space_->size());
  for (uint64_t i = 0; i < space_->size(); ++i) w64(row(i));
}

ComplexityCounts complexity_counts(const StateSpace& space, const Scenario& sc) {
  const int S = space.num_slices();
  const uint64_t N = space.size();

  // proposed: sum_n sum_s sgn(n_s) Q_s = sum_s Q_s * N * qmax/(qmax+1)
  unsigned __int128 proposed = 0;
  for (int s = 0; s < S; ++s) {
    const uint64_t Q = sc.slices[space.slices()[s]].num_channels;
    proposed += (unsigned __int128)Q * (N / (space.qmax(s) + 1)) * space.qmax(s);
  }

  // exhaustive: factorizes into per-slice sums of g(n) = C(Q, min(n,Q))
  // and h(n) = min(n, Q)
  std::vector<unsigned __int128> g_sum(S, 0), hg_sum(S, 0);
  for (int s = 0; s < S; ++s) {
    const int Q = sc.slices[space.slices()[s]].num_channels;
    for (int n = 0; n <= space.qmax(s); ++n) {
      uint64_t g = (uint64_t)binomial(Q, std::min(n, Q));
      g_sum[s] += g;
      hg_sum[s] += (unsigned __int128)std::min(n, Q) * g;
    }
  }
  unsigned __int128 exhaustive = 0;
  for (int s = 0; s < S; ++s) {
    unsigned __int128 term = hg_sum[s];
    for (int t = 0; t < S; ++t)
      if (t != s) term *= g_sum[t];
    exhaustive += term;
  }

  auto clamp64 = [](unsigned __int128 v) {
    if (v > (unsigned __int128)UINT64_MAX)
      throw AllocationError("complexity count overflows 64 bits");
    return (uint64_t)v;
  };
  return {clamp64(proposed), clamp64(exhaustive)};
}

ComplexityCounts complexity_counts_sampled(const StateSpace& space, const Scenario& sc,
                                           int num_samples, uint64_t seed) {
  const int S = space.num_slices();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<uint64_t> pick(0, space.size() - 1);
  long double prop = 0, exh = 0;
  std::vector<int> n_rh(S);
  for (int i = 0; i < num_samples; ++i) {
    space.decode(pick(rng), n_rh);
    long double per_prop = 0, per_h = 0, per_prod = 1;
    for (int s = 0; s < S; ++s) {
      const int Q = sc.slices[space.slices()[s]].num_channels;
      if (n_rh[s] > 0) per_prop += Q;
      per_h += std::min(n_rh[s], Q);
      per_prod *= binomial(Q, std::min(n_rh[s], Q));
    }
    prop += per_prop;
    exh += per_h * per_prod;
  }
  const long double scale = (long double)space.size() / num_samples;
  return {(uint64_t)(prop * scale + 0.5L), (uint64_t)(exh * scale + 0.5L)};
}

}  // namespace slicewave
