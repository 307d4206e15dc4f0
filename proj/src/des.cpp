#include "slicewave/des.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "slicewave/solver.hpp"

namespace slicewave {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

struct Flow {
  int slice = 0;
  double size_bits = 0;
  double remaining = 0;
  double served = 0;  // work-conservation ledger
  double arrival_t = 0;
  double service_start = -1;  // first time it got a channel
  int channel = -1;           // -1 while buffered
};

// per-replication accumulators
struct SliceAcc {
  uint64_t arrivals = 0, blocked = 0, completed = 0;
  double delay = 0, wait = 0, service = 0;  // sums over measured flows
  double bits = 0;                          // sizes of measured admitted flows
  double area = 0;                          // integral of n over the window
};

struct RepResult {
  std::vector<SliceAcc> acc;
  double window = 0;        // measurement duration
  double total_delay = 0;   // flow-weighted mean over all admitted flows
  std::vector<std::string> trace;
};

class Simulation {
 public:
  Simulation(const RadioModel& radio, PolicyKind policy, const SimConfig& cfg,
             const std::vector<const StateSpace*>& spaces,
             const std::vector<const ChannelPermission*>& tables, uint64_t seed,
             bool keep_trace)
      : radio_(radio),
        sc_(radio.scenario()),
        policy_(policy),
        cfg_(cfg),
        spaces_(spaces),
        tables_(tables),
        rng_(seed),
        keep_trace_(keep_trace) {
    const int S = sc_.num_slices();
    lambda_ = arrival_rates(sc_);
    total_rate_ = 0;
    for (double l : lambda_) total_rate_ += l;
    if (!(total_rate_ > 0)) throw DesError("des: total arrival rate is zero");
    slice_pick_ = std::discrete_distribution<int>(lambda_.begin(), lambda_.end());

    busy_.resize(S);
    chan_flow_.resize(S);
    layouts_.resize(S);
    for (int s = 0; s < S; ++s) {
      const int Q = sc_.slices[s].num_channels;
      busy_[s].assign(Q, 0);
      chan_flow_[s].assign(Q, -1);
      layouts_[s].resize(Q);
      for (int q = 0; q < Q; ++q) layouts_[s][q] = radio.overlap().delta_layout(s, q);
    }
    queue_.resize(S);
    acc_.resize(S);
    if (policy_ == PolicyKind::LookupTable &&
        (spaces_.size() != radio.overlap().components.size() ||
         tables_.size() != radio.overlap().components.size()))
      throw DesError("des: LT policy needs one table per interacting component");
  }

  RepResult run() {
    const uint64_t warmup = (uint64_t)(cfg_.warmup_fraction * cfg_.num_flows);
    double next_arrival = sample_exp(total_rate_);
    double t0 = 0, t_end = -1;
    bool in_window = warmup == 0;
    uint64_t generated = 0;

    while (generated < cfg_.num_flows || active_flows_ > 0 || buffered_flows_ > 0) {
      refresh_rates();
      // candidate departure: min remaining/rate among in-service flows
      double dep_dt = std::numeric_limits<double>::infinity();
      int dep_flow = -1;
      for (int f : service_set_) {
        double dt = flows_[f].remaining / rate_of_[f];
        if (dt < dep_dt) {
          dep_dt = dt;
          dep_flow = f;
        }
      }
      double arr_dt = generated < cfg_.num_flows
                          ? next_arrival - clock_
                          : std::numeric_limits<double>::infinity();
      const bool is_arrival = arr_dt < dep_dt;
      const double dt = is_arrival ? arr_dt : dep_dt;
      if (!std::isfinite(dt)) throw DesError("des: event calendar stalled");

      // advance: remaining-bits bookkeeping for every in-service flow
      for (int f : service_set_) {
        double d = rate_of_[f] * dt;
        flows_[f].remaining = std::max(flows_[f].remaining - d, 0.0);
        flows_[f].served += d;
      }
      if (in_window && t_end < 0)
        for (int s = 0; s < sc_.num_slices(); ++s) acc_[s].area += queue_[s].size() * dt;
      clock_ += dt;

      if (is_arrival) {
        const int s = slice_pick_(rng_);
        const bool measured = generated >= warmup && t_end < 0;
        ++generated;
        if (generated == warmup + 1 && warmup > 0) {
          t0 = clock_;
          in_window = true;
        }
        handle_arrival(s, measured);
        if (generated == cfg_.num_flows) t_end = clock_;
        next_arrival = clock_ + sample_exp(total_rate_);
      } else {
        handle_departure(dep_flow);
      }
    }

    RepResult out;
    out.acc = acc_;
    out.window = (t_end < 0 ? clock_ : t_end) - t0;
    out.total_delay = measured_admitted_ > 0 ? total_delay_sum_ / measured_admitted_ : 0;
    out.trace = std::move(trace_);
    // blocked-flow accounting: everything generated was blocked or completed
    if (all_arrivals_ != all_blocked_ + all_completed_)
      throw DesError("des: flow accounting mismatch at horizon");
    return out;
  }

 private:
  double sample_exp(double rate) {
    return std::exponential_distribution<double>(rate)(rng_);
  }

  void note(const char* kind, int slice, int flow) {
    if (!keep_trace_ || trace_.size() >= cfg_.trace_limit) return;
    char buf[96];
    std::snprintf(buf, sizeof buf, "t=%.9f %s slice=%d flow=%d", clock_, kind, slice,
                  flow);
    trace_.emplace_back(buf);
  }

  void refresh_rates() {
    rate_of_.resize(flows_.size());
    for (int f : service_set_) {
      const Flow& fl = flows_[f];
      rate_of_[f] = flow_rate(fl.slice, fl.channel);
    }
  }

  double flow_rate(int s, int q) const {
    uint64_t mask = 0;
    const auto& lay = layouts_[s][q];
    for (size_t i = 0; i < lay.size(); ++i)
      if (busy_[lay[i].slice][lay[i].channel]) mask |= 1ull << i;
    return radio_.avg_capacity(s, q, sc_.slices[s].sp, mask);
  }

  void occupy(int s, int q, int f) {
    busy_[s][q] = 1;
    chan_flow_[s][q] = f;
    flows_[f].channel = q;
    if (flows_[f].service_start < 0) flows_[f].service_start = clock_;
    service_set_.push_back(f);
    ++active_flows_;
  }

  void release(int s, int q) {
    const int f = chan_flow_[s][q];
    busy_[s][q] = 0;
    chan_flow_[s][q] = -1;
    flows_[f].channel = -1;
    service_set_.erase(std::find(service_set_.begin(), service_set_.end(), f));
    --active_flows_;
  }

  void handle_arrival(int s, bool measured) {
    ++all_arrivals_;
    if (measured) ++acc_[s].arrivals;
    const int qmax = sc_.slices[s].queue_cap;
    if ((int)queue_[s].size() >= qmax) {
      ++all_blocked_;
      if (measured) ++acc_[s].blocked;
      note("blocked", s, -1);
      return;
    }
    Flow fl;
    fl.slice = s;
    fl.size_bits = sample_exp(1.0 / sc_.sps[sc_.slices[s].sp].mean_flow_bits);
    fl.remaining = fl.size_bits;
    fl.arrival_t = clock_;
    const int f = (int)flows_.size();
    flows_.push_back(fl);
    measured_of_.push_back(measured);
    queue_[s].push_back(f);
    ++buffered_flows_;
    note("arrival", s, f);

    if (policy_ == PolicyKind::Random) {
      // a free channel exists iff fewer than Q flows are in service
      const int Q = sc_.slices[s].num_channels;
      int in_service = 0;
      for (int q = 0; q < Q; ++q) in_service += busy_[s][q];
      if (in_service < Q) assign_random_channel(s, f);
    } else {
      replace_component(radio_.overlap().component_of[s]);
    }
  }

  void assign_random_channel(int s, int f) {
    std::vector<int> free;
    for (int q = 0; q < sc_.slices[s].num_channels; ++q)
      if (!busy_[s][q]) free.push_back(q);
    const int q = free[std::uniform_int_distribution<int>(0, (int)free.size() - 1)(rng_)];
    occupy(s, q, f);
    --buffered_flows_;
  }

  void handle_departure(int f) {
    Flow& fl = flows_[f];
    const int s = fl.slice;
    if (fl.channel < 0) throw DesError("des: departure of a buffered flow");
    if (std::abs(fl.served - fl.size_bits) > 1e-6 * fl.size_bits)
      throw DesError("des: work-conservation violation");
    note("departure", s, f);
    release(s, fl.channel);
    queue_[s].erase(std::find(queue_[s].begin(), queue_[s].end(), f));
    ++all_completed_;
    if (measured_of_[f]) {
      auto& a = acc_[s];
      ++a.completed;
      const double d = clock_ - fl.arrival_t;
      const double w = fl.service_start - fl.arrival_t;
      a.delay += d;
      a.wait += w;
      a.service += d - w;
      a.bits += fl.size_bits;
      total_delay_sum_ += d;
      ++measured_admitted_;
    }

    if (policy_ == PolicyKind::Random) {
      // promote the oldest buffered flow, if any
      for (int g : queue_[s])
        if (flows_[g].channel < 0) {
          assign_random_channel(s, g);
          break;
        }
    } else {
      replace_component(radio_.overlap().component_of[s]);
    }
  }

  // LT policy: the MVNO re-places the component's in-service flows on the
  // permitted channels of the new state
  void replace_component(int c) {
    const StateSpace& space = *spaces_[c];
    const ChannelPermission& table = *tables_[c];
    std::vector<int> n_rh(space.num_slices());
    for (int l = 0; l < space.num_slices(); ++l)
      n_rh[l] = (int)queue_[space.slices()[l]].size();
    const uint64_t idx = space.index_of(n_rh);

    for (int l = 0; l < space.num_slices(); ++l) {
      const int s = space.slices()[l];
      const int Q = sc_.slices[s].num_channels;
      const int k = std::min(n_rh[l], Q);
      uint64_t perm = table.permitted(idx, s);
      if (std::popcount(perm) != k)
        throw DesError("des: lookup table row has wrong cardinality");

      std::vector<int> in_service(queue_[s].begin(), queue_[s].begin() + k);
      std::vector<int> placed;  // flows that keep their channel (sticky)
      if (cfg_.lt_sticky)
        for (int f : in_service)
          if (flows_[f].channel >= 0 && (perm >> flows_[f].channel & 1)) {
            perm &= ~(1ull << flows_[f].channel);
            placed.push_back(f);
          }
      // detach everything else currently on this slice's channels
      for (int q = 0; q < Q; ++q)
        if (busy_[s][q] &&
            std::find(placed.begin(), placed.end(), chan_flow_[s][q]) == placed.end()) {
          release(s, q);
          ++buffered_flows_;
        }
      // hand out the remaining permitted channels in ascending order
      for (int f : in_service) {
        if (std::find(placed.begin(), placed.end(), f) != placed.end()) continue;
        const int q = std::countr_zero(perm);
        perm &= perm - 1;
        occupy(s, q, f);
        --buffered_flows_;
      }
    }
  }

  const RadioModel& radio_;
  const Scenario& sc_;
  PolicyKind policy_;
  const SimConfig& cfg_;
  std::vector<const StateSpace*> spaces_;
  std::vector<const ChannelPermission*> tables_;
  std::mt19937_64 rng_;
  bool keep_trace_ = false;

  std::vector<double> lambda_;
  double total_rate_ = 0;
  std::discrete_distribution<int> slice_pick_;
  std::vector<std::vector<std::vector<ChannelRef>>> layouts_;

  double clock_ = 0;
  std::vector<Flow> flows_;
  std::vector<char> measured_of_;
  std::vector<std::vector<char>> busy_;
  std::vector<std::vector<int>> chan_flow_;
  std::vector<std::vector<int>> queue_;  // per slice, FIFO of flow ids
  std::vector<int> service_set_;         // flow ids currently on a channel
  std::vector<double> rate_of_;
  int active_flows_ = 0, buffered_flows_ = 0;
  uint64_t all_arrivals_ = 0, all_blocked_ = 0, all_completed_ = 0;
  double total_delay_sum_ = 0;
  uint64_t measured_admitted_ = 0;

  std::vector<SliceAcc> acc_;
  std::vector<std::string> trace_;
};

SampleStat merge(const std::vector<double>& xs) {
  SampleStat st;
  const size_t n = xs.size();
  for (double x : xs) st.mean += x;
  st.mean /= n;
  if (n > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - st.mean) * (x - st.mean);
    st.std_error = std::sqrt(ss / (n - 1) / n);
  }
  return st;
}

}  // namespace

double channel_rate(const RadioModel& radio, int s, int q, int u,
                    const std::vector<std::vector<char>>& busy) {
  const auto lay = radio.overlap().delta_layout(s, q);
  uint64_t mask = 0;
  for (size_t i = 0; i < lay.size(); ++i)
    if (busy[lay[i].slice][lay[i].channel]) mask |= 1ull << i;
  return radio.avg_capacity(s, q, u, mask);
}

DesReport run_des(const RadioModel& radio, PolicyKind policy, const SimConfig& cfg,
                  const std::vector<const StateSpace*>& spaces,
                  const std::vector<const ChannelPermission*>& tables) {
  if (cfg.num_flows == 0) throw DesError("des: num_flows must be positive");
  if (cfg.warmup_fraction < 0 || cfg.warmup_fraction > 0.5)
    throw DesError("des: warmup_fraction outside [0, 0.5]");
  if (cfg.replications < 1) throw DesError("des: need at least one replication");

  const int R = cfg.replications;
  std::vector<RepResult> reps(R);
  parallel_chunks(R, [&](uint64_t lo, uint64_t hi, int) {
    for (uint64_t r = lo; r < hi; ++r) {
      Simulation sim(radio, policy, cfg, spaces, tables, splitmix64(cfg.seed + r),
                     cfg.trace && r == 0);
      reps[r] = sim.run();
    }
  });

  const Scenario& sc = radio.scenario();
  DesReport rep;
  rep.flows_per_replication = cfg.num_flows;
  rep.trace = std::move(reps[0].trace);
  rep.slices.resize(sc.num_slices());
  auto collect = [&](auto&& per_rep) {
    std::vector<double> xs(R);
    for (int r = 0; r < R; ++r) xs[r] = per_rep(reps[r]);
    return merge(xs);
  };
  for (int s = 0; s < sc.num_slices(); ++s) {
    auto& out = rep.slices[s];
    out.blocking = collect([&](const RepResult& r) {
      const auto& a = r.acc[s];
      return a.arrivals ? (double)a.blocked / a.arrivals : 0.0;
    });
    out.delay_s = collect([&](const RepResult& r) {
      const auto& a = r.acc[s];
      return a.completed ? a.delay / a.completed : 0.0;
    });
    out.sojourn_s = collect([&](const RepResult& r) {
      const auto& a = r.acc[s];
      return a.completed ? a.wait / a.completed : 0.0;
    });
    out.service_s = collect([&](const RepResult& r) {
      const auto& a = r.acc[s];
      return a.completed ? a.service / a.completed : 0.0;
    });
    out.throughput_bps = collect([&](const RepResult& r) {
      return r.window > 0 ? r.acc[s].bits / r.window : 0.0;
    });
    out.occupancy = collect([&](const RepResult& r) {
      return r.window > 0 ? r.acc[s].area / r.window : 0.0;
    });
  }
  rep.total_delay_s = collect([](const RepResult& r) { return r.total_delay; });
  return rep;
}

}  // namespace slicewave
