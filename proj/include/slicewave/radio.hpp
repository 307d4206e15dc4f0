#pragma once

#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "slicewave/scenario.hpp"

namespace slicewave {

struct RadioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double path_loss_db(double d_km);
double dbm_to_watt(double dbm);

struct Point {
  double x = 0, y = 0;
};

// Deterministic low-discrepancy sample grid inside a hexagonal cell
// (flat-top hexagon, edge length = radius).
std::vector<Point> hex_sample_grid(const CellSpec& cell, int n_points);
bool point_in_hex(double x, double y, const CellSpec& cell);

// Link-level physics plus the memoized per-(s,q,u) capacity table.
// All per-location quantities are evaluated on the fixed grid; harmonic
// averaging uses the grid order for accumulation.
class RadioModel {
 public:
  RadioModel(const Scenario& sc, const OverlapIndex& overlap);

  // forces all interference powers to zero (the ZI reference)
  void set_zero_interference(bool zi) { zero_interference_ = zi; }
  bool zero_interference() const { return zero_interference_; }

  // SINR for a tagged flow on (s,q) at location l under interference mask.
  // Bit i of mask addresses delta_layout(s,q)[i].
  double sinr(int s, int q, Point l, uint64_t mask) const;
  double link_capacity(int s, int q, Point l, uint64_t mask) const;

  // C_{s,q,u}(Delta), harmonically averaged over the cell grid; memoized
  double avg_capacity(int s, int q, int u, uint64_t mask) const;

  // Same harmonic average but with each interferer scaled by an activity
  // probability instead of a binary mask (averaged-interference baseline).
  double avg_capacity_with_activity(int s, int q, int u,
                                    std::span<const double> activity) const;

  int delta_dim(int s, int q) const { return (int)interferer_coef_[s][q].size(); }

  const Scenario& scenario() const { return *sc_; }
  const OverlapIndex& overlap() const { return *overlap_; }

  void dump_capacity_csv(const std::string& path) const;

 private:
  double capacity_at_point(int s, int q, size_t pt, double interference_watt) const;
  double interference_at_point(int s, int q, size_t pt, uint64_t mask) const;
  double harmonic_average(int s, int q, auto&& interference_of_point) const;

  const Scenario* sc_;
  const OverlapIndex* overlap_;
  bool zero_interference_ = false;

  std::vector<std::vector<Point>> grid_;           // per cell
  std::vector<std::vector<double>> signal_;        // per slice, per grid point (watt)
  std::vector<double> noise_;                      // per slice (watt over w_s)
  // gain_[b][b']: path gain from BS b' to the grid points of cell b
  std::vector<std::vector<std::vector<double>>> gain_;
  // per (s,q), per delta bit: PSD * overlap_hz of the interferer, and its cell
  std::vector<std::vector<std::vector<double>>> interferer_coef_;
  std::vector<std::vector<std::vector<int>>> interferer_cell_;

  mutable std::mutex memo_mutex_;
  mutable std::unordered_map<uint64_t, double> memo_;  // key packs (s,q,u,mask)
};

}  // namespace slicewave
