#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace slicewave {

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : ScenarioError {
  using ScenarioError::ScenarioError;
};
struct ValidationError : ScenarioError {
  using ScenarioError::ScenarioError;
};

struct RadioParams {
  double pathloss_a_db = 128.1;
  double pathloss_b = 37.6;
  double carrier_hz = 2.0e9;
  double noise_psd_dbm_hz = -174.0;
  double eta1 = 0.63;  // bandwidth efficiency
  double eta2 = 0.4;   // SINR efficiency
  double power_bandwidth_hz = 72e6;
  int integration_points = 4096;
};

struct Band {
  double lo_hz = 0;
  double hi_hz = 0;
  double width() const { return hi_hz - lo_hz; }
};

inline double overlap_hz(const Band& a, const Band& b) {
  double lo = a.lo_hz > b.lo_hz ? a.lo_hz : b.lo_hz;
  double hi = a.hi_hz < b.hi_hz ? a.hi_hz : b.hi_hz;
  return hi > lo ? hi - lo : 0.0;
}

struct CellSpec {
  int id = 0;
  double center_x_m = 0, center_y_m = 0;
  double hex_radius_m = 0;   // hexagon edge length
  double bs_power_dbm = 0;
};

struct SliceSpec {
  int id = 0;
  int cell = 0;  // cell index (position in Scenario::cells)
  int mvno = 0;  // mvno index
  int sp = 0;    // the single SP this slice serves
  int num_channels = 0;   // Q_s
  int queue_cap = 0;      // Q^max_s
  double channel_bw_hz = 0;
  std::vector<Band> bands;  // one band per channel
};

struct SpSpec {
  int id = 0;
  double flow_rate = 0;       // lambda_u, flows/s
  double mean_flow_bits = 0;  // Omega_u
  std::vector<double> cell_density;  // sigma_{u,b}, per cell index
};

struct MvnoSpec {
  int id = 0;
};

struct Scenario {
  std::vector<CellSpec> cells;
  std::vector<SliceSpec> slices;
  std::vector<SpSpec> sps;
  std::vector<MvnoSpec> mvnos;
  RadioParams radio;
  std::vector<std::vector<double>> sp_to_mvno;                 // [u][v]
  std::vector<std::vector<std::vector<double>>> mvno_assign;   // [u][v][s]

  std::string source_json;  // canonical dump, used for hashing

  int num_cells() const { return (int)cells.size(); }
  int num_slices() const { return (int)slices.size(); }
  int num_sps() const { return (int)sps.size(); }
  int num_mvnos() const { return (int)mvnos.size(); }
  uint64_t hash() const;
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text);
void validate_scenario(const Scenario& sc);

struct ChannelRef {
  int slice = 0;
  int channel = 0;
  friend auto operator<=>(const ChannelRef&, const ChannelRef&) = default;
};

struct OverlapIndex {
  // neighbors[s][q]: sorted N_{s,q} including (s,q) itself
  std::vector<std::vector<std::vector<ChannelRef>>> neighbors;
  // neighbor_slices[s][q]: sorted slice ids of N-tilde_{s,q} excluding s
  std::vector<std::vector<std::vector<int>>> neighbor_slices;
  std::vector<std::vector<int>> components;  // disjoint interacting-slice sets
  std::vector<int> component_of;             // per slice

  // interference sub-vector layout: bit i of Delta_{s,q} corresponds to
  // neighbors[s][q] minus the self pair, in (slice, channel) order
  std::vector<ChannelRef> delta_layout(int s, int q) const;
  bool overlaps(int s) const;  // any channel of s has a nonempty neighborhood
};

OverlapIndex build_overlap_index(const Scenario& sc);

// lambda_{s,u} for the SP owning each slice; key is slice index
std::vector<double> arrival_rates(const Scenario& sc);

}  // namespace slicewave
