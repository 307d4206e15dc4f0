#include "slicewave/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

using json = nlohmann::json;

namespace slicewave {

namespace {

[[noreturn]] void fail_validation(const std::string& msg) {
  throw ValidationError("scenario validation: " + msg);
}

int require_index(const json& j, const char* field, int count, const std::string& ctx) {
  int id = j.at(field).get<int>();
  if (id < 1 || id > count)
    throw ValidationError("scenario validation: " + ctx + "." + field + " = " +
                          std::to_string(id) + " out of range");
  return id - 1;  // file uses 1-based ids
}

}  // namespace

uint64_t Scenario::hash() const {
  // FNV-1a over the canonical dump
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : source_json) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Scenario parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario parse: ") + e.what());
  }

  Scenario sc;
  try {
    if (j.contains("radio")) {
      const auto& r = j["radio"];
      auto get = [&](const char* k, double dflt) { return r.value(k, dflt); };
      sc.radio.pathloss_a_db = get("pathloss_a_db", sc.radio.pathloss_a_db);
      sc.radio.pathloss_b = get("pathloss_b", sc.radio.pathloss_b);
      sc.radio.carrier_hz = get("carrier_hz", sc.radio.carrier_hz);
      sc.radio.noise_psd_dbm_hz = get("noise_psd_dbm_hz", sc.radio.noise_psd_dbm_hz);
      sc.radio.eta1 = get("eta1", sc.radio.eta1);
      sc.radio.eta2 = get("eta2", sc.radio.eta2);
      sc.radio.power_bandwidth_hz = get("power_bandwidth_hz", sc.radio.power_bandwidth_hz);
      sc.radio.integration_points = r.value("integration_points", sc.radio.integration_points);
    }

    for (const auto& cj : j.at("cells")) {
      CellSpec c;
      c.id = cj.at("id").get<int>();
      c.center_x_m = cj.at("center_m").at(0).get<double>();
      c.center_y_m = cj.at("center_m").at(1).get<double>();
      c.hex_radius_m = cj.at("hex_radius_m").get<double>();
      c.bs_power_dbm = cj.at("bs_power_dbm").get<double>();
      sc.cells.push_back(c);
    }
    for (const auto& sj : j.at("sps")) {
      SpSpec s;
      s.id = sj.at("id").get<int>();
      s.flow_rate = sj.at("flow_rate_per_s").get<double>();
      s.mean_flow_bits = sj.at("mean_flow_bits").get<double>();
      s.cell_density = sj.at("cell_density").get<std::vector<double>>();
      sc.sps.push_back(s);
    }
    for (const auto& mj : j.at("mvnos")) {
      MvnoSpec m;
      m.id = mj.at("id").get<int>();
      sc.mvnos.push_back(m);
    }
    for (const auto& sj : j.at("slices")) {
      SliceSpec s;
      s.id = sj.at("id").get<int>();
      s.cell = require_index(sj, "cell", (int)sc.cells.size(), "slice");
      s.mvno = require_index(sj, "mvno", (int)sc.mvnos.size(), "slice");
      s.sp = require_index(sj, "sp", (int)sc.sps.size(), "slice");
      s.num_channels = sj.at("num_channels").get<int>();
      s.queue_cap = sj.at("queue_cap").get<int>();
      s.channel_bw_hz = sj.at("channel_bw_hz").get<double>();
      for (const auto& bj : sj.at("channel_bands_hz"))
        s.bands.push_back({bj.at(0).get<double>(), bj.at(1).get<double>()});
      sc.slices.push_back(s);
    }
    sc.sp_to_mvno = j.at("sp_to_mvno").get<std::vector<std::vector<double>>>();
    sc.mvno_assign =
        j.at("mvno_assign").get<std::vector<std::vector<std::vector<double>>>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario parse: ") + e.what());
  }

  sc.source_json = j.dump();
  validate_scenario(sc);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("scenario parse: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

void validate_scenario(const Scenario& sc) {
  const int B = sc.num_cells(), U = sc.num_sps(), V = sc.num_mvnos(), S = sc.num_slices();
  if (B == 0) fail_validation("no cells");
  if (S == 0) fail_validation("no slices");

  for (const auto& c : sc.cells) {
    if (!(c.hex_radius_m > 0))
      fail_validation("cell " + std::to_string(c.id) + ".hex_radius_m must be > 0");
    if (!std::isfinite(c.bs_power_dbm))
      fail_validation("cell " + std::to_string(c.id) + ".bs_power_dbm not finite");
  }
  if (!(sc.radio.eta1 > 0 && sc.radio.eta1 <= 1) || !(sc.radio.eta2 > 0 && sc.radio.eta2 <= 1))
    fail_validation("radio.eta1/eta2 must be in (0,1]");
  if (sc.radio.integration_points < 64)
    fail_validation("radio.integration_points must be >= 64");

  for (const auto& u : sc.sps) {
    if (!(u.flow_rate > 0))
      fail_validation("sp " + std::to_string(u.id) + ".flow_rate_per_s must be > 0");
    if (!(u.mean_flow_bits > 0))
      fail_validation("sp " + std::to_string(u.id) + ".mean_flow_bits must be > 0");
    if ((int)u.cell_density.size() != B)
      fail_validation("sp " + std::to_string(u.id) + ".cell_density length != number of cells");
    double sum = std::accumulate(u.cell_density.begin(), u.cell_density.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-12)
      fail_validation("sp " + std::to_string(u.id) + ".cell_density does not sum to 1");
  }

  std::vector<int> ids;
  for (const auto& s : sc.slices) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    fail_validation("slice ids are not unique");

  for (const auto& s : sc.slices) {
    const std::string tag = "slice " + std::to_string(s.id);
    if (s.num_channels < 1) fail_validation(tag + ".num_channels must be >= 1");
    if (s.queue_cap < s.num_channels)
      fail_validation(tag + ".queue_cap must be >= num_channels");
    if ((int)s.bands.size() != s.num_channels)
      fail_validation(tag + ".channel_bands_hz length != num_channels");
    for (const auto& b : s.bands)
      if (std::abs(b.width() - s.channel_bw_hz) > 1e-3)
        fail_validation(tag + ": band width != channel_bw_hz");
    for (size_t i = 0; i < s.bands.size(); ++i)
      for (size_t k = i + 1; k < s.bands.size(); ++k)
        if (overlap_hz(s.bands[i], s.bands[k]) > 0)
          fail_validation(tag + ": bands within the slice overlap");
  }
  // intra-cell slices occupy distinct chunks
  for (int a = 0; a < S; ++a)
    for (int b = a + 1; b < S; ++b) {
      const auto &sa = sc.slices[a], &sb = sc.slices[b];
      if (sa.cell != sb.cell) continue;
      for (const auto& ba : sa.bands)
        for (const auto& bb : sb.bands)
          if (overlap_hz(ba, bb) > 0)
            fail_validation("slices " + std::to_string(sa.id) + " and " +
                            std::to_string(sb.id) + " overlap within cell " +
                            std::to_string(sc.cells[sa.cell].id));
    }

  if ((int)sc.sp_to_mvno.size() != U) fail_validation("sp_to_mvno row count != number of SPs");
  for (int u = 0; u < U; ++u) {
    if ((int)sc.sp_to_mvno[u].size() != V)
      fail_validation("sp_to_mvno row " + std::to_string(u + 1) + " length != number of MVNOs");
    double sum = std::accumulate(sc.sp_to_mvno[u].begin(), sc.sp_to_mvno[u].end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-12)
      fail_validation("sp_to_mvno row " + std::to_string(u + 1) + " does not sum to 1");
  }

  if ((int)sc.mvno_assign.size() != U) fail_validation("mvno_assign shape != [U][V][S]");
  for (int u = 0; u < U; ++u) {
    if ((int)sc.mvno_assign[u].size() != V) fail_validation("mvno_assign shape != [U][V][S]");
    for (int v = 0; v < V; ++v) {
      if ((int)sc.mvno_assign[u][v].size() != S) fail_validation("mvno_assign shape != [U][V][S]");
      for (int s = 0; s < S; ++s) {
        double p = sc.mvno_assign[u][v][s];
        if (p < 0 || p > 1) fail_validation("mvno_assign entries must be probabilities");
        if (p > 0 && (sc.slices[s].mvno != v || sc.slices[s].sp != u))
          fail_validation("mvno_assign[" + std::to_string(u + 1) + "][" + std::to_string(v + 1) +
                          "][" + std::to_string(s + 1) +
                          "] > 0 but slice is owned by another MVNO or serves another SP");
      }
      // per-cell normalization where v serves u
      for (int b = 0; b < B; ++b) {
        double sum = 0;
        bool has_slice = false;
        for (int s = 0; s < S; ++s)
          if (sc.slices[s].cell == b && sc.slices[s].mvno == v) {
            has_slice = true;
            sum += sc.mvno_assign[u][v][s];
          }
        bool serves = sc.sp_to_mvno[u][v] > 0 && has_slice;
        if (serves && std::abs(sum - 1.0) > 1e-12) {
          // an MVNO may have no slice for this SP in this cell; then all entries are 0
          bool any = sum > 0;
          if (any || [&] {
                for (int s = 0; s < S; ++s)
                  if (sc.slices[s].cell == b && sc.slices[s].mvno == v && sc.slices[s].sp == u)
                    return true;
                return false;
              }())
            fail_validation("mvno_assign[u=" + std::to_string(u + 1) + "][v=" +
                            std::to_string(v + 1) + "] does not sum to 1 in cell " +
                            std::to_string(sc.cells[b].id));
        }
      }
    }
  }
}

std::vector<ChannelRef> OverlapIndex::delta_layout(int s, int q) const {
  std::vector<ChannelRef> out;
  for (const auto& ref : neighbors[s][q])
    if (!(ref.slice == s && ref.channel == q)) out.push_back(ref);
  return out;
}

bool OverlapIndex::overlaps(int s) const {
  for (const auto& n : neighbors[s])
    if (n.size() > 1) return true;
  return false;
}

OverlapIndex build_overlap_index(const Scenario& sc) {
  const int S = sc.num_slices();
  OverlapIndex idx;
  idx.neighbors.resize(S);
  idx.neighbor_slices.resize(S);
  for (int s = 0; s < S; ++s) {
    idx.neighbors[s].resize(sc.slices[s].num_channels);
    idx.neighbor_slices[s].resize(sc.slices[s].num_channels);
    for (int q = 0; q < sc.slices[s].num_channels; ++q)
      idx.neighbors[s][q].push_back({s, q});
  }

  for (int s = 0; s < S; ++s)
    for (int t = s + 1; t < S; ++t) {
      if (sc.slices[s].cell == sc.slices[t].cell) continue;  // intra-cell never overlaps
      for (int q = 0; q < sc.slices[s].num_channels; ++q)
        for (int r = 0; r < sc.slices[t].num_channels; ++r)
          if (overlap_hz(sc.slices[s].bands[q], sc.slices[t].bands[r]) > 0) {
            idx.neighbors[s][q].push_back({t, r});
            idx.neighbors[t][r].push_back({s, q});
          }
    }

  for (int s = 0; s < S; ++s)
    for (auto& n : idx.neighbors[s]) std::sort(n.begin(), n.end());

  for (int s = 0; s < S; ++s)
    for (int q = 0; q < sc.slices[s].num_channels; ++q) {
      auto& ns = idx.neighbor_slices[s][q];
      for (const auto& ref : idx.neighbors[s][q])
        if (ref.slice != s) ns.push_back(ref.slice);
      std::sort(ns.begin(), ns.end());
      ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
    }

  // union-find over the interact relation
  std::vector<int> parent(S);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int s = 0; s < S; ++s)
    for (int q = 0; q < sc.slices[s].num_channels; ++q)
      for (const auto& ref : idx.neighbors[s][q]) {
        int a = find(s), b = find(ref.slice);
        if (a != b) parent[b] = a;
      }

  idx.component_of.assign(S, -1);
  std::map<int, int> root_to_comp;
  for (int s = 0; s < S; ++s) {
    int r = find(s);
    auto [it, inserted] = root_to_comp.try_emplace(r, (int)idx.components.size());
    if (inserted) idx.components.push_back({});
    idx.component_of[s] = it->second;
    idx.components[it->second].push_back(s);
  }
  return idx;
}

std::vector<double> arrival_rates(const Scenario& sc) {
  std::vector<double> lam(sc.num_slices(), 0.0);
  for (int s = 0; s < sc.num_slices(); ++s) {
    const auto& sl = sc.slices[s];
    const auto& sp = sc.sps[sl.sp];
    lam[s] = sp.flow_rate * sc.sp_to_mvno[sl.sp][sl.mvno] * sp.cell_density[sl.cell] *
             sc.mvno_assign[sl.sp][sl.mvno][s];
  }
  return lam;
}

}  // namespace slicewave
