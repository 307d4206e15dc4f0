#include "slicewave/radio.hpp"

#include <cmath>
#include <fstream>

namespace slicewave {

namespace {

constexpr double kMinDistanceKm = 1e-3;  // 1 m clamp near the BS

double halton(uint64_t i, int base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

double path_gain(double dx_m, double dy_m) {
  double d_km = std::sqrt(dx_m * dx_m + dy_m * dy_m) / 1000.0;
  if (d_km < kMinDistanceKm) d_km = kMinDistanceKm;
  return std::pow(10.0, -path_loss_db(d_km) / 10.0);
}

}  // namespace

double path_loss_db(double d_km) {
  if (!(d_km > 0)) throw RadioError("path_loss_db: distance must be > 0");
  return 128.1 + 37.6 * std::log10(d_km);
}

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

bool point_in_hex(double x, double y, const CellSpec& cell) {
  // flat-top hexagon with vertices at (+-R, 0), (+-R/2, +-sqrt(3)/2 R)
  double px = std::abs(x - cell.center_x_m);
  double py = std::abs(y - cell.center_y_m);
  const double R = cell.hex_radius_m;
  const double s3 = std::sqrt(3.0);
  return px <= R && py <= s3 / 2.0 * R && s3 * px + py <= s3 * R;
}

std::vector<Point> hex_sample_grid(const CellSpec& cell, int n_points) {
  std::vector<Point> pts;
  pts.reserve(n_points);
  const double R = cell.hex_radius_m;
  const double s3 = std::sqrt(3.0);
  uint64_t i = 1;
  while ((int)pts.size() < n_points) {
    double x = cell.center_x_m + (2.0 * halton(i, 2) - 1.0) * R;
    double y = cell.center_y_m + (2.0 * halton(i, 3) - 1.0) * (s3 / 2.0) * R;
    ++i;
    if (point_in_hex(x, y, cell)) pts.push_back({x, y});
  }
  return pts;
}

RadioModel::RadioModel(const Scenario& sc, const OverlapIndex& overlap)
    : sc_(&sc), overlap_(&overlap) {
  const int B = sc.num_cells(), S = sc.num_slices();

  grid_.resize(B);
  for (int b = 0; b < B; ++b)
    grid_[b] = hex_sample_grid(sc.cells[b], sc.radio.integration_points);

  gain_.assign(B, std::vector<std::vector<double>>(B));
  for (int b = 0; b < B; ++b)
    for (int bp = 0; bp < B; ++bp) {
      auto& g = gain_[b][bp];
      g.reserve(grid_[b].size());
      for (const auto& p : grid_[b])
        g.push_back(path_gain(p.x - sc.cells[bp].center_x_m, p.y - sc.cells[bp].center_y_m));
    }

  const double n0 = dbm_to_watt(sc.radio.noise_psd_dbm_hz);  // W/Hz
  signal_.resize(S);
  noise_.resize(S);
  interferer_coef_.resize(S);
  interferer_cell_.resize(S);
  for (int s = 0; s < S; ++s) {
    const auto& sl = sc.slices[s];
    const int b = sl.cell;
    const double psd = dbm_to_watt(sc.cells[b].bs_power_dbm) / sc.radio.power_bandwidth_hz;
    noise_[s] = n0 * sl.channel_bw_hz;
    signal_[s].reserve(grid_[b].size());
    for (double g : gain_[b][b]) signal_[s].push_back(psd * sl.channel_bw_hz * g);

    interferer_coef_[s].resize(sl.num_channels);
    interferer_cell_[s].resize(sl.num_channels);
    for (int q = 0; q < sl.num_channels; ++q) {
      for (const auto& ref : overlap.delta_layout(s, q)) {
        const auto& other = sc.slices[ref.slice];
        const int bp = other.cell;
        const double psd_p = dbm_to_watt(sc.cells[bp].bs_power_dbm) / sc.radio.power_bandwidth_hz;
        const double ov = overlap_hz(sl.bands[q], other.bands[ref.channel]);
        interferer_coef_[s][q].push_back(psd_p * ov);
        interferer_cell_[s][q].push_back(bp);
      }
    }
  }
}

double RadioModel::sinr(int s, int q, Point l, uint64_t mask) const {
  const auto& sl = sc_->slices[s];
  const auto& cell = sc_->cells[sl.cell];
  const double psd = dbm_to_watt(cell.bs_power_dbm) / sc_->radio.power_bandwidth_hz;
  const double sig = psd * sl.channel_bw_hz * path_gain(l.x - cell.center_x_m, l.y - cell.center_y_m);
  double interf = 0.0;
  if (!zero_interference_) {
    const auto& coef = interferer_coef_[s][q];
    const auto& icell = interferer_cell_[s][q];
    for (size_t j = 0; j < coef.size(); ++j)
      if (mask >> j & 1) {
        const auto& c = sc_->cells[icell[j]];
        interf += coef[j] * path_gain(l.x - c.center_x_m, l.y - c.center_y_m);
      }
  }
  return sig / (interf + noise_[s]);
}

double RadioModel::link_capacity(int s, int q, Point l, uint64_t mask) const {
  const auto& r = sc_->radio;
  return r.eta1 * sc_->slices[s].channel_bw_hz *
         std::log2(1.0 + r.eta2 * sinr(s, q, l, mask));
}

double RadioModel::capacity_at_point(int s, int q, size_t pt, double interference_watt) const {
  const auto& r = sc_->radio;
  double gamma = signal_[s][pt] / (interference_watt + noise_[s]);
  return r.eta1 * sc_->slices[s].channel_bw_hz * std::log2(1.0 + r.eta2 * gamma);
}

double RadioModel::interference_at_point(int s, int q, size_t pt, uint64_t mask) const {
  if (zero_interference_) return 0.0;
  double interf = 0.0;
  const auto& coef = interferer_coef_[s][q];
  const auto& icell = interferer_cell_[s][q];
  const int b = sc_->slices[s].cell;
  for (size_t j = 0; j < coef.size(); ++j)
    if (mask >> j & 1) interf += coef[j] * gain_[b][icell[j]][pt];
  return interf;
}

double RadioModel::harmonic_average(int s, int q, auto&& interference_of_point) const {
  const int b = sc_->slices[s].cell;
  const size_t n = grid_[b].size();
  // fixed-order accumulation over the grid; uniform in-cell density
  double inv_sum = 0.0;
  for (size_t pt = 0; pt < n; ++pt) {
    double c = capacity_at_point(s, q, pt, interference_of_point(pt));
    if (!(c > 0))
      throw RadioError("avg_capacity: zero link capacity at a grid point (slice " +
                       std::to_string(sc_->slices[s].id) + ")");
    inv_sum += 1.0 / c;
  }
  return (double)n / inv_sum;
}

double RadioModel::avg_capacity(int s, int q, int u, uint64_t mask) const {
  if (zero_interference_) mask = 0;
  const uint64_t key = ((uint64_t)s << 56) | ((uint64_t)q << 48) | mask;
  {
    std::lock_guard lock(memo_mutex_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  double val = harmonic_average(s, q, [&](size_t pt) {
    return interference_at_point(s, q, pt, mask);
  });
  std::lock_guard lock(memo_mutex_);
  memo_.emplace(key, val);  // deterministic computation, racing writers agree
  return val;
}

double RadioModel::avg_capacity_with_activity(int s, int q, int u,
                                              std::span<const double> activity) const {
  const auto& coef = interferer_coef_[s][q];
  const auto& icell = interferer_cell_[s][q];
  const int b = sc_->slices[s].cell;
  return harmonic_average(s, q, [&](size_t pt) {
    if (zero_interference_) return 0.0;
    double interf = 0.0;
    for (size_t j = 0; j < coef.size(); ++j)
      interf += activity[j] * coef[j] * gain_[b][icell[j]][pt];
    return interf;
  });
}

void RadioModel::dump_capacity_csv(const std::string& path) const {
  std::ofstream out(path);
  out << "slice,channel,sp,delta_bits,capacity_bps\n";
  for (int s = 0; s < sc_->num_slices(); ++s) {
    const auto& sl = sc_->slices[s];
    for (int q = 0; q < sl.num_channels; ++q) {
      const int dim = delta_dim(s, q);
      for (uint64_t mask = 0; mask < (1ull << dim); ++mask) {
        std::string bits;
        for (int j = 0; j < dim; ++j) bits += (mask >> j & 1) ? '1' : '0';
        out << sl.id << ',' << q << ',' << sc_->sps[sl.sp].id << ',' << bits << ','
            << avg_capacity(s, q, sl.sp, mask) << '\n';
      }
    }
  }
}

}  // namespace slicewave
