#include "slicewave/kpi.hpp"

#include <algorithm>
#include <cmath>

namespace slicewave {

std::vector<double> slice_marginal(std::span<const double> pi, const StateSpace& space,
                                   int local) {
  std::vector<double> marg(space.qmax(local) + 1, 0.0);
  std::vector<int> n_rh(space.num_slices());
  for (uint64_t i = 0; i < space.size(); ++i) {
    space.decode(i, n_rh);
    marg[n_rh[local]] += pi[i];
  }
  return marg;
}

SliceKpi slice_kpis(std::span<const double> marginal, double lambda_su, double omega_bits,
                    int num_channels) {
  const int qmax = (int)marginal.size() - 1;
  SliceKpi k;
  k.blocking = marginal[qmax];
  const double admitted = lambda_su * (1.0 - k.blocking);
  k.throughput_bps = admitted * omega_bits;
  if (!(admitted > 0)) throw KpiError("slice_kpis: no admitted traffic, delay undefined");
  double en = 0, buf = 0, srv = 0;
  for (int n = 0; n <= qmax; ++n) {
    en += n * marginal[n];
    buf += std::max(n - num_channels, 0) * marginal[n];
    srv += std::min(n, num_channels) * marginal[n];
  }
  k.delay_s = en / admitted;
  k.sojourn_s = buf / admitted;
  k.service_s = srv / admitted;
  return k;
}

KpiReport network_kpis(const Scenario& sc,
                       const std::vector<std::vector<double>>& slice_marginals,
                       std::span<const double> lambda) {
  KpiReport rep;
  rep.slices.resize(sc.num_slices());
  for (int s = 0; s < sc.num_slices(); ++s) {
    const auto& sl = sc.slices[s];
    rep.slices[s] = slice_kpis(slice_marginals[s], lambda[s],
                               sc.sps[sl.sp].mean_flow_bits, sl.num_channels);
  }
  rep.mvno.assign(sc.num_sps(), std::vector<MvnoKpi>(sc.num_mvnos()));
  for (int s = 0; s < sc.num_slices(); ++s) {
    const auto& sl = sc.slices[s];
    auto& agg = rep.mvno[sl.sp][sl.mvno];
    const double w = sc.sps[sl.sp].cell_density[sl.cell] * sc.mvno_assign[sl.sp][sl.mvno][s];
    agg.throughput_bps += rep.slices[s].throughput_bps;
    agg.delay_s += w * rep.slices[s].delay_s;
    agg.sojourn_s += w * rep.slices[s].sojourn_s;
    agg.service_s += w * rep.slices[s].service_s;
    agg.weight += w;
  }
  return rep;
}

DeviationStats trapezoid_deviation(std::span<const double> grid,
                                   std::span<const double> ratio) {
  const size_t n = grid.size();
  if (n < 2) return {ratio.empty() ? 0.0 : ratio[0], 0.0};
  const double span = grid[n - 1] - grid[0];
  double mean = 0;
  for (size_t i = 0; i + 1 < n; ++i)
    mean += 0.5 * (ratio[i] + ratio[i + 1]) * (grid[i + 1] - grid[i]);
  mean /= span;
  double var = 0;
  for (size_t i = 0; i + 1 < n; ++i) {
    double a = ratio[i] - mean, b = ratio[i + 1] - mean;
    var += 0.5 * (a * a + b * b) * (grid[i + 1] - grid[i]);
  }
  var /= span;
  return {mean, var};
}

IsolationReport isolation_metrics(std::span<const double> grid,
                                  const std::vector<std::vector<std::vector<MvnoKpi>>>& kpi,
                                  const std::vector<std::vector<std::vector<MvnoKpi>>>& kpi_zi,
                                  int u_prime) {
  IsolationReport rep;
  rep.grid.assign(grid.begin(), grid.end());
  rep.grid_too_coarse = grid.size() < 3;
  if (kpi.size() != grid.size() || kpi_zi.size() != grid.size())
    throw KpiError("isolation_metrics: curve length does not match grid");
  const int U = (int)kpi[0].size(), V = (int)kpi[0][0].size();
  for (int u = 0; u < U; ++u)
    for (int v = 0; v < V; ++v) {
      std::vector<double> dr(grid.size()), tr(grid.size());
      bool defined = true;
      for (size_t i = 0; i < grid.size(); ++i) {
        const auto& k = kpi[i][u][v];
        const auto& z = kpi_zi[i][u][v];
        if (!(z.delay_s > 0) || !(k.throughput_bps > 0)) {
          defined = false;
          break;
        }
        dr[i] = k.delay_s / z.delay_s;
        tr[i] = z.throughput_bps / k.throughput_bps;
      }
      if (!defined) continue;
      IsolationEntry e;
      e.u = u;
      e.v = v;
      e.u_prime = u_prime;
      e.delay = trapezoid_deviation(grid, dr);
      e.throughput = trapezoid_deviation(grid, tr);
      rep.entries.push_back(e);
    }
  return rep;
}

// combined forms average over u' != u; with a single SP the self-sweep
// is the only curve available and is used as-is
DeviationStats IsolationReport::combined_delay(int u, int v) const {
  DeviationStats out;
  int n = 0;
  bool has_other = false;
  for (const auto& e : entries)
    if (e.u == u && e.v == v && e.u_prime != u) has_other = true;
  for (const auto& e : entries)
    if (e.u == u && e.v == v && (!has_other || e.u_prime != u)) {
      out.mean += e.delay.mean;
      out.variance += e.delay.variance;
      ++n;
    }
  if (n > 0) {
    out.mean /= n;
    out.variance /= n;
  }
  return out;
}

DeviationStats IsolationReport::combined_throughput(int u, int v) const {
  DeviationStats out;
  int n = 0;
  bool has_other = false;
  for (const auto& e : entries)
    if (e.u == u && e.v == v && e.u_prime != u) has_other = true;
  for (const auto& e : entries)
    if (e.u == u && e.v == v && (!has_other || e.u_prime != u)) {
      out.mean += e.throughput.mean;
      out.variance += e.throughput.variance;
      ++n;
    }
  if (n > 0) {
    out.mean /= n;
    out.variance /= n;
  }
  return out;
}

}  // namespace slicewave
