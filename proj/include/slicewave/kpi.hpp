#pragma once

#include <span>
#include <vector>

#include "slicewave/markov.hpp"

namespace slicewave {

struct KpiError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// pi_s(n) = sum over states with n_RH(s) = n
std::vector<double> slice_marginal(std::span<const double> pi, const StateSpace& space,
                                   int local);

struct SliceKpi {
  double blocking = 0;        // P^B_s
  double throughput_bps = 0;  // T_{s,u}
  double delay_s = 0;         // D_{s,u}
  double sojourn_s = 0;       // D^SJ
  double service_s = 0;       // D^SV
};

SliceKpi slice_kpis(std::span<const double> marginal, double lambda_su, double omega_bits,
                    int num_channels);

struct MvnoKpi {
  double throughput_bps = 0;
  double delay_s = 0;
  double sojourn_s = 0;
  double service_s = 0;
  double weight = 0;  // served sigma * P^MVNO mass; < 1 flags partial coverage
};

struct KpiReport {
  std::vector<SliceKpi> slices;             // per global slice
  std::vector<std::vector<MvnoKpi>> mvno;   // [u][v]
};

// per-slice KPIs from component solutions plus the (u,v) aggregates
KpiReport network_kpis(const Scenario& sc,
                       const std::vector<std::vector<double>>& slice_marginals,
                       std::span<const double> lambda);

struct DeviationStats {
  double mean = 0;      // ADD / ATD
  double variance = 0;  // VDD / VTD
};

// trapezoid mean and variance of a sampled ratio curve over a lambda grid
DeviationStats trapezoid_deviation(std::span<const double> grid,
                                   std::span<const double> ratio);

struct IsolationEntry {
  int u = 0, v = 0, u_prime = 0;
  DeviationStats delay;       // ADD, VDD
  DeviationStats throughput;  // ATD, VTD
};

struct IsolationReport {
  std::vector<IsolationEntry> entries;
  std::vector<double> grid;
  bool grid_too_coarse = false;

  // combined metrics averaged over u' != u (or all u' when only one SP)
  DeviationStats combined_delay(int u, int v) const;
  DeviationStats combined_throughput(int u, int v) const;
};

// curves indexed [grid point][u][v]: interfering and zero-interference KPIs
IsolationReport isolation_metrics(std::span<const double> grid,
                                  const std::vector<std::vector<std::vector<MvnoKpi>>>& kpi,
                                  const std::vector<std::vector<std::vector<MvnoKpi>>>& kpi_zi,
                                  int u_prime);

}  // namespace slicewave
