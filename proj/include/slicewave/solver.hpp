#pragma once

#include <functional>
#include <span>
#include <vector>

#include "slicewave/markov.hpp"

namespace slicewave {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// rate bundle used by phi/psi; lets tests plug arbitrary rates and lets
// the fixed-point solver substitute the modified arrivals
struct RateFns {
  std::function<double(int local, int n)> lambda;
  std::function<double(int local, std::span<const int> n_rh)> service;
};

RateFns plain_rates(const RateModel& rates);

// log of the product-form measure Phi(x), log domain
double log_phi(const TwoPartVec& x, std::span<const int> qmax, const RateFns& rates);

// log Psi(x); may be -inf when the blocking factor fires
double log_psi(const TwoPartVec& x, std::span<const int> qmax, const RateFns& rates);

// beta_{n,a} for the arrival movement into slice `local` at state n_rh
double beta(std::span<const int> n_rh, int local, std::span<const int> qmax,
            const RateFns& rates);

struct SolverOptions {
  int max_iter = 20;
  double tol = 1e-8;
  uint64_t exact_cap = 20'000;
};

struct StationaryMeasure {
  std::vector<double> log_phi;
  std::vector<double> pi;
  std::vector<std::vector<double>> beta_hat;  // [local][m], m < qmax
  int iterations_run = 0;
  std::vector<double> residuals;  // per-iteration max relative beta_hat change
};

StationaryMeasure solve_fixed_point(const RateModel& rates,
                                   const SolverOptions& opts = {});

// Var[beta] / E[beta^2] under the Phi-hat weights on COND(s, m)
double min_cost_diagnostic(const StationaryMeasure& measure, const RateModel& rates,
                           int local, int m);

// true-generator CTMC solve for small spaces
std::vector<double> solve_exact(const RateModel& rates, const SolverOptions& opts = {});

struct BaselineResult {
  std::vector<std::vector<double>> marginals;  // per local slice
  std::vector<double> pi;                      // product over slices
  int iterations_run = 0;
};

// averaged-interference baseline: equivalent service rates from
// steady-state-weighted interfering powers, decomposed into independent
// birth-death queues, iterated to convergence
BaselineResult solve_averaged_interference(const RateModel& rates,
                                           const SolverOptions& opts = {});

// truncated birth-death distribution with arrival lambda and service mu(n)
std::vector<double> birth_death_distribution(double lambda,
                                             const std::function<double(int)>& mu,
                                             int qmax);

// parallel map over [0, n) in a fixed chunk grid; thread count from
// SLICEWAVE_THREADS (default: hardware), results independent of it
void parallel_chunks(uint64_t n,
                     const std::function<void(uint64_t, uint64_t, int)>& fn);
int chunk_count();

}  // namespace slicewave
