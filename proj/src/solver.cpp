#include "slicewave/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <thread>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace slicewave {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kBetaGuard = 1e-300;
}  // namespace

int chunk_count() { return 64; }

void parallel_chunks(uint64_t n,
                     const std::function<void(uint64_t, uint64_t, int)>& fn) {
  const int chunks = chunk_count();
  int threads = (int)std::thread::hardware_concurrency();
  if (const char* env = std::getenv("SLICEWAVE_THREADS"))
    threads = std::max(1, std::atoi(env));
  threads = std::clamp(threads, 1, chunks);

  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      int c = next.fetch_add(1);
      if (c >= chunks) return;
      uint64_t lo = n * c / chunks, hi = n * (c + 1) / chunks;
      if (lo >= hi) continue;
      try {
        fn(lo, hi, c);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (error) std::rethrow_exception(error);
}

RateFns plain_rates(const RateModel& rates) {
  return {
      [&rates](int local, int n) { return rates.arrival_rate(local, n); },
      [&rates](int local, std::span<const int> n_rh) {
        return rates.service_rate(local, n_rh);
      },
  };
}

double log_phi(const TwoPartVec& x, std::span<const int> qmax, const RateFns& rates) {
  const int S = (int)x.rh.size();
  const auto e = e_vector(x, qmax);
  double lp = 0.0;
  for (int s = 0; s < S; ++s) {
    for (int k = x.rh[s]; k < qmax[s]; ++k) lp -= std::log(rates.lambda(s, k));
    if (x.rh[s] != 0 && e[s] != 1) lp -= std::log(rates.service(s, x.rh));
  }
  return lp;
}

double log_psi(const TwoPartVec& x, std::span<const int> qmax, const RateFns& rates) {
  const int S = (int)x.rh.size();
  const auto e = e_vector(x, qmax);

  // blocking factor: 1 - (1 - Lambda(Qmax)) * delta(1 + x_LH(s)); with
  // Lambda(Qmax) = 0 this zeroes Psi whenever some x_LH(s) = -1
  for (int s = 0; s < S; ++s)
    if (x.lh[s] == -1 && rates.lambda(s, qmax[s]) == 0.0) return kNegInf;

  std::vector<int> xe = x.rh;
  for (int s = 0; s < S; ++s) xe[s] += e[s];

  double lp = 0.0;
  for (int s = 0; s < S; ++s) {
    // Phi_1 evaluated at x + e(x)
    for (int k = xe[s]; k < qmax[s]; ++k) lp -= std::log(rates.lambda(s, k));
    // Phi_2 conditions taken at x, M arguments substituted x -> x + e(x)
    if (x.rh[s] != 0 && e[s] != 1) lp -= std::log(rates.service(s, xe));
  }
  return lp;
}

double beta(std::span<const int> n_rh, int local, std::span<const int> qmax,
            const RateFns& rates) {
  const int S = (int)n_rh.size();
  std::vector<int> next(n_rh.begin(), n_rh.end());
  next[local] += 1;
  double b = rates.service(local, n_rh);
  for (int s = 0; s < S; ++s) {
    if (s == local || n_rh[s] == 0) continue;
    b *= rates.service(s, n_rh) / rates.service(s, next);
  }
  return b;
}

namespace {

// one Phi pass; returns the per-state log measure and its maximum
std::vector<double> phi_pass(const RateModel& rates,
                             const std::vector<std::vector<double>>& beta_hat,
                             double& max_log) {
  const auto& space = rates.space();
  const int S = space.num_slices();
  const uint64_t N = space.size();

  // arrival-side partial sums: A[s][n] = sum_{k=n}^{qmax-1} -log(lambda_s / bhat[s][k])
  std::vector<std::vector<double>> A(S);
  for (int s = 0; s < S; ++s) {
    A[s].assign(space.qmax(s) + 1, 0.0);
    const double ll = std::log(rates.lambda(s));
    for (int n = space.qmax(s) - 1; n >= 0; --n)
      A[s][n] = A[s][n + 1] + std::log(beta_hat[s][n]) - ll;
  }

  std::vector<double> lp(N);
  std::vector<double> chunk_max(chunk_count(), kNegInf);
  parallel_chunks(N, [&](uint64_t lo, uint64_t hi, int c) {
    std::vector<int> n_rh(S);
    for (uint64_t i = lo; i < hi; ++i) {
      space.decode(i, n_rh);
      double v = 0.0;
      for (int s = 0; s < S; ++s) {
        v += A[s][n_rh[s]];
        if (n_rh[s] != 0) v -= std::log(rates.service_rate(s, n_rh));
      }
      lp[i] = v;
      chunk_max[c] = std::max(chunk_max[c], v);
    }
  });
  max_log = *std::max_element(chunk_max.begin(), chunk_max.end());
  return lp;
}

}  // namespace

StationaryMeasure solve_fixed_point(const RateModel& rates, const SolverOptions& opts) {
  const auto& space = rates.space();
  const int S = space.num_slices();
  const uint64_t N = space.size();
  if (opts.max_iter < 1) throw SolverError("solve_fixed_point: max_iter must be >= 1");

  StationaryMeasure out;
  out.beta_hat.resize(S);
  for (int s = 0; s < S; ++s) out.beta_hat[s].assign(space.qmax(s), 1.0);

  double max_log = 0.0;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    out.log_phi = phi_pass(rates, out.beta_hat, max_log);
    out.iterations_run = iter + 1;

    // per-(s, m) weighted moments of beta over COND, chunked deterministically
    const int C = chunk_count();
    std::vector<std::vector<std::vector<double>>> num(C), den(C);
    for (int c = 0; c < C; ++c) {
      num[c].resize(S);
      den[c].resize(S);
      for (int s = 0; s < S; ++s) {
        num[c][s].assign(space.qmax(s), 0.0);
        den[c][s].assign(space.qmax(s), 0.0);
      }
    }
    parallel_chunks(N, [&](uint64_t lo, uint64_t hi, int c) {
      std::vector<int> n_rh(S), next(S);
      for (uint64_t i = lo; i < hi; ++i) {
        space.decode(i, n_rh);
        const double w = std::exp(out.log_phi[i] - max_log);
        if (w == 0.0) continue;
        for (int s = 0; s < S; ++s) {
          if (n_rh[s] >= space.qmax(s)) continue;
          std::copy(n_rh.begin(), n_rh.end(), next.begin());
          next[s] += 1;
          double b = rates.service_rate(s, n_rh);
          for (int sp = 0; sp < S; ++sp) {
            if (sp == s || n_rh[sp] == 0) continue;
            b *= rates.service_rate(sp, n_rh) / rates.service_rate(sp, next);
          }
          num[c][s][n_rh[s]] += w * b * b;
          den[c][s][n_rh[s]] += w * b;
        }
      }
    });

    double residual = 0.0;
    for (int s = 0; s < S; ++s)
      for (int m = 0; m < space.qmax(s); ++m) {
        double nsum = 0.0, dsum = 0.0;
        for (int c = 0; c < C; ++c) {
          nsum += num[c][s][m];
          dsum += den[c][s][m];
        }
        if (dsum == 0.0) continue;  // transiently empty COND set keeps old value
        const double bh = nsum / dsum;
        if (!std::isfinite(bh) || bh <= kBetaGuard)
          throw SolverError("solve_fixed_point: beta_hat diverged for slice " +
                            std::to_string(space.slices()[s]) + ", m=" + std::to_string(m));
        residual = std::max(residual, std::abs(bh - out.beta_hat[s][m]) / out.beta_hat[s][m]);
        out.beta_hat[s][m] = bh;
      }
    out.residuals.push_back(residual);
    if (residual < opts.tol) break;
  }

  // final measure with the converged beta_hat
  out.log_phi = phi_pass(rates, out.beta_hat, max_log);
  out.pi.resize(N);
  std::vector<double> chunk_sum(chunk_count(), 0.0);
  parallel_chunks(N, [&](uint64_t lo, uint64_t hi, int c) {
    double s = 0.0;
    for (uint64_t i = lo; i < hi; ++i) {
      out.pi[i] = std::exp(out.log_phi[i] - max_log);
      s += out.pi[i];
    }
    chunk_sum[c] = s;
  });
  double total = 0.0;
  for (double s : chunk_sum) total += s;
  for (auto& p : out.pi) p /= total;
  return out;
}

double min_cost_diagnostic(const StationaryMeasure& measure, const RateModel& rates,
                           int local, int m) {
  const auto& space = rates.space();
  const int S = space.num_slices();
  double w_sum = 0.0, e1 = 0.0, e2 = 0.0;
  std::vector<int> n_rh(S);
  std::vector<int> qm(S);
  for (int s = 0; s < S; ++s) qm[s] = space.qmax(s);
  const double max_log = *std::max_element(measure.log_phi.begin(), measure.log_phi.end());
  auto fns = plain_rates(rates);
  for (uint64_t i = 0; i < space.size(); ++i) {
    space.decode(i, n_rh);
    if (n_rh[local] != m) continue;
    const double w = std::exp(measure.log_phi[i] - max_log);
    const double b = beta(n_rh, local, qm, fns);
    w_sum += w;
    e1 += w * b;
    e2 += w * b * b;
  }
  if (w_sum == 0.0 || e2 == 0.0) return 0.0;
  e1 /= w_sum;
  e2 /= w_sum;
  return 1.0 - e1 * e1 / e2;
}

std::vector<double> solve_exact(const RateModel& rates, const SolverOptions& opts) {
  const auto& space = rates.space();
  const int S = space.num_slices();
  const uint64_t N = space.size();
  if (N > opts.exact_cap)
    throw SolverError("solve_exact: state space larger than the exact-solver cap");

  // Q^T pi = 0 with the last balance equation replaced by normalization
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<int> n_rh(S);
  std::vector<double> diag(N, 0.0);
  for (uint64_t i = 0; i < N; ++i) {
    space.decode(i, n_rh);
    for (int s = 0; s < S; ++s) {
      if (n_rh[s] < space.qmax(s)) {
        double r = rates.arrival_rate(s, n_rh[s]);
        if (r > 0) {
          n_rh[s] += 1;
          uint64_t j = space.index_of(n_rh);
          n_rh[s] -= 1;
          if (j != N - 1) trips.emplace_back((int)j, (int)i, r);
          diag[i] += r;
        }
      }
      if (n_rh[s] > 0) {
        double r = rates.service_rate(s, n_rh);
        n_rh[s] -= 1;
        uint64_t j = space.index_of(n_rh);
        n_rh[s] += 1;
        if (j != N - 1) trips.emplace_back((int)j, (int)i, r);
        diag[i] += r;
      }
    }
  }
  for (uint64_t i = 0; i < N; ++i) {
    if (i != N - 1) trips.emplace_back((int)i, (int)i, -diag[i]);
    trips.emplace_back((int)(N - 1), (int)i, 1.0);  // normalization row
  }

  Eigen::SparseMatrix<double> A((int)N, (int)N);
  A.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd b = Eigen::VectorXd::Zero((int)N);
  b[(int)N - 1] = 1.0;

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success)
    throw SolverError("solve_exact: singular generator (rate bug?)");
  Eigen::VectorXd pi = lu.solve(b);
  std::vector<double> out(N);
  for (uint64_t i = 0; i < N; ++i) out[i] = pi[(int)i];
  return out;
}

std::vector<double> birth_death_distribution(double lambda,
                                             const std::function<double(int)>& mu,
                                             int qmax) {
  std::vector<double> logp(qmax + 1, 0.0);
  for (int n = 1; n <= qmax; ++n)
    logp[n] = logp[n - 1] + std::log(lambda) - std::log(mu(n));
  double mx = *std::max_element(logp.begin(), logp.end());
  double sum = 0.0;
  std::vector<double> p(qmax + 1);
  for (int n = 0; n <= qmax; ++n) sum += (p[n] = std::exp(logp[n] - mx));
  for (auto& v : p) v /= sum;
  return p;
}

BaselineResult solve_averaged_interference(const RateModel& rates,
                                           const SolverOptions& opts) {
  const auto& space = rates.space();
  const auto& radio = rates.radio();
  const auto& sc = radio.scenario();
  const auto& ov = radio.overlap();
  const int S = space.num_slices();

  BaselineResult out;
  out.marginals.resize(S);

  // start from the zero-interference decomposition
  std::vector<double> cbar(S);
  auto slice_cbar = [&](int s, const std::vector<std::vector<double>>& act_prob) {
    const int g = space.slices()[s];
    const auto& sl = sc.slices[g];
    double c = 0.0;
    for (int q = 0; q < sl.num_channels; ++q) {
      const auto layout = ov.delta_layout(g, q);
      std::vector<double> act(layout.size());
      for (size_t j = 0; j < layout.size(); ++j) {
        int lp = space.local_of(layout[j].slice);
        act[j] = act_prob.empty() ? 0.0 : act_prob[lp][layout[j].channel];
      }
      c += radio.avg_capacity_with_activity(g, q, sl.sp, act) / sl.num_channels;
    }
    return c;
  };

  for (int s = 0; s < S; ++s) cbar[s] = slice_cbar(s, {});
  auto decompose = [&] {
    for (int s = 0; s < S; ++s) {
      const int g = space.slices()[s];
      const auto& sl = sc.slices[g];
      const double omega = sc.sps[sl.sp].mean_flow_bits;
      const double c = cbar[s];
      out.marginals[s] = birth_death_distribution(
          rates.lambda(s),
          [&](int n) {
            if (!(c > 0)) throw SolverError("averaged-interference: degenerate capacity");
            return c / omega * std::min(n, sl.num_channels);
          },
          space.qmax(s));
    }
  };
  decompose();

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    out.iterations_run = iter + 1;
    // steady-state-weighted channel activity per (slice, channel)
    std::vector<std::vector<double>> act(S);
    for (int s = 0; s < S; ++s) {
      const int g = space.slices()[s];
      const int Q = sc.slices[g].num_channels;
      double p = 0.0;
      for (int n = 0; n <= space.qmax(s); ++n)
        p += out.marginals[s][n] * std::min(n, Q) / (double)Q;
      act[s].assign(Q, p);  // random allocation: channels equally likely busy
    }
    auto old = out.marginals;
    for (int s = 0; s < S; ++s) cbar[s] = slice_cbar(s, act);
    decompose();

    double delta = 0.0;
    for (int s = 0; s < S; ++s)
      for (size_t n = 0; n < out.marginals[s].size(); ++n)
        delta = std::max(delta, std::abs(out.marginals[s][n] - old[s][n]));
    if (delta < opts.tol) break;
  }

  out.pi.assign(space.size(), 1.0);
  std::vector<int> n_rh(S);
  for (uint64_t i = 0; i < space.size(); ++i) {
    space.decode(i, n_rh);
    for (int s = 0; s < S; ++s) out.pi[i] *= out.marginals[s][n_rh[s]];
  }
  return out;
}

}  // namespace slicewave
