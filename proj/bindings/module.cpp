#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <numeric>

#include "slicewave/allocation.hpp"
#include "slicewave/des.hpp"
#include "slicewave/kpi.hpp"
#include "slicewave/solver.hpp"

namespace py = pybind11;
using namespace slicewave;

namespace {

PolicyKind to_policy(const std::string& p) {
  if (p == "random" || p == "averaged-interference") return PolicyKind::Random;
  if (p == "interference-aware" || p == "exhaustive") return PolicyKind::LookupTable;
  throw std::invalid_argument("unknown policy " + p);
}

Scenario load(const std::string& path, double bs_power_dbm) {
  Scenario sc = load_scenario(path);
  if (bs_power_dbm > 0)
    for (auto& c : sc.cells) c.bs_power_dbm = bs_power_dbm;
  return sc;
}

py::dict kpi_dict(const Scenario& sc, const KpiReport& rep) {
  py::list slices;
  for (int s = 0; s < sc.num_slices(); ++s) {
    const auto& k = rep.slices[s];
    slices.append(py::dict(py::arg("blocking") = k.blocking,
                           py::arg("delay_s") = k.delay_s,
                           py::arg("sojourn_s") = k.sojourn_s,
                           py::arg("service_s") = k.service_s,
                           py::arg("throughput_bps") = k.throughput_bps));
  }
  py::list mvno;
  for (int u = 0; u < sc.num_sps(); ++u)
    for (int v = 0; v < sc.num_mvnos(); ++v) {
      const auto& m = rep.mvno[u][v];
      if (!(m.weight > 0)) continue;
      mvno.append(py::dict(py::arg("sp") = u + 1, py::arg("mvno") = v + 1,
                           py::arg("delay_s") = m.delay_s,
                           py::arg("throughput_bps") = m.throughput_bps));
    }
  return py::dict(py::arg("slices") = slices, py::arg("mvno") = mvno);
}

py::dict solve(const std::string& path, const std::string& policy, int iters,
               double bs_power_dbm, uint64_t seed, bool allow_large) {
  Scenario sc = load(path, bs_power_dbm);
  auto ov = build_overlap_index(sc);
  RadioModel radio(sc, ov);
  const auto lambda = arrival_rates(sc);
  const uint64_t cap = allow_large ? UINT64_MAX : StateSpace::kDefaultMaxStates;
  SolverOptions opts;
  opts.max_iter = iters;

  std::vector<std::vector<double>> marginals(sc.num_slices());
  for (const auto& comp : ov.components) {
    StateSpace space(sc, comp, cap);
    std::vector<double> lam(comp.size());
    for (size_t l = 0; l < comp.size(); ++l) lam[l] = lambda[comp[l]];
    std::unique_ptr<LookupTable> lt;
    if (to_policy(policy) == PolicyKind::LookupTable) {
      LookupTable::Options lo;
      lo.kind = policy == "exhaustive" ? TableKind::Exhaustive : TableKind::Greedy;
      lo.seed = seed;
      lt = std::make_unique<LookupTable>(radio, space, lo);
    }
    RateModel rates(radio, space, lam, to_policy(policy), lt.get());
    if (policy == "averaged-interference") {
      auto base = solve_averaged_interference(rates, opts);
      for (size_t l = 0; l < comp.size(); ++l) marginals[comp[l]] = base.marginals[l];
    } else {
      auto m = solve_fixed_point(rates, opts);
      for (size_t l = 0; l < comp.size(); ++l)
        marginals[comp[l]] = slice_marginal(m.pi, space, (int)l);
    }
  }
  return kpi_dict(sc, network_kpis(sc, marginals, lambda));
}

py::dict simulate(const std::string& path, const std::string& policy, uint64_t seed,
                  uint64_t num_flows, int replications, double warmup,
                  double bs_power_dbm) {
  Scenario sc = load(path, bs_power_dbm);
  auto ov = build_overlap_index(sc);
  RadioModel radio(sc, ov);
  SimConfig cfg;
  cfg.seed = seed;
  cfg.num_flows = num_flows;
  cfg.replications = replications;
  cfg.warmup_fraction = warmup;

  std::vector<std::unique_ptr<StateSpace>> spaces;
  std::vector<std::unique_ptr<LookupTable>> lts;
  std::vector<const StateSpace*> space_ptrs;
  std::vector<const ChannelPermission*> table_ptrs;
  if (to_policy(policy) == PolicyKind::LookupTable)
    for (const auto& comp : ov.components) {
      spaces.push_back(std::make_unique<StateSpace>(sc, comp));
      LookupTable::Options lo;
      lo.kind = policy == "exhaustive" ? TableKind::Exhaustive : TableKind::Greedy;
      lo.seed = seed;
      lts.push_back(std::make_unique<LookupTable>(radio, *spaces.back(), lo));
      space_ptrs.push_back(spaces.back().get());
      table_ptrs.push_back(lts.back().get());
    }
  auto rep = run_des(radio, to_policy(policy), cfg, space_ptrs, table_ptrs);

  py::list slices;
  for (const auto& k : rep.slices)
    slices.append(py::dict(
        py::arg("blocking") = py::make_tuple(k.blocking.mean, k.blocking.std_error),
        py::arg("delay_s") = py::make_tuple(k.delay_s.mean, k.delay_s.std_error),
        py::arg("throughput_bps") =
            py::make_tuple(k.throughput_bps.mean, k.throughput_bps.std_error)));
  return py::dict(py::arg("slices") = slices,
                  py::arg("total_delay_s") =
                      py::make_tuple(rep.total_delay_s.mean, rep.total_delay_s.std_error));
}

py::tuple complexity(const std::string& path) {
  Scenario sc = load_scenario(path);
  std::vector<int> all(sc.num_slices());
  std::iota(all.begin(), all.end(), 0);
  StateSpace space(sc, all, UINT64_MAX);
  auto c = complexity_counts(space, sc);
  return py::make_tuple(c.proposed, c.exhaustive);
}

}  // namespace

PYBIND11_MODULE(_slicewave, m) {
  m.doc() = "steady-state solver and simulator for interference-coupled RAN slices";
  m.def("solve", &solve, py::arg("scenario"), py::arg("policy") = "random",
        py::arg("iters") = 20, py::arg("bs_power_dbm") = 0.0, py::arg("seed") = 1,
        py::arg("allow_large") = false);
  m.def("simulate", &simulate, py::arg("scenario"), py::arg("policy") = "random",
        py::arg("seed") = 1, py::arg("num_flows") = 300000, py::arg("replications") = 10,
        py::arg("warmup") = 0.1, py::arg("bs_power_dbm") = 0.0);
  m.def("complexity", &complexity, py::arg("scenario"));
  m.def("scenario_hash",
        [](const std::string& path) { return load_scenario(path).hash(); },
        py::arg("scenario"));
}
