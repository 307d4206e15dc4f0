#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>

#include "slicewave/allocation.hpp"
#include "slicewave/des.hpp"
#include "slicewave/kpi.hpp"
#include "slicewave/solver.hpp"

using namespace slicewave;

#ifndef SLICEWAVE_BUILD_ID
#define SLICEWAVE_BUILD_ID "unknown"
#endif

namespace {

struct RunSpec {
  std::string scenario_path;
  std::string policy = "random";
  std::string out_path;
  std::string sweep;      // param=a:b:n
  int sweep_sp = 1;       // 1-based SP whose lambda_u a lambda sweep moves
  uint64_t seed = 1;
  int iters = 20;
  bool allow_large = false;
  int replications = 10;
  double warmup = 0.1;
  uint64_t num_flows = 300'000;
  double bs_power_dbm = 0;  // 0 = keep scenario values
  bool trace = false;
  bool lt_sticky = false;
};

// long-form CSV: every row carries the reproducibility key
class CsvOut {
 public:
  CsvOut(const std::string& path, const Scenario& sc, const RunSpec& rs)
      : sc_(sc), rs_(rs) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::ios_base::failure("cannot open output file " + path);
      out_ = &file_;
    } else {
      out_ = &std::cout;
    }
    *out_ << "scenario,scenario_hash,policy,seed,build_id,method,"
             "sweep_param,sweep_value,metric,index,value,std_error\n";
  }

  void row(const std::string& method, const std::string& sweep_param, double sweep_value,
           const std::string& metric, const std::string& index, double value,
           double std_error = 0) {
    *out_ << rs_.scenario_path << ',' << std::hex << sc_.hash() << std::dec << ','
          << rs_.policy << ',' << rs_.seed << ',' << SLICEWAVE_BUILD_ID << ',' << method
          << ',' << sweep_param << ',';
    if (!sweep_param.empty()) *out_ << sweep_value;
    *out_ << ',' << metric << ',' << index << ',' << value << ',' << std_error << '\n';
  }

 private:
  std::ofstream file_;
  std::ostream* out_ = nullptr;
  const Scenario& sc_;
  const RunSpec& rs_;
};

PolicyKind policy_kind(const std::string& p) {
  if (p == "random" || p == "averaged-interference") return PolicyKind::Random;
  if (p == "interference-aware" || p == "exhaustive") return PolicyKind::LookupTable;
  throw CLI::ValidationError("--policy", "unknown policy " + p);
}

struct AnalyticRun {
  std::vector<std::vector<double>> marginals;  // per global slice
  int iterations = 0;
  std::vector<double> residuals;  // worst component, per iteration
};

AnalyticRun run_analytic(const Scenario& sc, const OverlapIndex& ov,
                         const RadioModel& radio, const RunSpec& rs,
                         const SolverOptions& opts) {
  const auto lambda = arrival_rates(sc);
  const uint64_t cap = rs.allow_large ? UINT64_MAX : StateSpace::kDefaultMaxStates;
  AnalyticRun out;
  out.marginals.resize(sc.num_slices());
  for (const auto& comp : ov.components) {
    StateSpace space(sc, comp, cap);
    std::vector<double> lam(comp.size());
    for (size_t l = 0; l < comp.size(); ++l) lam[l] = lambda[comp[l]];
    std::unique_ptr<LookupTable> lt;
    if (policy_kind(rs.policy) == PolicyKind::LookupTable) {
      LookupTable::Options lo;
      lo.kind = rs.policy == "exhaustive" ? TableKind::Exhaustive : TableKind::Greedy;
      lo.seed = rs.seed;
      lt = std::make_unique<LookupTable>(radio, space, lo);
    }
    RateModel rates(radio, space, lam, policy_kind(rs.policy), lt.get());
    if (rs.policy == "averaged-interference") {
      auto base = solve_averaged_interference(rates, opts);
      for (size_t l = 0; l < comp.size(); ++l)
        out.marginals[comp[l]] = base.marginals[l];
      out.iterations = std::max(out.iterations, base.iterations_run);
    } else {
      auto m = solve_fixed_point(rates, opts);
      for (size_t l = 0; l < comp.size(); ++l)
        out.marginals[comp[l]] = slice_marginal(m.pi, space, (int)l);
      if (m.residuals.size() > out.residuals.size()) out.residuals = m.residuals;
      out.iterations = std::max(out.iterations, m.iterations_run);
    }
  }
  return out;
}

void emit_kpis(CsvOut& csv, const std::string& method, const std::string& sweep_param,
               double sweep_value, const Scenario& sc, const KpiReport& rep) {
  for (int s = 0; s < sc.num_slices(); ++s) {
    const std::string idx = "s" + std::to_string(s + 1);
    const auto& k = rep.slices[s];
    csv.row(method, sweep_param, sweep_value, "blocking", idx, k.blocking);
    csv.row(method, sweep_param, sweep_value, "delay_s", idx, k.delay_s);
    csv.row(method, sweep_param, sweep_value, "sojourn_s", idx, k.sojourn_s);
    csv.row(method, sweep_param, sweep_value, "service_s", idx, k.service_s);
    csv.row(method, sweep_param, sweep_value, "throughput_bps", idx, k.throughput_bps);
  }
  for (int u = 0; u < sc.num_sps(); ++u)
    for (int v = 0; v < sc.num_mvnos(); ++v) {
      const auto& m = rep.mvno[u][v];
      if (!(m.weight > 0)) continue;
      const std::string idx = "u" + std::to_string(u + 1) + ":v" + std::to_string(v + 1);
      csv.row(method, sweep_param, sweep_value, "mvno_delay_s", idx, m.delay_s);
      csv.row(method, sweep_param, sweep_value, "mvno_throughput_bps", idx,
              m.throughput_bps);
    }
}

Scenario load(const RunSpec& rs) {
  Scenario sc = load_scenario(rs.scenario_path);
  if (rs.bs_power_dbm > 0)
    for (auto& c : sc.cells) c.bs_power_dbm = rs.bs_power_dbm;
  return sc;
}

void cmd_solve(const RunSpec& rs) {
  Scenario sc = load(rs);
  auto ov = build_overlap_index(sc);
  RadioModel radio(sc, ov);
  SolverOptions opts;
  opts.max_iter = rs.iters;
  auto run = run_analytic(sc, ov, radio, rs, opts);
  auto rep = network_kpis(sc, run.marginals, arrival_rates(sc));
  CsvOut csv(rs.out_path, sc, rs);
  const std::string method =
      rs.policy == "averaged-interference" ? "averaged-interference" : "analytic";
  emit_kpis(csv, method, "", 0, sc, rep);
  csv.row(method, "", 0, "iterations", "", run.iterations);
  for (size_t i = 0; i < run.residuals.size(); ++i)
    csv.row(method, "", 0, "residual", "iter" + std::to_string(i + 1), run.residuals[i]);
}

void cmd_simulate(const RunSpec& rs) {
  Scenario sc = load(rs);
  auto ov = build_overlap_index(sc);
  RadioModel radio(sc, ov);
  SimConfig cfg;
  cfg.seed = rs.seed;
  cfg.num_flows = rs.num_flows;
  cfg.warmup_fraction = rs.warmup;
  cfg.replications = rs.replications;
  cfg.trace = rs.trace;
  cfg.lt_sticky = rs.lt_sticky;

  std::vector<std::unique_ptr<StateSpace>> spaces;
  std::vector<std::unique_ptr<LookupTable>> lts;
  std::vector<const StateSpace*> space_ptrs;
  std::vector<const ChannelPermission*> table_ptrs;
  if (policy_kind(rs.policy) == PolicyKind::LookupTable) {
    const uint64_t cap = rs.allow_large ? UINT64_MAX : StateSpace::kDefaultMaxStates;
    for (const auto& comp : ov.components) {
      spaces.push_back(std::make_unique<StateSpace>(sc, comp, cap));
      LookupTable::Options lo;
      lo.kind = rs.policy == "exhaustive" ? TableKind::Exhaustive : TableKind::Greedy;
      lo.seed = rs.seed;
      lts.push_back(std::make_unique<LookupTable>(radio, *spaces.back(), lo));
      space_ptrs.push_back(spaces.back().get());
      table_ptrs.push_back(lts.back().get());
    }
  }
  auto rep = run_des(radio, policy_kind(rs.policy), cfg, space_ptrs, table_ptrs);

  CsvOut csv(rs.out_path, sc, rs);
  for (int s = 0; s < sc.num_slices(); ++s) {
    const std::string idx = "s" + std::to_string(s + 1);
    const auto& k = rep.slices[s];
    csv.row("des", "", 0, "blocking", idx, k.blocking.mean, k.blocking.std_error);
    csv.row("des", "", 0, "delay_s", idx, k.delay_s.mean, k.delay_s.std_error);
    csv.row("des", "", 0, "sojourn_s", idx, k.sojourn_s.mean, k.sojourn_s.std_error);
    csv.row("des", "", 0, "service_s", idx, k.service_s.mean, k.service_s.std_error);
    csv.row("des", "", 0, "throughput_bps", idx, k.throughput_bps.mean,
            k.throughput_bps.std_error);
    csv.row("des", "", 0, "occupancy", idx, k.occupancy.mean, k.occupancy.std_error);
  }
  csv.row("des", "", 0, "total_delay_s", "", rep.total_delay_s.mean,
          rep.total_delay_s.std_error);
  if (rs.trace)
    for (const auto& line : rep.trace) std::cerr << line << '\n';
}

std::vector<double> parse_grid(const std::string& sweep, std::string& param) {
  auto eq = sweep.find('=');
  if (eq == std::string::npos)
    throw CLI::ValidationError("--sweep", "expected param=a:b:n");
  param = sweep.substr(0, eq);
  if (param != "lambda_u" && param != "bs_power_dbm")
    throw CLI::ValidationError("--sweep", "unknown sweep parameter " + param);
  double a, b;
  int n;
  char c1, c2;
  std::istringstream ss(sweep.substr(eq + 1));
  if (!(ss >> a >> c1 >> b >> c2 >> n) || c1 != ':' || c2 != ':' || n < 1 || b < a)
    throw CLI::ValidationError("--sweep", "expected param=a:b:n with b >= a");
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i)
    grid[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return grid;
}

void cmd_sweep(const RunSpec& rs) {
  std::string param;
  auto grid = parse_grid(rs.sweep, param);
  if (grid.size() < 3)
    throw CLI::ValidationError("--sweep", "isolation metrics need >= 3 grid points");

  Scenario base = load(rs);
  CsvOut csv(rs.out_path, base, rs);
  std::vector<std::vector<std::vector<MvnoKpi>>> curves, curves_zi;
  for (double x : grid) {
    Scenario sc = base;
    if (param == "lambda_u") {
      if (rs.sweep_sp < 1 || rs.sweep_sp > sc.num_sps())
        throw CLI::ValidationError("--sweep-sp", "SP index out of range");
      sc.sps[rs.sweep_sp - 1].flow_rate = x;
    } else {
      for (auto& c : sc.cells) c.bs_power_dbm = x;
    }
    auto ov = build_overlap_index(sc);
    RadioModel radio(sc, ov);
    SolverOptions opts;
    opts.max_iter = rs.iters;
    auto run = run_analytic(sc, ov, radio, rs, opts);
    auto rep = network_kpis(sc, run.marginals, arrival_rates(sc));
    emit_kpis(csv, "analytic", param, x, sc, rep);
    curves.push_back(rep.mvno);

    radio.set_zero_interference(true);
    RunSpec zi = rs;
    zi.policy = "random";  // all policies coincide without interference
    auto run_zi = run_analytic(sc, ov, radio, zi, opts);
    auto rep_zi = network_kpis(sc, run_zi.marginals, arrival_rates(sc));
    emit_kpis(csv, "zero-interference", param, x, sc, rep_zi);
    curves_zi.push_back(rep_zi.mvno);
  }

  const int u_prime = param == "lambda_u" ? rs.sweep_sp - 1 : 0;
  auto iso = isolation_metrics(grid, curves, curves_zi, u_prime);
  for (const auto& e : iso.entries) {
    const std::string idx = "u" + std::to_string(e.u + 1) + ":v" +
                            std::to_string(e.v + 1) + ":up" +
                            std::to_string(e.u_prime + 1);
    csv.row("analytic", param, 0, "add", idx, e.delay.mean);
    csv.row("analytic", param, 0, "vdd", idx, e.delay.variance);
    csv.row("analytic", param, 0, "atd", idx, e.throughput.mean);
    csv.row("analytic", param, 0, "vtd", idx, e.throughput.variance);
  }
}

void cmd_lookup_table(const RunSpec& rs) {
  Scenario sc = load(rs);
  auto ov = build_overlap_index(sc);
  RadioModel radio(sc, ov);
  const uint64_t cap = rs.allow_large ? UINT64_MAX : StateSpace::kDefaultMaxStates;
  for (size_t c = 0; c < ov.components.size(); ++c) {
    StateSpace space(sc, ov.components[c], cap);
    LookupTable::Options lo;
    lo.kind = rs.policy == "exhaustive" ? TableKind::Exhaustive : TableKind::Greedy;
    lo.seed = rs.seed;
    LookupTable lt(radio, space, lo);
    std::string path = rs.out_path.empty() ? "lookup_table" : rs.out_path;
    if (ov.components.size() > 1) path += ".c" + std::to_string(c + 1);
    lt.save(path);
    std::cout << "component " << c + 1 << ": " << space.size() << " states -> " << path
              << '\n';
  }
}

void cmd_complexity(const RunSpec& rs) {
  Scenario sc = load(rs);
  // counts run over the joint network state space, not per component
  std::vector<int> all(sc.num_slices());
  std::iota(all.begin(), all.end(), 0);
  StateSpace space(sc, all, UINT64_MAX);
  auto counts = complexity_counts(space, sc);
  std::ofstream file;
  if (!rs.out_path.empty()) {
    file.open(rs.out_path);
    if (!file) throw std::ios_base::failure("cannot open " + rs.out_path);
  }
  std::ostream& out = rs.out_path.empty() ? std::cout : file;
  out << "proposed " << counts.proposed << "\nexhaustive " << counts.exhaustive << '\n';
}

void cmd_compare(const RunSpec& rs) {
  Scenario sc = load(rs);
  auto ov = build_overlap_index(sc);
  RadioModel radio(sc, ov);
  SolverOptions opts;
  opts.max_iter = rs.iters;
  CsvOut csv(rs.out_path, sc, rs);

  auto run = run_analytic(sc, ov, radio, rs, opts);
  emit_kpis(csv, "analytic", "", 0, sc, network_kpis(sc, run.marginals, arrival_rates(sc)));

  RunSpec base = rs;
  base.policy = "averaged-interference";
  auto run_b = run_analytic(sc, ov, radio, base, opts);
  emit_kpis(csv, "averaged-interference", "", 0, sc,
            network_kpis(sc, run_b.marginals, arrival_rates(sc)));

  SimConfig cfg;
  cfg.seed = rs.seed;
  cfg.num_flows = rs.num_flows;
  cfg.warmup_fraction = rs.warmup;
  cfg.replications = rs.replications;
  cfg.lt_sticky = rs.lt_sticky;
  std::vector<std::unique_ptr<StateSpace>> spaces;
  std::vector<std::unique_ptr<LookupTable>> lts;
  std::vector<const StateSpace*> space_ptrs;
  std::vector<const ChannelPermission*> table_ptrs;
  if (policy_kind(rs.policy) == PolicyKind::LookupTable) {
    const uint64_t cap = rs.allow_large ? UINT64_MAX : StateSpace::kDefaultMaxStates;
    for (const auto& comp : ov.components) {
      spaces.push_back(std::make_unique<StateSpace>(sc, comp, cap));
      LookupTable::Options lo;
      lo.kind = rs.policy == "exhaustive" ? TableKind::Exhaustive : TableKind::Greedy;
      lo.seed = rs.seed;
      lts.push_back(std::make_unique<LookupTable>(radio, *spaces.back(), lo));
      space_ptrs.push_back(spaces.back().get());
      table_ptrs.push_back(lts.back().get());
    }
  }
  auto des = run_des(radio, policy_kind(rs.policy), cfg, space_ptrs, table_ptrs);
  for (int s = 0; s < sc.num_slices(); ++s) {
    const std::string idx = "s" + std::to_string(s + 1);
    const auto& k = des.slices[s];
    csv.row("des", "", 0, "blocking", idx, k.blocking.mean, k.blocking.std_error);
    csv.row("des", "", 0, "delay_s", idx, k.delay_s.mean, k.delay_s.std_error);
    csv.row("des", "", 0, "throughput_bps", idx, k.throughput_bps.mean,
            k.throughput_bps.std_error);
  }
  csv.row("des", "", 0, "total_delay_s", "", des.total_delay_s.mean,
          des.total_delay_s.std_error);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interference-coupled RAN slicing: solvers and simulation"};
  app.require_subcommand(1);

  RunSpec rs;
  auto add_common = [&](CLI::App* cmd, bool scenario_required = true) {
    cmd->add_option("scenario,--scenario", rs.scenario_path, "scenario JSON file")
        ->required(scenario_required);
    cmd->add_option("--policy", rs.policy,
                    "random | interference-aware | exhaustive | averaged-interference");
    cmd->add_option("--out", rs.out_path, "output path (default: stdout)");
    cmd->add_option("--seed", rs.seed, "RNG / lookup-table seed");
    cmd->add_option("--iters", rs.iters, "solver iteration cap");
    cmd->add_flag("--allow-large", rs.allow_large, "lift the state-space cap");
    cmd->add_option("--bs-power", rs.bs_power_dbm, "override BS power (dBm, all cells)");
    return cmd;
  };
  auto add_sim = [&](CLI::App* cmd) {
    cmd->add_option("--replications", rs.replications, "DES replications");
    cmd->add_option("--warmup", rs.warmup, "warmup fraction of flows");
    cmd->add_option("--flows", rs.num_flows, "flows per replication");
    cmd->add_flag("--lt-sticky", rs.lt_sticky, "keep flows on permitted channels");
    cmd->add_flag("--trace", rs.trace, "dump an event trace to stderr");
  };

  auto* solve = add_common(app.add_subcommand("solve", "steady-state KPIs"));
  auto* simulate = add_common(app.add_subcommand("simulate", "flow-level DES"));
  add_sim(simulate);
  auto* sweep = add_common(app.add_subcommand("sweep", "KPI curves + isolation metrics"));
  sweep->add_option("--sweep", rs.sweep, "param=a:b:n, param in {lambda_u, bs_power_dbm}")
      ->required();
  sweep->add_option("--sweep-sp", rs.sweep_sp, "1-based SP for lambda_u sweeps");
  auto* table = add_common(app.add_subcommand("lookup-table", "build and save LTs"));
  auto* cx = add_common(app.add_subcommand("complexity", "policy operation counts"));
  auto* compare = add_common(app.add_subcommand("compare", "analytic vs DES vs baseline"));
  add_sim(compare);
  (void)table;
  (void)cx;

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) cmd_solve(rs);
    else if (simulate->parsed()) cmd_simulate(rs);
    else if (sweep->parsed()) cmd_sweep(rs);
    else if (table->parsed()) cmd_lookup_table(rs);
    else if (cx->parsed()) cmd_complexity(rs);
    else if (compare->parsed()) cmd_compare(rs);
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    // solver-layer failures: capacity caps, divergence, table errors
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
