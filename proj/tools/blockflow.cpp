#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "blockflow/bench.hpp"
#include "blockflow/config.hpp"
#include "blockflow/exchange.hpp"
#include "blockflow/report.hpp"
#include "blockflow/simulation.hpp"
#include "blockflow/verify.hpp"

using namespace blockflow;

namespace {

constexpr int kExitError = 1;
constexpr int kExitDeadlock = 3;

struct RunOptions {
  std::string config;
  int np = 0;
  std::string strategy, wait, transport, scaling;
  bool no_reorder = false;
  bool compare_serial = false;
  bool quiet = false;
};

DecompositionPlan make_plan(const RunConfig& rc, const CaseSetup& c) {
  if (rc.case_id == "deadlock_demo" && rc.grid_file.empty()) {
    if (rc.np != 4) std::cerr << "note: deadlock_demo always runs on 4 ranks\n";
    return make_deadlock_plan(c);
  }
  const int npb = static_cast<int>(c.grid.blocks.size());
  return decompose(c.grid, rc.np, rc.split_dims, rc.aggregation || rc.np < npb);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write '" + path + "'");
  os << text;
}

int run_order_levels(const RunConfig& rc) {
  if (rc.case_id != "cartesian_box") throw ConfigError("order_levels needs the cartesian_box case");
  SchemeConfig cfg = scheme_for(rc);
  StopControl stop = rc.stop;
  if (stop.relative_target <= 0.0) stop.relative_target = 1e-9;
  const OrderStudy st = run_order_study(rc.viscous, rc.order_levels, cfg, stop);
  for (std::size_t n = 0; n < st.errors.size(); ++n)
    std::printf("level %d  cells %zu  steps %ld  L2(rho) %.6e  L2(p) %.6e%s\n", rc.order_levels[n],
                st.errors[n].cells, st.errors[n].steps, st.errors[n].l2[0], st.errors[n].l2[4],
                st.errors[n].converged ? "" : "  (not converged)");
  for (std::size_t n = 0; n < st.rho_orders.size(); ++n)
    std::printf("observed order %zu-%zu: rho %.4f  p %.4f\n", n, n + 1, st.rho_orders[n], st.p_orders[n]);
  return 0;
}

int run_command(const RunOptions& o) {
  RunConfig rc = parse_config_file(o.config);
  if (o.np != 0 || !o.strategy.empty() || !o.wait.empty() || !o.transport.empty() || !o.scaling.empty()) {
    if (o.np != 0) set_config_value(rc, "np", std::to_string(o.np));
    if (!o.strategy.empty()) set_config_value(rc, "strategy", o.strategy);
    if (!o.wait.empty()) set_config_value(rc, "wait", o.wait);
    if (!o.transport.empty()) set_config_value(rc, "transport", o.transport);
    if (!o.scaling.empty()) set_config_value(rc, "scaling", o.scaling);
  }
  if (o.no_reorder) rc.exchange.reorder = false;
  rc.validate();
  if (!rc.order_levels.empty()) return run_order_levels(rc);

  const CaseSetup c = build_case(rc);
  const SchemeConfig cfg = scheme_for(rc);
  const DecompositionPlan plan = make_plan(rc, c);
  const ExchangeSchedule schedule = build_schedule(plan, relink_connected(plan), rc.exchange.wait, rc.exchange.reorder);
  write_text(rc.output + "_plan.json", plan_to_json(plan, &schedule).dump(2) + "\n");

  Solution sol;
  ResidualHistory hist;
  std::vector<TransferCounters> counters;
  long steps = 0;
  bool converged = false;
  double seconds = 0.0;
  if (plan.np == 1) {
    Simulation sim(c, cfg);
    const auto t0 = std::chrono::steady_clock::now();
    converged = sim.run(rc.stop);
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    sol = sim.solution();
    hist = sim.history();
    steps = sim.steps();
    counters.push_back(TransferCounters{});
  } else {
    try {
      DistributedResult r = run_distributed(c, cfg, plan, rc.exchange, rc.stop);
      sol = std::move(r.solution);
      hist = std::move(r.history);
      counters = std::move(r.counters);
      steps = r.steps;
      converged = r.converged;
      seconds = r.seconds;
    } catch (const DeadlockError& e) {
      std::cerr << "deadlock detected: " << e.what() << "\n";
      for (const auto& b : e.blocked) std::cerr << "  " << b << "\n";
      for (const auto& cyc : detect_deadlock(schedule)) std::cerr << "  cycle: " << describe_cycle(cyc) << "\n";
      return kExitDeadlock;
    }
  }

  {
    std::ofstream os(rc.output + "_residual.csv");
    hist.write_csv(os);
  }
  write_text(rc.output + "_counters.json", counters_to_json(counters).dump(2) + "\n");
  write_raw(sol, rc.output + ".raw");
  if (rc.write_vtk) write_vtk(c.grid, sol, c.gas, rc.output);

  if (!o.quiet) {
    std::printf("case %s  cells %zu  np %d  steps %ld  time %.3f s  %s\n", c.name.c_str(), c.grid.total_cells(),
                plan.np, steps, seconds, converged ? "converged" : "step limit");
    if (hist.size() > 0) std::printf("final relative residual %.3e\n", hist.max_relative(hist.size() - 1));
  }

  if (o.compare_serial) {
    Simulation serial(c, cfg);
    serial.run(rc.stop);
    const Solution ref = serial.solution();
    std::printf("max relative difference vs serial: %.3e\n", max_relative_difference(ref, sol, c.free, c.gas));
    std::printf("bitwise identical: %s\n", bitwise_equal(ref, sol) ? "yes" : "no");
  }

  if (rc.scaling != "none") {
    ScalingOptions so;
    so.case_id = rc.case_id;
    so.level = rc.level;
    so.viscous = rc.viscous;
    so.steps = rc.scaling_steps;
    so.repeats = rc.scaling_repeats;
    so.split_dims = rc.split_dims;
    const ScalingReport rep = run_scaling_suite(so, cfg, rc.exchange, rc.scaling_np, scaling_mode_from_string(rc.scaling));
    write_text(rc.output + "_scaling.json", to_json(rep).dump(2) + "\n");
    std::ofstream os(rc.output + "_scaling.csv");
    write_scaling_csv(rep, os);
    write_scaling_csv(rep, std::cout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-block structured-grid compressible flow solver on simulated ranks"};
  app.require_subcommand(1);

  RunOptions ro;
  auto* run = app.add_subcommand("run", "run a case from a key = value config file");
  run->add_option("config", ro.config, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--np", ro.np, "number of simulated ranks")->check(CLI::PositiveNumber);
  run->add_option("--strategy", ro.strategy, "halo packing")->check(CLI::IsMember({"sliced", "packed"}));
  run->add_option("--wait", ro.wait, "wait policy")->check(CLI::IsMember({"per-block", "deferred"}));
  run->add_option("--transport", ro.transport, "buffer transport")->check(CLI::IsMember({"staged", "direct"}));
  run->add_flag("--no-reorder", ro.no_reorder, "keep the natural boundary order");
  run->add_flag("--compare-serial", ro.compare_serial, "also run serially and print the difference");
  run->add_option("--scaling", ro.scaling, "scaling suite")->check(CLI::IsMember({"strong", "weak"}));
  run->add_flag("-q,--quiet", ro.quiet, "no summary line");
  run->footer("config keys:\n" + config_help() + "\nBLOCKFLOW_TIMEOUT_S sets the deadlock timeout in seconds.");

  std::string case_name, grid_out;
  int level = 0;
  auto* grid = app.add_subcommand("grid", "write a preset grid with its boundary table");
  grid->add_option("case", case_name, "case preset")->required();
  grid->add_option("--level", level, "refinement level")->check(CLI::NonNegativeNumber);
  grid->add_option("-o,--output", grid_out, "output file")->required();

  std::string plan_config;
  int plan_np = 0;
  auto* plan = app.add_subcommand("plan", "print the decomposition plan as JSON");
  plan->add_option("config", plan_config, "config file")->required()->check(CLI::ExistingFile);
  plan->add_option("--np", plan_np, "number of simulated ranks")->check(CLI::PositiveNumber);

  auto* cases = app.add_subcommand("cases", "list case presets");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return run_command(ro);
    if (*grid) {
      write_grid(make_case(case_name, level).grid, grid_out);
      return 0;
    }
    if (*plan) {
      RunConfig rc = parse_config_file(plan_config);
      if (plan_np) rc.np = plan_np;
      const CaseSetup c = build_case(rc);
      const DecompositionPlan p = make_plan(rc, c);
      const ExchangeSchedule s = build_schedule(p, relink_connected(p), rc.exchange.wait, rc.exchange.reorder);
      std::cout << plan_to_json(p, &s).dump(2) << "\n";
      return 0;
    }
    if (*cases) {
      for (const auto& n : case_names()) std::cout << n << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
