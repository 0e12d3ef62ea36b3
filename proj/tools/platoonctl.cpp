// platoonctl: gain synthesis, gain verification, scenario runs and reports.

#include <iostream>

#include "CLI11.hpp"
#include "platoon/cli.hpp"

using namespace platoon;

int main(int argc, char** argv) {
  CLI::App app{"Platoon coordination and motion planning toolkit"};
  app.require_subcommand(1);
  bool no_timestamp = false;
  app.add_flag("--no-timestamp", no_timestamp, "Omit the generated-at header line from written files");

  cli::SynthesizeOptions syn;
  double syn_gamma = 0.0;
  bool syn_bisect = false;
  auto* s = app.add_subcommand("synthesize", "Synthesize robust coordination gains");
  s->add_option("--n", syn.n, "Number of followers")->check(CLI::PositiveNumber);
  s->add_option("--tau", syn.tau, "Propulsion lag, s");
  s->add_option("--h1", syn.h1, "Delay upper bound, s");
  s->add_option("--mu1", syn.mu1, "Delay rate bound");
  auto* g = s->add_option("--gamma", syn_gamma, "Fixed H-infinity level");
  auto* b = s->add_flag("--bisect", syn_bisect, "Search for the smallest feasible level (default)");
  g->excludes(b);
  s->add_option("--gamma-max", syn.gamma_hi, "Upper end of the bisection bracket");
  s->add_option("-o,--output", syn.output, "Gain file to write")->required();

  cli::VerifyOptions ver;
  int ver_n = 0;
  double ver_tau = 0, ver_h1 = 0, ver_mu1 = 0, ver_gamma = 0;
  auto* v = app.add_subcommand("verify", "Check a gain file against the delay-dependent stability condition");
  v->add_option("gains", ver.gains, "Gain file")->required();
  auto* vn = v->add_option("--n", ver_n, "Number of followers (default: from the file)");
  auto* vt = v->add_option("--tau", ver_tau, "Propulsion lag, s");
  auto* vh = v->add_option("--h1", ver_h1, "Delay upper bound, s");
  auto* vm = v->add_option("--mu1", ver_mu1, "Delay rate bound");
  auto* vg = v->add_option("--gamma", ver_gamma, "H-infinity level");

  cli::RunOptions run;
  std::string run_mode;
  std::uint64_t run_seed = 0;
  bool no_plots = false;
  auto* r = app.add_subcommand("run", "Run a scenario manifest");
  r->add_option("manifest", run.manifest, "Manifest file")->required();
  auto* rm = r->add_option("--mode", run_mode, "mcf or single_mpc")->check(CLI::IsMember({"mcf", "single_mpc"}));
  auto* rs = r->add_option("--seed", run_seed, "Delay seed override");
  r->add_option("-o,--output", run.output, "Output directory");
  r->add_flag("--no-plots", no_plots, "Skip plot data and images");

  cli::ReportOptions rep;
  auto* p = app.add_subcommand("report", "Compare a single_mpc and an MCF metrics file");
  p->add_option("a", rep.a, "Metrics file (baseline unless its mode says otherwise)")->required();
  p->add_option("b", rep.b, "Metrics file")->required();
  p->add_option("-o,--output", rep.output, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }

  if (s->parsed()) {
    if (*g) syn.gamma = syn_gamma;
    syn.timestamp = !no_timestamp;
    return cli::cmd_synthesize(syn, std::cout, std::cerr);
  }
  if (v->parsed()) {
    if (*vn) ver.n = ver_n;
    if (*vt) ver.tau = ver_tau;
    if (*vh) ver.h1 = ver_h1;
    if (*vm) ver.mu1 = ver_mu1;
    if (*vg) ver.gamma = ver_gamma;
    return cli::cmd_verify(ver, std::cout, std::cerr);
  }
  if (r->parsed()) {
    if (*rm) run.mode = sim::parse_mode(run_mode);
    if (*rs) run.seed = run_seed;
    run.plots = !no_plots;
    run.timestamp = !no_timestamp;
    return cli::cmd_run(run, std::cout, std::cerr);
  }
  rep.timestamp = !no_timestamp;
  return cli::cmd_report(rep, std::cout, std::cerr);
}
