#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "platoon/cli.hpp"

namespace platoon::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) { return numerics::format_exact(v); }

void check_params(int n, double tau, double h1, double mu1) {
  if (n < 1) throw sim::ConfigError("n must be >= 1");
  if (!(tau > 0.0)) throw sim::ConfigError("tau must be positive");
  if (!(h1 > 0.0)) throw sim::ConfigError("h1 must be positive");
  if (!(mu1 >= 0.0 && mu1 < 1.0)) throw sim::ConfigError("mu1 must lie in [0, 1)");
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw sim::ConfigError("cannot write '" + p.string() + "'");
  return os;
}

void write_certificate(std::ostream& os, const ucl::SynthesisResult& r, const std::vector<std::pair<double, bool>>& trace) {
  os << "gamma = " << fmt(r.certificate.gamma) << '\n';
  os << "ccl_status = " << convex::to_string(r.ccl_status) << '\n';
  os << "ccl_iterations = " << r.ccl_iterations << '\n';
  os << "final_gap = " << fmt(r.final_gap) << '\n';
  os << "worst_margin = " << fmt(r.certificate.worst_margin()) << '\n';
  for (size_t i = 0; i < r.certificate.margins.size(); ++i)
    os << "margin." << r.certificate.labels[i] << " = " << fmt(r.certificate.margins[i]) << '\n';
  for (const auto& [g, ok] : trace) os << "bisection = " << fmt(g) << (ok ? " feasible" : " infeasible") << '\n';
}

}  // namespace

std::string timestamp_line(bool enabled) {
  if (!enabled) return {};
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[64];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof buf, "# generated %Y-%m-%dT%H:%M:%SZ\n", &tm);
  return buf;
}

int cmd_synthesize(const SynthesizeOptions& o, std::ostream& out, std::ostream& err) {
  try {
    check_params(o.n, o.tau, o.h1, o.mu1);
    if (o.output.empty()) throw sim::ConfigError("no output gain file given");
    if (o.gamma && !(*o.gamma > 0.0)) throw sim::ConfigError("gamma must be positive");

    ucl::SynthesisResult res;
    std::vector<std::pair<double, bool>> trace;
    if (o.gamma) {
      res = ucl::synthesize_gains(ucl::assemble_platoon(o.n, o.tau, o.h1, o.mu1, *o.gamma));
    } else {
      ucl::GammaSearch s = ucl::synthesize_min_gamma(o.n, o.tau, o.h1, o.mu1, 0.1, o.gamma_hi);
      res = std::move(s.best);
      trace = std::move(s.trace);
    }

    ucl::GainFile file;
    file.tau = o.tau;
    file.h1 = o.h1;
    file.mu1 = o.mu1;
    file.gamma = res.certificate.gamma;
    file.gains = res.gains;
    {
      std::ofstream os = open_out(o.output);
      os << timestamp_line(o.timestamp);
      ucl::write_gains(os, file);
    }
    {
      std::ofstream os = open_out(o.output + ".cert");
      os << timestamp_line(o.timestamp);
      write_certificate(os, res, trace);
    }
    out << "gamma " << res.certificate.gamma << ", worst margin " << res.certificate.worst_margin() << ", "
        << res.ccl_iterations << " CCL iterations\n";
    out << "wrote " << o.output << " and " << o.output << ".cert\n";
    return kOk;
  } catch (const sim::ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ucl::SynthesisInfeasible& e) {
    err << "synthesis infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}

int cmd_verify(const VerifyOptions& o, std::ostream& out, std::ostream& err) {
  ucl::GainFile file;
  try {
    file = ucl::load_gains(o.gains);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  const int n = o.n.value_or(file.gains.n());
  const double tau = o.tau.value_or(file.tau), h1 = o.h1.value_or(file.h1), mu1 = o.mu1.value_or(file.mu1);
  const double gamma = o.gamma.value_or(file.gamma);
  try {
    check_params(n, tau, h1, mu1);
    if (!(gamma > 0.0)) throw sim::ConfigError("gamma must be positive (gain file has none; pass --gamma)");
    if (n != file.gains.n())
      throw sim::ConfigError("--n " + std::to_string(n) + " does not match the gain file (n=" +
                             std::to_string(file.gains.n()) + ")");
  } catch (const sim::ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  out << "n = " << n << ", tau = " << tau << ", h1 = " << h1 << ", mu1 = " << mu1 << ", gamma = " << gamma << '\n';
  try {
    const ucl::StabilityCertificate c = ucl::verify_gains(ucl::assemble_platoon(n, tau, h1, mu1, gamma), file.gains);
    for (size_t i = 0; i < c.margins.size(); ++i) out << "  " << c.labels[i] << " margin " << c.margins[i] << '\n';
    out << "feasible (worst margin " << c.worst_margin() << ")\n";
    return kOk;
  } catch (const ucl::VerificationFailed& e) {
    out << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  }
}

// ---------------------------------------------------------------------------

RunManifest parse_manifest(std::istream& is, const std::string& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw sim::ConfigError(std::string("malformed manifest: ") + e.what());
  }
  RunManifest m;
  auto path = [&](const std::string& v) {
    if (v.empty() || v.rfind("builtin:", 0) == 0 || fs::path(v).is_absolute()) return v;
    return (fs::path(base_dir) / v).lexically_normal().string();
  };
  for (const auto& [section, body] : tree) {
    if (section != "run") throw sim::ConfigError("manifest: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const std::string v = value.data();
      if (key == "scenario") {
        m.scenario = path(v);
      } else if (key == "gain_file") {
        m.gain_file = path(v);
      } else if (key == "output") {
        m.output = path(v);
      } else if (key == "seed") {
        try {
          if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) throw std::invalid_argument(v);
          const unsigned long long s = std::stoull(v);
          m.seed = s;
        } catch (const std::exception&) {
          throw sim::ConfigError("manifest: seed is not a non-negative integer: '" + v + "'");
        }
      } else if (key == "mode") {
        m.mode = sim::parse_mode(v);
      } else {
        throw sim::ConfigError("manifest: unknown key '" + key + "'");
      }
    }
  }
  if (m.scenario.empty()) throw sim::ConfigError("manifest: no scenario given");
  return m;
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw sim::ConfigError("cannot open manifest '" + path + "'");
  return parse_manifest(is, fs::path(path).parent_path().string());
}

sim::ScenarioConfig resolve_scenario(const RunManifest& m) {
  sim::ScenarioConfig c;
  if (m.scenario == "builtin:a")
    c = sim::scenario_a(true);
  else if (m.scenario == "builtin:a_nodelay")
    c = sim::scenario_a(false);
  else if (m.scenario == "builtin:b")
    c = sim::scenario_b();
  else if (m.scenario == "builtin:c")
    c = sim::scenario_c();
  else if (m.scenario.rfind("builtin:", 0) == 0)
    throw sim::ConfigError("unknown builtin scenario '" + m.scenario + "'");
  else
    c = sim::load_scenario(m.scenario);
  if (!m.gain_file.empty()) {
    c.gain_file = m.gain_file;
    c.gains = {};
    sim::resolve_gains(c);
  }
  if (m.seed) c.seed = *m.seed;
  if (m.mode) c.mode = *m.mode;
  c.validate();
  return c;
}

std::string default_output_dir(const std::string& scenario_name) {
  const char* root = std::getenv("PLATOON_OUT_ROOT");
  const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
  return (base / scenario_name).string();
}

int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  sim::ScenarioConfig cfg;
  RunManifest m;
  try {
    m = load_manifest(o.manifest);
    if (o.mode) m.mode = o.mode;
    if (o.seed) m.seed = o.seed;
    cfg = resolve_scenario(m);
  } catch (const sim::ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  const fs::path dir = !o.output.empty() ? fs::path(o.output) : !m.output.empty() ? fs::path(m.output)
                                                                                   : fs::path(default_output_dir(cfg.name));
  const std::string prefix = cfg.name + "_" + sim::to_string(cfg.mode);
  auto file = [&](const std::string& suffix) { return dir / (prefix + suffix); };

  out << "running " << cfg.name << " (" << sim::to_string(cfg.mode) << ", " << cfg.duration << " s, seed " << cfg.seed
      << ")\n";
  const auto t0 = std::chrono::steady_clock::now();
  sim::SimLog log;
  try {
    log = sim::run_scenario(cfg);
  } catch (const sim::ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const sim::Metrics metrics = sim::compute_metrics(log);

  try {
    {
      std::ofstream os = open_out(file("_scenario.ini"));
      os << timestamp_line(o.timestamp);
      sim::write_scenario(os, cfg);
    }
    {
      std::ofstream os = open_out(file(".csv"));
      sim::write_csv(os, log);
    }
    {
      std::ofstream os = open_out(file("_events.csv"));
      sim::write_events_csv(os, log);
    }
    {
      std::ofstream os = open_out(file(".metrics"));
      os << timestamp_line(o.timestamp);
      os << "scenario = " << cfg.name << '\n' << "mode = " << sim::to_string(cfg.mode) << '\n';
      sim::write_metrics(os, metrics);
    }
    {
      // wall-clock figures vary run to run, so they live apart from the metrics
      const sim::TimingSummary ts = sim::timing_summary(log);
      std::ofstream os = open_out(file("_timing.txt"));
      os << "wall_seconds = " << fmt(wall) << '\n'
         << "solves = " << ts.solves << '\n'
         << "mean_solve_seconds = " << fmt(ts.mean_solve) << '\n'
         << "max_solve_seconds = " << fmt(ts.max_solve) << '\n';
    }
    if (o.plots) {
      const auto figures = standard_figures(log);
      {
        std::ofstream os = open_out(file("_plotdata.csv"));
        write_plot_data(os, figures);
      }
      for (size_t k = 0; k < figures.size(); ++k) {
        std::ofstream os = open_out(file("_fig" + std::to_string(k + 1) + "_" + figures[k].name + ".pbm"));
        render_plot(figures[k].series).write_pbm(os);
      }
    }
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << '\n';
    return kConfigError;
  }

  out << "max_error " << metrics.max_error << " m, min clearance " << metrics.min_clearance << " m, wall "
      << wall << " s\n";
  out << "outputs in " << dir.string() << '\n';
  if (log.status == sim::RunStatus::Collision) {
    err << "collision:\n";
    for (const auto& e : log.events)
      if (e.kind == "collision") err << "  t=" << e.t << " vehicle " << e.id << " " << e.detail << '\n';
    return kCollision;
  }
  return kOk;
}

}  // namespace platoon::cli
