#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>

#include "platoon/cli.hpp"

namespace platoon::cli {

namespace {

std::optional<double> number(const std::string& v) {
  if (v == "NA") return std::nullopt;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') return std::nullopt;
  return d;
}

std::map<std::string, std::string> as_map(const MetricsTable& t, const char* which) {
  std::map<std::string, std::string> m;
  for (const auto& [k, v] : t)
    if (!m.emplace(k, v).second) throw SchemaMismatch(std::string(which) + ": duplicate key '" + k + "'");
  return m;
}

bool wants_improvement(const std::string& key) { return key == "max_error" || key.rfind("error_norm_", 0) == 0; }

}  // namespace

double improvement_pct(double baseline, double mcf) {
  if (baseline == 0.0) return mcf == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return 100.0 * (baseline - mcf) / baseline;
}

Comparison compare_metrics(const MetricsTable& a, const MetricsTable& b) {
  auto ma = as_map(a, "first file"), mb = as_map(b, "second file");
  std::set<std::string> ka, kb;
  for (const auto& [k, v] : ma) ka.insert(k);
  for (const auto& [k, v] : mb) kb.insert(k);
  if (ka != kb) {
    std::string diff;
    for (const auto& k : ka)
      if (!kb.count(k)) diff += " -" + k;
    for (const auto& k : kb)
      if (!ka.count(k)) diff += " +" + k;
    throw SchemaMismatch("metrics files have different keys:" + diff);
  }
  for (const char* k : {"vehicles", "max_error"})
    if (!ma.count(k)) throw SchemaMismatch(std::string("metrics files lack '") + k + "'");
  if (ma["vehicles"] != mb["vehicles"]) throw SchemaMismatch("metrics files describe different platoon sizes");
  if (ma.count("scenario") && ma["scenario"] != mb["scenario"])
    throw SchemaMismatch("metrics files come from different scenarios ('" + ma["scenario"] + "' and '" +
                         mb["scenario"] + "')");

  const MetricsTable* base = &a;
  const MetricsTable* mcf = &b;
  if (ma.count("mode") && ma["mode"] == "mcf" && mb["mode"] == "single_mpc") std::swap(base, mcf);
  const auto mbase = as_map(*base, "baseline"), mmcf = as_map(*mcf, "mcf");

  Comparison c;
  if (ma.count("scenario")) c.scenario = ma["scenario"];
  for (const auto& [key, bv] : *base) {
    if (key == "scenario" || key == "mode") continue;
    ComparisonRow row{key, bv, mmcf.at(key), std::nullopt};
    if (wants_improvement(key)) {
      const auto x = number(bv), y = number(row.mcf);
      if (!x || !y) throw SchemaMismatch("'" + key + "' is not numeric");
      row.improvement_pct = improvement_pct(*x, *y);
      if (key == "max_error") c.max_error_improvement = *row.improvement_pct;
    }
    c.rows.push_back(row);
  }
  return c;
}

void write_comparison_text(std::ostream& os, const Comparison& c) {
  if (!c.scenario.empty()) os << "scenario " << c.scenario << "\n\n";
  os << std::left << std::setw(22) << "metric" << std::setw(24) << "single_mpc" << std::setw(24) << "mcf"
     << "improvement\n";
  for (const auto& r : c.rows) {
    os << std::left << std::setw(22) << r.metric << std::setw(24) << r.baseline << std::setw(24) << r.mcf;
    if (r.improvement_pct) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1f%%", *r.improvement_pct);
      os << buf;
    }
    os << '\n';
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f%%", c.max_error_improvement);
  os << "\nmax position error improvement: " << buf << '\n';
}

void write_comparison_csv(std::ostream& os, const Comparison& c) {
  os << "metric,single_mpc,mcf,improvement_pct\n";
  for (const auto& r : c.rows) {
    os << r.metric << ',' << r.baseline << ',' << r.mcf << ',';
    if (r.improvement_pct) {
      os << numerics::format_exact(*r.improvement_pct);
    } else {
      os << "NA";
    }
    os << '\n';
  }
}

int cmd_report(const ReportOptions& o, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  try {
    auto load = [](const std::string& p) {
      std::ifstream is(p);
      if (!is) throw sim::ConfigError("cannot open metrics file '" + p + "'");
      return sim::read_metrics(is);
    };
    const Comparison c = compare_metrics(load(o.a), load(o.b));
    const fs::path dir = o.output.empty() ? fs::path(default_output_dir("report")) : fs::path(o.output);
    fs::create_directories(dir);
    std::ofstream txt(dir / "comparison.txt", std::ios::binary), csv(dir / "comparison.csv", std::ios::binary);
    if (!txt || !csv) throw sim::ConfigError("cannot write into '" + dir.string() + "'");
    txt << timestamp_line(o.timestamp);
    write_comparison_text(txt, c);
    write_comparison_csv(csv, c);
    write_comparison_text(out, c);
    return kOk;
  } catch (const std::exception& e) {
    err << "report error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace platoon::cli
