#pragma once

// Command implementations behind platoonctl. Each returns a process exit code
// and writes human-readable progress to `out`, diagnostics to `err`.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "platoon/sim.hpp"

namespace platoon::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kInfeasible = 3, kCollision = 4 };

/// "# generated <UTC time>" or nothing when suppressed.
std::string timestamp_line(bool enabled);

// ---------------------------------------------------------------------------
// synthesize / verify

struct SynthesizeOptions {
  int n = 3;
  double tau = 0.5;
  double h1 = 0.25;
  double mu1 = 0.9;
  std::optional<double> gamma;  // fixed level; bisection when empty
  double gamma_hi = 100.0;
  std::string output;           // gain file; the certificate goes to output + ".cert"
  bool timestamp = true;
};
int cmd_synthesize(const SynthesizeOptions& o, std::ostream& out, std::ostream& err);

struct VerifyOptions {
  std::string gains;
  // unset values come from the gain file header
  std::optional<int> n;
  std::optional<double> tau, h1, mu1, gamma;
};
int cmd_verify(const VerifyOptions& o, std::ostream& out, std::ostream& err);

// ---------------------------------------------------------------------------
// run

/// [run] section of a manifest file:
///   scenario  = path to a scenario INI, or builtin:a | builtin:a_nodelay | builtin:b | builtin:c
///   gain_file = optional override
///   output    = optional output directory
///   seed      = optional delay seed override
///   mode      = optional mcf | single_mpc
/// Relative paths resolve against the manifest's directory.
struct RunManifest {
  std::string scenario;
  std::string gain_file;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<sim::Mode> mode;
};

/// Throws sim::ConfigError.
RunManifest load_manifest(const std::string& path);
RunManifest parse_manifest(std::istream& is, const std::string& base_dir = ".");
sim::ScenarioConfig resolve_scenario(const RunManifest& m);

struct RunOptions {
  std::string manifest;
  std::optional<sim::Mode> mode;
  std::optional<std::uint64_t> seed;
  std::string output;  // overrides the manifest; falls back to $PLATOON_OUT_ROOT/<scenario>
  bool plots = true;
  bool timestamp = true;
};
int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err);

/// Output directory when neither -o nor the manifest names one.
std::string default_output_dir(const std::string& scenario_name);

// ---------------------------------------------------------------------------
// report

using MetricsTable = std::vector<std::pair<std::string, std::string>>;

struct ComparisonRow {
  std::string metric;
  std::string baseline;
  std::string mcf;
  std::optional<double> improvement_pct;  // 100 (baseline - mcf) / baseline
};

struct Comparison {
  std::string scenario;
  std::vector<ComparisonRow> rows;
  double max_error_improvement = 0.0;
};

class SchemaMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 100 (baseline - mcf) / baseline; 0 when both are 0.
double improvement_pct(double baseline, double mcf);

/// Roles come from the `mode` keys when they name one baseline and one MCF
/// run; otherwise `a` is the baseline. Throws SchemaMismatch.
Comparison compare_metrics(const MetricsTable& a, const MetricsTable& b);
void write_comparison_text(std::ostream& os, const Comparison& c);
void write_comparison_csv(std::ostream& os, const Comparison& c);

struct ReportOptions {
  std::string a, b;
  std::string output;
  bool timestamp = true;
};
int cmd_report(const ReportOptions& o, std::ostream& out, std::ostream& err);

// ---------------------------------------------------------------------------
// plots

/// Monochrome raster with a plain line-plot renderer, written as binary PBM.
class Bitmap {
 public:
  Bitmap(int width, int height);
  int width() const { return w_; }
  int height() const { return h_; }
  void set(int x, int y);
  bool get(int x, int y) const;
  /// Bresenham line; `pattern` is a 16-bit on/off mask cycled along the line.
  void line(int x0, int y0, int x1, int y1, std::uint16_t pattern = 0xFFFF);
  /// Same, starting at bit `phase` of the pattern; returns the phase after
  /// the last pixel so polylines keep their dashes continuous.
  int line_from(int x0, int y0, int x1, int y1, std::uint16_t pattern, int phase);
  void write_pbm(std::ostream& os) const;

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

struct Series {
  std::string label;
  std::vector<double> x, y;
};

/// Frame, ticks at round values, a dashed zero line when 0 is in range, and
/// one dash pattern per series.
Bitmap render_plot(const std::vector<Series>& series, int width = 640, int height = 400);

/// The six standard figures for a run: position error, velocity, trajectories,
/// commands, Q_ref and delay trace.
struct Figure {
  std::string name;
  std::vector<Series> series;
};
std::vector<Figure> standard_figures(const sim::SimLog& log);

/// Long-format plot data: figure,series,x,y.
void write_plot_data(std::ostream& os, const std::vector<Figure>& figures);

}  // namespace platoon::cli
