#include <fstream>
#include <iomanip>
#include <sstream>

#include "platoon/ucl.hpp"

namespace platoon::ucl {

// Format (whitespace separated, '#' starts a comment):
//
//   platoon-gains <version>
//   n <followers>
//   tau <s>  h1 <s>  mu1 <ratio>  gamma <level>     (one key per line)
//   <index> k1_s k1_v k1_a k2_s k2_v k2_a           (one row per follower)

void write_gains(std::ostream& os, const GainFile& file) {
  const int n = file.gains.n();
  os << "platoon-gains " << file.version << "\n";
  const auto f = numerics::format_exact;
  os << "n " << n << "\n";
  os << "tau " << f(file.tau) << "\n";
  os << "h1 " << f(file.h1) << "\n";
  os << "mu1 " << f(file.mu1) << "\n";
  os << "gamma " << f(file.gamma) << "\n";
  os << "# follower k1_s k1_v k1_a k2_s k2_v k2_a\n";
  for (int i = 0; i < n; ++i) {
    const auto& a = file.gains.k1[static_cast<size_t>(i)];
    const auto& b = file.gains.k2[static_cast<size_t>(i)];
    os << (i + 1) << ' ' << f(a[0]) << ' ' << f(a[1]) << ' ' << f(a[2]) << ' ' << f(b[0]) << ' ' << f(b[1]) << ' '
       << f(b[2]) << "\n";
  }
}

GainFile read_gains(std::istream& is) {
  GainFile f;
  std::string line;
  int line_no = 0;
  int n = -1;
  bool header = false;
  auto fail = [&](const std::string& why) { throw GainFormatError("gain file line " + std::to_string(line_no) + ": " + why); };
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (!header) {
      if (key != "platoon-gains" || !(ls >> f.version)) fail("expected 'platoon-gains <version>' header");
      if (f.version != 1) fail("unsupported version " + std::to_string(f.version));
      header = true;
      continue;
    }
    if (key == "n") {
      if (!(ls >> n) || n < 1) fail("bad follower count");
      continue;
    }
    double* target = key == "tau" ? &f.tau : key == "h1" ? &f.h1 : key == "mu1" ? &f.mu1 : key == "gamma" ? &f.gamma : nullptr;
    if (target != nullptr) {
      if (!(ls >> *target)) fail("bad value for " + key);
      continue;
    }
    // gain row
    int idx = 0;
    try {
      idx = std::stoi(key);
    } catch (const std::exception&) {
      fail("unknown key '" + key + "'");
    }
    if (n < 1) fail("gain row before 'n'");
    if (idx != f.gains.n() + 1) fail("gain rows must be numbered 1..n in order");
    Gain a, b;
    if (!(ls >> a[0] >> a[1] >> a[2] >> b[0] >> b[1] >> b[2])) fail("expected six gain values");
    f.gains.k1.push_back(a);
    f.gains.k2.push_back(b);
  }
  if (!header) throw GainFormatError("gain file is empty");
  if (n < 1 || f.gains.n() != n) throw GainFormatError("gain file declares n=" + std::to_string(n) + " but has " +
                                                       std::to_string(f.gains.n()) + " rows");
  return f;
}

void save_gains(const std::string& path, const GainFile& file) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_gains(os, file);
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

GainFile load_gains(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open gain file '" + path + "'");
  return read_gains(is);
}

}  // namespace platoon::ucl
