#include "pdmp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <tuple>

#include <json.hpp>

namespace pdmp {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec == std::errc{}) return std::string(buf, res.ptr);
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trajectory_csv(const Trajectory& traj) {
  struct Row {
    double t;
    int tie;  // atom_exit=0, jump/forced=1, atom_enter=2
    const char* kind;
    double pre, post;
  };
  std::vector<Row> rows;
  rows.reserve(traj.events.size() + 2 * traj.atom_intervals.size());
  for (const auto& e : traj.events)
    rows.push_back({e.time, 1, e.forced ? "forced" : "jump", e.pre, e.post});
  for (const auto& a : traj.atom_intervals) {
    rows.push_back({a.entry, 2, "atom_enter", a.atom, a.atom});
    rows.push_back({a.exit, 0, "atom_exit", a.atom, a.atom});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.t, a.tie) < std::tie(b.t, b.tie);
  });
  std::string out = "t,kind,pre,post\n";
  for (const auto& r : rows) {
    out += format_double(r.t);
    out += ',';
    out += r.kind;
    out += ',';
    out += format_double(r.pre);
    out += ',';
    out += format_double(r.post);
    out += '\n';
  }
  return out;
}

std::string density_csv(const GridDensity& g) {
  std::string out = "x,nu_prime\n";
  for (std::size_t i = 0; i < g.grid.size(); ++i) {
    out += format_double(g.grid[i]);
    out += ',';
    out += format_double(g.values[i]);
    out += '\n';
  }
  return out;
}

std::string intensity_csv(const IntensityEstimate& est) {
  std::string out = "lo,hi,jumps,occupation,rate,ci_lo,ci_hi,reported\n";
  for (const auto& c : est.cells) {
    out += format_double(c.lo);
    out += ',';
    out += format_double(c.hi);
    out += ',';
    out += std::to_string(c.jumps);
    out += ',';
    out += format_double(c.occupation);
    out += ',';
    out += format_double(c.rate);
    out += ',';
    out += format_double(c.ci_lo);
    out += ',';
    out += format_double(c.ci_hi);
    out += ',';
    out += c.reported ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::string kernel_histogram_csv(const KernelHistogram& h) {
  std::string out = "from_lo,from_hi,to_lo,to_hi,value,row_count\n";
  for (std::size_t f = 0; f + 1 < h.from_edges.size(); ++f)
    for (std::size_t t = 0; t + 1 < h.to_edges.size(); ++t) {
      out += format_double(h.from_edges[f]);
      out += ',';
      out += format_double(h.from_edges[f + 1]);
      out += ',';
      out += format_double(h.to_edges[t]);
      out += ',';
      out += format_double(h.to_edges[t + 1]);
      out += ',';
      out += format_double(h.rows[f][t]);
      out += ',';
      out += std::to_string(h.row_counts[f]);
      out += '\n';
    }
  return out;
}

std::string lambda_star_csv(const ReversedPdmp& rev) {
  std::vector<char> flagged(rev.grid.size(), 0);
  for (std::size_t k : rev.lambda_star.flagged)
    if (k < flagged.size()) flagged[k] = 1;
  std::string out = "x,lambda_star,flagged\n";
  for (std::size_t i = 0; i < rev.grid.size(); ++i) {
    out += format_double(rev.grid[i]);
    out += ',';
    out += format_double(rev.lambda_star.y[i]);
    out += ',';
    out += flagged[i] ? '1' : '0';
    out += '\n';
  }
  return out;
}

namespace {
std::vector<std::size_t> decimate(std::size_t n, std::size_t max_n) {
  std::vector<std::size_t> idx;
  if (n == 0) return idx;
  const std::size_t stride = n <= max_n ? 1 : (n + max_n - 1) / max_n;
  for (std::size_t i = 0; i < n; i += stride) idx.push_back(i);
  if (idx.back() != n - 1) idx.push_back(n - 1);
  return idx;
}
}  // namespace

std::string kernel_star_csv(const ReversedPdmp& rev, std::size_t max_per_axis) {
  std::string out = "x,y,density\n";
  const auto idx = decimate(rev.grid.size(), max_per_axis);
  for (std::size_t i : idx)
    for (std::size_t j : idx) {
      out += format_double(rev.grid[i]);
      out += ',';
      out += format_double(rev.grid[j]);
      out += ',';
      out += format_double(rev.kernel_star.density[i][j]);
      out += '\n';
    }
  return out;
}

std::string boundary_law_star_csv(const ReversedPdmp& rev) {
  if (rev.boundary_law_star.empty()) return {};
  std::string out = "x,density\n";
  for (std::size_t i = 0; i < rev.grid.size(); ++i) {
    out += format_double(rev.grid[i]);
    out += ',';
    out += format_double(rev.boundary_law_star.y[i]);
    out += '\n';
  }
  return out;
}

std::string comparison_json(const std::vector<ComparisonReport>& reports, double level) {
  nlohmann::json j;
  j["level"] = level;
  j["bonferroni"] = {{"tests", reports.size()},
                     {"per_test_level", reports.empty() ? level : level / reports.size()}};
  bool all = true;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    all = all && r.pass;
    arr.push_back({{"target", r.target},
                   {"statistic", r.statistic},
                   {"value", r.value},
                   {"critical_value", r.critical_value},
                   {"n_effective", r.n_effective},
                   {"pass", r.pass}});
  }
  j["all_pass"] = all;
  j["reports"] = arr;
  return j.dump(2) + "\n";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw PdmpError("io: cannot open " + path + " for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  f.flush();
  if (!f.good()) throw PdmpError("io: write failed for " + path);
}

}  // namespace pdmp
