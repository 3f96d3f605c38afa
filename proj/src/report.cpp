#include "ttgoals/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ttgoals/bootstrap.hpp"

namespace ttgoals::report {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

int to_int(const std::string& s, std::size_t line) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    throw ParseError("expected an integer, got '" + s + "'", line);
  }
  if (pos != s.size()) throw ParseError("expected an integer, got '" + s + "'", line);
  return v;
}

std::optional<double> to_opt(const std::string& s, std::size_t line) {
  if (s == "nan") return std::nullopt;
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ParseError("expected a number, got '" + s + "'", line);
  }
  if (pos != s.size()) throw ParseError("expected a number, got '" + s + "'", line);
  return v;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Series {
  std::string label;
  Band band;
};

struct Panel {
  std::string title;
  std::vector<Series> series;
  double y_min = 0.0;
  std::optional<double> y_max;  // fitted to the data when empty
};

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

// Consecutive finite points, as separate subpaths.
std::string polyline(const std::vector<double>& x, const std::vector<double>& y) {
  std::string d;
  bool open = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(y[i])) {
      open = false;
      continue;
    }
    d += (open ? " L " : (d.empty() ? "M " : " M ")) + g17(x[i]) + " " + g17(y[i]);
    open = true;
  }
  return d;
}

void write_svg(const fs::path& path, const std::vector<Panel>& panels) {
  const double W = 640.0, H = 240.0, left = 60.0, right = 20.0, top = 30.0, bottom = 40.0;
  std::ofstream out(path);
  if (!out) throw Error("plot: cannot write " + path.string());
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "font-family=\"sans-serif\" font-size=\"11\">\n",
                W, H * panels.size());
  out << buf;
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
    double y1 = panel.y_min;
    for (const Series& s : panel.series) {
      for (std::size_t i = 0; i < s.band.x.size(); ++i) {
        x0 = std::min(x0, s.band.x[i]);
        x1 = std::max(x1, s.band.x[i]);
        if (std::isfinite(s.band.mean[i])) y1 = std::max(y1, s.band.mean[i] + s.band.std[i]);
      }
    }
    if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0;
    if (x1 <= x0) x0 -= 1.0, x1 += 1.0;
    if (panel.y_max) {
      y1 = *panel.y_max;
    } else {
      y1 = y1 > panel.y_min ? panel.y_min + 1.1 * (y1 - panel.y_min) : panel.y_min + 1.0;
    }
    const double oy = H * p;
    const double pw = W - left - right, ph = H - top - bottom;
    const double sx = pw / (x1 - x0), sy = ph / (y1 - panel.y_min);
    const double tx = left - sx * x0, ty = oy + top + ph + sy * panel.y_min;

    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
                  "stroke=\"#444\"/>\n",
                  left, oy + top, pw, ph);
    out << buf;
    out << "<text x=\"" << left << "\" y=\"" << oy + top - 8 << "\">" << panel.title << "</text>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>\n",
                  left - 4, oy + top + ph, panel.y_min, left - 4, oy + top + 10, y1);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\">%.6g</text>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.6g</text>\n",
                  left, oy + H - 20, x0, W - right, oy + H - 20, x1);
    out << buf;
    out << "<text x=\"" << left + pw / 2 << "\" y=\"" << oy + H - 6
        << "\" text-anchor=\"middle\">total trajectories</text>\n";

    out << "<g transform=\"matrix(" << g17(sx) << " 0 0 " << g17(-sy) << " " << g17(tx) << " "
        << g17(ty) << ")\">\n";
    for (std::size_t k = 0; k < panel.series.size(); ++k) {
      const Band& b = panel.series[k].band;
      const char* color = kColors[k % std::size(kColors)];
      std::vector<double> bx, by;
      for (std::size_t i = 0; i < b.x.size(); ++i) {
        if (std::isfinite(b.mean[i])) bx.push_back(b.x[i]), by.push_back(b.mean[i] + b.std[i]);
      }
      for (std::size_t i = b.x.size(); i-- > 0;) {
        if (std::isfinite(b.mean[i])) bx.push_back(b.x[i]), by.push_back(b.mean[i] - b.std[i]);
      }
      if (!bx.empty()) {
        out << "<path class=\"band\" d=\"" << polyline(bx, by) << " Z\" fill=\"" << color
            << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
      }
      out << "<path class=\"mean\" d=\"" << polyline(b.x, b.mean) << "\" fill=\"none\" stroke=\""
          << color << "\" stroke-width=\"1.5\" vector-effect=\"non-scaling-stroke\"/>\n";
    }
    out << "</g>\n";
    for (std::size_t k = 0; k < panel.series.size(); ++k) {
      if (panel.series[k].label.empty()) continue;
      std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" fill=\"%s\">%s</text>\n",
                    left + pw - 110, oy + top + 14 + 13 * k, kColors[k % std::size(kColors)],
                    panel.series[k].label.c_str());
      out << buf;
    }
  }
  out << "</svg>\n";
}

void write_band_csv(std::ostream& out, const std::string& metric, const std::string& label,
                    const Band& b) {
  for (std::size_t i = 0; i < b.x.size(); ++i) {
    out << metric << ',' << label << ',' << g17(b.x[i]) << ','
        << (std::isfinite(b.mean[i]) ? g17(b.mean[i]) : "nan") << ','
        << (std::isfinite(b.mean[i]) ? g17(b.std[i]) : "nan") << '\n';
  }
}

int read_demos(const fs::path& run_dir) {
  std::ifstream in(run_dir / "manifest.json");
  if (!in) return 0;
  try {
    const json m = json::parse(in);
    return m.value("demos", 0);
  } catch (const json::exception& e) {
    throw Error("plot: bad manifest in " + run_dir.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<ssp::ProgressRow> read_progress(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  std::size_t n = 0;
  std::vector<ssp::ProgressRow> rows;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (n == 1) {
      if (line != ssp::progress_header()) throw ParseError("unexpected progress header", n);
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 8) throw ParseError("expected 8 fields", n);
    ssp::ProgressRow r;
    r.iter = to_int(f[0], n);
    r.attempted = to_int(f[1], n);
    r.stored = to_int(f[2], n);
    r.cache_size = to_int(f[3], n);
    r.train_loss = to_opt(f[4], n);
    const auto p30 = to_opt(f[5], n);
    const auto p20 = to_opt(f[6], n);
    if (!p30 || !p20) throw ParseError("eval percentages must be numbers", n);
    r.eval_pct_30 = *p30;
    r.eval_pct_20 = *p20;
    r.mean_dist = to_opt(f[7], n);
    rows.push_back(r);
  }
  if (rows.empty()) throw Error("progress file " + path.string() + " has no rows");
  return rows;
}

Curve curve_from_rows(const std::vector<ssp::ProgressRow>& rows, int demos) {
  Curve c;
  double seen = demos;
  for (const auto& r : rows) {
    seen += r.attempted;
    c.x.push_back(seen);
    c.pct_30.push_back(r.eval_pct_30);
    c.pct_20.push_back(r.eval_pct_20);
    c.mean_dist.push_back(r.mean_dist);
  }
  return c;
}

Band band(const std::vector<Curve>& runs, Metric metric) {
  if (runs.empty()) throw Error("plot: no runs");
  Band b;
  b.x = runs.front().x;
  for (const Curve& c : runs) {
    if (c.x != b.x) throw Error("plot: runs do not share a trajectory schedule");
  }
  for (std::size_t i = 0; i < b.x.size(); ++i) {
    std::vector<double> v;
    for (const Curve& c : runs) {
      if (metric == Metric::pct_30) v.push_back(c.pct_30[i]);
      if (metric == Metric::pct_20) v.push_back(c.pct_20[i]);
      if (metric == Metric::mean_dist && c.mean_dist[i]) v.push_back(*c.mean_dist[i]);
    }
    if (v.empty()) {
      b.mean.push_back(kNaN);
      b.std.push_back(kNaN);
      continue;
    }
    double m = 0.0;
    for (double e : v) m += e;
    m /= static_cast<double>(v.size());
    double var = 0.0;
    for (double e : v) var += (e - m) * (e - m);
    b.mean.push_back(m);
    b.std.push_back(std::sqrt(var / static_cast<double>(v.size())));
  }
  return b;
}

std::vector<fs::path> find_runs(const fs::path& root) {
  if (fs::exists(root / "progress.csv")) return {root};
  std::vector<fs::path> runs;
  if (fs::is_directory(root)) {
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory() && fs::exists(e.path() / "progress.csv")) runs.push_back(e.path());
    }
  }
  std::sort(runs.begin(), runs.end());
  if (runs.empty()) throw Error("plot: no progress.csv under " + root.string());
  return runs;
}

Curve load_curve(const fs::path& run_dir) {
  return curve_from_rows(read_progress(run_dir / "progress.csv"), read_demos(run_dir));
}

void emit_learning_curve(const fs::path& run_root, const fs::path& svg) {
  std::vector<Curve> curves;
  for (const fs::path& r : find_runs(run_root)) curves.push_back(load_curve(r));
  const Band b30 = band(curves, Metric::pct_30);
  const Band b20 = band(curves, Metric::pct_20);
  const Band bd = band(curves, Metric::mean_dist);
  const std::string n = std::to_string(curves.size()) + (curves.size() == 1 ? " run" : " runs");
  write_svg(svg, {Panel{"% balls <= 30cm of goal (" + n + ")", {{"", b30}}, 0.0, 100.0},
                  Panel{"% balls <= 20cm of goal (" + n + ")", {{"", b20}}, 0.0, 100.0},
                  Panel{"mean distance to goal, m (" + n + ")", {{"", bd}}, 0.0, std::nullopt}});
  fs::path csv = svg;
  csv.replace_extension(".csv");
  std::ofstream out(csv);
  if (!out) throw Error("plot: cannot write " + csv.string());
  out << "metric,series,x,mean,std\n";
  write_band_csv(out, "pct_30cm", "all", b30);
  write_band_csv(out, "pct_20cm", "all", b20);
  write_band_csv(out, "mean_dist", "all", bd);
}

std::vector<std::vector<std::pair<double, double>>> parse_mean_paths(const std::string& svg) {
  std::vector<std::vector<std::pair<double, double>>> out;
  const std::string key = "<path class=\"mean\" d=\"";
  for (std::size_t pos = svg.find(key); pos != std::string::npos; pos = svg.find(key, pos)) {
    pos += key.size();
    const std::size_t end = svg.find('"', pos);
    std::istringstream in(svg.substr(pos, end - pos));
    std::vector<std::pair<double, double>> pts;
    std::string tok;
    while (in >> tok) {
      if (tok == "M" || tok == "L") continue;
      const double x = std::stod(tok);
      in >> tok;
      pts.emplace_back(x, std::stod(tok));
    }
    out.push_back(std::move(pts));
    pos = end;
  }
  return out;
}

double tail_efficiency(const std::vector<ssp::ProgressRow>& rows, int tail_attempts) {
  int attempted = 0, stored = 0;
  for (auto it = rows.rbegin(); it != rows.rend() && attempted < tail_attempts; ++it) {
    attempted += it->attempted;
    stored += it->stored;
  }
  return attempted > 0 ? static_cast<double>(stored) / attempted : 0.0;
}

double median(std::vector<double> v) {
  if (v.empty()) throw Error("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<AblationRun> ablate_demos(const config::Config& cfg, const AblationOptions& opt,
                                      const fs::path& out_dir) {
  if (opt.demo_counts.empty()) throw ConfigError("ablate: no demo counts");
  if (opt.seeds < 1) throw ConfigError("ablate: seeds must be >= 1");
  for (int c : opt.demo_counts) {
    if (c < 0) throw ConfigError("ablate: demo counts must be >= 0");
    if (c >= cfg.run.ssp.total_trajectory_budget) {
      throw ConfigError("ablate: demo count " + std::to_string(c) +
                        " leaves no practice within the trajectory budget");
    }
  }
  fs::create_directories(out_dir);
  std::vector<AblationRun> runs;
  std::vector<Series> s30, s20, seff;
  for (int count : opt.demo_counts) {
    std::vector<Curve> curves;
    std::vector<Curve> eff;
    for (int s = 0; s < opt.seeds; ++s) {
      config::Config c = cfg;
      c.run.seed = cfg.run.seed + static_cast<std::uint64_t>(s);
      const fs::path dir = out_dir / ("n" + std::to_string(count)) / ("seed" + std::to_string(s));
      const auto boot =
          bootstrap::generate_scripted(c.run.demonstrator, count, c.run.env,
                                       stream_seed(c.run.seed, 7), c.run.ssp.goal_margin);
      const ssp::Mode mode = count == 0 ? ssp::Mode::gcsl : ssp::Mode::goalseye;
      const ssp::RunResult res =
          ssp::run_training(c.run, mode, boot.demos, 1, dir, config::dump_config(c));
      AblationRun a;
      a.demos = count;
      a.seed = c.run.seed;
      a.attempted = res.attempted;
      a.stored = res.stored;
      a.final_efficiency = tail_efficiency(res.rows, opt.tail_attempts);
      a.final_pct_30 = res.final_metrics.pct(0.30);
      a.final_pct_20 = res.final_metrics.pct(0.20);
      Curve e;
      double seen = count;
      for (const auto& r : res.rows) {
        if (r.attempted == 0) continue;
        seen += r.attempted;
        a.efficiency.push_back(static_cast<double>(r.stored) / r.attempted);
        e.x.push_back(seen);
        e.pct_30.push_back(100.0 * a.efficiency.back());
        e.pct_20.push_back(0.0);
        e.mean_dist.push_back(std::nullopt);
      }
      eff.push_back(e);
      curves.push_back(curve_from_rows(res.rows, count));
      runs.push_back(std::move(a));
    }
    const std::string label = std::to_string(count) + " demos";
    s30.push_back({label, band(curves, Metric::pct_30)});
    s20.push_back({label, band(curves, Metric::pct_20)});
    seff.push_back({label, band(eff, Metric::pct_30)});
  }

  std::ofstream summary(out_dir / "ablation.csv");
  summary << "demos,seed,attempted,stored,final_efficiency,final_pct_30cm,final_pct_20cm\n";
  std::ofstream per_iter(out_dir / "efficiency.csv");
  per_iter << "demos,seed,practice_iter,efficiency\n";
  char buf[160];
  for (const AblationRun& a : runs) {
    std::snprintf(buf, sizeof buf, "%d,%llu,%d,%d,%.6f,%.6f,%.6f\n", a.demos,
                  static_cast<unsigned long long>(a.seed), a.attempted, a.stored,
                  a.final_efficiency, a.final_pct_30, a.final_pct_20);
    summary << buf;
    for (std::size_t i = 0; i < a.efficiency.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%d,%llu,%zu,%.6f\n", a.demos,
                    static_cast<unsigned long long>(a.seed), i, a.efficiency[i]);
      per_iter << buf;
    }
  }
  write_svg(out_dir / "curves.svg", {Panel{"% balls <= 30cm of goal", s30, 0.0, 100.0},
                                     Panel{"% balls <= 20cm of goal", s20, 0.0, 100.0}});
  write_svg(out_dir / "efficiency.svg",
            {Panel{"stored / attempted practice rollouts, %", seff, 0.0, 100.0}});
  return runs;
}

}  // namespace ttgoals::report
