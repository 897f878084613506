#include "akhcfs/metrics.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "akhcfs/env.h"
#include "akhcfs/errors.h"

namespace akhcfs {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::optional<double>> per_step_ttc(std::span<const double> x_error,
                                                std::span<const double> v_error) {
  if (x_error.size() != v_error.size()) {
    throw std::invalid_argument("per_step_ttc: series lengths differ");
  }
  std::vector<std::optional<double>> out(x_error.size());
  for (std::size_t i = 0; i < x_error.size(); ++i) {
    out[i] = time_to_collision(x_error[i], v_error[i]);
  }
  return out;
}

std::optional<double> mean_ttc_in_band(std::span<const std::optional<double>> ttc,
                                       double band_s) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& t : ttc) {
    if (t && *t > 0.0 && *t <= band_s) {
      sum += *t;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

double mean_abs_jerk(std::span<const double> accel, double dt) {
  if (accel.size() < 2) throw std::invalid_argument("mean_abs_jerk needs at least two samples");
  if (!(dt > 0.0)) throw std::invalid_argument("mean_abs_jerk needs dt > 0");
  double sum = 0.0;
  for (std::size_t k = 1; k < accel.size(); ++k) sum += std::abs((accel[k] - accel[k - 1]) / dt);
  return sum / static_cast<double>(accel.size() - 1);
}

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

QuartileSummary summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summarize of an empty sample");
  QuartileSummary s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.q1 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q3 = quantile(values, 0.75);
  s.count = values.size();
  return s;
}

std::vector<std::string> enumerate_mixes(std::size_t n) {
  if (n == 0 || n > 20) throw std::invalid_argument("mix enumeration supports 1..20 followers");
  std::vector<std::string> mixes;
  const std::size_t total = (std::size_t{1} << n) - 1;
  mixes.reserve(total);
  for (std::size_t mask = 1; mask <= total; ++mask) {
    std::string mix(n, 'H');
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::size_t{1} << i)) mix[i] = 'A';
    }
    mixes.push_back(std::move(mix));
  }
  return mixes;
}

FollowerMetrics follower_metrics(const FollowerSeries& series, double dt,
                                 const MetricsParams& params) {
  FollowerMetrics m;
  m.is_av = series.is_av;
  m.collided = series.collided;
  const auto ttc = per_step_ttc(series.x_error, series.v_error);
  m.mean_ttc_in_band = mean_ttc_in_band(ttc, params.ttc_band_s);
  m.mean_abs_jerk = series.accel.size() >= 2 ? mean_abs_jerk(series.accel, dt) : 0.0;
  if (!series.speed.empty()) {
    m.mean_speed = std::accumulate(series.speed.begin(), series.speed.end(), 0.0) /
                   static_cast<double>(series.speed.size());
  }
  return m;
}

const AlgorithmSummary* AggregateReport::find(const std::string& algorithm) const {
  for (const auto& a : algorithms) {
    if (a.algorithm == algorithm) return &a;
  }
  return nullptr;
}

std::size_t ttc_bin_count(const MetricsParams& params) {
  if (!(params.ttc_bin_width_s > 0.0)) throw ConfigError("ttc bin width must be positive");
  return static_cast<std::size_t>(std::ceil(params.ttc_band_s / params.ttc_bin_width_s - 1e-9));
}

namespace {

struct BinAccumulator {
  std::size_t followers = 0;
  std::size_t collided = 0;
  double ttc_sum = 0.0;
  std::size_t ttc_n = 0;
  double jerk_sum = 0.0;
  double speed_sum = 0.0;
};

std::optional<QuartileSummary> maybe_summary(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return summarize(v);
}

}  // namespace

AggregateReport aggregate(std::span<const EventMetrics> events, const MetricsParams& params) {
  AggregateReport report;
  report.params = params;
  const std::size_t bins = ttc_bin_count(params);

  std::map<std::string, std::vector<const EventMetrics*>> by_algo;
  for (const auto& e : events) by_algo[e.algorithm].push_back(&e);

  for (const auto& [name, list] : by_algo) {
    AlgorithmSummary s;
    s.algorithm = name;
    s.ttc_histogram.assign(bins, 0);
    std::vector<double> ttc, jerk, speed;
    std::map<long long, BinAccumulator> speed_bins;
    for (const EventMetrics* e : list) {
      ++s.episodes;
      s.steps += e->steps;
      if (e->collided) ++s.collisions;
      const auto bin_key =
          static_cast<long long>(std::floor(e->leader_mean_speed / params.speed_bin_width_mps));
      for (const auto& f : e->followers) {
        if (!f.is_av) continue;
        ++s.av_followers;
        if (f.collided) ++s.collided_followers;
        jerk.push_back(f.mean_abs_jerk);
        speed.push_back(f.mean_speed);
        s.max_mean_abs_jerk = std::max(s.max_mean_abs_jerk, f.mean_abs_jerk);
        if (f.mean_abs_jerk > params.jerk_threshold) ++s.jerk_violations;
        auto& bin = speed_bins[bin_key];
        ++bin.followers;
        if (f.collided) ++bin.collided;
        bin.jerk_sum += f.mean_abs_jerk;
        bin.speed_sum += f.mean_speed;
        if (f.mean_ttc_in_band) {
          const double t = *f.mean_ttc_in_band;
          ttc.push_back(t);
          ++s.ttc_in_band_followers;
          const auto idx = std::min(static_cast<std::size_t>(t / params.ttc_bin_width_s), bins - 1);
          ++s.ttc_histogram[idx];
          bin.ttc_sum += t;
          ++bin.ttc_n;
        }
      }
    }
    s.ttc = maybe_summary(ttc);
    s.jerk = maybe_summary(jerk);
    s.speed = maybe_summary(speed);
    for (const auto& [key, acc] : speed_bins) {
      SpeedBin b;
      b.lo_mps = static_cast<double>(key) * params.speed_bin_width_mps;
      b.followers = acc.followers;
      b.collided = acc.collided;
      if (acc.ttc_n > 0) b.mean_ttc = acc.ttc_sum / static_cast<double>(acc.ttc_n);
      b.mean_abs_jerk = acc.jerk_sum / static_cast<double>(acc.followers);
      b.mean_speed = acc.speed_sum / static_cast<double>(acc.followers);
      s.speed_bins.push_back(b);
    }
    report.algorithms.push_back(std::move(s));
  }
  return report;
}

namespace {

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json summary_to_json(const std::optional<QuartileSummary>& s) {
  if (!s) return nullptr;
  return json{{"count", s->count}, {"min", s->min},       {"q1", s->q1},
              {"median", s->median}, {"q3", s->q3}, {"max", s->max}};
}

std::optional<QuartileSummary> summary_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  QuartileSummary s;
  s.count = j.at("count").get<std::size_t>();
  s.min = j.at("min").get<double>();
  s.q1 = j.at("q1").get<double>();
  s.median = j.at("median").get<double>();
  s.q3 = j.at("q3").get<double>();
  s.max = j.at("max").get<double>();
  return s;
}

}  // namespace

json report_to_json(const AggregateReport& report) {
  json algos = json::array();
  for (const auto& s : report.algorithms) {
    json bins = json::array();
    for (const auto& b : s.speed_bins) {
      bins.push_back({{"lo_mps", b.lo_mps},
                      {"followers", b.followers},
                      {"collided", b.collided},
                      {"mean_ttc", optional_to_json(b.mean_ttc)},
                      {"mean_abs_jerk", b.mean_abs_jerk},
                      {"mean_speed", b.mean_speed}});
    }
    algos.push_back({{"algorithm", s.algorithm},
                     {"episodes", s.episodes},
                     {"steps", s.steps},
                     {"collisions", s.collisions},
                     {"collided_followers", s.collided_followers},
                     {"av_followers", s.av_followers},
                     {"ttc_in_band_followers", s.ttc_in_band_followers},
                     {"ttc_histogram", s.ttc_histogram},
                     {"ttc", summary_to_json(s.ttc)},
                     {"jerk", summary_to_json(s.jerk)},
                     {"speed", summary_to_json(s.speed)},
                     {"jerk_violations", s.jerk_violations},
                     {"max_mean_abs_jerk", s.max_mean_abs_jerk},
                     {"speed_bins", bins}});
  }
  const auto& p = report.params;
  return json{{"format", "akhcfs-report"},
              {"version", 1},
              {"params",
               {{"ttc_band_s", p.ttc_band_s},
                {"ttc_bin_width_s", p.ttc_bin_width_s},
                {"jerk_threshold", p.jerk_threshold},
                {"speed_bin_width_mps", p.speed_bin_width_mps},
                {"write_svg", p.write_svg}}},
              {"algorithms", algos}};
}

AggregateReport report_from_json(const json& j) {
  if (j.value("format", "") != "akhcfs-report") throw DataError("not an akhcfs report");
  AggregateReport report;
  const auto& p = j.at("params");
  report.params.ttc_band_s = p.at("ttc_band_s").get<double>();
  report.params.ttc_bin_width_s = p.at("ttc_bin_width_s").get<double>();
  report.params.jerk_threshold = p.at("jerk_threshold").get<double>();
  report.params.speed_bin_width_mps = p.at("speed_bin_width_mps").get<double>();
  report.params.write_svg = p.at("write_svg").get<bool>();
  for (const auto& a : j.at("algorithms")) {
    AlgorithmSummary s;
    s.algorithm = a.at("algorithm").get<std::string>();
    s.episodes = a.at("episodes").get<std::size_t>();
    s.steps = a.at("steps").get<std::size_t>();
    s.collisions = a.at("collisions").get<std::size_t>();
    s.collided_followers = a.at("collided_followers").get<std::size_t>();
    s.av_followers = a.at("av_followers").get<std::size_t>();
    s.ttc_in_band_followers = a.at("ttc_in_band_followers").get<std::size_t>();
    s.ttc_histogram = a.at("ttc_histogram").get<std::vector<std::size_t>>();
    s.ttc = summary_from_json(a.at("ttc"));
    s.jerk = summary_from_json(a.at("jerk"));
    s.speed = summary_from_json(a.at("speed"));
    s.jerk_violations = a.at("jerk_violations").get<std::size_t>();
    s.max_mean_abs_jerk = a.at("max_mean_abs_jerk").get<double>();
    for (const auto& b : a.at("speed_bins")) {
      SpeedBin bin;
      bin.lo_mps = b.at("lo_mps").get<double>();
      bin.followers = b.at("followers").get<std::size_t>();
      bin.collided = b.at("collided").get<std::size_t>();
      bin.mean_ttc = optional_from_json(b.at("mean_ttc"));
      bin.mean_abs_jerk = b.at("mean_abs_jerk").get<double>();
      bin.mean_speed = b.at("mean_speed").get<double>();
      s.speed_bins.push_back(bin);
    }
    report.algorithms.push_back(std::move(s));
  }
  return report;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

void write_summary_row(std::ostream& out, const std::string& algo, const char* metric,
                       const std::optional<QuartileSummary>& s) {
  out << algo << ',' << metric;
  if (s) {
    out << ',' << format_double(s->min) << ',' << format_double(s->q1) << ','
        << format_double(s->median) << ',' << format_double(s->q3) << ','
        << format_double(s->max);
  } else {
    out << ",,,,,";
  }
  out << '\n';
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

void write_histogram_svg(const AggregateReport& report, const fs::path& path) {
  const double width = 640, height = 360, left = 50, bottom = 40, top = 20;
  const std::size_t bins = ttc_bin_count(report.params);
  std::size_t peak = 1;
  for (const auto& s : report.algorithms) {
    for (auto c : s.ttc_histogram) peak = std::max(peak, c);
  }
  const double plot_w = width - left - 20;
  const double plot_h = height - bottom - top;
  const double group_w = plot_w / static_cast<double>(std::max<std::size_t>(bins, 1));
  const double bar_w = group_w / static_cast<double>(report.algorithms.size() + 1);
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - 20
      << "\" y2=\"" << height - bottom << "\" stroke=\"black\"/>\n";
  for (std::size_t a = 0; a < report.algorithms.size(); ++a) {
    const auto& s = report.algorithms[a];
    for (std::size_t b = 0; b < s.ttc_histogram.size(); ++b) {
      const double h = plot_h * static_cast<double>(s.ttc_histogram[b]) / static_cast<double>(peak);
      const double x = left + group_w * static_cast<double>(b) + bar_w * static_cast<double>(a);
      out << "<rect x=\"" << format_double(x) << "\" y=\"" << format_double(height - bottom - h)
          << "\" width=\"" << format_double(bar_w) << "\" height=\"" << format_double(h)
          << "\" fill=\"" << kPalette[a % 5] << "\"/>\n";
    }
    out << "<text x=\"" << left + 10 << "\" y=\"" << top + 14 * (a + 1) << "\" fill=\""
        << kPalette[a % 5] << "\" font-size=\"12\">" << s.algorithm << "</text>\n";
  }
  for (std::size_t b = 0; b < bins; ++b) {
    out << "<text x=\"" << format_double(left + group_w * static_cast<double>(b)) << "\" y=\""
        << height - bottom + 15 << "\" font-size=\"10\">"
        << format_double(static_cast<double>(b) * report.params.ttc_bin_width_s) << "</text>\n";
  }
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 5
      << "\" font-size=\"12\">mean TTC in band (s)</text>\n</svg>\n";
}

void write_boxplot_svg(const AggregateReport& report, const fs::path& path) {
  const double width = 640, height = 360, left = 50, bottom = 40, top = 20;
  double peak = 1e-9;
  for (const auto& s : report.algorithms) {
    if (s.jerk) peak = std::max(peak, s.jerk->max);
  }
  const double plot_h = height - bottom - top;
  const auto y_of = [&](double v) { return format_double(height - bottom - plot_h * v / peak); };
  const double slot = (width - left - 20) / static_cast<double>(std::max<std::size_t>(report.algorithms.size(), 1));
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t a = 0; a < report.algorithms.size(); ++a) {
    const auto& s = report.algorithms[a];
    const double cx = left + slot * (static_cast<double>(a) + 0.5);
    const double bw = slot * 0.4;
    if (s.jerk) {
      const auto& q = *s.jerk;
      out << "<line x1=\"" << format_double(cx) << "\" y1=\"" << y_of(q.min) << "\" x2=\""
          << format_double(cx) << "\" y2=\"" << y_of(q.max) << "\" stroke=\"black\"/>\n";
      out << "<rect x=\"" << format_double(cx - bw / 2) << "\" y=\"" << y_of(q.q3)
          << "\" width=\"" << format_double(bw) << "\" height=\""
          << format_double(plot_h * (q.q3 - q.q1) / peak) << "\" fill=\"" << kPalette[a % 5]
          << "\" stroke=\"black\"/>\n";
      out << "<line x1=\"" << format_double(cx - bw / 2) << "\" y1=\"" << y_of(q.median)
          << "\" x2=\"" << format_double(cx + bw / 2) << "\" y2=\"" << y_of(q.median)
          << "\" stroke=\"black\"/>\n";
    }
    out << "<text x=\"" << format_double(cx - bw / 2) << "\" y=\"" << height - bottom + 15
        << "\" font-size=\"12\">" << s.algorithm << "</text>\n";
  }
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 5
      << "\" font-size=\"12\">mean |jerk| (m/s^3)</text>\n</svg>\n";
}

}  // namespace

void emit_report(const AggregateReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  {
    auto out = open_out(out_dir / "report.json");
    out << report_to_json(report).dump(2) << '\n';
  }
  {
    auto out = open_out(out_dir / "tables.csv");
    out << "algorithm,metric,min,q1,median,q3,max\n";
    for (const auto& s : report.algorithms) {
      write_summary_row(out, s.algorithm, "mean_ttc_in_band", s.ttc);
      write_summary_row(out, s.algorithm, "mean_abs_jerk", s.jerk);
      write_summary_row(out, s.algorithm, "mean_speed", s.speed);
    }
  }
  {
    auto out = open_out(out_dir / "fig_ttc_histogram.csv");
    out << "algorithm,bin_lo_s,bin_hi_s,followers\n";
    for (const auto& s : report.algorithms) {
      for (std::size_t b = 0; b < s.ttc_histogram.size(); ++b) {
        const double lo = static_cast<double>(b) * report.params.ttc_bin_width_s;
        const double hi = std::min(lo + report.params.ttc_bin_width_s, report.params.ttc_band_s);
        out << s.algorithm << ',' << format_double(lo) << ',' << format_double(hi) << ','
            << s.ttc_histogram[b] << '\n';
      }
    }
  }
  {
    auto out = open_out(out_dir / "fig_speed_bins.csv");
    out << "algorithm,leader_speed_lo_mps,followers,collided,mean_ttc,mean_abs_jerk,mean_speed\n";
    for (const auto& s : report.algorithms) {
      for (const auto& b : s.speed_bins) {
        out << s.algorithm << ',' << format_double(b.lo_mps) << ',' << b.followers << ','
            << b.collided << ',' << opt_text(b.mean_ttc) << ',' << format_double(b.mean_abs_jerk)
            << ',' << format_double(b.mean_speed) << '\n';
      }
    }
  }
  {
    auto out = open_out(out_dir / "fig_collisions.csv");
    out << "algorithm,episodes,steps,collisions,collided_followers,jerk_violations\n";
    for (const auto& s : report.algorithms) {
      out << s.algorithm << ',' << s.episodes << ',' << s.steps << ',' << s.collisions << ','
          << s.collided_followers << ',' << s.jerk_violations << '\n';
    }
  }
  if (report.params.write_svg) {
    write_histogram_svg(report, out_dir / "ttc_histogram.svg");
    write_boxplot_svg(report, out_dir / "jerk_boxplot.svg");
  }
}

AggregateReport read_report(const fs::path& report_json) {
  std::ifstream in(report_json);
  if (!in) throw DataError("cannot read " + report_json.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(report_json.string() + ": " + e.what());
  }
  return report_from_json(j);
}

void write_events_csv(std::span<const EventMetrics> events, const fs::path& path) {
  auto out = open_out(path);
  out << "algorithm,event_id,mix,follower,is_av,collided,mean_ttc_in_band,mean_abs_jerk,"
         "mean_speed,leader_mean_speed,steps\n";
  for (const auto& e : events) {
    for (std::size_t i = 0; i < e.followers.size(); ++i) {
      const auto& f = e.followers[i];
      out << e.algorithm << ',' << e.event_id << ',' << e.mix << ',' << i + 1 << ','
          << (f.is_av ? 1 : 0) << ',' << (f.collided ? 1 : 0) << ','
          << opt_text(f.mean_ttc_in_band) << ',' << format_double(f.mean_abs_jerk) << ','
          << format_double(f.mean_speed) << ',' << format_double(e.leader_mean_speed) << ','
          << e.steps << '\n';
    }
  }
}

}  // namespace akhcfs
