#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace steinlab {

/// 17 significant digits: enough to round-trip any double, and the format
/// every CSV cell uses so reruns are byte-identical.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV with a header row, UTF-8, LF line endings.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out_ << ',';
      out_ << header[i];
    }
    out_ << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

/// One verdict of a module assertion: the JSON summary records the margin so
/// a flaky failure is diagnosable from artifacts alone.
struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;

  static CheckResult leq(std::string name, double value, double threshold, std::string detail = "") {
    CheckResult c;
    c.name = std::move(name);
    c.value = value;
    c.threshold = threshold;
    c.pass = value <= threshold;
    c.detail = std::move(detail);
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["pass"] = pass;
    j["value"] = value;
    j["threshold"] = threshold;
    j["margin"] = threshold - value;
    if (!detail.empty()) j["detail"] = detail;
    return j;
  }
};

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Ordinary least squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Minimal static SVG scatter/line plot on log-log axes with the fitted
/// slope annotated; values must be positive.
class RatePlot {
 public:
  RatePlot(std::string title, std::string xlabel) : title_(std::move(title)), xlabel_(std::move(xlabel)) {}

  void add_series(const std::string& label, const std::vector<double>& x, const std::vector<double>& y,
                  const std::string& color) {
    Series s;
    s.label = label;
    s.color = color;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (y[i] > 0.0 && x[i] > 0.0) {
        s.lx.push_back(std::log10(x[i]));
        s.ly.push_back(std::log10(y[i]));
      }
    }
    if (s.lx.size() >= 2) s.slope = fit_slope(s.lx, s.ly);
    series_.push_back(std::move(s));
  }

  void write(const std::string& path) const {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series_) {
      for (std::size_t i = 0; i < s.lx.size(); ++i) {
        xmin = std::min(xmin, s.lx[i]);
        xmax = std::max(xmax, s.lx[i]);
        ymin = std::min(ymin, s.ly[i]);
        ymax = std::max(ymax, s.ly[i]);
      }
    }
    if (xmin > xmax) {
      xmin = 0;
      xmax = 1;
      ymin = 0;
      ymax = 1;
    }
    const double pad_x = 0.05 * std::max(1e-12, xmax - xmin);
    const double pad_y = 0.05 * std::max(1e-12, ymax - ymin);
    xmin -= pad_x;
    xmax += pad_x;
    ymin -= pad_y;
    ymax += pad_y;
    const double W = 640, H = 480, L = 70, B = 50, Tm = 40, R = 20;
    auto px = [&](double lx) { return L + (lx - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double ly) { return H - B - (ly - ymin) / (ymax - ymin) * (H - B - Tm); };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("RatePlot: cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title_
        << "</text>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << L << "\" y2=\"" << Tm
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">log10 "
        << xlabel_ << "</text>\n";
    int legend_y = 56;
    for (const auto& s : series_) {
      if (s.lx.empty()) continue;
      out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.lx.size(); ++i) out << px(s.lx[i]) << ',' << py(s.ly[i]) << ' ';
      out << "\"/>\n";
      for (std::size_t i = 0; i < s.lx.size(); ++i)
        out << "<circle cx=\"" << px(s.lx[i]) << "\" cy=\"" << py(s.ly[i]) << "\" r=\"3\" fill=\"" << s.color
            << "\"/>\n";
      char slope_txt[64];
      std::snprintf(slope_txt, sizeof slope_txt, "%s (slope %.4f)", s.label.c_str(), s.slope);
      out << "<text x=\"" << L + 10 << "\" y=\"" << legend_y << "\" font-size=\"12\" fill=\"" << s.color
          << "\">" << slope_txt << "</text>\n";
      legend_y += 16;
    }
    out << "</svg>\n";
  }

 private:
  struct Series {
    std::string label;
    std::string color;
    std::vector<double> lx, ly;
    double slope = 0.0;
  };
  std::string title_;
  std::string xlabel_;
  std::vector<Series> series_;
};

struct RunManifest {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string timestamp;
  std::vector<std::pair<std::string, std::string>> module_versions;
  std::vector<std::string> outputs;

  static std::string now_utc() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["threads"] = threads;
    j["timestamp"] = timestamp;
    nlohmann::json mv = nlohmann::json::object();
    for (const auto& [k, v] : module_versions) mv[k] = v;
    j["module_versions"] = mv;
    j["outputs"] = outputs;
    return j;
  }
};

}  // namespace steinlab
