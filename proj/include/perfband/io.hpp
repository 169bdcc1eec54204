#pragma once

// Result files: CSV/JSON data, SVG band diagrams, and a metadata sidecar.
// Data files carry no timestamps; the sidecar does.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "perfband/bands.hpp"
#include "perfband/diagnostics.hpp"
#include "perfband/thomas.hpp"

namespace perfband::io {

// Locale-free, 17 significant digits.
inline std::string fmt17(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string fmt(double v, int digits) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
  return std::string(buf, res.ptr);
}

// Paths use their segment index and arclength; k-grids write segment -1 and arclength 0.
inline void write_bands_csv(std::ostream& out, const BandStructure& bs) {
  out << "segment,arclength,k1,k2,band,lambda,residual\n";
  for (Eigen::Index i = 0; i < bs.n_k(); ++i) {
    const bool path = !bs.gridded();
    const std::string seg = path ? std::to_string(bs.segment[i]) : "-1";
    const std::string arc = path ? fmt17(bs.arclength[i]) : "0";
    for (Eigen::Index j = 0; j < bs.n_bands(); ++j) {
      out << seg << ',' << arc << ',' << fmt17(bs.k[i].x()) << ',' << fmt17(bs.k[i].y()) << ',' << j + 1 << ','
          << fmt17(bs.bands(i, j)) << ',' << fmt17(bs.residuals(i, j)) << '\n';
    }
  }
}

inline nlohmann::ordered_json intervals_json(const std::vector<Interval>& ivs) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& [lo, hi] : ivs) arr.push_back({lo, hi});
  return arr;
}

inline nlohmann::ordered_json spectrum_json(const SpectrumReport& rep) {
  nlohmann::ordered_json j;
  j["bands"] = intervals_json(rep.bands);
  j["spectrum"] = intervals_json(rep.spectrum);
  j["gaps"] = intervals_json(rep.gaps);
  j["k_grid"] = {rep.grid_n1, rep.grid_n2};
  j["N"] = rep.n;
  return j;
}

inline nlohmann::ordered_json thomas_json(const ThomasCertificate& c) {
  nlohmann::ordered_json j;
  j["C"] = c.C;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["sigma_min_B"] = c.sigma_min_B;
  j["floor"] = c.floor;
  j["operator_bound"] = c.operator_bound;
  j["pass"] = c.pass;
  j["N"] = c.n;
  j["hole"] = c.hole;
  return j;
}

inline void write_probe_csv(std::ostream& out, const AnalyticityProbe& p) {
  out << "t,lambda,gap\n";
  for (const auto& s : p.samples) out << fmt17(s.t) << ',' << fmt17(s.lambda) << ',' << fmt17(s.gap) << '\n';
}

inline nlohmann::ordered_json probe_json(const AnalyticityProbe& p) {
  nlohmann::ordered_json j;
  j["d1"] = p.d1;
  j["d2"] = p.d2;
  j["steps"] = p.steps;
  j["orders"] = {{"d1", p.d1_order}, {"d2", p.d2_order}};
  j["fit_residual"] = p.fit_residual;
  j["band"] = p.band;
  j["k0"] = {p.k0.x(), p.k0.y()};
  j["t_max"] = p.t_max;
  j["min_gap"] = p.min_gap;
  return j;
}

inline nlohmann::ordered_json flatness_json(const std::vector<BandFlatness>& report) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : report) {
    arr.push_back({{"band", f.band}, {"oscillation", f.oscillation}, {"threshold", f.threshold},
                   {"verdict", to_string(f.verdict)}});
  }
  return arr;
}

// Band diagram as SVG polylines. Several curves may be overlaid (one per t in a sweep).
struct SvgSeries {
  std::string name;
  std::vector<double> x;
  Eigen::MatrixXd y;  // rows match x, one column per band
};

inline void write_band_svg(std::ostream& out, const std::vector<SvgSeries>& series, const std::string& title,
                           const std::string& x_label, const std::vector<std::pair<double, std::string>>& ticks) {
  constexpr double W = 720, H = 480, L = 70, R = 20, T = 40, B = 60;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    if (s.y.size()) y0 = std::min(y0, s.y.minCoeff()), y1 = std::max(y1, s.y.maxCoeff());
  }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double v) { return L + (W - L - R) * (v - x0) / (x1 - x0); };
  auto py = [&](double v) { return H - B - (H - T - B) * (v - y0) / (y1 - y0); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << title << "</text>\n";
  out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (const auto& [x, label] : ticks) {
    out << "<line x1=\"" << fmt(px(x), 6) << "\" y1=\"" << T << "\" x2=\"" << fmt(px(x), 6) << "\" y2=\"" << H - B
        << "\" stroke=\"#bbbbbb\"/>\n";
    out << "<text x=\"" << fmt(px(x), 6) << "\" y=\"" << H - B + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << label << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double v = y0 + (y1 - y0) * i / 5.0;
    out << "<text x=\"" << L - 6 << "\" y=\"" << fmt(py(v) + 4, 6)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(v, 4) << "</text>\n";
  }
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 16
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 18 " << H / 2 << ")\">&#955;</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double opacity = series.size() == 1 ? 1.0 : 0.35 + 0.65 * double(s) / double(series.size() - 1);
    for (Eigen::Index j = 0; j < series[s].y.cols(); ++j) {
      out << "<polyline fill=\"none\" stroke=\"" << colors[j % 7] << "\" stroke-opacity=\"" << fmt(opacity, 3)
          << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < series[s].x.size(); ++i) {
        out << (i ? " " : "") << fmt(px(series[s].x[i]), 7) << ',' << fmt(py(series[s].y(Eigen::Index(i), j)), 7);
      }
      out << "\"><title>" << series[s].name << " band " << j + 1 << "</title></polyline>\n";
    }
  }
  out << "</svg>\n";
}

inline std::vector<std::pair<double, std::string>> path_ticks(const BandStructure& bs) {
  std::vector<std::pair<double, std::string>> ticks;
  for (std::size_t v = 0; v < bs.vertices.size(); ++v) ticks.emplace_back(bs.vertex_arclength[v], bs.vertices[v].label);
  return ticks;
}

inline SvgSeries series_of(const BandStructure& bs, const std::string& name) {
  SvgSeries s;
  s.name = name;
  if (bs.gridded()) {
    for (Eigen::Index i = 0; i < bs.n_k(); ++i) s.x.push_back(double(i));
  } else {
    s.x = bs.arclength;
  }
  s.y = bs.bands;
  return s;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

// `<file>.meta.json` next to a data file: wall-clock timestamp plus free-form run details.
inline void write_sidecar(const std::filesystem::path& data_file, nlohmann::ordered_json meta) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  meta["timestamp"] = stamp;
  std::filesystem::path side = data_file;
  side += ".meta.json";
  write_json(side, meta);
}

}  // namespace perfband::io
