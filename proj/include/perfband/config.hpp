#pragma once

// JSON run configuration.
//
//   {
//     "lattice":   {"basis": [[1, 0], [0, 1]]},          row-major; columns are period vectors
//     "hole":      {"center": [0.5, 0.5], "r0": 0.25, "fourier_coeffs": [[3, 0.01, 0]]},
//     "potential": {"c0": 0, "terms": [{"c": 2, "m": [1, 0], "phi": 0}]},
//     "grid":      {"N": 48},
//     "mode":      "regrid" | "pullback" | "nohole",
//     "t":         0.0,
//     "family":    {"direction": [[0, 0.25, 0]], "r_inner": 0.3, "r_outer": 0.45, "smoothness": 2},
//     "kpath":     {"vertices": [{"label": "G", "k": [0, 0]}, ...], "points_per_segment": 30},
//     "kgrid":     [17, 17],
//     "n_bands":   5,
//     "solver":    {"dense_threshold": 400, "max_iters": 500, "tol": 1e-10},
//     "threads":   1,
//     "output":    "out",
//     "thomas":    {"C": 10, "beta": "auto", "lambda": 0},
//     "probe":     {"k0": [0, 0], "band": 1, "t_max": 0.1, "n_steps": 9, "step": 0.05},
//     "sweep":     {"t": [0, 0.05, 0.1]}
//   }
//
// Every key is optional. "hole": null (or absent) with no mode means "nohole".

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "perfband/bands.hpp"
#include "perfband/errors.hpp"

namespace perfband {

struct ThomasSettings {
  std::optional<double> C;     // default: sup|V| + |lambda|
  std::optional<double> beta;  // default: automatic
  double lambda = 0.0;
};

struct ProbeSettings {
  Vec2 k0 = Vec2::Zero();
  int band = 1;
  double t_max = 0.1;
  int n_steps = 9;
  double step = 0.0;  // 0: t_max / 2
};

struct RunConfig {
  Problem problem;
  KPath kpath;
  std::optional<std::pair<int, int>> kgrid;
  int n_bands = 5;
  std::string output = "out";
  ThomasSettings thomas;
  ProbeSettings probe;
  std::vector<double> sweep_t{0.0, 0.05, 0.1};

  double thomas_C() const {
    return thomas.C.value_or(problem.potential.sup_bound() + std::abs(thomas.lambda));
  }
};

namespace detail {

using nlohmann::json;

class ConfigReader {
 public:
  explicit ConfigReader(const json& root) : root_(root) {}

  RunConfig read() {
    allow(root_, "", {"lattice", "hole", "potential", "grid", "mode", "t", "family", "kpath", "kgrid", "n_bands",
                      "solver", "threads", "output", "thomas", "probe", "sweep"});
    RunConfig cfg;
    Problem& p = cfg.problem;

    if (root_.contains("lattice")) {
      const json& l = object_at(root_, "lattice");
      allow(l, "lattice", {"basis"});
      Mat2 basis = Mat2::Identity();
      if (l.contains("basis")) {
        const json& b = l["basis"];
        if (!b.is_array() || b.size() != 2) throw ValidationError("lattice.basis", "must be a 2x2 row-major matrix");
        for (int r = 0; r < 2; ++r) basis.row(r) = vec2(b[r], "lattice.basis[" + std::to_string(r) + "]").transpose();
      }
      try {
        p.lattice = Lattice2(basis);
      } catch (const std::invalid_argument& e) {
        throw ValidationError("lattice.basis", e.what());
      }
    }

    if (root_.contains("potential")) {
      const json& v = object_at(root_, "potential");
      allow(v, "potential", {"c0", "terms"});
      p.potential.c0 = number(v, "c0", "potential.c0", 0.0);
      if (v.contains("terms")) {
        const json& terms = array_at(v, "terms", "potential.terms");
        for (std::size_t i = 0; i < terms.size(); ++i) {
          const std::string f = "potential.terms[" + std::to_string(i) + "]";
          if (!terms[i].is_object()) throw ValidationError(f, "must be an object");
          allow(terms[i], f, {"c", "m", "phi"});
          PotentialSpec::Term term;
          term.c = number(terms[i], "c", f + ".c", 0.0);
          if (terms[i].contains("m")) {
            const json& m = terms[i]["m"];
            if (!m.is_array() || m.size() != 2 || !m[0].is_number_integer() || !m[1].is_number_integer()) {
              throw ValidationError(f + ".m", "must be a pair of integers");
            }
            term.m = {m[0].get<int>(), m[1].get<int>()};
          }
          term.phi = number(terms[i], "phi", f + ".phi", 0.0);
          p.potential.terms.push_back(term);
        }
      }
    }

    if (root_.contains("grid")) {
      const json& g = object_at(root_, "grid");
      allow(g, "grid", {"N"});
      p.n = integer(g, "N", "grid.N", 48);
    }
    if (p.n < 8) throw ValidationError("grid.N", "must be >= 8 (got " + std::to_string(p.n) + ")");

    const bool has_hole = root_.contains("hole") && !root_["hole"].is_null();
    if (has_hole) {
      const json& h = object_at(root_, "hole");
      allow(h, "hole", {"center", "r0", "fourier_coeffs"});
      const Vec2 center = h.contains("center") ? vec2(h["center"], "hole.center") : Vec2(0.5, 0.5);
      if (!h.contains("r0")) throw ValidationError("hole.r0", "is required");
      const double r0 = number(h, "r0", "hole.r0", 0.0);
      std::vector<FourierTerm> coeffs = fourier_terms(h, "fourier_coeffs", "hole.fourier_coeffs");
      try {
        p.hole = HoleShape(center, r0, coeffs, p.lattice);
      } catch (const HoleTooLarge& e) {
        throw ValidationError("hole", e.what());
      } catch (const std::invalid_argument& e) {
        throw ValidationError("hole", e.what());
      }
    }

    std::string mode = has_hole ? "regrid" : "nohole";
    if (root_.contains("mode")) {
      if (!root_["mode"].is_string()) throw ValidationError("mode", "must be a string");
      mode = root_["mode"].get<std::string>();
    }
    if (mode == "nohole") {
      p.mode = Mode::NoHole;
    } else if (mode == "regrid") {
      p.mode = Mode::Regrid;
    } else if (mode == "pullback") {
      p.mode = Mode::Pullback;
    } else {
      throw ValidationError("mode", "must be one of regrid, pullback, nohole (got \"" + mode + "\")");
    }
    p.t = number(root_, "t", "t", 0.0);

    if (root_.contains("family") && !root_["family"].is_null()) {
      const json& f = object_at(root_, "family");
      allow(f, "family", {"direction", "r_inner", "r_outer", "smoothness"});
      if (!p.hole) throw ValidationError("family", "a shape family needs a hole");
      const auto direction = fourier_terms(f, "direction", "family.direction", true);
      const double r_in = number(f, "r_inner", "family.r_inner", 0.0);
      const double r_out = number(f, "r_outer", "family.r_outer", 0.0);
      if (!f.contains("r_inner")) throw ValidationError("family.r_inner", "is required");
      if (!f.contains("r_outer")) throw ValidationError("family.r_outer", "is required");
      if (!(r_out > r_in)) throw ValidationError("family.r_outer", "must exceed family.r_inner");
      const int s = integer(f, "smoothness", "family.smoothness", 2);
      try {
        p.family = ShapeFamily(*p.hole, direction, r_in, r_out, s);
      } catch (const std::invalid_argument& e) {
        throw ValidationError("family", e.what());
      }
    }

    if (p.mode == Mode::Pullback && !p.family) throw ValidationError("family", "pullback mode requires a shape family");
    if (p.mode != Mode::NoHole && !p.hole) throw ValidationError("hole", "mode " + mode + " requires a hole");
    if (p.mode == Mode::Regrid && p.t != 0.0 && !p.family) {
      throw ValidationError("family", "regrid with t != 0 requires a shape family");
    }
    if (p.t != 0.0 && p.family) {
      const FamilyValidity v = p.family->validate(std::abs(p.t), 400);
      if (!v.pass) throw ValidationError("t", "shape family map degenerates at this t");
    }

    if (root_.contains("solver")) {
      const json& s = object_at(root_, "solver");
      allow(s, "solver", {"dense_threshold", "max_iters", "tol"});
      const int dense = integer(s, "dense_threshold", "solver.dense_threshold", int(p.solver.dense_threshold));
      if (dense < 0) throw ValidationError("solver.dense_threshold", "must be >= 0");
      p.solver.dense_threshold = std::size_t(dense);
      p.solver.max_iters = integer(s, "max_iters", "solver.max_iters", p.solver.max_iters);
      if (p.solver.max_iters < 1) throw ValidationError("solver.max_iters", "must be >= 1");
      p.solver.tol = number(s, "tol", "solver.tol", p.solver.tol);
      if (!(p.solver.tol > 0.0 && p.solver.tol <= 1e-9)) {
        throw ValidationError("solver.tol", "must lie in (0, 1e-9]");
      }
    }
    p.threads = integer(root_, "threads", "threads", 1);
    if (p.threads < 1) throw ValidationError("threads", "must be >= 1");

    cfg.n_bands = integer(root_, "n_bands", "n_bands", 5);
    if (cfg.n_bands < 1) throw ValidationError("n_bands", "must be >= 1");

    cfg.kpath = default_kpath(p.lattice);
    if (root_.contains("kpath")) {
      const json& kp = object_at(root_, "kpath");
      allow(kp, "kpath", {"vertices", "points_per_segment"});
      if (kp.contains("vertices")) {
        const json& vs = array_at(kp, "vertices", "kpath.vertices");
        cfg.kpath.vertices.clear();
        for (std::size_t i = 0; i < vs.size(); ++i) {
          const std::string f = "kpath.vertices[" + std::to_string(i) + "]";
          if (!vs[i].is_object()) throw ValidationError(f, "must be an object");
          allow(vs[i], f, {"label", "k"});
          KVertex v;
          v.label = vs[i].contains("label") && vs[i]["label"].is_string() ? vs[i]["label"].get<std::string>()
                                                                            : std::to_string(i);
          if (!vs[i].contains("k")) throw ValidationError(f + ".k", "is required");
          v.k = vec2(vs[i]["k"], f + ".k");
          cfg.kpath.vertices.push_back(v);
        }
      }
      cfg.kpath.points_per_segment = integer(kp, "points_per_segment", "kpath.points_per_segment", 30);
      try {
        cfg.kpath.check();
      } catch (const std::invalid_argument& e) {
        throw ValidationError("kpath", e.what());
      }
    }

    if (root_.contains("kgrid") && !root_["kgrid"].is_null()) {
      const json& g = root_["kgrid"];
      if (!g.is_array() || g.size() != 2 || !g[0].is_number_integer() || !g[1].is_number_integer()) {
        throw ValidationError("kgrid", "must be a pair of integers [n1, n2]");
      }
      const int n1 = g[0].get<int>(), n2 = g[1].get<int>();
      if (n1 < 1 || n2 < 1) throw ValidationError("kgrid", "dimensions must be >= 1");
      cfg.kgrid = std::make_pair(n1, n2);
    }

    if (root_.contains("output")) {
      if (!root_["output"].is_string()) throw ValidationError("output", "must be a string");
      cfg.output = root_["output"].get<std::string>();
    }

    if (root_.contains("thomas")) {
      const json& t = object_at(root_, "thomas");
      allow(t, "thomas", {"C", "beta", "lambda"});
      if (t.contains("C")) cfg.thomas.C = number(t, "C", "thomas.C", 0.0);
      if (t.contains("beta") && !(t["beta"].is_string() && t["beta"].get<std::string>() == "auto")) {
        cfg.thomas.beta = number(t, "beta", "thomas.beta", 0.0);
      }
      cfg.thomas.lambda = number(t, "lambda", "thomas.lambda", 0.0);
      const double C = cfg.thomas_C();
      if (!(C > 0.0)) throw ValidationError("thomas.C", "must be > 0 (defaults to sup|V| + |lambda|)");
      if (cfg.thomas.beta && !(*cfg.thomas.beta > C / 6.0)) throw ValidationError("thomas.beta", "must exceed C/6");
    }

    if (root_.contains("probe")) {
      const json& pr = object_at(root_, "probe");
      allow(pr, "probe", {"k0", "band", "t_max", "n_steps", "step"});
      if (pr.contains("k0")) cfg.probe.k0 = vec2(pr["k0"], "probe.k0");
      cfg.probe.band = integer(pr, "band", "probe.band", 1);
      if (cfg.probe.band < 1) throw ValidationError("probe.band", "is 1-based and must be >= 1");
      cfg.probe.t_max = number(pr, "t_max", "probe.t_max", 0.1);
      if (!(cfg.probe.t_max > 0.0)) throw ValidationError("probe.t_max", "must be > 0");
      cfg.probe.n_steps = integer(pr, "n_steps", "probe.n_steps", 9);
      if (cfg.probe.n_steps < 6) throw ValidationError("probe.n_steps", "must be >= 6");
      cfg.probe.step = number(pr, "step", "probe.step", 0.0);
      if (cfg.probe.step < 0.0 || cfg.probe.step > cfg.probe.t_max) {
        throw ValidationError("probe.step", "must lie in [0, t_max]");
      }
    }

    if (root_.contains("sweep")) {
      const json& sw = object_at(root_, "sweep");
      allow(sw, "sweep", {"t"});
      if (sw.contains("t")) {
        const json& ts = array_at(sw, "t", "sweep.t");
        cfg.sweep_t.clear();
        for (std::size_t i = 0; i < ts.size(); ++i) {
          if (!ts[i].is_number()) throw ValidationError("sweep.t[" + std::to_string(i) + "]", "must be a number");
          cfg.sweep_t.push_back(ts[i].get<double>());
        }
        if (cfg.sweep_t.empty()) throw ValidationError("sweep.t", "must not be empty");
      }
    }
    return cfg;
  }

 private:
  static void allow(const json& obj, const std::string& where, std::set<std::string> keys) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!keys.count(it.key())) {
        throw ValidationError(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
      }
    }
  }

  static const json& object_at(const json& parent, const std::string& key) {
    const json& v = parent[key];
    if (!v.is_object()) throw ValidationError(key, "must be an object");
    return v;
  }

  static const json& array_at(const json& parent, const std::string& key, const std::string& field) {
    const json& v = parent[key];
    if (!v.is_array()) throw ValidationError(field, "must be an array");
    return v;
  }

  static double number(const json& obj, const std::string& key, const std::string& field, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj[key];
    if (!v.is_number()) throw ValidationError(field, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError(field, "must be finite");
    return x;
  }

  static int integer(const json& obj, const std::string& key, const std::string& field, int fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj[key];
    if (!v.is_number_integer()) throw ValidationError(field, "must be an integer");
    return v.get<int>();
  }

  static Vec2 vec2(const json& v, const std::string& field) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ValidationError(field, "must be a pair of numbers");
    }
    return Vec2(v[0].get<double>(), v[1].get<double>());
  }

  // [[m, a_m, b_m], ...]
  static std::vector<FourierTerm> fourier_terms(const json& obj, const std::string& key, const std::string& field,
                                                bool allow_m0 = false) {
    std::vector<FourierTerm> out;
    if (!obj.contains(key)) return out;
    const json& arr = array_at(obj, key, field);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string f = field + "[" + std::to_string(i) + "]";
      const json& e = arr[i];
      if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() || !e[1].is_number() || !e[2].is_number()) {
        throw ValidationError(f, "must be [m, a_m, b_m] with integer m");
      }
      FourierTerm term;
      term.m = e[0].get<int>();
      if (term.m < (allow_m0 ? 0 : 1)) throw ValidationError(f, allow_m0 ? "m must be >= 0" : "m must be >= 1");
      term.a = e[1].get<double>();
      term.b = e[2].get<double>();
      out.push_back(term);
    }
    return out;
  }

  const json& root_;
};

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("configuration must be a JSON object");
  return detail::ConfigReader(root).read();
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open configuration file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace perfband
