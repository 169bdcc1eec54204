// Command-line front end: bands, surface, gaps, sweep, thomas, probe, validate.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "perfband/perfband.hpp"

namespace fs = std::filesystem;
using namespace perfband;
using nlohmann::ordered_json;

namespace {

struct Flags {
  std::string config;
  std::string out;
  int threads = 0;
  int grid_n = 0;
  int bands = 0;
};

RunConfig configure(const Flags& flags) {
  RunConfig cfg = flags.config.empty() ? parse_config("{}") : load_config(flags.config);
  if (flags.threads > 0) cfg.problem.threads = flags.threads;
  if (flags.grid_n > 0) {
    if (flags.grid_n < 8) throw ValidationError("--grid-n", "must be >= 8");
    cfg.problem.n = flags.grid_n;
  }
  if (flags.bands > 0) cfg.n_bands = flags.bands;
  if (!flags.out.empty()) cfg.output = flags.out;
  return cfg;
}

fs::path output_dir(const RunConfig& cfg) {
  fs::path dir(cfg.output);
  fs::create_directories(dir);
  return dir;
}

ordered_json run_meta(const std::string& command, const Flags& flags, const RunConfig& cfg) {
  ordered_json meta;
  meta["command"] = command;
  meta["config"] = flags.config;
  meta["N"] = cfg.problem.n;
  meta["mode"] = to_string(cfg.problem.mode);
  meta["t"] = cfg.problem.t;
  meta["threads"] = cfg.problem.threads;
  meta["n_bands"] = cfg.n_bands;
  meta["potential"] = cfg.problem.potential.describe();
  return meta;
}

std::pair<int, int> require_kgrid(const RunConfig& cfg, const std::string& command) {
  if (!cfg.kgrid) throw ValidationError("kgrid", "required by the " + command + " command");
  return *cfg.kgrid;
}

const ShapeFamily& require_family(const RunConfig& cfg, const std::string& command) {
  if (!cfg.problem.family) throw ValidationError("family", "required by the " + command + " command");
  return *cfg.problem.family;
}

void write_csv(const fs::path& path, const BandStructure& bs) {
  std::ostringstream csv;
  io::write_bands_csv(csv, bs);
  io::write_text(path, csv.str());
}

void write_svg(const fs::path& path, const std::vector<io::SvgSeries>& series, const std::string& title,
               const std::string& x_label, const std::vector<std::pair<double, std::string>>& ticks) {
  std::ostringstream svg;
  io::write_band_svg(svg, series, title, x_label, ticks);
  io::write_text(path, svg.str());
}

int cmd_bands(const Flags& flags) {
  const RunConfig cfg = configure(flags);
  const fs::path dir = output_dir(cfg);
  const BandStructure bs = band_structure(cfg.problem, cfg.kpath, cfg.n_bands);
  write_csv(dir / "bands.csv", bs);
  write_svg(dir / "bands.svg", {io::series_of(bs, "bands")}, "Band structure (N=" + std::to_string(bs.n) + ")",
            "k-path", io::path_ticks(bs));
  auto meta = run_meta("bands", flags, cfg);
  meta["k_points"] = bs.n_k();
  meta["max_residual"] = bs.residuals.maxCoeff();
  io::write_sidecar(dir / "bands.csv", meta);
  std::cout << "bands: " << bs.n_k() << " k-points, " << bs.n_bands() << " bands -> " << (dir / "bands.csv").string()
            << "\n";
  return 0;
}

int cmd_surface(const Flags& flags) {
  const RunConfig cfg = configure(flags);
  const auto [n1, n2] = require_kgrid(cfg, "surface");
  const fs::path dir = output_dir(cfg);
  const BandStructure bs = dispersion_surface(cfg.problem, n1, n2, cfg.n_bands);
  write_csv(dir / "surface.csv", bs);
  write_svg(dir / "surface.svg", {io::series_of(bs, "surface")},
            "Dispersion surface " + std::to_string(n1) + "x" + std::to_string(n2), "k-grid index (i*n2 + j)", {});
  auto meta = run_meta("surface", flags, cfg);
  meta["k_grid"] = {n1, n2};
  meta["max_residual"] = bs.residuals.maxCoeff();
  io::write_sidecar(dir / "surface.csv", meta);
  std::cout << "surface: " << n1 << "x" << n2 << " grid -> " << (dir / "surface.csv").string() << "\n";
  return 0;
}

int cmd_gaps(const Flags& flags) {
  const RunConfig cfg = configure(flags);
  const auto [n1, n2] = require_kgrid(cfg, "gaps");
  const fs::path dir = output_dir(cfg);
  const BandStructure bs = dispersion_surface(cfg.problem, n1, n2, cfg.n_bands);
  const SpectrumReport rep = spectrum_report(bs);
  write_csv(dir / "surface.csv", bs);
  io::write_json(dir / "gaps.json", io::spectrum_json(rep));
  auto meta = run_meta("gaps", flags, cfg);
  meta["k_grid"] = {n1, n2};
  meta["warnings"] = rep.warnings;
  if (n1 >= 9 && n2 >= 9) {
    const auto flat = flat_band_test(bs, bs.residuals.maxCoeff());
    io::write_json(dir / "flatness.json", io::flatness_json(flat));
    for (const auto& f : flat) std::cout << "band " << f.band << ": " << to_string(f.verdict) << "\n";
  }
  io::write_sidecar(dir / "gaps.json", meta);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "gaps: " << rep.spectrum.size() << " spectral intervals, " << rep.gaps.size() << " gaps -> "
            << (dir / "gaps.json").string() << "\n";
  return 0;
}

int cmd_sweep(const Flags& flags) {
  const RunConfig cfg = configure(flags);
  const ShapeFamily& family = require_family(cfg, "sweep");
  const fs::path dir = output_dir(cfg);
  const auto sweep = shape_sweep(cfg.problem, family, cfg.kpath, cfg.sweep_t, cfg.n_bands);
  std::ostringstream csv;
  csv << "t,segment,arclength,k1,k2,band,lambda,residual\n";
  std::vector<io::SvgSeries> series;
  for (const auto& [t, bs] : sweep) {
    std::ostringstream one;
    io::write_bands_csv(one, bs);
    std::string line;
    std::istringstream lines(one.str());
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) csv << io::fmt17(t) << ',' << line << '\n';
    series.push_back(io::series_of(bs, "t=" + io::fmt(t, 6)));
  }
  io::write_text(dir / "sweep.csv", csv.str());
  write_svg(dir / "sweep.svg", series, "Shape sweep (" + std::to_string(sweep.size()) + " values of t)", "k-path",
            io::path_ticks(sweep.begin()->second));
  auto meta = run_meta("sweep", flags, cfg);
  meta["t"] = cfg.sweep_t;
  io::write_sidecar(dir / "sweep.csv", meta);
  std::cout << "sweep: " << sweep.size() << " band structures -> " << (dir / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_thomas(const Flags& flags) {
  const RunConfig cfg = configure(flags);
  const fs::path dir = output_dir(cfg);
  const double C = cfg.thomas_C();
  if (!(C > 0.0)) throw ValidationError("thomas.C", "must be > 0 (defaults to sup|V| + |lambda|)");
  const ThomasCertificate cert = thomas_certificate(cfg.problem.grid(), C, cfg.thomas.beta);
  io::write_json(dir / "thomas.json", io::thomas_json(cert));
  io::write_sidecar(dir / "thomas.json", run_meta("thomas", flags, cfg));
  std::cout << "thomas: sigma_min_B=" << io::fmt(cert.sigma_min_B, 12) << " floor=" << io::fmt(cert.floor, 12)
            << " operator_bound=" << io::fmt(cert.operator_bound, 12) << " C=" << cert.C
            << (cert.pass ? " PASS" : " FAIL") << "\n";
  return cert.pass ? 0 : 2;
}

int cmd_probe(const Flags& flags) {
  const RunConfig cfg = configure(flags);
  const ShapeFamily& family = require_family(cfg, "probe");
  const fs::path dir = output_dir(cfg);
  const auto& pc = cfg.probe;
  const AnalyticityProbe probe = analyticity_probe(cfg.problem, family, pc.k0, pc.band, pc.t_max, pc.n_steps, pc.step);
  std::ostringstream csv;
  io::write_probe_csv(csv, probe);
  io::write_text(dir / "probe.csv", csv.str());
  io::write_json(dir / "probe.json", io::probe_json(probe));
  io::write_sidecar(dir / "probe.json", run_meta("probe", flags, cfg));
  std::cout << "probe: d1=" << io::fmt(probe.d1[0], 10) << " d2=" << io::fmt(probe.d2[0], 10)
            << " fit_residual=" << io::fmt(probe.fit_residual, 4) << "\n";
  return 0;
}

struct Check {
  std::string name;
  double value;
  double tolerance;
  bool pass;
};

int cmd_validate(const Flags& flags) {
  const RunConfig cfg = configure(flags);
  const Problem& base = cfg.problem;
  const int n = std::min(base.n, 32);
  std::vector<Check> checks;
  constexpr double pi = std::numbers::pi;

  {  // free operator against |k + 2 pi m|^2 on the unit square
    const Lattice2 square;
    const auto grid = build_grid(square, std::nullopt, n);
    const Vec2 k(pi / 2.0, 0.0);
    const auto r = eigs_lowest(assemble(grid, PotentialSpec{}, k), 5, base.solver);
    std::vector<double> exact;
    for (int m1 = -3; m1 <= 3; ++m1) {
      for (int m2 = -3; m2 <= 3; ++m2) exact.push_back((k + 2.0 * pi * Vec2(m1, m2)).squaredNorm());
    }
    std::sort(exact.begin(), exact.end());
    double worst = 0.0;
    for (int j = 0; j < 5; ++j) worst = std::max(worst, std::abs(r.values(j) - exact[j]) / exact[j]);
    checks.push_back({"free-operator oracle (N=" + std::to_string(n) + ")", worst, 0.02, worst <= 0.02});
  }

  const HoleShape hole = base.hole ? *base.hole : HoleShape(Vec2(0.5, 0.5), 0.25, {}, base.lattice);
  const Mode mode = base.mode == Mode::NoHole ? Mode::NoHole : Mode::Regrid;
  const auto grid = build_grid(base.lattice, hole, n, Deformation{mode, 0.0, {}});
  {  // gauge equivalence
    const Vec2 k = base.lattice.dual_basis() * Vec2(0.23, 0.11);
    const auto a = eigs_lowest(assemble(grid, base.potential, k), 5, base.solver);
    const auto b = eigs_lowest(assemble_gauge(grid, base.potential, k), 5, base.solver);
    double worst = 0.0;
    for (int j = 0; j < 5; ++j) worst = std::max(worst, std::abs(a.values(j) - b.values(j)) / std::max(1.0, std::abs(a.values(j))));
    checks.push_back({"gauge equivalence", worst, 1e-10, worst <= 1e-10});
  }
  {  // Pythagoras identity
    std::mt19937 gen(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXcd u(Eigen::Index(grid.free_count()));
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double re = U(gen);
        u(i) = std::complex<double>(re, U(gen));
      }
      worst = std::max(worst, pythagoras_defect(grid, u, pi, 2.0));
    }
    checks.push_back({"Pythagoras identity", worst, 1e-10, worst <= 1e-10});
  }
  {  // pullback at t = 0 reproduces regrid
    std::optional<ShapeFamily> family = base.family;
    if (!family) {
      const double r_max = hole.radius_range().second;
      const double room = base.lattice.distance_to_cell_boundary(hole.center());
      const double r_in = r_max + 0.25 * (room - r_max);
      const double r_out = r_max + 0.75 * (room - r_max);
      family.emplace(hole, std::vector<FourierTerm>{{0, r_max, 0.0}}, r_in, r_out, 2);
    }
    const auto pull = build_grid(base.lattice, hole, n, Deformation{Mode::Pullback, 0.0, family});
    const auto reg = build_grid(base.lattice, hole, n, Deformation{Mode::Regrid, 0.0, family});
    const Vec2 k = base.lattice.dual_basis() * Vec2(0.31, 0.17);
    const SparseComplex diff = assemble(pull, base.potential, k).stiffness - assemble(reg, base.potential, k).stiffness;
    double worst = 0.0;
    for (int c = 0; c < diff.outerSize(); ++c) {
      for (SparseComplex::InnerIterator it(diff, c); it; ++it) worst = std::max(worst, std::abs(it.value()));
    }
    checks.push_back({"pullback at t=0 equals regrid", worst, 1e-13, worst <= 1e-13});
  }

  bool all = true;
  std::printf("%-36s %-14s %-10s %s\n", "check", "value", "tolerance", "result");
  for (const auto& c : checks) {
    std::printf("%-36s %-14.3e %-10.0e %s\n", c.name.c_str(), c.value, c.tolerance, c.pass ? "PASS" : "FAIL");
    all = all && c.pass;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Floquet-Bloch band structures of -Delta + V on a periodically perforated plane"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&flags](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON configuration file");
    sub->add_option("--out", flags.out, "output directory (overrides the config)");
    sub->add_option("--threads", flags.threads, "parallel workers for k/t sweeps")->check(CLI::PositiveNumber);
    sub->add_option("--grid-n", flags.grid_n, "grid size N (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_option("--bands", flags.bands, "number of bands (overrides the config)")->check(CLI::PositiveNumber);
  };
  const std::vector<std::pair<std::string, std::string>> commands{
      {"bands", "band structure along the k-path"},
      {"surface", "bands over the k-grid"},
      {"gaps", "spectrum projection and gaps from the k-grid"},
      {"sweep", "band structures along a shape family"},
      {"thomas", "invertibility certificate at complex quasimomentum"},
      {"probe", "analyticity probe of one band along a shape family"},
      {"validate", "built-in consistency checks"}};
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "bands") return cmd_bands(flags);
    if (cmd == "surface") return cmd_surface(flags);
    if (cmd == "gaps") return cmd_gaps(flags);
    if (cmd == "sweep") return cmd_sweep(flags);
    if (cmd == "thomas") return cmd_thomas(flags);
    if (cmd == "probe") return cmd_probe(flags);
    if (cmd == "validate") return cmd_validate(flags);
  } catch (const ValidationError& e) {
    std::cerr << "error: invalid configuration: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
