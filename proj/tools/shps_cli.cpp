#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shps/apps.hpp"
#include "shps/error.hpp"
#include "shps/expression.hpp"
#include "shps/io.hpp"
#include "shps/serialize.hpp"

namespace fs = std::filesystem;
using namespace shps;

namespace {

constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

/// Usage or configuration problem detected by the front end itself.
struct UsageError : Error {
  using Error::Error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct MeshOptions {
  std::string mesh_path;
  std::string gen = "sphere";
  int refine = 1;
  int order = 8;
};

struct PdeOptions {
  std::string pde = "laplace-beltrami";
  double wavenumber = 1.0;
  std::vector<std::string> coef;
  std::string rhs = "harmonic";
  int degree = 4;
  int harmonic_order = 2;
  std::string exact;
  std::string bc;
};

struct Common {
  MeshOptions mesh;
  std::string out = "out";
  int threads = 1;
  unsigned seed = 42;
};

const std::vector<std::string> kGenerators = {"sphere", "cube",           "blob", "torus",
                                              "twisted-torus", "deformed-torus", "flat"};

SurfaceMesh generate(const std::string& gen, int refine, int p) {
  if (refine < 0) throw UsageError("--refine must be non-negative");
  const int k = 1 << refine;
  if (gen == "sphere") return generate_cubed_sphere(refine, p);
  if (gen == "cube") return generate_cube(refine, p);
  if (gen == "blob") return generate_blob(refine, p);
  if (gen == "torus") return generate_torus(2.0, 0.6, 4 * k, 4 * k, p);
  if (gen == "twisted-torus") return generate_torus(2.0, 0.6, 4 * k, 4 * k, p, twisted_square_profile(0.6));
  if (gen == "deformed-torus") return generate_torus(2.0, 0.7, 8 * k, 4 * k, p, deformed_profile(0.7));
  if (gen == "flat") return generate_flat(k, k, p);
  throw UsageError("unknown generator '" + gen + "'");
}

std::shared_ptr<const SurfaceMesh> obtain_mesh(const MeshOptions& o) {
  if (!o.mesh_path.empty()) {
    if (!fs::exists(o.mesh_path)) throw UsageError("mesh file '" + o.mesh_path + "' does not exist");
    return std::make_shared<const SurfaceMesh>(load_mesh(o.mesh_path));
  }
  return std::make_shared<const SurfaceMesh>(generate(o.gen, o.refine, o.order));
}

void add_mesh_options(CLI::App* cmd, MeshOptions& o) {
  cmd->add_option("--mesh", o.mesh_path, "Mesh file (overrides --gen)");
  cmd->add_option("--gen", o.gen, "Mesh generator")->check(CLI::IsMember(kGenerators));
  cmd->add_option("--refine", o.refine, "Refinement level of the generator")->check(CLI::NonNegativeNumber);
  cmd->add_option("--order", o.order, "Polynomial order p")->check(CLI::Range(2, 40));
}

void add_common(CLI::App* cmd, Common& c) {
  add_mesh_options(cmd, c.mesh);
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "Seed for randomized inputs");
}

void add_pde_options(CLI::App* cmd, PdeOptions& o) {
  cmd->add_option("--pde", o.pde, "laplace-beltrami, helmholtz-beltrami or custom")
      ->check(CLI::IsMember({"laplace-beltrami", "helmholtz-beltrami", "custom"}));
  cmd->add_option("--wavenumber", o.wavenumber, "k in Δu - k²u = f for helmholtz-beltrami");
  cmd->add_option("--coef", o.coef, "custom coefficient KEY=EXPR; keys a11 a22 a33 a12 a23 a13 b1 b2 b3 c");
  cmd->add_option("--rhs", o.rhs, "Load: 'harmonic' or an expression in x, y, z");
  cmd->add_option("--degree", o.degree, "Harmonic degree l")->check(CLI::NonNegativeNumber);
  cmd->add_option("--harmonic-order", o.harmonic_order, "Harmonic order m, |m| <= l");
  cmd->add_option("--exact", o.exact, "Exact solution expression, for error reporting");
  cmd->add_option("--bc", o.bc, "Dirichlet data expression on open meshes (default: exact or 0)");
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write '" + path.string() + "'");
  return os;
}

std::string num(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

// ---------------------------------------------------------------------------
// PDE description

struct Problem {
  CoefficientField<double> coeff;
  std::function<double(const Vec3&)> rhs;
  std::function<double(const Vec3&)> exact;  ///< empty when unknown
  std::function<double(const Vec3&)> bc;
  bool laplace_beltrami = false;
  std::string description;  ///< everything that defines the operator, for cache fingerprints
};

CoefficientField<double>::Fn constant(double v) {
  return [v](const Vec3&) { return v; };
}

Problem make_problem(const PdeOptions& o) {
  Problem pr;
  double shift = 0.0;
  if (o.pde == "laplace-beltrami") {
    pr.coeff = CoefficientField<double>::laplace_beltrami();
    pr.laplace_beltrami = true;
    pr.description = "laplace-beltrami";
  } else if (o.pde == "helmholtz-beltrami") {
    pr.coeff = CoefficientField<double>::laplace_beltrami();
    shift = -o.wavenumber * o.wavenumber;
    pr.coeff.c = constant(shift);
    pr.description = "helmholtz-beltrami k=" + format_double(o.wavenumber);
  } else {
    static const std::map<std::string, int> slots = {{"a11", 0}, {"a22", 1}, {"a33", 2}, {"a12", 3}, {"a23", 4},
                                                     {"a13", 5}, {"b1", 6},  {"b2", 7},  {"b3", 8},  {"c", 9}};
    if (o.coef.empty()) throw UsageError("--pde custom needs at least one --coef KEY=EXPR");
    pr.description = "custom";
    for (const auto& item : o.coef) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw UsageError("--coef '" + item + "' is not KEY=EXPR");
      const std::string key = item.substr(0, eq);
      const auto it = slots.find(key);
      if (it == slots.end()) throw UsageError("unknown coefficient '" + key + "'");
      const Expression ex = Expression::parse(item.substr(eq + 1));
      const auto fn = [ex](const Vec3& x) { return ex(x); };
      if (it->second < 6) pr.coeff.a[static_cast<std::size_t>(it->second)] = fn;
      else if (it->second < 9) pr.coeff.b[static_cast<std::size_t>(it->second - 6)] = fn;
      else pr.coeff.c = fn;
      pr.description += " " + key + "=" + ex.text();
    }
  }

  if (o.rhs == "harmonic") {
    if (o.pde == "custom") throw UsageError("the harmonic load is defined for laplace-beltrami and helmholtz-beltrami");
    if (std::abs(o.harmonic_order) > o.degree) throw UsageError("--harmonic-order must satisfy |m| <= l");
    const int l = o.degree, m = o.harmonic_order;
    const double factor = -l * (l + 1.0) + shift;
    pr.exact = [l, m](const Vec3& x) { return spherical_harmonic(l, m, x); };
    pr.rhs = [l, m, factor](const Vec3& x) { return factor * spherical_harmonic(l, m, x); };
  } else {
    const Expression ex = Expression::parse(o.rhs);
    pr.rhs = [ex](const Vec3& x) { return ex(x); };
  }
  if (!o.exact.empty()) {
    const Expression ex = Expression::parse(o.exact);
    pr.exact = [ex](const Vec3& x) { return ex(x); };
  }
  if (!o.bc.empty()) {
    const Expression ex = Expression::parse(o.bc);
    pr.bc = [ex](const Vec3& x) { return ex(x); };
  } else if (pr.exact) {
    pr.bc = pr.exact;
  } else {
    pr.bc = constant(0.0);
  }
  return pr;
}

// ---------------------------------------------------------------------------
// Solve pipeline shared by solve and converge

struct SolveReport {
  Solution<double> solution;
  Factorization<double> fact;
  double factor_seconds = 0.0;
  double update_seconds = 0.0;
  double solve_seconds = 0.0;
  bool from_cache = false;
  double max_error = std::nan("");
  double rel_error = std::nan("");
};

SolveReport run_solve(std::shared_ptr<const SurfaceMesh> mesh, const Problem& pr, int threads,
                      const std::string& cache_path) {
  SolveReport rep;
  const std::uint64_t fp = text_fingerprint(pr.description, mesh_fingerprint(*mesh));
  auto t0 = Clock::now();
  bool loaded = false;
  if (!cache_path.empty() && fs::exists(cache_path)) {
    try {
      rep.fact = load_factorization<double>(cache_path, mesh, fp);
      rep.fact.threads = threads;
      loaded = true;
    } catch (const CacheError& e) {
      std::cerr << "warning: " << e.what() << "; refactoring\n";
    }
  }
  if (!loaded) {
    rep.fact = build_factorization<double>(mesh, pr.coeff, build_merge_tree(*mesh), FactorOptions{threads});
    if (!cache_path.empty()) save_factorization(rep.fact, cache_path, fp);
  }
  rep.from_cache = loaded;
  rep.factor_seconds = seconds_since(t0);

  const auto geom = compute_geometry(*mesh, threads);
  Field<double> f = sample_field<double>(*mesh, pr.rhs);
  const bool mean_free = mesh->closed && pr.laplace_beltrami;
  if (mean_free) f = project_mean_zero(geom, f);
  t0 = Clock::now();
  update_rhs(rep.fact, f);
  rep.update_seconds = seconds_since(t0);
  t0 = Clock::now();
  const Vec<double> g = sample_boundary<double>(rep.fact, pr.bc);
  rep.solution = solve(rep.fact, g);
  rep.solve_seconds = seconds_since(t0);

  if (pr.exact) {
    Field<double> ex = sample_field<double>(*mesh, pr.exact);
    if (mean_free) {
      rep.solution.values = project_mean_zero(geom, rep.solution.values);
      ex = project_mean_zero(geom, ex);
    }
    double err = 0.0, scale = 0.0;
    for (std::size_t e = 0; e < ex.size(); ++e) {
      err = std::max(err, (rep.solution.values[e] - ex[e]).cwiseAbs().maxCoeff());
      scale = std::max(scale, ex[e].cwiseAbs().maxCoeff());
    }
    rep.max_error = err;
    rep.rel_error = scale > 0.0 ? err / scale : err;
  } else if (mean_free) {
    rep.solution.values = project_mean_zero(geom, rep.solution.values);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_mesh(const Common& c) {
  const auto mesh = obtain_mesh(c.mesh);
  const fs::path path = c.out.empty() ? fs::path("mesh.txt") : fs::path(c.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_mesh(*mesh, path);
  std::cout << "elements " << mesh->size() << "\ninterfaces " << mesh->interfaces.size() << "\nboundary_edges "
            << mesh->boundary_edges.size() << "\nclosed " << (mesh->closed ? 1 : 0) << "\narea "
            << format_double(surface_area(*mesh)) << "\nwritten " << path.string() << "\n";
  return 0;
}

int cmd_solve(const Common& c, const PdeOptions& po, const std::string& cache) {
  const auto t0 = Clock::now();
  const auto mesh = obtain_mesh(c.mesh);
  const double mesh_seconds = seconds_since(t0);
  const Problem pr = make_problem(po);
  SolveReport rep = run_solve(mesh, pr, c.threads, cache);

  const fs::path dir(c.out);
  fs::create_directories(dir);
  {
    auto os = open_output(dir / "solution.txt");
    write_point_cloud(os, rep.solution);
  }
  {
    auto os = open_output(dir / "stats.csv");
    os << "elements,order,unknowns,interfaces,closed,rank_one_fix,max_error,rel_max_error,continuity_error,"
          "flux_residual\n";
    const int p = mesh->order;
    os << mesh->size() << ',' << p << ',' << static_cast<long>(mesh->size()) * (p + 1) * (p + 1) << ','
       << mesh->interfaces.size() << ',' << (mesh->closed ? 1 : 0) << ',' << (rep.fact.rank_one_fix ? 1 : 0) << ','
       << num(rep.max_error) << ',' << num(rep.rel_error) << ','
       << format_double(interface_continuity_error(rep.solution)) << ','
       << format_double(flux_residual(rep.fact, rep.solution)) << '\n';
  }
  {
    auto os = open_output(dir / "timings.csv");
    os << "stage,seconds\n"
       << "mesh," << format_double(mesh_seconds) << '\n'
       << (rep.from_cache ? "load_cache," : "factor,") << format_double(rep.factor_seconds) << '\n'
       << "update_rhs," << format_double(rep.update_seconds) << '\n'
       << "solve," << format_double(rep.solve_seconds) << '\n';
  }
  std::cout << "elements " << mesh->size() << "  order " << mesh->order;
  if (std::isfinite(rep.rel_error)) std::cout << "  rel_max_error " << format_double(rep.rel_error);
  std::cout << "\nwritten " << (dir / "solution.txt").string() << ", stats.csv, timings.csv\n";
  return 0;
}

std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad refinement level '" + item + "' in --levels");
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int cmd_converge(const Common& c, const PdeOptions& po, const std::string& levels_text, int reference_level,
                 const std::string& reference_kind) {
  if (!c.mesh.mesh_path.empty()) throw UsageError("converge needs a generator family (--gen), not a mesh file");
  const std::vector<int> levels = parse_levels(levels_text);
  if (levels.size() < 3)
    throw UsageError("insufficient data: converge needs at least 3 refinement levels, got " +
                     std::to_string(levels.size()));
  const Problem pr = make_problem(po);
  bool exact = reference_kind == "exact" || (reference_kind == "auto" && static_cast<bool>(pr.exact));
  if (exact && !pr.exact) throw UsageError("--reference exact needs an exact solution (--exact or the harmonic load)");

  std::vector<double> hs, errs;
  std::vector<int> counts;
  std::optional<Solution<double>> reference;
  if (!exact) {
    const int ref_level = reference_level >= 0 ? reference_level : levels.back() + 1;
    if (ref_level <= levels.back()) throw UsageError("--reference-level must exceed every level in --levels");
    auto mesh = std::make_shared<const SurfaceMesh>(generate(c.mesh.gen, ref_level, c.mesh.order));
    reference = run_solve(mesh, pr, c.threads, "").solution;
  }
  for (int level : levels) {
    auto mesh = std::make_shared<const SurfaceMesh>(generate(c.mesh.gen, level, c.mesh.order));
    SolveReport rep = run_solve(mesh, pr, c.threads, "");
    hs.push_back(mean_mesh_size(*mesh));
    counts.push_back(mesh->size());
    errs.push_back(exact ? rep.rel_error : self_convergence_error(rep.solution, *reference));
  }
  const double order = fit_order(hs, errs);

  const fs::path dir(c.out);
  fs::create_directories(dir);
  {
    auto os = open_output(dir / "converge.csv");
    os << "level,elements,h,error\n";
    for (std::size_t k = 0; k < levels.size(); ++k)
      os << levels[k] << ',' << counts[k] << ',' << format_double(hs[k]) << ',' << format_double(errs[k]) << '\n';
  }
  {
    auto os = open_output(dir / "converge_fit.csv");
    os << "generator,order,reference,fitted_order\n"
       << c.mesh.gen << ',' << c.mesh.order << ',' << (exact ? "exact" : "self") << ',' << format_double(order)
       << '\n';
  }
  for (std::size_t k = 0; k < levels.size(); ++k)
    std::cout << "level " << levels[k] << "  elements " << counts[k] << "  h " << format_double(hs[k]) << "  error "
              << format_double(errs[k]) << '\n';
  std::cout << "fitted order " << format_double(order) << '\n';
  return 0;
}

struct SimOptions {
  std::string model = "turing";
  std::string scheme = "bdf4";
  double dt = 0.1;
  long steps = 10;
  long snapshot_every = 0;
  std::string init = "random";
  double amplitude = 0.1;
  double delta_v = 0.005;
  double tau2 = 0.15;
  double cgl_alpha = 0.0;
  double cgl_beta = 1.5;
  double delta = 1e-2;
};

int scheme_order(const std::string& s) {
  std::string t = s;
  for (const char* prefix : {"imex-bdf", "bdf"})
    if (t.rfind(prefix, 0) == 0) t = t.substr(std::string(prefix).size());
  if (t.size() == 1 && t[0] >= '1' && t[0] <= '4') return t[0] - '0';
  throw UsageError("unknown scheme '" + s + "'; use bdf1..bdf4");
}

template <typename Scalar>
void write_snapshot(const fs::path& path, const SurfaceMesh& mesh, const SystemState<Scalar>& st, long step,
                    double t) {
  auto os = open_output(path);
  os << "# step " << step << " time " << format_double(t) << '\n';
  for (int e = 0; e < mesh.size(); ++e) {
    os << "# element " << e << '\n';
    const auto& X = mesh.elements[static_cast<std::size_t>(e)].nodes;
    for (Index k = 0; k < X.rows(); ++k) {
      os << format_double(X(k, 0)) << ' ' << format_double(X(k, 1)) << ' ' << format_double(X(k, 2));
      for (const auto& field : st) {
        const Scalar v = field[static_cast<std::size_t>(e)](k);
        if constexpr (is_complex_v<Scalar>) os << ' ' << format_double(v.real()) << ' ' << format_double(v.imag());
        else os << ' ' << format_double(v);
      }
      os << '\n';
    }
  }
}

template <typename Scalar>
void write_summary_rows(std::ostream& os, const std::vector<ElementGeometry>& geom, const SystemState<Scalar>& st,
                        long step, double t, const std::function<double(double)>& ode_error) {
  double area = 0.0;
  for (const auto& g : geom) area += g.weights.sum();
  for (std::size_t s = 0; s < st.size(); ++s) {
    Field<double> mag(st[s].size());
    for (std::size_t e = 0; e < mag.size(); ++e) {
      if constexpr (is_complex_v<Scalar>) mag[e] = st[s][e].cwiseAbs();
      else mag[e] = st[s][e];
    }
    double lo = mag[0].minCoeff(), hi = mag[0].maxCoeff();
    for (const auto& v : mag) {
      lo = std::min(lo, v.minCoeff());
      hi = std::max(hi, v.maxCoeff());
    }
    os << step << ',' << format_double(t) << ',' << s << ',' << format_double(lo) << ',' << format_double(hi) << ','
       << format_double(integrate(geom, mag) / area) << ',';
    if (ode_error) os << format_double(ode_error(t));
    os << '\n';
  }
}

template <typename Scalar>
int run_simulation(const Common& c, const SimOptions& so, std::shared_ptr<const SurfaceMesh> mesh,
                   ReactionModel<Scalar> model, const SystemState<Scalar>& initial,
                   const std::function<double(const SystemState<Scalar>&, double)>& ode_check) {
  SimulationOptions opts;
  opts.order = scheme_order(so.scheme);
  opts.dt = so.dt;
  opts.steps = so.steps;
  opts.threads = c.threads;
  if (so.snapshot_every > 0)
    for (long s = 0; s <= so.steps; s += so.snapshot_every) opts.snapshot_steps.push_back(s);
  if (opts.snapshot_steps.empty() || opts.snapshot_steps.back() != so.steps) opts.snapshot_steps.push_back(so.steps);

  ImexIntegrator<Scalar> integ(mesh, build_merge_tree(*mesh), std::move(model), c.threads);
  const SimulationResult<Scalar> res = integ.run(initial, opts);

  const fs::path dir(c.out);
  fs::create_directories(dir);
  auto summary = open_output(dir / "summary.csv");
  summary << "step,time,species,min,max,mean,ode_error\n";
  for (std::size_t k = 0; k < res.snapshots.size(); ++k) {
    const long step = res.snapshot_steps[k];
    const double t = static_cast<double>(step) * so.dt;
    std::ostringstream name;
    name << "snapshot_" << step << ".txt";
    write_snapshot(dir / name.str(), *mesh, res.snapshots[k], step, t);
    std::function<double(double)> err;
    if (ode_check) err = [&](double tt) { return ode_check(res.snapshots[k], tt); };
    write_summary_rows(summary, integ.geometry(), res.snapshots[k], step, t, err);
  }
  auto timings = open_output(dir / "timings.csv");
  const double per_step = so.steps > 0 ? res.step_seconds / static_cast<double>(so.steps) : 0.0;
  timings << "stage,seconds\n"
          << "factor_and_startup," << format_double(res.factor_seconds) << '\n'
          << "steps," << format_double(res.step_seconds) << '\n'
          << "per_step," << format_double(per_step) << '\n';
  std::cout << "steps " << so.steps << "  snapshots " << res.snapshots.size() << "  factorizations "
            << res.factorizations << "\nwritten " << dir.string() << "/summary.csv, timings.csv, snapshot_*.txt\n";
  return 0;
}

int cmd_simulate(const Common& c, const SimOptions& so) {
  if (!(so.dt > 0.0)) throw UsageError("--dt must be positive");
  if (so.steps < 0) throw UsageError("--steps must be non-negative");
  const auto mesh = obtain_mesh(c.mesh);
  if (so.model == "turing") {
    TuringParams params;
    params.delta_v = so.delta_v;
    params.tau2 = so.tau2;
    SystemState<double> init(2);
    if (so.init == "random") {
      init[0] = random_smooth_field(*mesh, c.seed, so.amplitude);
      init[1] = random_smooth_field(*mesh, c.seed + 1, so.amplitude);
    } else if (so.init == "constant") {
      for (auto& f : init) f = sample_field<double>(*mesh, constant(so.amplitude));
    } else {
      throw UsageError("unknown --init '" + so.init + "'");
    }
    return run_simulation<double>(c, so, mesh, turing_model(params), init, {});
  }
  if (so.model == "cgl") {
    SystemState<Complex> init(1);
    std::function<double(const SystemState<Complex>&, double)> ode;
    if (so.init == "random") {
      const Field<double> re = random_smooth_field(*mesh, c.seed, so.amplitude);
      const Field<double> im = random_smooth_field(*mesh, c.seed + 1, so.amplitude);
      init[0].resize(re.size());
      for (std::size_t e = 0; e < re.size(); ++e) init[0][e] = re[e].cast<Complex>() + Complex(0, 1) * im[e].cast<Complex>();
    } else if (so.init == "constant") {
      if (!(so.amplitude > 0.0)) throw UsageError("constant CGL data needs --amplitude > 0");
      init[0] = sample_field<Complex>(*mesh, [&](const Vec3&) { return Complex(so.amplitude, 0.0); });
      const double a0 = so.amplitude, beta = so.cgl_beta;
      ode = [a0, beta](const SystemState<Complex>& st, double t) {
        const Complex exact = cgl_constant_solution(a0, beta, t);
        double err = 0.0;
        for (const auto& v : st[0]) err = std::max(err, (v.array() - exact).abs().maxCoeff());
        return err;
      };
    } else {
      throw UsageError("unknown --init '" + so.init + "'");
    }
    return run_simulation<Complex>(c, so, mesh, cgl_model(so.cgl_alpha, so.cgl_beta, so.delta), init, ode);
  }
  throw UsageError("unknown model '" + so.model + "'");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

int cmd_bench(const Common& c, const PdeOptions& po, const std::string& levels_text, int repeats) {
  const std::vector<int> levels = parse_levels(levels_text);
  if (levels.size() < 2) throw UsageError("bench needs at least 2 refinement levels");
  if (repeats < 1) throw UsageError("--repeats must be positive");
  const Problem pr = make_problem(po);
  {
    // Warm-up: touches allocators and the reference-element cache.
    auto mesh = std::make_shared<const SurfaceMesh>(generate(c.mesh.gen, levels.front(), c.mesh.order));
    build_factorization<double>(mesh, pr.coeff, build_merge_tree(*mesh), FactorOptions{c.threads});
  }
  struct Row {
    int elements;
    long unknowns;
    double factor, update, solve;
    std::size_t memory;
  };
  std::vector<Row> rows;
  for (int level : levels) {
    auto mesh = std::make_shared<const SurfaceMesh>(generate(c.mesh.gen, level, c.mesh.order));
    const MergeTree tree = build_merge_tree(*mesh);
    const Field<double> f = sample_field<double>(*mesh, pr.rhs);
    std::vector<double> tf, tu, ts;
    std::size_t memory = 0;
    for (int r = 0; r < repeats; ++r) {
      auto t0 = Clock::now();
      Factorization<double> fact = build_factorization<double>(mesh, pr.coeff, tree, FactorOptions{c.threads});
      tf.push_back(seconds_since(t0));
      t0 = Clock::now();
      update_rhs(fact, f);
      tu.push_back(seconds_since(t0));
      const Vec<double> g = sample_boundary<double>(fact, pr.bc);
      t0 = Clock::now();
      const Solution<double> sol = solve(fact, g);
      ts.push_back(seconds_since(t0));
      memory = fact.memory_bytes();
    }
    const int p = mesh->order;
    rows.push_back({mesh->size(), static_cast<long>(mesh->size()) * (p + 1) * (p + 1), median(tf), median(tu),
                    median(ts), memory});
    std::cout << "elements " << mesh->size() << "  factor " << format_double(rows.back().factor) << " s  update "
              << format_double(rows.back().update) << " s  solve " << format_double(rows.back().solve) << " s\n";
  }
  std::vector<double> n, tf, tu, ts, mem;
  for (const Row& r : rows) {
    n.push_back(r.elements);
    tf.push_back(r.factor);
    tu.push_back(r.update);
    ts.push_back(r.solve);
    mem.push_back(static_cast<double>(r.memory));
  }
  const fs::path dir(c.out);
  fs::create_directories(dir);
  {
    auto os = open_output(dir / "bench.csv");
    os << "elements,unknowns,factor_seconds,update_rhs_seconds,solve_seconds,memory_bytes\n";
    for (const Row& r : rows)
      os << r.elements << ',' << r.unknowns << ',' << format_double(r.factor) << ',' << format_double(r.update) << ','
         << format_double(r.solve) << ',' << r.memory << '\n';
  }
  {
    auto os = open_output(dir / "bench_fit.csv");
    os << "quantity,exponent\n"
       << "factor," << format_double(fit_order(n, tf)) << '\n'
       << "update_rhs," << format_double(fit_order(n, tu)) << '\n'
       << "solve," << format_double(fit_order(n, ts)) << '\n'
       << "memory," << format_double(fit_order(n, mem)) << '\n';
  }
  std::cout << "exponents: factor " << format_double(fit_order(n, tf)) << "  update_rhs "
            << format_double(fit_order(n, tu)) << "  solve " << format_double(fit_order(n, ts)) << "  memory "
            << format_double(fit_order(n, mem)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fast direct solver for elliptic PDEs on high-order surface meshes"};
  app.set_config("--config", "", "INI file; [command] sections hold that command's options");
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.require_subcommand(1);
  // Lets --config follow the subcommand name.
  app.fallthrough();

  Common mesh_c, solve_c, conv_c, sim_c, bench_c;
  PdeOptions solve_p, conv_p, bench_p;
  std::string cache;
  std::string conv_levels = "1,2,3", conv_ref = "auto", bench_levels = "1,2,3";
  int conv_ref_level = -1, repeats = 3;
  SimOptions sim;
  bench_c.mesh.order = 8;

  auto* mesh_cmd = app.add_subcommand("mesh", "Generate or load a mesh and save it in the text format");
  add_mesh_options(mesh_cmd, mesh_c.mesh);
  mesh_c.out = "mesh.txt";
  mesh_cmd->add_option("--out", mesh_c.out, "Output mesh file");

  auto* solve_cmd = app.add_subcommand("solve", "Factor and solve one boundary value problem");
  add_common(solve_cmd, solve_c);
  add_pde_options(solve_cmd, solve_p);
  solve_cmd->add_option("--cache-factorization", cache, "Binary factorization cache file (read if valid, else written)");

  auto* conv_cmd = app.add_subcommand("converge", "Refinement study with a fitted convergence order");
  add_common(conv_cmd, conv_c);
  add_pde_options(conv_cmd, conv_p);
  conv_cmd->add_option("--levels", conv_levels, "Comma-separated refinement levels (at least 3)");
  conv_cmd->add_option("--reference", conv_ref, "exact, self or auto")->check(CLI::IsMember({"exact", "self", "auto"}));
  conv_cmd->add_option("--reference-level", conv_ref_level, "Refinement level of the self-convergence reference");

  auto* sim_cmd = app.add_subcommand("simulate", "Reaction-diffusion time stepping with IMEX-BDF");
  add_common(sim_cmd, sim_c);
  sim_cmd->add_option("--model", sim.model, "turing or cgl")->check(CLI::IsMember({"turing", "cgl"}));
  sim_cmd->add_option("--scheme", sim.scheme, "bdf1..bdf4");
  sim_cmd->add_option("--dt", sim.dt, "Time step");
  sim_cmd->add_option("--steps", sim.steps, "Number of steps");
  sim_cmd->add_option("--snapshot-every", sim.snapshot_every, "Snapshot cadence in steps (0: final state only)");
  sim_cmd->add_option("--init", sim.init, "random or constant");
  sim_cmd->add_option("--amplitude", sim.amplitude, "Initial data amplitude");
  sim_cmd->add_option("--delta-v", sim.delta_v, "Turing: diffusion of v (u uses 0.516 times this)");
  sim_cmd->add_option("--tau2", sim.tau2, "Turing: quadratic coupling");
  sim_cmd->add_option("--cgl-alpha", sim.cgl_alpha, "CGL: diffusion dispersion alpha");
  sim_cmd->add_option("--cgl-beta", sim.cgl_beta, "CGL: nonlinear dispersion beta");
  sim_cmd->add_option("--delta", sim.delta, "CGL: diffusion strength");

  auto* bench_cmd = app.add_subcommand("bench", "Timing and memory sweep over a mesh family");
  add_common(bench_cmd, bench_c);
  add_pde_options(bench_cmd, bench_p);
  bench_cmd->add_option("--levels", bench_levels, "Comma-separated refinement levels");
  bench_cmd->add_option("--repeats", repeats, "Repetitions per level (median reported)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*mesh_cmd) return cmd_mesh(mesh_c);
    if (*solve_cmd) return cmd_solve(solve_c, solve_p, cache);
    if (*conv_cmd) return cmd_converge(conv_c, conv_p, conv_levels, conv_ref_level, conv_ref);
    if (*sim_cmd) return cmd_simulate(sim_c, sim);
    if (*bench_cmd) return cmd_bench(bench_c, bench_p, bench_levels, repeats);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const StaleFactorizationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}
