#include "shps/apps.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "shps/error.hpp"
#include "shps/parallel.hpp"

namespace shps {

namespace {

constexpr double kPi = std::numbers::pi;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_field(const std::vector<ElementGeometry>& geom, std::size_t size, const char* what) {
  if (size != geom.size())
    throw InvalidArgument(std::string(what) + ": field has " + std::to_string(size) + " elements, mesh has " +
                          std::to_string(geom.size()));
}

}  // namespace

std::vector<ElementGeometry> compute_geometry(const SurfaceMesh& mesh, int threads) {
  std::vector<ElementGeometry> geom(mesh.elements.size());
  parallel_for(geom.size(), threads, [&](std::size_t e) {
    const Element& el = mesh.elements[e];
    geom[e].metric = compute_metric(el);
    geom[e].ops = surface_diff_matrices(el, geom[e].metric);
    geom[e].weights = element_weights(el, geom[e].metric);
  });
  return geom;
}

template <typename Scalar>
Scalar integrate(const std::vector<ElementGeometry>& geom, const Field<Scalar>& f) {
  check_field(geom, f.size(), "integrate");
  Scalar total(0);
  for (std::size_t e = 0; e < geom.size(); ++e) total += geom[e].weights.template cast<Scalar>().dot(f[e]);
  return total;
}

template <typename Scalar>
Field<Scalar> project_mean_zero(const std::vector<ElementGeometry>& geom, const Field<Scalar>& f) {
  double area = 0.0;
  for (const auto& g : geom) area += g.weights.sum();
  const Scalar mean = integrate(geom, f) / area;
  Field<Scalar> out = f;
  for (auto& v : out) v.array() -= mean;
  return out;
}

double l2_norm(const std::vector<ElementGeometry>& geom, const Field<double>& f) {
  check_field(geom, f.size(), "l2_norm");
  double s = 0.0;
  for (std::size_t e = 0; e < geom.size(); ++e) s += geom[e].weights.dot(f[e].cwiseAbs2());
  return std::sqrt(s);
}

double l2_norm(const std::vector<ElementGeometry>& geom, const TangentField& F) {
  check_field(geom, F.size(), "l2_norm");
  double s = 0.0;
  for (std::size_t e = 0; e < geom.size(); ++e) s += geom[e].weights.dot(F[e].rowwise().squaredNorm());
  return std::sqrt(s);
}

TangentField surface_gradient(const std::vector<ElementGeometry>& geom, const Field<double>& u) {
  check_field(geom, u.size(), "surface_gradient");
  TangentField G(u.size());
  for (std::size_t e = 0; e < u.size(); ++e) {
    G[e].resize(u[e].size(), 3);
    for (int c = 0; c < 3; ++c) G[e].col(c) = geom[e].ops.D[c] * u[e];
  }
  return G;
}

Field<double> surface_divergence(const std::vector<ElementGeometry>& geom, const TangentField& F) {
  check_field(geom, F.size(), "surface_divergence");
  Field<double> d(F.size());
  for (std::size_t e = 0; e < F.size(); ++e) {
    d[e] = geom[e].ops.D[0] * F[e].col(0);
    for (int c = 1; c < 3; ++c) d[e].noalias() += geom[e].ops.D[c] * F[e].col(c);
  }
  return d;
}

TangentField cross_normal(const std::vector<ElementGeometry>& geom, const TangentField& F) {
  check_field(geom, F.size(), "cross_normal");
  TangentField out(F.size());
  for (std::size_t e = 0; e < F.size(); ++e) {
    out[e].resize(F[e].rows(), 3);
    for (Index k = 0; k < F[e].rows(); ++k)
      out[e].row(k) = geom[e].metric.normal.row(k).cross(F[e].row(k));
  }
  return out;
}

TangentField project_tangent(const std::vector<ElementGeometry>& geom, const TangentField& F) {
  check_field(geom, F.size(), "project_tangent");
  TangentField out(F.size());
  for (std::size_t e = 0; e < F.size(); ++e) {
    const auto& n = geom[e].metric.normal;
    const Eigen::VectorXd dot = (F[e].array() * n.array()).rowwise().sum();
    out[e] = F[e] - dot.asDiagonal() * n;
  }
  return out;
}

LaplaceBeltramiSolver::LaplaceBeltramiSolver(std::shared_ptr<const SurfaceMesh> mesh, int threads)
    : LaplaceBeltramiSolver(mesh, build_merge_tree(*mesh), threads) {}

LaplaceBeltramiSolver::LaplaceBeltramiSolver(std::shared_ptr<const SurfaceMesh> mesh, const MergeTree& tree,
                                             int threads)
    : mesh_(std::move(mesh)) {
  if (!mesh_->closed)
    throw InvalidArgument("Laplace-Beltrami front end needs a closed surface; open meshes require boundary data, "
                          "use build_factorization and solve instead");
  geom_ = compute_geometry(*mesh_, threads);
  fact_ = build_factorization<double>(mesh_, CoefficientField<double>::laplace_beltrami(), tree,
                                      FactorOptions{threads});
}

Solution<double> LaplaceBeltramiSolver::solve(const Field<double>& f) {
  update_rhs(fact_, project_mean_zero(geom_, f));
  Solution<double> sol = shps::solve(fact_, Vec<double>());
  double area = 0.0;
  for (const auto& g : geom_) area += g.weights.sum();
  const double mean = integrate(geom_, sol.values) / area;
  for (auto& v : sol.values) v.array() -= mean;
  sol.edge_values.array() -= mean;
  return sol;
}

Solution<double> solve_laplace_beltrami(const SurfaceMesh& mesh, const Field<double>& f, int threads) {
  LaplaceBeltramiSolver solver(std::make_shared<const SurfaceMesh>(mesh), threads);
  return solver.solve(f);
}

HodgeResult hodge_decompose(LaplaceBeltramiSolver& solver, const TangentField& F) {
  const auto& geom = solver.geometry();
  check_field(geom, F.size(), "hodge_decompose");
  double fmax = 0.0, nmax = 0.0;
  for (std::size_t e = 0; e < F.size(); ++e) {
    fmax = std::max(fmax, F[e].rowwise().norm().maxCoeff());
    nmax = std::max(nmax, (F[e].array() * geom[e].metric.normal.array()).rowwise().sum().abs().maxCoeff());
  }
  if (nmax > 1e-10 * fmax)
    throw TangencyError("hodge_decompose: field has normal component " + std::to_string(nmax) + " (max |F| = " +
                        std::to_string(fmax) + ")");
  HodgeResult r;
  r.u = solver.solve(surface_divergence(geom, F)).values;
  Field<double> rot = surface_divergence(geom, cross_normal(geom, F));
  for (auto& x : rot) x = -x;
  r.v = solver.solve(rot).values;
  const TangentField gu = surface_gradient(geom, r.u);
  const TangentField ngv = cross_normal(geom, surface_gradient(geom, r.v));
  r.w.resize(F.size());
  for (std::size_t e = 0; e < F.size(); ++e) r.w[e] = F[e] - gu[e] - ngv[e];
  return r;
}

HodgeResult hodge_decompose(const SurfaceMesh& mesh, const TangentField& F, int threads) {
  LaplaceBeltramiSolver solver(std::make_shared<const SurfaceMesh>(mesh), threads);
  return hodge_decompose(solver, F);
}

TangentField random_tangent_field(const SurfaceMesh& mesh, const std::vector<ElementGeometry>& geom, unsigned seed,
                                  int modes) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> amp(-1.0, 1.0), freq(-1.5, 1.5), phase(0.0, 2.0 * kPi);
  struct Mode {
    double a;
    Vec3 k;
    double phi;
  };
  std::array<std::vector<Mode>, 3> comp;
  for (auto& list : comp)
    for (int m = 0; m < modes; ++m) {
      Mode md{amp(rng), Vec3::Zero(), 0.0};
      for (int c = 0; c < 3; ++c) md.k(c) = freq(rng);
      md.phi = phase(rng);
      list.push_back(md);
    }
  TangentField F(mesh.elements.size());
  for (std::size_t e = 0; e < F.size(); ++e) {
    const auto& X = mesh.elements[e].nodes;
    F[e].resize(X.rows(), 3);
    for (Index k = 0; k < X.rows(); ++k) {
      const Vec3 x = X.row(k).transpose();
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (const Mode& md : comp[c]) s += md.a * std::sin(md.k.dot(x) + md.phi);
        F[e](k, c) = s;
      }
    }
  }
  return project_tangent(geom, F);
}

Field<double> random_smooth_field(const SurfaceMesh& mesh, unsigned seed, double amplitude, int modes) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> amp(-amplitude, amplitude), freq(-3.0, 3.0), phase(0.0, 2.0 * kPi);
  std::vector<std::pair<double, Vec3>> waves;
  std::vector<double> phases;
  for (int m = 0; m < modes; ++m) {
    const double a = amp(rng);
    Vec3 k;
    for (int c = 0; c < 3; ++c) k(c) = freq(rng);
    waves.emplace_back(a, k);
    phases.push_back(phase(rng));
  }
  Field<double> f(mesh.elements.size());
  for (std::size_t e = 0; e < f.size(); ++e) {
    const auto& X = mesh.elements[e].nodes;
    f[e] = Eigen::VectorXd::Zero(X.rows());
    for (Index k = 0; k < X.rows(); ++k) {
      const Vec3 x = X.row(k).transpose();
      for (std::size_t m = 0; m < waves.size(); ++m)
        f[e](k) += waves[m].first * std::sin(waves[m].second.dot(x) + phases[m]);
    }
  }
  return f;
}

double spherical_harmonic(int l, int m, const Vec3& x) {
  if (l < 0 || std::abs(m) > l) throw InvalidArgument("spherical_harmonic: need 0 <= |m| <= l");
  const Vec3 d = x.normalized();
  const int am = std::abs(m);
  const double ct = d.z();
  const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
  // Orthonormal associated Legendre values by upward recurrence in l.
  double pmm = std::sqrt(1.0 / (4.0 * kPi));
  for (int k = 1; k <= am; ++k) pmm *= std::sqrt((2.0 * k + 1.0) / (2.0 * k)) * st;
  double plm = pmm;
  if (l > am) {
    double prev = pmm;
    double cur = std::sqrt(2.0 * am + 3.0) * ct * pmm;
    for (int ll = am + 2; ll <= l; ++ll) {
      const double a = std::sqrt((4.0 * ll * ll - 1.0) / (static_cast<double>(ll) * ll - am * am));
      const double b = std::sqrt(((ll - 1.0) * (ll - 1.0) - am * am) / (4.0 * (ll - 1.0) * (ll - 1.0) - 1.0));
      const double next = a * (ct * cur - b * prev);
      prev = cur;
      cur = next;
    }
    plm = cur;
  }
  if (m == 0) return plm;
  const double phi = std::atan2(d.y(), d.x());
  return std::sqrt(2.0) * plm * (m > 0 ? std::cos(am * phi) : std::sin(am * phi));
}

ImexScheme ImexScheme::bdf(int order) {
  switch (order) {
    case 1: return {1, 1.0, {1.0}, {1.0}};
    case 2: return {2, 2.0 / 3.0, {4.0 / 3.0, -1.0 / 3.0}, {4.0 / 3.0, -2.0 / 3.0}};
    case 3:
      return {3, 6.0 / 11.0, {18.0 / 11.0, -9.0 / 11.0, 2.0 / 11.0}, {18.0 / 11.0, -18.0 / 11.0, 6.0 / 11.0}};
    case 4:
      return {4,
              12.0 / 25.0,
              {48.0 / 25.0, -36.0 / 25.0, 16.0 / 25.0, -3.0 / 25.0},
              {48.0 / 25.0, -72.0 / 25.0, 48.0 / 25.0, -12.0 / 25.0}};
    default: throw InvalidArgument("IMEX-BDF order must be 1..4, got " + std::to_string(order));
  }
}

ReactionModel<double> turing_model(const TuringParams& pr) {
  ReactionModel<double> m;
  m.species = 2;
  m.diffusion = {pr.delta_u_ratio * pr.delta_v, pr.delta_v};
  m.rhs = [pr](const double* u, double* out) {
    const double a = u[0], b = u[1];
    out[0] = pr.alpha * a * (1.0 - pr.tau1 * b * b) + b * (1.0 - pr.tau2 * a);
    out[1] = pr.beta * b * (1.0 + pr.alpha * pr.tau1 / pr.beta * a * b) + a * (pr.gamma + pr.tau2 * b);
  };
  return m;
}

ReactionModel<Complex> cgl_model(double alpha, double beta, double delta) {
  ReactionModel<Complex> m;
  m.species = 1;
  m.diffusion = {delta * Complex(1.0, alpha)};
  m.rhs = [beta](const Complex* u, Complex* out) { out[0] = u[0] - Complex(1.0, beta) * u[0] * std::norm(u[0]); };
  return m;
}

Complex cgl_constant_solution(double a0, double beta, double t) {
  const double growth = 1.0 + a0 * a0 * std::expm1(2.0 * t);
  const double amp = a0 * std::exp(t) / std::sqrt(growth);
  const double phase = -0.5 * beta * std::log(growth);
  return std::polar(amp, phase);
}

template <typename Scalar>
SystemState<Scalar> imex_bdf_step(const std::vector<Factorization<Scalar>*>& facts, const ImexScheme& scheme,
                                  const std::vector<const SystemState<Scalar>*>& history,
                                  const ReactionModel<Scalar>& model, double dt) {
  const int K = scheme.order;
  const int ns = model.species;
  if (static_cast<int>(history.size()) < K)
    throw InvalidArgument("imex_bdf_step: need " + std::to_string(K) + " history states, got " +
                          std::to_string(history.size()));
  if (static_cast<int>(facts.size()) != ns) throw InvalidArgument("imex_bdf_step: one factorization per species");
  const double shift = scheme.omega * dt;
  for (int s = 0; s < ns; ++s) {
    const auto& f = facts[static_cast<std::size_t>(s)];
    if (!f->implicit_shift || std::abs(*f->implicit_shift - shift) > 1e-14 * std::max(1.0, shift))
      throw StaleFactorizationError("factorization for species " + std::to_string(s) + " was built for shift " +
                                    (f->implicit_shift ? std::to_string(*f->implicit_shift) : std::string("none")) +
                                    ", step needs omega*dt = " + std::to_string(shift));
  }
  const SurfaceMesh& mesh = *facts.front()->mesh;
  const std::size_t ne = mesh.elements.size();
  SystemState<Scalar> rhs(static_cast<std::size_t>(ns), Field<Scalar>(ne));
  parallel_for(ne, facts.front()->threads, [&](std::size_t e) {
    const Index n = (*history[0])[0][e].size();
    for (int s = 0; s < ns; ++s) rhs[static_cast<std::size_t>(s)][e] = Vec<Scalar>::Zero(n);
    std::vector<Scalar> u(static_cast<std::size_t>(ns)), out(static_cast<std::size_t>(ns));
    for (int i = 0; i < K; ++i) {
      const SystemState<Scalar>& h = *history[static_cast<std::size_t>(i)];
      const Scalar mu(scheme.mu[static_cast<std::size_t>(i)]);
      const Scalar nu(dt * scheme.nu[static_cast<std::size_t>(i)]);
      for (int s = 0; s < ns; ++s) rhs[static_cast<std::size_t>(s)][e] += mu * h[static_cast<std::size_t>(s)][e];
      if (!model.rhs) continue;
      for (Index k = 0; k < n; ++k) {
        for (int s = 0; s < ns; ++s) u[static_cast<std::size_t>(s)] = h[static_cast<std::size_t>(s)][e](k);
        model.rhs(u.data(), out.data());
        for (int s = 0; s < ns; ++s) rhs[static_cast<std::size_t>(s)][e](k) += nu * out[static_cast<std::size_t>(s)];
      }
    }
  });
  SystemState<Scalar> next(static_cast<std::size_t>(ns));
  for (int s = 0; s < ns; ++s) {
    Factorization<Scalar>& f = *facts[static_cast<std::size_t>(s)];
    update_rhs(f, rhs[static_cast<std::size_t>(s)]);
    const Vec<Scalar> g = Vec<Scalar>::Zero(static_cast<Index>(f.root_boundary_ids.size()));
    next[static_cast<std::size_t>(s)] = solve(f, g).values;
  }
  return next;
}

template <typename Scalar>
ImexIntegrator<Scalar>::ImexIntegrator(std::shared_ptr<const SurfaceMesh> mesh, MergeTree tree,
                                       ReactionModel<Scalar> model, int threads)
    : mesh_(std::move(mesh)), tree_(std::move(tree)), model_(std::move(model)), threads_(std::max(1, threads)) {
  if (static_cast<int>(model_.diffusion.size()) != model_.species)
    throw InvalidArgument("reaction model needs one diffusion coefficient per species");
  geom_ = compute_geometry(*mesh_, threads_);
}

template <typename Scalar>
Factorization<Scalar>& ImexIntegrator<Scalar>::factorization(int species, int order, double dt) {
  const Scalar d = model_.diffusion.at(static_cast<std::size_t>(species));
  // Species with equal diffusion share a factorization.
  int owner = species;
  for (int s = 0; s < species; ++s)
    if (model_.diffusion[static_cast<std::size_t>(s)] == d) {
      owner = s;
      break;
    }
  const auto key = std::make_tuple(owner, order, dt);
  auto it = cache_.find(key);
  if (it != cache_.end()) return *it->second;
  const double shift = ImexScheme::bdf(order).omega * dt;
  CoefficientField<Scalar> coeff;
  const Scalar a = -Scalar(shift) * d;
  for (int k = 0; k < 3; ++k) coeff.a[k] = [a](const Vec3&) { return a; };
  coeff.c = [](const Vec3&) { return Scalar(1); };
  auto fact = std::make_unique<Factorization<Scalar>>(
      build_factorization<Scalar>(mesh_, coeff, tree_, FactorOptions{threads_}));
  fact->implicit_shift = shift;
  ++built_;
  return *cache_.emplace(key, std::move(fact)).first->second;
}

template <typename Scalar>
std::vector<SystemState<Scalar>> ImexIntegrator<Scalar>::startup(const SystemState<Scalar>& u0, int order, double dt,
                                                                 double floor_dt) {
  std::vector<SystemState<Scalar>> states{u0};
  if (order == 1) return states;
  auto step_with = [&](int k, double h) {
    std::vector<Factorization<Scalar>*> facts;
    for (int s = 0; s < model_.species; ++s) facts.push_back(&factorization(s, k, h));
    std::vector<const SystemState<Scalar>*> hist;
    for (int i = 0; i < k; ++i) hist.push_back(&states[states.size() - 1 - static_cast<std::size_t>(i)]);
    states.push_back(imex_bdf_step(facts, ImexScheme::bdf(k), hist, model_, h));
  };
  if (dt <= floor_dt) {
    // Steps this small make the low-order ramp's error negligible.
    for (int k = 1; k < order; ++k) step_with(k, dt);
    return states;
  }
  states = startup(u0, order, 0.5 * dt, floor_dt);
  for (int k = 1; k < order; ++k) step_with(order, 0.5 * dt);
  std::vector<SystemState<Scalar>> coarse;
  for (std::size_t i = 0; i < states.size(); i += 2) coarse.push_back(std::move(states[i]));
  return coarse;
}

template <typename Scalar>
SimulationResult<Scalar> ImexIntegrator<Scalar>::run(const SystemState<Scalar>& initial,
                                                     const SimulationOptions& opts) {
  const int K = opts.order;
  const ImexScheme scheme = ImexScheme::bdf(K);
  if (!(opts.dt > 0.0)) throw InvalidArgument("time step must be positive");
  if (opts.steps < 0) throw InvalidArgument("step count must be non-negative");
  if (static_cast<int>(initial.size()) != model_.species)
    throw InvalidArgument("initial state has " + std::to_string(initial.size()) + " species, model has " +
                          std::to_string(model_.species));
  SimulationResult<Scalar> result;
  auto check = [&](const SystemState<Scalar>& st, long step) {
    for (const auto& field : st)
      for (const auto& v : field)
        if (!v.allFinite() || v.cwiseAbs().maxCoeff() > 1e150)
          throw DivergenceError("time integration diverged at step " + std::to_string(step), step);
  };
  auto record = [&](const SystemState<Scalar>& st, long step) {
    for (long s : opts.snapshot_steps)
      if (s == step) {
        result.snapshot_steps.push_back(step);
        result.snapshots.push_back(st);
        break;
      }
  };

  const auto t0 = std::chrono::steady_clock::now();
  const double floor_dt = opts.dt * std::pow(std::min(1.0, opts.dt), 0.5 * (K - 1)) / 8.0;
  std::vector<SystemState<Scalar>> states = startup(initial, K, opts.dt, floor_dt);
  std::vector<Factorization<Scalar>*> facts;
  for (int s = 0; s < model_.species; ++s) facts.push_back(&factorization(s, K, opts.dt));
  const double startup_seconds = seconds_since(t0);
  const long built_before = built_;

  std::vector<SystemState<Scalar>> window;  // newest last, at most K states
  for (std::size_t i = 0; i < states.size() && static_cast<long>(i) <= opts.steps; ++i) {
    check(states[i], static_cast<long>(i));
    record(states[i], static_cast<long>(i));
    window.push_back(std::move(states[i]));
  }
  const auto t1 = std::chrono::steady_clock::now();
  for (long step = static_cast<long>(window.size()); step <= opts.steps; ++step) {
    std::vector<const SystemState<Scalar>*> hist;
    for (int i = 0; i < K; ++i) hist.push_back(&window[window.size() - 1 - static_cast<std::size_t>(i)]);
    for (int s = 0; s < model_.species; ++s)
      if (&factorization(s, K, opts.dt) != facts[static_cast<std::size_t>(s)])
        throw StaleFactorizationError("operator cache changed during time stepping");
    SystemState<Scalar> next = imex_bdf_step(facts, scheme, hist, model_, opts.dt);
    check(next, step);
    record(next, step);
    window.erase(window.begin());
    window.push_back(std::move(next));
  }
  result.step_seconds = seconds_since(t1);
  result.factor_seconds = startup_seconds;
  result.factorizations = built_;
  if (built_ != built_before) throw StaleFactorizationError("time stepping rebuilt a factorization");
  result.final_state = std::move(window.back());
  return result;
}

SimulationResult<double> simulate_turing(std::shared_ptr<const SurfaceMesh> mesh, const TuringParams& params,
                                         const SystemState<double>& initial, const SimulationOptions& opts) {
  MergeTree tree = build_merge_tree(*mesh);
  ImexIntegrator<double> integ(std::move(mesh), std::move(tree), turing_model(params), opts.threads);
  return integ.run(initial, opts);
}

SimulationResult<Complex> simulate_cgl(std::shared_ptr<const SurfaceMesh> mesh, double alpha, double beta,
                                       double delta, const Field<Complex>& initial, const SimulationOptions& opts) {
  MergeTree tree = build_merge_tree(*mesh);
  ImexIntegrator<Complex> integ(std::move(mesh), std::move(tree), cgl_model(alpha, beta, delta), opts.threads);
  return integ.run(SystemState<Complex>{initial}, opts);
}

PatchLocator::PatchLocator(const SurfaceMesh& mesh) : mesh_(&mesh) {
  for (int e = 0; e < mesh.size(); ++e) {
    const PatchParam& pp = mesh.elements[static_cast<std::size_t>(e)].param;
    if (pp.patch >= 0) by_patch_[pp.patch].push_back(e);
  }
}

std::tuple<int, double, double> PatchLocator::locate(int patch, double u, double v) const {
  auto it = by_patch_.find(patch);
  if (it != by_patch_.end()) {
    for (int e : it->second) {
      const PatchParam& pp = mesh_->elements[static_cast<std::size_t>(e)].param;
      const double tu = 1e-12 * (pp.u1 - pp.u0), tv = 1e-12 * (pp.v1 - pp.v0);
      if (u < pp.u0 - tu || u > pp.u1 + tu || v < pp.v0 - tv || v > pp.v1 + tv) continue;
      const double xi = std::clamp(2.0 * (u - pp.u0) / (pp.u1 - pp.u0) - 1.0, -1.0, 1.0);
      const double eta = std::clamp(2.0 * (v - pp.v0) / (pp.v1 - pp.v0) - 1.0, -1.0, 1.0);
      return {e, xi, eta};
    }
  }
  throw InvalidArgument("point (" + std::to_string(u) + ", " + std::to_string(v) + ") of patch " +
                        std::to_string(patch) + " not covered by the mesh");
}

double self_convergence_error(const Solution<double>& coarse, const Solution<double>& fine) {
  const SurfaceMesh& cm = *coarse.mesh;
  const auto& ref = reference_element(cm.order);
  PatchLocator locator(*fine.mesh);
  double diff = 0.0, scale = 0.0;
  for (const auto& v : fine.values) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  for (int e = 0; e < cm.size(); ++e) {
    const PatchParam& pp = cm.elements[static_cast<std::size_t>(e)].param;
    if (pp.patch < 0) throw InvalidArgument("self_convergence_error: mesh lacks patch parameters");
    for (int j = 0; j <= ref.p; ++j)
      for (int i = 0; i <= ref.p; ++i) {
        const double u = pp.u0 + 0.5 * (ref.grid.nodes(j) + 1.0) * (pp.u1 - pp.u0);
        const double v = pp.v0 + 0.5 * (ref.grid.nodes(i) + 1.0) * (pp.v1 - pp.v0);
        const auto [fe, xi, eta] = locator.locate(pp.patch, u, v);
        const double uf = evaluate(fine, fe, xi, eta);
        diff = std::max(diff, std::abs(coarse.values[static_cast<std::size_t>(e)](tensor_index(ref.p, i, j)) - uf));
      }
  }
  return scale > 0.0 ? diff / scale : diff;
}

double fit_order(const std::vector<double>& h, const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2) throw InvalidArgument("fit_order: need at least two (h, error) pairs");
  const double n = static_cast<double>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double x = std::log(h[k]), y = std::log(err[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double mean_mesh_size(const SurfaceMesh& mesh) { return std::sqrt(surface_area(mesh) / mesh.size()); }

template double integrate(const std::vector<ElementGeometry>&, const Field<double>&);
template Complex integrate(const std::vector<ElementGeometry>&, const Field<Complex>&);
template Field<double> project_mean_zero(const std::vector<ElementGeometry>&, const Field<double>&);
template Field<Complex> project_mean_zero(const std::vector<ElementGeometry>&, const Field<Complex>&);
template SystemState<double> imex_bdf_step(const std::vector<Factorization<double>*>&, const ImexScheme&,
                                           const std::vector<const SystemState<double>*>&,
                                           const ReactionModel<double>&, double);
template SystemState<Complex> imex_bdf_step(const std::vector<Factorization<Complex>*>&, const ImexScheme&,
                                            const std::vector<const SystemState<Complex>*>&,
                                            const ReactionModel<Complex>&, double);
template class ImexIntegrator<double>;
template class ImexIntegrator<Complex>;

}  // namespace shps
