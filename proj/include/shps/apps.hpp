#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <tuple>
#include <vector>

#include "shps/solver.hpp"
#include "shps/surface_ops.hpp"

namespace shps {

/// Metric, tangential derivative matrices and quadrature weights of every element.
struct ElementGeometry {
  MetricData metric;
  SurfaceDiffOps ops;
  Eigen::VectorXd weights;
};

std::vector<ElementGeometry> compute_geometry(const SurfaceMesh& mesh, int threads = 1);

template <typename Scalar>
Scalar integrate(const std::vector<ElementGeometry>& geom, const Field<Scalar>& f);

/// f minus its surface mean.
template <typename Scalar>
Field<Scalar> project_mean_zero(const std::vector<ElementGeometry>& geom, const Field<Scalar>& f);

/// Surface L2 norm; a tangent field contributes |F|².
double l2_norm(const std::vector<ElementGeometry>& geom, const Field<double>& f);

/// Per element, (p+1)² × 3 Cartesian vectors.
using TangentField = std::vector<Eigen::MatrixX3d>;

double l2_norm(const std::vector<ElementGeometry>& geom, const TangentField& F);

TangentField surface_gradient(const std::vector<ElementGeometry>& geom, const Field<double>& u);
Field<double> surface_divergence(const std::vector<ElementGeometry>& geom, const TangentField& F);
TangentField cross_normal(const std::vector<ElementGeometry>& geom, const TangentField& F);
/// Removes the normal component at every node.
TangentField project_tangent(const std::vector<ElementGeometry>& geom, const TangentField& F);

/// Closed-surface Laplace–Beltrami solves Δ_Γ u = f with mean-zero f and u,
/// reusing one factorization (with the rank-one fix) across right-hand sides.
class LaplaceBeltramiSolver {
 public:
  LaplaceBeltramiSolver(std::shared_ptr<const SurfaceMesh> mesh, int threads = 1);
  LaplaceBeltramiSolver(std::shared_ptr<const SurfaceMesh> mesh, const MergeTree& tree, int threads = 1);

  Solution<double> solve(const Field<double>& f);

  const std::vector<ElementGeometry>& geometry() const { return geom_; }
  const Factorization<double>& factorization() const { return fact_; }
  const std::shared_ptr<const SurfaceMesh>& mesh() const { return mesh_; }

 private:
  std::shared_ptr<const SurfaceMesh> mesh_;
  std::vector<ElementGeometry> geom_;
  Factorization<double> fact_;
};

/// Throws InvalidArgument for open meshes (those need boundary data; use solve()).
Solution<double> solve_laplace_beltrami(const SurfaceMesh& mesh, const Field<double>& f, int threads = 1);

struct HodgeResult {
  Field<double> u;  ///< curl-free potential
  Field<double> v;  ///< divergence-free potential
  TangentField w;   ///< harmonic remainder
};

/// F = ∇u + n × ∇v + w. Throws TangencyError when F has a normal component
/// above 1e-10 × max |F|.
HodgeResult hodge_decompose(LaplaceBeltramiSolver& solver, const TangentField& F);
HodgeResult hodge_decompose(const SurfaceMesh& mesh, const TangentField& F, int threads = 1);

/// Smooth tangent field: a fixed-seed trigonometric ambient field projected
/// onto the tangent planes.
TangentField random_tangent_field(const SurfaceMesh& mesh, const std::vector<ElementGeometry>& geom,
                                  unsigned seed, int modes = 4);

/// Smooth scalar field: a fixed-seed sum of `modes` ambient sine waves with
/// coefficients in [-amplitude, amplitude], so shared nodes get equal values.
Field<double> random_smooth_field(const SurfaceMesh& mesh, unsigned seed, double amplitude, int modes = 6);

/// Real orthonormal spherical harmonic Y_l^m at the direction of x
/// (m > 0: cosine type, m < 0: sine type).
double spherical_harmonic(int l, int m, const Vec3& x);

/// Implicit–explicit BDF coefficients.
struct ImexScheme {
  int order = 1;
  double omega = 1.0;
  std::vector<double> mu;
  std::vector<double> nu;

  static ImexScheme bdf(int order);
};

/// Pointwise reactions for a system of species. `rhs(u, out)` reads one value
/// per species at a node and writes N(u) per species.
template <typename Scalar>
struct ReactionModel {
  int species = 1;
  std::vector<Scalar> diffusion;  ///< L = diffusion[s] · Δ_Γ for species s
  std::function<void(const Scalar* u, Scalar* out)> rhs;
};

struct TuringParams {
  double alpha = 0.899, beta = -0.91, gamma = -0.899;
  double tau1 = 0.02, tau2 = 0.15;
  double delta_v = 0.005;
  double delta_u_ratio = 0.516;  ///< δ_u = ratio · δ_v
};

ReactionModel<double> turing_model(const TuringParams& params);

/// u_t = δ(1 + αi) Δ_Γ u + u - (1 + βi) u |u|².
ReactionModel<Complex> cgl_model(double alpha, double beta, double delta);

/// Species-major state: state[s] is the field of species s.
template <typename Scalar>
using SystemState = std::vector<Field<Scalar>>;

/// One step of the scheme. `facts[s]` must factor I - ω·dt·diffusion[s]·Δ_Γ
/// (checked via implicit_shift); history[0] is the newest state.
template <typename Scalar>
SystemState<Scalar> imex_bdf_step(const std::vector<Factorization<Scalar>*>& facts, const ImexScheme& scheme,
                                  const std::vector<const SystemState<Scalar>*>& history,
                                  const ReactionModel<Scalar>& model, double dt);

struct SimulationOptions {
  int order = 4;
  double dt = 0.1;
  long steps = 1;
  std::vector<long> snapshot_steps;  ///< steps after which the state is recorded (0 = initial)
  int threads = 1;
};

template <typename Scalar>
struct SimulationResult {
  std::vector<long> snapshot_steps;
  std::vector<SystemState<Scalar>> snapshots;
  SystemState<Scalar> final_state;
  double factor_seconds = 0.0;  ///< time spent building factorizations
  double step_seconds = 0.0;    ///< time spent in steps after startup
  long factorizations = 0;      ///< number of distinct factorizations built
};

/// Multistep integrator with per-(species diffusion, order, dt) factorization cache.
template <typename Scalar>
class ImexIntegrator {
 public:
  ImexIntegrator(std::shared_ptr<const SurfaceMesh> mesh, MergeTree tree, ReactionModel<Scalar> model,
                 int threads = 1);

  /// Factorization of I - ω(order)·dt·diffusion[species]·Δ_Γ, built on first use.
  Factorization<Scalar>& factorization(int species, int order, double dt);

  /// Runs `opts.steps` steps of IMEX-BDF(opts.order). The first order-1
  /// history states come from a recursive startup on halved steps that
  /// keeps the startup error at the scheme's order.
  SimulationResult<Scalar> run(const SystemState<Scalar>& initial, const SimulationOptions& opts);

  const std::vector<ElementGeometry>& geometry() const { return geom_; }
  long factorizations_built() const { return built_; }

 private:
  std::vector<SystemState<Scalar>> startup(const SystemState<Scalar>& u0, int order, double dt, double floor_dt);

  std::shared_ptr<const SurfaceMesh> mesh_;
  MergeTree tree_;
  ReactionModel<Scalar> model_;
  int threads_;
  std::vector<ElementGeometry> geom_;
  std::map<std::tuple<int, int, double>, std::unique_ptr<Factorization<Scalar>>> cache_;
  long built_ = 0;
};

SimulationResult<double> simulate_turing(std::shared_ptr<const SurfaceMesh> mesh, const TuringParams& params,
                                         const SystemState<double>& initial, const SimulationOptions& opts);
SimulationResult<Complex> simulate_cgl(std::shared_ptr<const SurfaceMesh> mesh, double alpha, double beta,
                                       double delta, const Field<Complex>& initial, const SimulationOptions& opts);

/// Exact spatially constant CGL solution with real initial value a0 > 0.
Complex cgl_constant_solution(double a0, double beta, double t);

/// Locates points given in generator patch coordinates, for comparing
/// solutions across refinements of one mesh family.
class PatchLocator {
 public:
  explicit PatchLocator(const SurfaceMesh& mesh);
  /// Element index and (ξ, η) of patch point (u, v). Throws if not found.
  std::tuple<int, double, double> locate(int patch, double u, double v) const;

 private:
  const SurfaceMesh* mesh_;
  std::map<int, std::vector<int>> by_patch_;
};

/// max |coarse - fine| over the coarse mesh nodes, divided by max |fine|.
double self_convergence_error(const Solution<double>& coarse, const Solution<double>& fine);

/// Least-squares slope of log(err) against log(h).
double fit_order(const std::vector<double>& h, const std::vector<double>& err);

/// Mean element size sqrt(area / N).
double mean_mesh_size(const SurfaceMesh& mesh);

}  // namespace shps
