#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>

#include "oracle.hpp"
#include "shps/apps.hpp"
#include "shps/error.hpp"
#include "support.hpp"

using namespace shps;
using Eigen::VectorXd;

namespace {

double field_max(const Field<double>& f) {
  double m = 0.0;
  for (const auto& v : f) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

TangentField combine(const TangentField& a, const TangentField& b, double sb = 1.0) {
  TangentField out = a;
  for (std::size_t e = 0; e < out.size(); ++e) out[e] += sb * b[e];
  return out;
}

/// Right-hand side of the constant-mode CGL ODE.
Complex cgl_ode(Complex u, double beta) { return u - Complex(1.0, beta) * u * std::norm(u); }

/// Classical RK4 on the constant-mode ODE, the oracle for the closed form.
Complex rk4(Complex u, double beta, double t, int steps) {
  const double h = t / steps;
  for (int k = 0; k < steps; ++k) {
    const Complex k1 = cgl_ode(u, beta), k2 = cgl_ode(u + 0.5 * h * k1, beta);
    const Complex k3 = cgl_ode(u + 0.5 * h * k2, beta), k4 = cgl_ode(u + h * k3, beta);
    u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return u;
}

}  // namespace

TEST_CASE("IMEX coefficient tables in rational form") {
  struct Table {
    long den;
    long omega;
    std::vector<long> mu, nu;
  };
  const std::array<Table, 4> tables{{{1, 1, {1}, {1}},
                                     {3, 2, {4, -1}, {4, -2}},
                                     {11, 6, {18, -9, 2}, {18, -18, 6}},
                                     {25, 12, {48, -36, 16, -3}, {48, -72, 48, -12}}}};
  for (int K = 1; K <= 4; ++K) {
    const Table& t = tables[static_cast<std::size_t>(K - 1)];
    long smu = 0, snu = 0;
    for (long m : t.mu) smu += m;
    for (long v : t.nu) snu += v;
    CHECK(smu == t.den);    // Σμ = 1
    CHECK(snu == t.omega);  // Σν = ω, first-order consistency of the explicit part
    const ImexScheme s = ImexScheme::bdf(K);
    CHECK(s.order == K);
    CHECK(s.omega == doctest::Approx(static_cast<double>(t.omega) / t.den).epsilon(1e-15));
    REQUIRE(s.mu.size() == static_cast<std::size_t>(K));
    REQUIRE(s.nu.size() == static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) {
      CHECK(std::abs(s.mu[i] - static_cast<double>(t.mu[i]) / t.den) < 1e-15);
      CHECK(std::abs(s.nu[i] - static_cast<double>(t.nu[i]) / t.den) < 1e-15);
    }
  }
  CHECK_THROWS_AS(ImexScheme::bdf(5), InvalidArgument);
  CHECK_THROWS_AS(ImexScheme::bdf(0), InvalidArgument);
}

TEST_CASE("single IMEX steps") {
  const auto mesh = fixtures::share(generate_cubed_sphere(0, 5));
  const MergeTree tree = build_merge_tree(*mesh);
  SUBCASE("backward Euler with a linear reaction matches the dense system") {
    const double d = 0.4, lambda = -3.0, dt = 0.125;
    ReactionModel<double> model;
    model.diffusion = {d};
    model.rhs = [lambda](const double* u, double* out) { out[0] = lambda * u[0]; };
    ImexIntegrator<double> integ(mesh, tree, model);
    const SystemState<double> u0{fixtures::sample(*mesh, fixtures::smooth_load)};
    const auto next = imex_bdf_step<double>({&integ.factorization(0, 1, dt)}, ImexScheme::bdf(1), {&u0}, model, dt);
    CoefficientField<double> cf;
    for (int k = 0; k < 3; ++k) cf.a[k] = [&](const Vec3&) { return -dt * d; };
    cf.c = [](const Vec3&) { return 1.0; };
    Field<double> f(u0[0].size());
    for (std::size_t e = 0; e < f.size(); ++e) f[e] = (1.0 + dt * lambda) * u0[0][e];
    const auto dense = oracle::solve<double>(*mesh, cf, f, VectorXd());
    CHECK(oracle::relative_difference(next[0], dense.values) < 1e-10);
  }
  SUBCASE("steady state is a fixed point") {
    const ReactionModel<Complex> model = cgl_model(0.3, 0.0, 0.05);
    ImexIntegrator<Complex> integ(mesh, tree, model);
    const double dt = 0.1;
    const Field<Complex> one = sample_field<Complex>(*mesh, [](const Vec3&) { return Complex(1.0); });
    const SystemState<Complex> u{one};
    for (int K = 1; K <= 4; ++K) {
      const std::vector<const SystemState<Complex>*> hist(static_cast<std::size_t>(K), &u);
      const auto next = imex_bdf_step<Complex>({&integ.factorization(0, K, dt)}, ImexScheme::bdf(K), hist, model, dt);
      for (const auto& v : next[0]) CHECK((v.array() - 1.0).abs().maxCoeff() < 1e-11);
    }
  }
  SUBCASE("stale factorization") {
    ImexIntegrator<double> integ(mesh, tree, turing_model({}));
    const SystemState<double> u(2, fixtures::sample(*mesh, [](const Vec3&) { return 0.0; }));
    std::vector<Factorization<double>*> facts{&integ.factorization(0, 2, 0.1), &integ.factorization(1, 2, 0.1)};
    const std::vector<const SystemState<double>*> hist(4, &u);
    CHECK_THROWS_AS(imex_bdf_step<double>(facts, ImexScheme::bdf(4), hist, turing_model({}), 0.1),
                    StaleFactorizationError);
    CHECK_THROWS_AS(imex_bdf_step<double>(facts, ImexScheme::bdf(2), hist, turing_model({}), 0.05),
                    StaleFactorizationError);
  }
}

TEST_CASE("factorization cache") {
  const auto mesh = fixtures::share(generate_cubed_sphere(0, 4));
  ReactionModel<double> model;
  model.species = 3;
  model.diffusion = {0.1, 0.2, 0.1};
  ImexIntegrator<double> integ(mesh, build_merge_tree(*mesh), model);
  Factorization<double>* a = &integ.factorization(0, 4, 0.05);
  CHECK(&integ.factorization(0, 4, 0.05) == a);
  CHECK(&integ.factorization(2, 4, 0.05) == a);
  CHECK(&integ.factorization(1, 4, 0.05) != a);
  CHECK(integ.factorizations_built() == 2);
  const SystemState<double> u0(3, fixtures::sample(*mesh, fixtures::smooth_load));
  SimulationOptions opts;
  opts.order = 4;
  opts.dt = 0.05;
  opts.steps = 6;
  integ.run(u0, opts);
  const long built = integ.factorizations_built();
  opts.steps = 30;
  integ.run(u0, opts);
  CHECK(integ.factorizations_built() == built);
  CHECK(&integ.factorization(0, 4, 0.05) == a);
}

TEST_CASE("pure diffusion conserves each species' integral") {
  // Collocation conserves the quadrature integral only to discretization error.
  const auto mesh = fixtures::share(generate_blob(1, 12));
  ReactionModel<double> model;
  model.species = 2;
  model.diffusion = {0.3, 0.05};
  ImexIntegrator<double> integ(mesh, build_merge_tree(*mesh), model);
  const SystemState<double> u0{fixtures::sample(*mesh, fixtures::smooth_load),
                               random_smooth_field(*mesh, 7, 1.0)};
  SimulationOptions opts;
  opts.order = 3;
  opts.dt = 0.1;
  opts.steps = 40;
  const auto res = integ.run(u0, opts);
  for (int s = 0; s < 2; ++s) {
    const double before = integrate(integ.geometry(), u0[static_cast<std::size_t>(s)]);
    const double after = integrate(integ.geometry(), res.final_state[static_cast<std::size_t>(s)]);
    CHECK(std::abs(after - before) <= 1e-8 * std::max(1.0, std::abs(before)));
  }
}

TEST_CASE("Turing model") {
  const auto mesh = fixtures::share(generate_cubed_sphere(1, 5));
  SUBCASE("zero stays zero") {
    const Field<double> zero = fixtures::sample(*mesh, [](const Vec3&) { return 0.0; });
    SimulationOptions opts;
    opts.dt = 0.1;
    opts.steps = 20;
    const auto res = simulate_turing(mesh, {}, {zero, zero}, opts);
    CHECK(field_max(res.final_state[0]) == 0.0);
    CHECK(field_max(res.final_state[1]) == 0.0);
  }
  SUBCASE("reaction terms") {
    const TuringParams p;
    const ReactionModel<double> m = turing_model(p);
    CHECK(m.species == 2);
    CHECK(m.diffusion[0] == doctest::Approx(p.delta_u_ratio * p.delta_v));
    CHECK(m.diffusion[1] == doctest::Approx(p.delta_v));
    const double u[2] = {0.3, -0.2};
    double out[2];
    m.rhs(u, out);
    CHECK(out[0] == doctest::Approx(p.alpha * 0.3 * (1.0 - p.tau1 * 0.04) + (-0.2) * (1.0 - p.tau2 * 0.3)));
    CHECK(out[1] == doctest::Approx(p.beta * -0.2 * (1.0 + p.alpha * p.tau1 / p.beta * 0.3 * -0.2) +
                                    0.3 * (p.gamma + p.tau2 * -0.2)));
  }
  SUBCASE("blow-up raises a divergence error with the step") {
    SimulationOptions opts;
    opts.order = 1;
    opts.dt = 0.5;
    opts.steps = 400;
    const Field<double> big = random_smooth_field(*mesh, 3, 50.0);
    try {
      simulate_turing(mesh, {}, {big, big}, opts);
      FAIL("expected a divergence error");
    } catch (const DivergenceError& e) {
      CHECK(e.step() >= 1);
      CHECK(e.step() <= 400);
    }
  }
}

TEST_CASE("Ginzburg-Landau") {
  SUBCASE("closed-form constant mode agrees with an ODE integration") {
    for (double beta : {0.0, 1.5, -0.7}) {
      const Complex exact = cgl_constant_solution(0.2, beta, 3.0);
      CHECK(std::abs(exact - rk4(Complex(0.2), beta, 3.0, 6000)) < 1e-10);
    }
    CHECK(std::abs(std::abs(cgl_constant_solution(0.2, 1.5, 20.0)) - 1.0) < 1e-12);
  }
  SUBCASE("constant initial data follows the ODE") {
    const auto mesh = fixtures::share(generate_cubed_sphere(0, 5));
    const Field<Complex> u0 = sample_field<Complex>(*mesh, [](const Vec3&) { return Complex(0.3); });
    SimulationOptions opts;
    opts.order = 4;
    opts.dt = 1.0 / 64.0;
    opts.steps = 64;
    const auto res = simulate_cgl(mesh, 0.0, 1.5, 1e-2, u0, opts);
    const Complex want = cgl_constant_solution(0.3, 1.5, 1.0);
    for (const auto& v : res.final_state[0]) CHECK((v.array() - want).abs().maxCoeff() < 1e-6);
  }
  SUBCASE("small data grows at unit rate") {
    const auto mesh = fixtures::share(generate_cubed_sphere(1, 5));
    const Field<double> noise = random_smooth_field(*mesh, 11, 1e-6);
    Field<Complex> u0(noise.size());
    for (std::size_t e = 0; e < noise.size(); ++e) u0[e] = (noise[e].array() + 1e-6).cast<Complex>();
    SimulationOptions opts;
    opts.order = 2;
    opts.dt = 0.01;
    opts.steps = 50;
    const auto res = simulate_cgl(mesh, 0.0, 1.5, 1e-2, u0, opts);
    const auto geom = compute_geometry(*mesh);
    const double rate = std::log(std::abs(integrate(geom, res.final_state[0])) / std::abs(integrate(geom, u0))) / 0.5;
    CHECK(std::abs(rate - 1.0) <= 0.05);
  }
}

TEST_CASE("surface calculus") {
  const auto mesh = fixtures::share(generate_cubed_sphere(0, 16));
  const auto geom = compute_geometry(*mesh);
  SUBCASE("gradient of constants vanishes") {
    const TangentField g = surface_gradient(geom, fixtures::sample(*mesh, [](const Vec3&) { return 3.0; }));
    for (const auto& v : g) CHECK(v.cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("gradient of z on the unit sphere") {
    const TangentField g = surface_gradient(geom, fixtures::sample(*mesh, [](const Vec3& x) { return x(2); }));
    for (std::size_t e = 0; e < g.size(); ++e)
      for (Index k = 0; k < g[e].rows(); ++k) {
        const Vec3 n = geom[e].metric.normal.row(k);
        CHECK((g[e].row(k).transpose() - (Vec3::UnitZ() - n(2) * n)).norm() < 1e-8);
      }
  }
  SUBCASE("divergence of the gradient is the Laplace-Beltrami operator") {
    const Field<double> u = fixtures::sample(*mesh, fixtures::smooth_load);
    const Field<double> lap = surface_divergence(geom, surface_gradient(geom, u));
    for (std::size_t e = 0; e < u.size(); ++e) {
      const VectorXd want = assemble_operator(mesh->elements[e], CoefficientField<double>::laplace_beltrami()) * u[e];
      CHECK((lap[e] - want).cwiseAbs().maxCoeff() <= 1e-10 * want.cwiseAbs().maxCoeff());
    }
  }
  SUBCASE("integration and mean projection") {
    CHECK(integrate(geom, fixtures::sample(*mesh, [](const Vec3&) { return 1.0; })) ==
          doctest::Approx(4.0 * std::numbers::pi).epsilon(1e-12));
    const Field<double> f = project_mean_zero(geom, fixtures::sample(*mesh, fixtures::smooth_load));
    CHECK(std::abs(integrate(geom, f)) < 1e-12);
  }
  SUBCASE("spherical harmonics are orthonormal") {
    const auto fine = generate_cubed_sphere(1, 16);
    const auto fgeom = compute_geometry(fine);
    std::vector<Field<double>> ys;
    for (int l = 0; l <= 4; ++l)
      for (int m = -l; m <= l; ++m) ys.push_back(fixtures::sample(fine, [l, m](const Vec3& x) { return spherical_harmonic(l, m, x); }));
    for (std::size_t a = 0; a < ys.size(); ++a)
      for (std::size_t b = a; b < ys.size(); ++b) {
        Field<double> prod(ys[a].size());
        for (std::size_t e = 0; e < prod.size(); ++e) prod[e] = ys[a][e].cwiseProduct(ys[b][e]);
        CHECK(std::abs(integrate(fgeom, prod) - (a == b ? 1.0 : 0.0)) < 1e-10);
      }
  }
}

TEST_CASE("Laplace-Beltrami front end") {
  const auto mesh = fixtures::share(generate_cubed_sphere(2, 10));
  LaplaceBeltramiSolver solver(mesh);
  SUBCASE("zero and constant loads give zero") {
    for (double c : {0.0, 2.5}) {
      const auto sol = solver.solve(fixtures::sample(*mesh, [c](const Vec3&) { return c; }));
      CHECK(field_max(sol.values) < 1e-12);
    }
  }
  SUBCASE("harmonic solution is mean zero") {
    const auto y = [](const Vec3& x) { return spherical_harmonic(4, 2, x); };
    const auto sol = solver.solve(fixtures::sample(*mesh, [&](const Vec3& x) { return -20.0 * y(x); }));
    CHECK(std::abs(integrate(solver.geometry(), sol.values)) < 1e-12);
    CHECK(oracle::relative_difference(sol.values, fixtures::sample(*mesh, y)) < 1e-7);
  }
  SUBCASE("open meshes need boundary data") {
    CHECK_THROWS_AS(solve_laplace_beltrami(generate_flat(2, 2, 4), fixtures::sample(generate_flat(2, 2, 4), fixtures::smooth_load)),
                    InvalidArgument);
  }
}

TEST_CASE("Hodge decomposition") {
  SUBCASE("pure gradient and pure rotated gradient") {
    const auto mesh = fixtures::share(generate_cubed_sphere(1, 16));
    LaplaceBeltramiSolver solver(mesh);
    const auto& geom = solver.geometry();
    const Field<double> s = fixtures::sample(*mesh, [](const Vec3& x) { return std::sin(x(0) + 2.0 * x(1)) * x(2); });
    const TangentField grad = surface_gradient(geom, s);
    const double norm = l2_norm(geom, grad);
    const HodgeResult a = hodge_decompose(solver, grad);
    CHECK(l2_norm(geom, a.v) <= 1e-8 * norm);
    CHECK(l2_norm(geom, a.w) <= 1e-8 * norm);
    const HodgeResult b = hodge_decompose(solver, cross_normal(geom, grad));
    CHECK(l2_norm(geom, b.u) <= 1e-8 * norm);
    CHECK(l2_norm(geom, b.w) <= 1e-8 * norm);
  }
  SUBCASE("torus: residuals and idempotence") {
    const auto mesh = fixtures::share(generate_torus(2.0, 0.7, 16, 8, 12, deformed_profile(0.7)));
    LaplaceBeltramiSolver solver(mesh);
    const auto& geom = solver.geometry();
    const TangentField F = random_tangent_field(*mesh, geom, 42);
    const double norm = l2_norm(geom, F);
    const HodgeResult h = hodge_decompose(solver, F);
    CHECK(l2_norm(geom, surface_divergence(geom, h.w)) <= 1e-5 * norm);
    CHECK(l2_norm(geom, surface_divergence(geom, cross_normal(geom, h.w))) <= 1e-5 * norm);
    // The genus-one surface carries a nonzero harmonic part.
    CHECK(l2_norm(geom, h.w) > 1e-3 * norm);
    const TangentField rebuilt =
        combine(combine(surface_gradient(geom, h.u), cross_normal(geom, surface_gradient(geom, h.v))), h.w);
    const HodgeResult again = hodge_decompose(solver, project_tangent(geom, rebuilt));
    CHECK(oracle::relative_difference(again.u, h.u, true) < 1e-8);
    CHECK(oracle::relative_difference(again.v, h.v, true) < 1e-8);
    CHECK(l2_norm(geom, combine(again.w, h.w, -1.0)) <= 1e-8 * l2_norm(geom, h.w));
  }
  SUBCASE("normal components are rejected") {
    const auto mesh = fixtures::share(generate_cubed_sphere(0, 6));
    LaplaceBeltramiSolver solver(mesh);
    TangentField F(mesh->elements.size());
    for (std::size_t e = 0; e < F.size(); ++e) F[e] = solver.geometry()[e].metric.normal;
    CHECK_THROWS_AS(hodge_decompose(solver, F), TangencyError);
  }
}

TEST_CASE("convergence helpers") {
  SUBCASE("fitted order of exact power data") {
    const std::vector<double> h{0.5, 0.25, 0.125, 0.0625};
    std::vector<double> err;
    for (double x : h) err.push_back(3.0 * std::pow(x, 5));
    CHECK(fit_order(h, err) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK_THROWS_AS(fit_order({0.5}, {0.1}), InvalidArgument);
  }
  SUBCASE("patch locator and self convergence") {
    const auto coarse = fixtures::share(generate_cubed_sphere(1, 6));
    const auto fine = fixtures::share(generate_cubed_sphere(2, 6));
    const PatchLocator loc(*fine);
    const auto& par = fine->elements[5].param;
    const auto [e, xi, eta] = loc.locate(par.patch, 0.75 * par.u0 + 0.25 * par.u1, 0.5 * (par.v0 + par.v1));
    CHECK(e == 5);
    CHECK(std::abs(xi + 0.5) < 1e-12);
    CHECK(std::abs(eta) < 1e-12);
    // A shared corner may resolve to any element that contains it.
    const auto [ec, xc, yc] = loc.locate(par.patch, par.u0, par.v1);
    const auto& pc = fine->elements[static_cast<std::size_t>(ec)].param;
    CHECK(pc.patch == par.patch);
    CHECK(std::abs(pc.u0 + 0.5 * (xc + 1.0) * (pc.u1 - pc.u0) - par.u0) < 1e-12);
    CHECK(std::abs(pc.v0 + 0.5 * (yc + 1.0) * (pc.v1 - pc.v0) - par.v1) < 1e-12);
    CHECK_THROWS_AS(loc.locate(99, 0.0, 0.0), InvalidArgument);
    const auto fn = [](const Vec3& x) { return x(0) + 2.0 * x(1) * x(2); };
    Solution<double> a{coarse, fixtures::sample(*coarse, fn), {}};
    Solution<double> b{fine, fixtures::sample(*fine, fn), {}};
    CHECK(self_convergence_error(a, b) < 1e-6);
    CHECK(mean_mesh_size(*coarse) == doctest::Approx(std::sqrt(4.0 * std::numbers::pi / 24.0)).epsilon(1e-8));
  }
}
