#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "shps/apps.hpp"
#include "shps/error.hpp"
#include "shps/surface_ops.hpp"

using namespace shps;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Element mapped(int p, const std::function<Vec3(double, double)>& map) { return make_element(0, p, {}, map); }

VectorXd sample(const Element& el, const std::function<double(const Vec3&)>& fn) {
  VectorXd f(el.nodes.rows());
  for (Index k = 0; k < f.size(); ++k) f(k) = fn(el.nodes.row(k).transpose());
  return f;
}

double max_abs(const VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("flat element metric") {
  const Element el = mapped(6, [](double u, double v) { return Vec3(u, v, 0.0); });
  const MetricData m = compute_metric(el);
  CHECK((m.g_uu.array() - 1.0).abs().maxCoeff() < 1e-13);
  CHECK(m.g_uv.cwiseAbs().maxCoeff() < 1e-13);
  CHECK((m.g_vv.array() - 1.0).abs().maxCoeff() < 1e-13);
  CHECK((m.det_g.array() - 1.0).abs().maxCoeff() < 1e-13);
  for (Index k = 0; k < m.xi_x.rows(); ++k) {
    CHECK((m.xi_x.row(k) - Eigen::RowVector3d(1, 0, 0)).norm() < 1e-13);
    CHECK((m.eta_x.row(k) - Eigen::RowVector3d(0, 1, 0)).norm() < 1e-13);
    CHECK((m.normal.row(k) - Eigen::RowVector3d(0, 0, 1)).norm() < 1e-13);
  }
}

TEST_CASE("scaled flat element metric") {
  const Element el = mapped(5, [](double u, double v) { return Vec3(2.0 * u, 2.0 * v, 0.0); });
  const MetricData m = compute_metric(el);
  CHECK((m.g_uu.array() - 4.0).abs().maxCoeff() < 1e-12);
  CHECK((m.g_vv.array() - 4.0).abs().maxCoeff() < 1e-12);
  CHECK(m.g_uv.cwiseAbs().maxCoeff() < 1e-12);
  for (Index k = 0; k < m.xi_x.rows(); ++k) CHECK((m.xi_x.row(k) - Eigen::RowVector3d(0.5, 0, 0)).norm() < 1e-13);
}

TEST_CASE("metric identities on curved elements") {
  const SurfaceMesh mesh = generate_torus(2.0, 0.7, 4, 4, 10, deformed_profile(0.7));
  for (const auto& el : mesh.elements) {
    const MetricData m = compute_metric(el);
    CHECK(m.det_g.minCoeff() > 0.0);
    CHECK(m.g_uu.minCoeff() > 0.0);
    for (Index k = 0; k < m.det_g.size(); ++k) {
      const Vec3 xu = m.x_u.row(k), xv = m.x_v.row(k), a = m.xi_x.row(k), b = m.eta_x.row(k), n = m.normal.row(k);
      const double scale = std::max(xu.norm(), xv.norm());
      CHECK(std::abs(a.dot(xu) - 1.0) < 1e-10);
      CHECK(std::abs(a.dot(xv)) < 1e-10);
      CHECK(std::abs(b.dot(xv) - 1.0) < 1e-10);
      CHECK(std::abs(b.dot(xu)) < 1e-10);
      CHECK(std::abs(n.norm() - 1.0) < 1e-13);
      CHECK(std::abs(n.dot(xu)) < 1e-12 * scale);
      CHECK(std::abs(n.dot(xv)) < 1e-12 * scale);
    }
  }
}

TEST_CASE("cubed sphere metric matches the projection Jacobian") {
  const int p = 16;
  const SurfaceMesh mesh = generate_cubed_sphere(2, p);
  const auto& ref = reference_element(p);
  const double q = std::numbers::pi / 4.0;
  for (const auto& el : mesh.elements) {
    const MetricData m = compute_metric(el);
    const PatchParam& pp = el.param;
    // Patch coordinates map to angles q·s, and ξ ↦ s has slope (s1 - s0)/2.
    const double su = 0.5 * (pp.u1 - pp.u0), sv = 0.5 * (pp.v1 - pp.v0);
    for (int j = 0; j <= p; ++j)
      for (int i = 0; i <= p; ++i) {
        const double u = std::tan(q * (pp.u0 + su * (ref.grid.nodes(j) + 1.0)));
        const double v = std::tan(q * (pp.v0 + sv * (ref.grid.nodes(i) + 1.0)));
        const double root = q * su * (1 + u * u) * q * sv * (1 + v * v);
        const double want = root * root / std::pow(1 + u * u + v * v, 3);
        CHECK(std::abs(m.det_g(tensor_index(p, i, j)) - want) <= 1e-12 * want);
      }
  }
}

TEST_CASE("surface derivatives") {
  SUBCASE("flat element coordinates") {
    const Element el = mapped(5, [](double u, double v) { return Vec3(0.5 * u + 0.1 * v, 0.7 * v, 0.0); });
    const SurfaceDiffOps ops = surface_diff_matrices(el);
    const VectorXd x = el.nodes.col(0);
    CHECK(max_abs(ops.D[0] * x - VectorXd::Ones(x.size())) < 1e-12);
    CHECK(max_abs(ops.D[1] * x) < 1e-12);
    CHECK(max_abs(ops.D[2] * x) < 1e-12);
  }
  SUBCASE("constants are annihilated") {
    const SurfaceMesh mesh = generate_blob(0, 9);
    for (const auto& el : mesh.elements) {
      const SurfaceDiffOps ops = surface_diff_matrices(el);
      const VectorXd one = VectorXd::Ones(el.nodes.rows());
      for (int c = 0; c < 3; ++c) CHECK(max_abs(ops.D[c] * one) <= 1e-10 * ops.D[c].cwiseAbs().maxCoeff());
      CHECK(max_abs(binormal_operator(el) * one) <= 1e-10 * ops.D[0].cwiseAbs().maxCoeff());
    }
  }
  SUBCASE("tangential gradient of z on the unit sphere") {
    const SurfaceMesh mesh = generate_cubed_sphere(0, 16);
    for (const auto& el : mesh.elements) {
      const SurfaceDiffOps ops = surface_diff_matrices(el);
      const VectorXd z = el.nodes.col(2);
      CHECK(max_abs(ops.D[2] * z - (1.0 - z.array().square()).matrix()) < 1e-8);
    }
  }
  SUBCASE("trace of the tangential projector") {
    const SurfaceMesh mesh = generate_torus(2.0, 0.7, 4, 4, 12, deformed_profile(0.7));
    for (const auto& el : mesh.elements) {
      const SurfaceDiffOps ops = surface_diff_matrices(el);
      const VectorXd trace = ops.D[0] * el.nodes.col(0) + ops.D[1] * el.nodes.col(1) + ops.D[2] * el.nodes.col(2);
      CHECK(max_abs(trace.array() - 2.0) < 1e-6);
    }
  }
}

TEST_CASE("operator assembly") {
  SUBCASE("reaction-only operator is the identity") {
    const Element el = generate_cubed_sphere(0, 6).elements[2];
    CoefficientField<double> cf;
    cf.c = [](const Vec3&) { return 1.0; };
    const MatrixXd L = assemble_operator(el, cf);
    CHECK((L - MatrixXd::Identity(L.rows(), L.cols())).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("Laplace-Beltrami equals the sum of squared derivatives") {
    const Element el = generate_blob(0, 7).elements[4];
    const SurfaceDiffOps ops = surface_diff_matrices(el);
    const MatrixXd L = assemble_operator(el, CoefficientField<double>::laplace_beltrami());
    const MatrixXd want = ops.D[0] * ops.D[0] + ops.D[1] * ops.D[1] + ops.D[2] * ops.D[2];
    CHECK((L - want).cwiseAbs().maxCoeff() <= 1e-12 * want.cwiseAbs().maxCoeff());
  }
  SUBCASE("flat Laplacian") {
    const Element el = mapped(6, [](double u, double v) { return Vec3(u + 0.2 * v, 0.8 * v - 0.1 * u, 0.0); });
    const MatrixXd L = assemble_operator(el, CoefficientField<double>::laplace_beltrami());
    const VectorXd f = sample(el, [](const Vec3& x) { return x(0) * x(0) + x(1) * x(1); });
    CHECK(max_abs(L * f - VectorXd::Constant(f.size(), 4.0)) < 1e-10);
  }
  SUBCASE("spherical harmonic eigenfunction") {
    const SurfaceMesh mesh = generate_cubed_sphere(1, 16);
    for (const auto& el : mesh.elements) {
      const MatrixXd L = assemble_operator(el, CoefficientField<double>::laplace_beltrami());
      const VectorXd y = sample(el, [](const Vec3& x) { return spherical_harmonic(4, 2, x); });
      CHECK(max_abs(L * y + 20.0 * y) < 1e-7);
    }
  }
  SUBCASE("complex coefficients promote real ones") {
    const Element el = generate_cubed_sphere(0, 5).elements[1];
    const auto cr = CoefficientField<double>::laplace_beltrami();
    const auto cc = CoefficientField<Complex>::laplace_beltrami();
    const Mat<Complex> Lc = assemble_operator(el, cc);
    const MatrixXd Lr = assemble_operator(el, cr);
    CHECK((Lc.real() - Lr).cwiseAbs().maxCoeff() == 0.0);
    CHECK(Lc.imag().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("binormal flux") {
  SUBCASE("flat unit element") {
    const int p = 7;
    const Element el = mapped(p, [](double u, double v) { return Vec3(0.5 * (u + 1.0), 0.5 * (v + 1.0), 0.0); });
    const auto& ref = reference_element(p);
    const VectorXd flux = binormal_operator(el) * el.nodes.col(0);
    const Index n = ref.n_edge;
    // sides in S, E, N, W order
    CHECK(max_abs(flux.segment(0, n)) < 1e-12);
    CHECK(max_abs(flux.segment(n, n).array() - 1.0) < 1e-12);
    CHECK(max_abs(flux.segment(2 * n, n)) < 1e-12);
    CHECK(max_abs(flux.segment(3 * n, n).array() + 1.0) < 1e-12);
    const VectorXd yflux = binormal_operator(el) * el.nodes.col(1);
    CHECK(max_abs(yflux.segment(0, n).array() + 1.0) < 1e-12);
    CHECK(max_abs(yflux.segment(2 * n, n).array() - 1.0) < 1e-12);
  }
  SUBCASE("fluxes of a smooth function cancel across interfaces") {
    const SurfaceMesh mesh = generate_cubed_sphere(1, 12);
    const auto fn = [](const Vec3& x) { return std::sin(x(0) + 0.3 * x(1)) * std::exp(x(2)); };
    VectorXd sum = VectorXd::Zero(mesh.edge_node_count());
    double scale = 0.0;
    for (int e = 0; e < mesh.size(); ++e) {
      const auto& el = mesh.elements[e];
      const VectorXd flux = binormal_operator(el) * sample(el, fn);
      scale = std::max(scale, max_abs(flux));
      const auto ids = mesh.element_edge_ids(e);
      for (std::size_t k = 0; k < ids.size(); ++k) sum(ids[k]) += flux(static_cast<Index>(k));
    }
    CHECK(max_abs(sum) < 1e-8 * scale);
  }
}

TEST_CASE("rigid motion invariance") {
  const Element el = generate_blob(0, 8).elements[3];
  const Eigen::Matrix3d Q = Eigen::AngleAxisd(0.7, Vec3(1.0, -2.0, 0.5).normalized()).toRotationMatrix();
  Element moved = el;
  moved.nodes = (el.nodes * Q.transpose()).rowwise() + Eigen::RowVector3d(3.0, -1.0, 2.0);
  const auto fn = [](const Vec3& x) { return std::cos(x(0)) * x(1) + x(2) * x(2); };
  const VectorXd f = sample(el, fn);
  const auto lb = CoefficientField<double>::laplace_beltrami();
  const VectorXd a = assemble_operator(el, lb) * f;
  const VectorXd b = assemble_operator(moved, lb) * f;
  CHECK(max_abs(a - b) <= 1e-10 * max_abs(a));
  const VectorXd fa = binormal_operator(el) * f, fb = binormal_operator(moved) * f;
  CHECK(max_abs(fa - fb) <= 1e-10 * max_abs(fa));
}

TEST_CASE("errors") {
  SUBCASE("degenerate element") {
    const Element el = mapped(4, [](double u, double v) { return Vec3(u, 0.0, 0.0 * v); });
    CHECK_THROWS_AS(compute_metric(el), DegenerateElementError);
    const Element pinched = mapped(4, [](double u, double v) { return Vec3(u, (v + 1.0) * (u + 1.0), 0.0); });
    CHECK_THROWS_AS(compute_metric(pinched), DegenerateElementError);
  }
  SUBCASE("non-finite coefficient") {
    const Element el = generate_cubed_sphere(0, 4).elements[0];
    auto cf = CoefficientField<double>::laplace_beltrami();
    cf.c = [](const Vec3& x) { return x(2) > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 0.0; };
    CHECK_THROWS_AS(assemble_operator(el, cf), CoefficientError);
  }
}
