#pragma once

// Shared fixtures for the test suites and the acceptance binary.

#include <cmath>
#include <functional>
#include <memory>

#include "shps/apps.hpp"

namespace fixtures {

using shps::Vec3;

inline shps::Field<double> sample(const shps::SurfaceMesh& mesh, const std::function<double(const Vec3&)>& fn) {
  return shps::sample_field<double>(mesh, fn);
}

/// Variable reaction term, negative so closed-surface problems stay nonsingular.
inline shps::CoefficientField<double> variable_c() {
  auto cf = shps::CoefficientField<double>::laplace_beltrami();
  cf.c = [](const Vec3& x) { return -1.0 - 0.5 * std::sin(x(0) + 2.0 * x(1)) * std::sin(x(0) + 2.0 * x(1)); };
  return cf;
}

/// Full smooth coefficient set: a symmetric positive definite a (diagonally
/// dominant), small first-order terms, negative c.
template <typename Scalar = double>
shps::CoefficientField<Scalar> full_smooth() {
  shps::CoefficientField<Scalar> cf;
  cf.a[0] = [](const Vec3& x) { return Scalar(1.0 + 0.3 * std::sin(x(1))); };
  cf.a[1] = [](const Vec3& x) { return Scalar(1.2 + 0.2 * std::cos(x(0) * x(2))); };
  cf.a[2] = [](const Vec3& x) { return Scalar(0.9 + 0.1 * x(0) * x(0)); };
  cf.a[3] = [](const Vec3& x) { return Scalar(0.15 * std::cos(x(2))); };
  cf.a[4] = [](const Vec3& x) { return Scalar(0.1 * std::sin(x(0) - x(1))); };
  cf.a[5] = [](const Vec3& x) { return Scalar(0.05 * x(1)); };
  cf.b[0] = [](const Vec3& x) { return Scalar(0.3 * std::cos(x(1))); };
  cf.b[1] = [](const Vec3& x) { return Scalar(-0.2 * x(2)); };
  cf.b[2] = [](const Vec3& x) { return Scalar(0.25 * std::sin(x(0))); };
  cf.c = [](const Vec3& x) { return Scalar(-2.0 - 0.5 * std::cos(x(0) + x(1) + x(2))); };
  return cf;
}

inline double smooth_load(const Vec3& x) {
  return std::exp(0.5 * x(0)) * std::sin(x(1) + 0.3) + x(2) * x(2) * x(0) + 0.2;
}

inline double smooth_boundary(const Vec3& x) { return std::cos(x(0) - 0.5 * x(1)) + 0.1 * x(2); }

/// Mesh of two unit squares sharing the edge x = 0.
inline shps::SurfaceMesh two_flat_elements(int p) { return shps::generate_flat(2, 1, p, -1.0, 1.0, 0.0, 1.0); }

inline std::shared_ptr<const shps::SurfaceMesh> share(shps::SurfaceMesh mesh) {
  return std::make_shared<const shps::SurfaceMesh>(std::move(mesh));
}

}  // namespace fixtures
