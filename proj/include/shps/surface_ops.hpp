#pragma once

#include <array>
#include <functional>

#include "shps/mesh.hpp"
#include "shps/types.hpp"

namespace shps {

/// Per-node metric quantities of one element, all in the element's linear ordering.
struct MetricData {
  Eigen::MatrixX3d x_u, x_v;         ///< ∂x/∂ξ, ∂x/∂η
  Eigen::VectorXd g_uu, g_uv, g_vv;  ///< metric tensor
  Eigen::VectorXd det_g;
  Eigen::VectorXd inv_uu, inv_uv, inv_vv;  ///< inverse metric
  Eigen::MatrixX3d xi_x, eta_x;            ///< surface gradients of ξ and η
  Eigen::MatrixX3d normal;                 ///< unit x_u × x_v
};

/// Tangential derivative matrices D_x, D_y, D_z and, when requested, the
/// outward binormal flux operator on the corner-free boundary grid.
struct SurfaceDiffOps {
  std::array<Eigen::MatrixXd, 3> D;
  Eigen::MatrixXd D_binormal;  ///< n_b × (p+1)²; empty unless built
  Eigen::MatrixX3d xi_x, eta_x;  ///< metric factors D_x, D_y, D_z were built from
};

/// Cartesian-component coefficients of
///   L u = Σ_{i≤j} a_ij D_i D_j u + Σ_i b_i D_i u + c u.
/// An empty callback means the coefficient is identically zero.
template <typename Scalar>
struct CoefficientField {
  using Fn = std::function<Scalar(const Vec3&)>;
  std::array<Fn, 6> a;  ///< a11, a22, a33, a12, a23, a13
  std::array<Fn, 3> b;
  Fn c;

  static CoefficientField laplace_beltrami() {
    CoefficientField f;
    for (int k = 0; k < 3; ++k) f.a[k] = [](const Vec3&) { return Scalar(1); };
    return f;
  }
};

/// Index pairs (i, j) of a_k in CoefficientField::a.
inline constexpr std::array<std::array<int, 2>, 6> kSecondOrderPairs{{{0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}, {0, 2}}};

/// Throws DegenerateElementError when det g ≤ 1e-13 × median(det g).
MetricData compute_metric(const Element& element);

SurfaceDiffOps surface_diff_matrices(const Element& element);
SurfaceDiffOps surface_diff_matrices(const Element& element, const MetricData& metric);

/// Outward binormal flux rows reinterpolated to the corner-free boundary grid.
Eigen::MatrixXd binormal_operator(const Element& element);
Eigen::MatrixXd binormal_operator(const Element& element, const MetricData& metric);

/// Samples every coefficient at the element nodes. Throws CoefficientError on
/// non-finite values. Zero callbacks give empty vectors.
template <typename Scalar>
struct SampledCoefficients {
  std::array<Vec<Scalar>, 6> a;
  std::array<Vec<Scalar>, 3> b;
  Vec<Scalar> c;
};

template <typename Scalar>
SampledCoefficients<Scalar> sample_coefficients(const Element& element, const CoefficientField<Scalar>& coeff);

template <typename Scalar>
Mat<Scalar> assemble_operator(const Element& element, const CoefficientField<Scalar>& coeff);

template <typename Scalar>
Mat<Scalar> assemble_operator(const Element& element, const SurfaceDiffOps& ops,
                              const SampledCoefficients<Scalar>& coeff);

/// Quadrature weights (tensor Clenshaw–Curtis × √det g) at the element nodes.
Eigen::VectorXd element_weights(const Element& element);
Eigen::VectorXd element_weights(const Element& element, const MetricData& metric);

}  // namespace shps
