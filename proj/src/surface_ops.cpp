#include "shps/surface_ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "shps/error.hpp"

namespace shps {

namespace {

std::string node_label(const Element& el, Index k) {
  const int m = el.order + 1;
  std::ostringstream os;
  os << "element " << el.id << " node " << k << " (i=" << k % m << ", j=" << k / m << ", x=("
     << el.nodes(k, 0) << ", " << el.nodes(k, 1) << ", " << el.nodes(k, 2) << "))";
  return os.str();
}

/// D_ξ · M using the Kronecker structure D ⊗ I.
Eigen::MatrixXd apply_dxi(const ReferenceElement& ref, const Eigen::MatrixXd& M) {
  const Index m = ref.p + 1;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(M.rows(), M.cols());
  for (Index j = 0; j < m; ++j)
    for (Index jj = 0; jj < m; ++jj) out.middleRows(j * m, m) += ref.D(j, jj) * M.middleRows(jj * m, m);
  return out;
}

/// D_η · M using the block-diagonal structure I ⊗ D.
Eigen::MatrixXd apply_deta(const ReferenceElement& ref, const Eigen::MatrixXd& M) {
  const Index m = ref.p + 1;
  Eigen::MatrixXd out(M.rows(), M.cols());
  for (Index j = 0; j < m; ++j) out.middleRows(j * m, m).noalias() = ref.D * M.middleRows(j * m, m);
  return out;
}

}  // namespace

MetricData compute_metric(const Element& el) {
  const auto& ref = reference_element(el.order);
  const Index n = el.nodes.rows();
  MetricData md;
  md.x_u = apply_dxi(ref, el.nodes);
  md.x_v = apply_deta(ref, el.nodes);
  md.g_uu = md.x_u.rowwise().squaredNorm();
  md.g_vv = md.x_v.rowwise().squaredNorm();
  md.g_uv = (md.x_u.array() * md.x_v.array()).rowwise().sum();
  md.det_g = md.g_uu.array() * md.g_vv.array() - md.g_uv.array().square();

  std::vector<double> sorted(md.det_g.data(), md.det_g.data() + n);
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double median = sorted[static_cast<std::size_t>(n / 2)];
  for (Index k = 0; k < n; ++k) {
    if (!(md.det_g(k) > 1e-13 * median) || !(median > 0.0))
      throw DegenerateElementError("degenerate geometry: det g = " + std::to_string(md.det_g(k)) + " at " +
                                   node_label(el, k));
  }

  md.inv_uu = md.g_vv.array() / md.det_g.array();
  md.inv_vv = md.g_uu.array() / md.det_g.array();
  md.inv_uv = -md.g_uv.array() / md.det_g.array();
  md.xi_x.resize(n, 3);
  md.eta_x.resize(n, 3);
  md.normal.resize(n, 3);
  for (Index k = 0; k < n; ++k) {
    const Eigen::RowVector3d xu = md.x_u.row(k), xv = md.x_v.row(k);
    md.xi_x.row(k) = md.inv_uu(k) * xu + md.inv_uv(k) * xv;
    md.eta_x.row(k) = md.inv_uv(k) * xu + md.inv_vv(k) * xv;
    const Eigen::RowVector3d nrm = xu.cross(xv);
    md.normal.row(k) = nrm / nrm.norm();
  }
  return md;
}

SurfaceDiffOps surface_diff_matrices(const Element& el) { return surface_diff_matrices(el, compute_metric(el)); }

SurfaceDiffOps surface_diff_matrices(const Element& el, const MetricData& md) {
  const auto& ref = reference_element(el.order);
  SurfaceDiffOps ops;
  ops.xi_x = md.xi_x;
  ops.eta_x = md.eta_x;
  for (int c = 0; c < 3; ++c)
    ops.D[c] = md.xi_x.col(c).asDiagonal() * ref.D_xi + md.eta_x.col(c).asDiagonal() * ref.D_eta;
  return ops;
}

Eigen::MatrixXd binormal_operator(const Element& el) { return binormal_operator(el, compute_metric(el)); }

Eigen::MatrixXd binormal_operator(const Element& el, const MetricData& md) {
  const auto& ref = reference_element(el.order);
  const int p = el.order;
  const Index n = el.nodes.rows();
  Eigen::MatrixXd Db(ref.n_b, n);
  Eigen::MatrixXd rows(p + 1, n);
  for (int s = 0; s < 4; ++s) {
    const Side side = kSides[s];
    const bool along_xi = side == Side::South || side == Side::North;
    for (int t = 0; t <= p; ++t) {
      const Index k = ref.side_nodes[s][t];
      const Eigen::RowVector3d tangent = along_xi ? md.x_u.row(k) : md.x_v.row(k);
      Eigen::RowVector3d nb = tangent.cross(md.normal.row(k)).normalized();
      // Outward means increasing ξ on east, decreasing ξ on west, and likewise η on north/south.
      const Eigen::RowVector3d grad = along_xi ? md.eta_x.row(k) : md.xi_x.row(k);
      const double sign = (side == Side::East || side == Side::North) ? 1.0 : -1.0;
      if (sign * nb.dot(grad) < 0.0) nb = -nb;
      rows.row(t) = nb.dot(md.xi_x.row(k)) * ref.D_xi.row(k) + nb.dot(md.eta_x.row(k)) * ref.D_eta.row(k);
    }
    Db.middleRows(s * ref.n_edge, ref.n_edge).noalias() = ref.to_edge * rows;
  }
  return Db;
}

template <typename Scalar>
SampledCoefficients<Scalar> sample_coefficients(const Element& el, const CoefficientField<Scalar>& coeff) {
  SampledCoefficients<Scalar> out;
  const Index n = el.nodes.rows();
  auto sample = [&](const typename CoefficientField<Scalar>::Fn& fn, const char* name) {
    Vec<Scalar> v;
    if (!fn) return v;
    v.resize(n);
    for (Index k = 0; k < n; ++k) {
      const Vec3 x = el.nodes.row(k).transpose();
      v(k) = fn(x);
      if (!std::isfinite(std::abs(v(k))))
        throw CoefficientError(std::string("coefficient ") + name + " is not finite at " + node_label(el, k));
    }
    return v;
  };
  static const char* a_names[6] = {"a11", "a22", "a33", "a12", "a23", "a13"};
  static const char* b_names[3] = {"b1", "b2", "b3"};
  for (int k = 0; k < 6; ++k) out.a[k] = sample(coeff.a[k], a_names[k]);
  for (int k = 0; k < 3; ++k) out.b[k] = sample(coeff.b[k], b_names[k]);
  out.c = sample(coeff.c, "c");
  return out;
}

template <typename Scalar>
Mat<Scalar> assemble_operator(const Element& el, const CoefficientField<Scalar>& coeff) {
  const MetricData md = compute_metric(el);
  return assemble_operator<Scalar>(el, surface_diff_matrices(el, md), sample_coefficients(el, coeff));
}

template <typename Scalar>
Mat<Scalar> assemble_operator(const Element& el, const SurfaceDiffOps& ops, const SampledCoefficients<Scalar>& cf) {
  const auto& ref = reference_element(el.order);
  const Index n = el.nodes.rows();
  Mat<Scalar> L = Mat<Scalar>::Zero(n, n);
  // D_i D_j = diag(ξ_i)(D_ξ D_j) + diag(η_i)(D_η D_j); the inner products use
  // the Kronecker structure of D_ξ and D_η.
  std::array<Eigen::MatrixXd, 3> G_xi, G_eta;
  std::array<bool, 3> need{false, false, false};
  for (int k = 0; k < 6; ++k)
    if (cf.a[k].size() > 0) need[kSecondOrderPairs[k][1]] = true;
  for (int j = 0; j < 3; ++j)
    if (need[j]) {
      G_xi[j] = apply_dxi(ref, ops.D[j]);
      G_eta[j] = apply_deta(ref, ops.D[j]);
    }
  for (int k = 0; k < 6; ++k) {
    if (cf.a[k].size() == 0) continue;
    const int i = kSecondOrderPairs[k][0], j = kSecondOrderPairs[k][1];
    const Vec<Scalar> wx = cf.a[k].cwiseProduct(ops.xi_x.col(i).template cast<Scalar>());
    const Vec<Scalar> we = cf.a[k].cwiseProduct(ops.eta_x.col(i).template cast<Scalar>());
    L.noalias() += wx.asDiagonal() * G_xi[j].template cast<Scalar>();
    L.noalias() += we.asDiagonal() * G_eta[j].template cast<Scalar>();
  }
  for (int i = 0; i < 3; ++i)
    if (cf.b[i].size() > 0) L.noalias() += cf.b[i].asDiagonal() * ops.D[i].template cast<Scalar>();
  if (cf.c.size() > 0) L.diagonal() += cf.c;
  return L;
}

Eigen::VectorXd element_weights(const Element& el) { return element_weights(el, compute_metric(el)); }

Eigen::VectorXd element_weights(const Element& el, const MetricData& md) {
  const auto& ref = reference_element(el.order);
  return ref.cc2.cwiseProduct(md.det_g.cwiseSqrt());
}

#define SHPS_INSTANTIATE(S)                                                                                  \
  template SampledCoefficients<S> sample_coefficients<S>(const Element&, const CoefficientField<S>&);       \
  template Mat<S> assemble_operator<S>(const Element&, const CoefficientField<S>&);                           \
  template Mat<S> assemble_operator<S>(const Element&, const SurfaceDiffOps&, const SampledCoefficients<S>&);
SHPS_INSTANTIATE(double)
SHPS_INSTANTIATE(Complex)
#undef SHPS_INSTANTIATE

}  // namespace shps
