#include "shps/spectral.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "shps/error.hpp"

namespace shps {

namespace {
constexpr double kPi = std::numbers::pi;
}

Grid1D cheb2_nodes(int p) {
  if (p < 1) throw InvalidArgument("cheb2_nodes: order must be >= 1, got " + std::to_string(p));
  Grid1D g{GridKind::SecondKind, p, Eigen::VectorXd(p + 1)};
  // sin form keeps the grid exactly antisymmetric about 0.
  for (int k = 0; k <= p; ++k) g.nodes(k) = std::sin(kPi * (2 * k - p) / (2.0 * p));
  return g;
}

Grid1D cheb1_nodes(int q) {
  if (q < 0) throw InvalidArgument("cheb1_nodes: degree must be >= 0, got " + std::to_string(q));
  Grid1D g{GridKind::FirstKind, q, Eigen::VectorXd(q + 1)};
  for (int k = 0; k <= q; ++k) g.nodes(k) = std::sin(kPi * (2 * k - q) / (2.0 * (q + 1)));
  return g;
}

Eigen::VectorXd barycentric_weights(const Grid1D& grid) {
  const Index n = grid.size();
  Eigen::VectorXd w(n);
  if (grid.kind == GridKind::SecondKind) {
    for (Index k = 0; k < n; ++k) w(k) = (k % 2 == 0 ? 1.0 : -1.0) * ((k == 0 || k == n - 1) ? 0.5 : 1.0);
  } else {
    // Ascending order reverses the textbook index, which only flips an overall sign.
    for (Index k = 0; k < n; ++k)
      w(k) = (k % 2 == 0 ? 1.0 : -1.0) * std::sin((2 * k + 1) * kPi / (2.0 * static_cast<double>(n)));
  }
  return w;
}

Eigen::MatrixXd diff_matrix(int p) {
  const Grid1D g = cheb2_nodes(p);
  const Eigen::VectorXd w = barycentric_weights(g);
  const Eigen::VectorXd& x = g.nodes;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(p + 1, p + 1);
  for (int i = 0; i <= p; ++i) {
    double diag = 0.0;
    for (int j = 0; j <= p; ++j) {
      if (i == j) continue;
      D(i, j) = (w(j) / w(i)) / (x(i) - x(j));
      diag -= D(i, j);
    }
    D(i, i) = diag;
  }
  return D;
}

Eigen::MatrixXd interp_matrix(const Grid1D& src, const Eigen::VectorXd& points) {
  if (src.size() < 1) throw InvalidArgument("interp_matrix: empty source grid");
  const Eigen::VectorXd w = barycentric_weights(src);
  const Eigen::VectorXd& x = src.nodes;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(points.size(), src.size());
  for (Index r = 0; r < points.size(); ++r) {
    const double t = points(r);
    Index exact = -1;
    for (Index k = 0; k < src.size(); ++k) {
      if (t == x(k)) {
        exact = k;
        break;
      }
    }
    if (exact >= 0) {
      M(r, exact) = 1.0;
      continue;
    }
    double denom = 0.0;
    for (Index k = 0; k < src.size(); ++k) {
      const double c = w(k) / (t - x(k));
      M(r, k) = c;
      denom += c;
    }
    M.row(r) /= denom;
  }
  return M;
}

Eigen::MatrixXd interp_matrix(const Grid1D& src, const Grid1D& dst) { return interp_matrix(src, dst.nodes); }

Eigen::VectorXd cc_weights(int p) {
  if (p < 1) throw InvalidArgument("cc_weights: order must be >= 1, got " + std::to_string(p));
  const int n = p;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n + 1);
  if (n == 1) {
    w << 1.0, 1.0;
    return w;
  }
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n - 1);
  auto theta = [n](int k) { return kPi * k / n; };
  if (n % 2 == 0) {
    w(0) = w(n) = 1.0 / (n * n - 1.0);
    for (int k = 1; k < n / 2; ++k)
      for (int i = 1; i < n; ++i) v(i - 1) -= 2.0 * std::cos(2.0 * k * theta(i)) / (4.0 * k * k - 1.0);
    for (int i = 1; i < n; ++i) v(i - 1) -= std::cos(n * theta(i)) / (n * n - 1.0);
  } else {
    w(0) = w(n) = 1.0 / (static_cast<double>(n) * n);
    for (int k = 1; k <= (n - 1) / 2; ++k)
      for (int i = 1; i < n; ++i) v(i - 1) -= 2.0 * std::cos(2.0 * k * theta(i)) / (4.0 * k * k - 1.0);
  }
  for (int i = 1; i < n; ++i) w(i) = 2.0 * v(i - 1) / n;
  return w;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> tensor_diff(int p) {
  const Eigen::MatrixXd D = diff_matrix(p);
  const Index m = p + 1;
  Eigen::MatrixXd Dxi = Eigen::MatrixXd::Zero(m * m, m * m);
  Eigen::MatrixXd Deta = Eigen::MatrixXd::Zero(m * m, m * m);
  // D_ξ = D ⊗ I acts on the j index; D_η = I ⊗ D acts on the i index.
  for (Index j = 0; j < m; ++j)
    for (Index jj = 0; jj < m; ++jj)
      for (Index i = 0; i < m; ++i) Dxi(j * m + i, jj * m + i) = D(j, jj);
  for (Index j = 0; j < m; ++j) Deta.block(j * m, j * m, m, m) = D;
  return {Dxi, Deta};
}

}  // namespace shps
