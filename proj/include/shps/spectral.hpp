#pragma once

#include <utility>

#include "shps/types.hpp"

namespace shps {

enum class GridKind { SecondKind, FirstKind };

/// Ascending Chebyshev node set on [-1, 1].
struct Grid1D {
  GridKind kind = GridKind::SecondKind;
  int order = 0;
  Eigen::VectorXd nodes;

  Index size() const { return nodes.size(); }
};

/// Chebyshev points of the second kind, -cos(kπ/p), k = 0..p. Requires p ≥ 1.
Grid1D cheb2_nodes(int p);

/// Chebyshev points of the first kind, -cos((2k+1)π/(2q+2)), k = 0..q. Requires q ≥ 0.
Grid1D cheb1_nodes(int q);

/// Barycentric weights of a Chebyshev grid (closed-form, unnormalized).
Eigen::VectorXd barycentric_weights(const Grid1D& grid);

/// Spectral differentiation matrix on cheb2_nodes(p).
Eigen::MatrixXd diff_matrix(int p);

/// Barycentric interpolation from samples on `src` to arbitrary points.
/// Rows sum to one; a point coinciding with a source node yields a unit row.
Eigen::MatrixXd interp_matrix(const Grid1D& src, const Eigen::VectorXd& points);
Eigen::MatrixXd interp_matrix(const Grid1D& src, const Grid1D& dst);

/// Clenshaw–Curtis weights on cheb2_nodes(p).
Eigen::VectorXd cc_weights(int p);

/// Tensor-product derivatives (D_ξ, D_η) on the (p+1)² grid with linear
/// index k = j·(p+1) + i, i the η index and j the ξ index.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> tensor_diff(int p);

/// Linear index of grid node (i, j) for order p.
inline Index tensor_index(int p, int i, int j) { return static_cast<Index>(j) * (p + 1) + i; }

}  // namespace shps
