#pragma once

#include <array>
#include <vector>

#include "shps/spectral.hpp"

namespace shps {

/// Element sides. South is i = 0 and North is i = p (both parameterized by ξ);
/// West is j = 0 and East is j = p (both parameterized by η).
enum class Side : int { South = 0, East = 1, North = 2, West = 3 };

inline constexpr std::array<Side, 4> kSides{Side::South, Side::East, Side::North, Side::West};

const char* side_name(Side s);

/// Order-p operators shared by every element of that order. Built once per
/// order and cached for the lifetime of the process.
struct ReferenceElement {
  int p = 0;
  Grid1D grid;              ///< cheb2_nodes(p)
  Grid1D edge_grid;         ///< cheb1_nodes(p - 2), the corner-free boundary grid of one side
  Eigen::MatrixXd D;        ///< 1D differentiation
  Eigen::MatrixXd D_xi;     ///< (p+1)² × (p+1)²
  Eigen::MatrixXd D_eta;
  Eigen::VectorXd cc;       ///< 1D Clenshaw–Curtis weights
  Eigen::VectorXd cc2;      ///< tensor-product weights on the reference square

  /// Linear indices of the p+1 nodes of each side, ascending in its parameter.
  std::array<std::vector<Index>, 4> side_nodes;
  /// Interior indices, size (p-1)².
  std::vector<Index> interior;
  /// All 4p boundary indices (each corner once).
  std::vector<Index> boundary;

  /// n_b = 4(p-1), the corner-free boundary size.
  Index n_edge = 0;
  Index n_b = 0;

  /// cheb2(p) → edge grid, (p-1) × (p+1).
  Eigen::MatrixXd to_edge;
  /// edge grid → cheb2(p) on one side, (p+1) × (p-1). Corner rows are extrapolations.
  Eigen::MatrixXd from_edge;
  /// Maps corner-free boundary data (n_b) to values at `boundary` (4p rows).
  /// Corner values average the two adjacent sides' extrapolations.
  Eigen::MatrixXd P;
  /// Quadrature weights for one side on the edge grid (sum 2).
  Eigen::VectorXd edge_weights;
};

/// Cached reference element for order p ≥ 2.
const ReferenceElement& reference_element(int p);

}  // namespace shps
