#pragma once

#include <functional>
#include <memory>
#include <ostream>

#include "shps/hierarchy.hpp"

namespace shps {

template <typename Scalar>
struct Solution {
  std::shared_ptr<const SurfaceMesh> mesh;
  Field<Scalar> values;     ///< per element, (p+1)² nodal values
  Vec<Scalar> edge_values;  ///< values at every global corner-free edge node
};

/// Downward pass. `g` holds Dirichlet data at the root boundary nodes in
/// Factorization::root_boundary_ids order (empty for closed surfaces).
template <typename Scalar>
Solution<Scalar> solve(const Factorization<Scalar>& fact, const Vec<Scalar>& g);

/// Barycentric evaluation inside one element at (ξ, η) ∈ [-1, 1]².
template <typename Scalar>
Scalar evaluate(const Solution<Scalar>& sol, int element, double xi, double eta);

/// Coordinates of every global edge node (row = id).
Eigen::MatrixX3d edge_node_points(const SurfaceMesh& mesh);

/// Samples a function at the root boundary nodes of a factorization.
template <typename Scalar>
Vec<Scalar> sample_boundary(const Factorization<Scalar>& fact, const std::function<Scalar(const Vec3&)>& fn);

/// Samples a function at every element node.
template <typename Scalar>
Field<Scalar> sample_field(const SurfaceMesh& mesh, const std::function<Scalar(const Vec3&)>& fn);

/// Largest disagreement between the two elements at shared non-corner
/// interface nodes, relative to the solution's max norm.
template <typename Scalar>
double interface_continuity_error(const Solution<Scalar>& sol);

/// Largest outward-flux imbalance over interface edge nodes, relative to the
/// largest flux magnitude.
template <typename Scalar>
double flux_residual(const Factorization<Scalar>& fact, const Solution<Scalar>& sol);

/// `# element <id>` blocks of `x y z value` (real) or `x y z re im` (complex).
template <typename Scalar>
void write_point_cloud(std::ostream& os, const Solution<Scalar>& sol);
template <typename Scalar>
void write_point_cloud(std::ostream& os, const SurfaceMesh& mesh, const Field<Scalar>& values);

}  // namespace shps
