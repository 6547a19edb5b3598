#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "shps/leaf.hpp"
#include "shps/mesh.hpp"

namespace shps {

/// One pairwise merge. Shared and boundary nodes are global edge-node ids;
/// the *_shared / *_rest vectors are positions in each child's boundary list.
template <typename Scalar>
struct MergeNode {
  int alpha = 0, beta = 0, cluster = 0, level = 0;
  std::vector<Index> shared_ids;    ///< interface nodes in α's boundary order
  std::vector<Index> boundary_ids;  ///< α's unshared nodes, then β's
  std::vector<Index> alpha_shared, alpha_rest, beta_shared, beta_rest;
  LuFactor<Scalar> interface;  ///< of -(Σα^ss + Σβ^ss), or that minus qqᵀ at a fixed root
  Mat<Scalar> S_I;             ///< |shared| × |boundary|
  Mat<Scalar> coupling;        ///< [Σα^bs; Σβ^bs], |boundary| × |shared|
  Mat<Scalar> Sigma;           ///< merged DtN
  Vec<Scalar> v_I;
  Vec<Scalar> v_flux;
  std::optional<Eigen::VectorXd> fix_q;  ///< unit weight vector when the rank-one fix was applied
};

/// DtN data of one child cluster, as seen by its parent merge.
template <typename Scalar>
struct ClusterView {
  const std::vector<Index>* ids;
  const Mat<Scalar>* Sigma;
  const Vec<Scalar>* v_flux;
};

/// Merge policy for one pair. With `root_fix_weights` set, a numerically
/// singular interface (rcond < 1e-12) is regularized by subtracting qqᵀ;
/// otherwise any pivot below 1e-14 × max |A| raises SingularMergeError.
struct MergeOptions {
  const Eigen::VectorXd* root_fix_weights = nullptr;  ///< weights over all global edge ids
};

template <typename Scalar>
MergeNode<Scalar> merge_pair(const ClusterView<Scalar>& alpha, const ClusterView<Scalar>& beta,
                             const MergeOptions& options = {});

/// Recomputes v_I and v_flux of a merge node from fresh child particular fluxes.
template <typename Scalar>
void merge_particular(MergeNode<Scalar>& node, const Vec<Scalar>& alpha_flux, const Vec<Scalar>& beta_flux);

struct FactorOptions {
  int threads = 1;
};

/// Leaf operators plus all merge nodes, reusable across loads and boundary data.
template <typename Scalar>
struct Factorization {
  std::shared_ptr<const SurfaceMesh> mesh;
  MergeTree tree;
  std::vector<LeafOperators<Scalar>> leaves;
  std::vector<MergeNode<Scalar>> merges;  ///< same indexing as tree.merges
  std::vector<Index> root_boundary_ids;
  bool closed = false;
  bool rank_one_fix = false;
  /// Identifies the implicit operator (I - shift·L) a time stepper built this for.
  std::optional<double> implicit_shift;

  std::vector<Index> cluster_ids(int cluster) const;
  const Mat<Scalar>& cluster_sigma(int cluster) const;
  const Vec<Scalar>& cluster_flux(int cluster) const;
  /// Bytes held by stored operators (matrices and factorizations).
  std::size_t memory_bytes() const;
  int threads = 1;
};

/// Quadrature weight of every global edge node: edge Clenshaw–Curtis weights
/// on the first-kind grid times the arc-length Jacobian.
Eigen::VectorXd edge_node_weights(const SurfaceMesh& mesh);

template <typename Scalar>
Factorization<Scalar> build_factorization(std::shared_ptr<const SurfaceMesh> mesh, const CoefficientField<Scalar>& coeff,
                                          const MergeTree& tree, const FactorOptions& options = {});

template <typename Scalar>
Factorization<Scalar> build_factorization(const SurfaceMesh& mesh, const CoefficientField<Scalar>& coeff,
                                          const MergeTree& tree, const FactorOptions& options = {}) {
  return build_factorization(std::make_shared<const SurfaceMesh>(mesh), coeff, tree, options);
}

/// Replaces all particular data for a new load f (one sample vector per element).
template <typename Scalar>
void update_rhs(Factorization<Scalar>& fact, const Field<Scalar>& f);

}  // namespace shps
