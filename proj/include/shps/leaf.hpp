#pragma once

#include "shps/linalg.hpp"
#include "shps/surface_ops.hpp"

namespace shps {

/// Per-element solution operator and Dirichlet-to-Neumann map on the
/// corner-free boundary grid (n_b = 4(p-1) nodes, sides S, E, N, W).
template <typename Scalar>
struct LeafOperators {
  int element = 0;
  Mat<Scalar> S;               ///< (p+1)² × n_b; boundary rows equal the reference P
  Mat<Scalar> Sigma;           ///< n_b × n_b
  LuFactor<Scalar> interior;   ///< factorization of L(J_i, J_i)
  Eigen::MatrixXd flux_interior;  ///< D_binormal restricted to interior columns
  Vec<Scalar> v;               ///< particular solution, zero on the boundary
  Vec<Scalar> v_flux;          ///< its outward flux
};

template <typename Scalar>
struct ParticularData {
  Vec<Scalar> v;
  Vec<Scalar> v_flux;
};

/// Factors one element. Throws SingularLeafError when a pivot of L(J_i, J_i)
/// falls below 1e-14 × max |L(J_i, J_i)|. Particular data is left at zero.
template <typename Scalar>
LeafOperators<Scalar> factor_leaf(const Element& element, const CoefficientField<Scalar>& coeff);

/// v(J_i) = L(J_i, J_i)⁻¹ f(J_i), v = 0 on the boundary, v_flux = D_binormal · v.
template <typename Scalar>
ParticularData<Scalar> leaf_particular(const LeafOperators<Scalar>& ops, const Vec<Scalar>& f);

extern template LeafOperators<double> factor_leaf(const Element&, const CoefficientField<double>&);
extern template LeafOperators<Complex> factor_leaf(const Element&, const CoefficientField<Complex>&);
extern template ParticularData<double> leaf_particular(const LeafOperators<double>&, const Vec<double>&);
extern template ParticularData<Complex> leaf_particular(const LeafOperators<Complex>&, const Vec<Complex>&);

}  // namespace shps
