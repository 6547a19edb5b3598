#include "shps/leaf.hpp"

#include <string>

#include "shps/error.hpp"

namespace shps {

template <typename Scalar>
LeafOperators<Scalar> factor_leaf(const Element& el, const CoefficientField<Scalar>& coeff) {
  const auto& ref = reference_element(el.order);
  const MetricData md = compute_metric(el);
  const SurfaceDiffOps ops = surface_diff_matrices(el, md);
  const Eigen::MatrixXd Db = binormal_operator(el, md);
  const Mat<Scalar> L = assemble_operator<Scalar>(el, ops, sample_coefficients(el, coeff));

  const Index n = L.rows();
  const Mat<Scalar> Lii = L(ref.interior, ref.interior);
  const Mat<Scalar> Lib = L(ref.interior, ref.boundary);

  LeafOperators<Scalar> out;
  out.element = el.id;
  out.interior = LuFactor<Scalar>(Lii);
  if (!(out.interior.min_pivot_ratio() >= 1e-14))
    throw SingularLeafError("singular local operator on element " + std::to_string(el.id) +
                            " (pivot ratio " + std::to_string(out.interior.min_pivot_ratio()) +
                            "); the local problem is resonant, perturb c");

  const Mat<Scalar> P = ref.P.template cast<Scalar>();
  out.S = Mat<Scalar>::Zero(n, ref.n_b);
  out.S(ref.boundary, Eigen::all) = P;
  out.S(ref.interior, Eigen::all) = -out.interior.solve(Mat<Scalar>(Lib * P));
  out.Sigma = Db.template cast<Scalar>() * out.S;
  out.flux_interior = Db(Eigen::all, ref.interior);
  out.v = Vec<Scalar>::Zero(n);
  out.v_flux = Vec<Scalar>::Zero(ref.n_b);
  return out;
}

template <typename Scalar>
ParticularData<Scalar> leaf_particular(const LeafOperators<Scalar>& ops, const Vec<Scalar>& f) {
  const Index n = ops.S.rows();
  if (f.size() != n)
    throw InvalidArgument("leaf_particular: load has " + std::to_string(f.size()) + " samples, expected " +
                          std::to_string(n));
  int p = 1;
  while ((p + 1) * (p + 1) < n) ++p;
  const auto& ref = reference_element(p);
  ParticularData<Scalar> out;
  out.v = Vec<Scalar>::Zero(n);
  const Vec<Scalar> vi = ops.interior.solve(Vec<Scalar>(f(ref.interior)));
  out.v(ref.interior) = vi;
  out.v_flux = ops.flux_interior.template cast<Scalar>() * vi;
  return out;
}

template LeafOperators<double> factor_leaf(const Element&, const CoefficientField<double>&);
template LeafOperators<Complex> factor_leaf(const Element&, const CoefficientField<Complex>&);
template ParticularData<double> leaf_particular(const LeafOperators<double>&, const Vec<double>&);
template ParticularData<Complex> leaf_particular(const LeafOperators<Complex>&, const Vec<Complex>&);

}  // namespace shps
