#include "shps/linalg.hpp"

#include <cmath>
#include <limits>

namespace shps {

template <typename Scalar>
LuFactor<Scalar>::LuFactor(const Mat<Scalar>& a) {
  const Index n = a.rows();
  if (n == 0) return;
  Eigen::PartialPivLU<Mat<Scalar>> plu(a);
  lu_ = plu.matrixLU();
  perm_.assign(static_cast<std::size_t>(n), 0);
  const auto& idx = plu.permutationP().indices();
  for (Index i = 0; i < n; ++i) perm_[static_cast<std::size_t>(idx(i))] = static_cast<int>(i);

  const double amax = a.cwiseAbs().maxCoeff();
  const double pmin = lu_.diagonal().cwiseAbs().minCoeff();
  pivot_ratio_ = amax > 0.0 ? pmin / amax : 0.0;
  if (pmin == 0.0 || !std::isfinite(pmin)) {
    rcond_ = 0.0;
  } else {
    const double r = plu.rcond();
    rcond_ = std::isfinite(r) ? r : 0.0;
  }
}

template <typename Scalar>
LuFactor<Scalar> LuFactor<Scalar>::from_parts(Mat<Scalar> lu, std::vector<int> perm, double rcond,
                                              double pivot_ratio) {
  LuFactor f;
  f.lu_ = std::move(lu);
  f.perm_ = std::move(perm);
  f.rcond_ = rcond;
  f.pivot_ratio_ = pivot_ratio;
  return f;
}

template <typename Scalar>
template <typename Dense>
void LuFactor<Scalar>::solve_in_place(Dense& x) const {
  lu_.template triangularView<Eigen::UnitLower>().solveInPlace(x);
  lu_.template triangularView<Eigen::Upper>().solveInPlace(x);
}

template <typename Scalar>
Mat<Scalar> LuFactor<Scalar>::solve(const Mat<Scalar>& b) const {
  Mat<Scalar> x(b.rows(), b.cols());
  for (Index k = 0; k < b.rows(); ++k) x.row(k) = b.row(perm_[static_cast<std::size_t>(k)]);
  if (x.size() > 0) solve_in_place(x);
  return x;
}

template <typename Scalar>
Vec<Scalar> LuFactor<Scalar>::solve(const Vec<Scalar>& b) const {
  Vec<Scalar> x(b.size());
  for (Index k = 0; k < b.size(); ++k) x(k) = b(perm_[static_cast<std::size_t>(k)]);
  if (x.size() > 0) solve_in_place(x);
  return x;
}

template class LuFactor<double>;
template class LuFactor<Complex>;

}  // namespace shps
