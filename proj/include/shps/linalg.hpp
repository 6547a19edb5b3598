#pragma once

#include <vector>

#include "shps/types.hpp"

namespace shps {

/// Row-pivoted LU factorization P·A = L·U kept in a form that can be
/// serialized and rebuilt without refactoring.
template <typename Scalar>
class LuFactor {
 public:
  LuFactor() = default;

  /// Factors a square matrix. Never throws on singularity; inspect
  /// rcond() and min_pivot_ratio() instead.
  explicit LuFactor(const Mat<Scalar>& a);

  /// Rebuilds from stored parts. `perm[k]` is the source row placed at row k.
  static LuFactor from_parts(Mat<Scalar> lu, std::vector<int> perm, double rcond, double pivot_ratio);

  Index size() const { return lu_.rows(); }
  bool empty() const { return lu_.size() == 0; }

  /// Reciprocal condition estimate in the 1-norm.
  double rcond() const { return rcond_; }

  /// min |U_kk| / max |A_ij|. Zero for an exactly singular matrix.
  double min_pivot_ratio() const { return pivot_ratio_; }

  Mat<Scalar> solve(const Mat<Scalar>& b) const;
  Vec<Scalar> solve(const Vec<Scalar>& b) const;

  const Mat<Scalar>& lu() const { return lu_; }
  const std::vector<int>& perm() const { return perm_; }

 private:
  template <typename Dense>
  void solve_in_place(Dense& x) const;

  Mat<Scalar> lu_;
  std::vector<int> perm_;
  double rcond_ = 0.0;
  double pivot_ratio_ = 0.0;
};

extern template class LuFactor<double>;
extern template class LuFactor<Complex>;

}  // namespace shps
