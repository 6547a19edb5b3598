#pragma once

#include <complex>
#include <type_traits>

#include <Eigen/Dense>

namespace shps {

using Index = Eigen::Index;
using Vec3 = Eigen::Vector3d;
using Complex = std::complex<double>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Per-element nodal samples of a scalar field, one vector of (p+1)^2 values per element.
template <typename Scalar>
using Field = std::vector<Vec<Scalar>>;

template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};
template <typename T>
inline constexpr bool is_complex_v = is_complex<T>::value;

}  // namespace shps
