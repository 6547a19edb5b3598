#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string_view>

#include "shps/hierarchy.hpp"

namespace shps {

/// FNV-1a hash of the mesh order, node coordinates and connectivity.
std::uint64_t mesh_fingerprint(const SurfaceMesh& mesh);

/// FNV-1a hash of arbitrary text, for operator descriptions.
std::uint64_t text_fingerprint(std::string_view text, std::uint64_t seed = 14695981039346656037ull);

/// Binary cache: "SHPS" magic, format version, scalar kind, fingerprint, then
/// the merge tree and every leaf and merge node's matrix blocks as
/// little-endian values. `fingerprint` should combine the mesh and operator.
template <typename Scalar>
void save_factorization(const Factorization<Scalar>& fact, const std::filesystem::path& path,
                        std::uint64_t fingerprint);

/// Throws CacheError when the file is missing parts, was written for another
/// scalar type or format version, or its fingerprint differs.
template <typename Scalar>
Factorization<Scalar> load_factorization(const std::filesystem::path& path, std::shared_ptr<const SurfaceMesh> mesh,
                                         std::uint64_t fingerprint);

}  // namespace shps
