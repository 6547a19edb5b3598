#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "shps/reference_element.hpp"
#include "shps/types.hpp"

namespace shps {

/// Where an element sits in the parameter space of the generator patch it was
/// cut from. Used to compare solutions across refinements of one family.
struct PatchParam {
  int patch = -1;  ///< -1 when unknown (e.g. loaded from file)
  double u0 = -1.0, u1 = 1.0, v0 = -1.0, v1 = 1.0;
};

struct Element {
  int id = 0;
  int order = 0;
  Eigen::MatrixX3d nodes;  ///< (p+1)² rows, linear index j·(p+1) + i
  PatchParam param;
};

enum class Orientation { Forward, Reversed };

struct EdgeRef {
  int element = 0;
  Side side = Side::South;
  Orientation orientation = Orientation::Forward;
};

/// Two sides glued along a shared edge. Side `a` is always Forward; `b` is
/// Reversed when its parameter runs opposite to a's.
struct Interface {
  EdgeRef a;
  EdgeRef b;
};

/// Per (element, side): which interface or boundary edge it belongs to.
struct SideLink {
  bool is_interface = false;
  int index = 0;
  bool reversed = false;
};

struct SurfaceMesh {
  int order = 0;
  std::vector<Element> elements;
  std::vector<Interface> interfaces;
  std::vector<EdgeRef> boundary_edges;
  bool closed = false;
  std::vector<std::array<SideLink, 4>> links;

  int size() const { return static_cast<int>(elements.size()); }
  /// Number of corner-free edge nodes over all distinct edges.
  Index edge_node_count() const;
  /// Global edge-node ids of an element's corner-free boundary in the
  /// (south, east, north, west) ordering, each side ascending.
  std::vector<Index> element_edge_ids(int element) const;
  /// Global ids of every exterior boundary edge node, boundary-edge order.
  std::vector<Index> boundary_edge_ids() const;
};

/// Builds interfaces by pointwise node coincidence within `tol`. A
/// non-positive tol selects 1e-8 × bounding-box diagonal.
SurfaceMesh build_connectivity(std::vector<Element> elements, double tol = 0.0);

/// Element whose nodes are map(u, v) over the rectangle in `param`.
Element make_element(int id, int p, const PatchParam& param, const std::function<Vec3(double, double)>& map);

SurfaceMesh generate_cubed_sphere(int n_ref, int p);
SurfaceMesh generate_cube(int n_ref, int p);
/// Sphere with radius 1 + amplitude·h(x̂) for a fixed smooth h.
SurfaceMesh generate_blob(int n_ref, int p, double amplitude = 0.25);
/// Open rectangular sheet in the z = 0 plane split into nx × ny elements.
SurfaceMesh generate_flat(int nx, int ny, int p, double x0 = 0.0, double x1 = 1.0, double y0 = 0.0,
                          double y1 = 1.0);

/// Cross-section of a torus in a frame rotating by twist·u/(2π) around the
/// center circle. The parameter v runs over [v_offset, v_offset + 2π); the
/// cross-section point sits at polar angle angle(u, v) (v when empty).
struct TorusProfile {
  std::function<double(double u, double v)> radius;
  std::function<double(double u, double v)> angle;
  double twist = 0.0;
  double v_offset = 0.0;
};

/// Square cross-section of half-width a, one full quarter turn per revolution.
/// Each side is parametrized by arc length. Requires n_v divisible by 4 so
/// element edges follow the square's corners.
TorusProfile twisted_square_profile(double a);
/// Smooth non-axisymmetric radius variation around r.
TorusProfile deformed_profile(double r, double amplitude = 0.2);

SurfaceMesh generate_torus(double R, double r, int n_u, int n_v, int p,
                           const std::optional<TorusProfile>& profile = std::nullopt);

SurfaceMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const SurfaceMesh& mesh, const std::filesystem::path& path);

/// Binary merge hierarchy over clusters. Leaves are clusters 0..N-1; merge m
/// creates cluster N + m. Merges are stored bottom-up, children first.
struct MergePair {
  int alpha = 0;
  int beta = 0;
  int level = 0;
};

struct MergeTree {
  int num_leaves = 0;
  std::vector<MergePair> merges;
  std::vector<std::vector<int>> levels;  ///< merge indices per level T_0..T_L

  int root() const { return merges.empty() ? 0 : num_leaves + static_cast<int>(merges.size()) - 1; }
  int depth() const { return static_cast<int>(levels.size()); }
  std::vector<int> members(int cluster) const;
  /// Cluster of every element after merging level `level` (level -1: leaves).
  std::vector<int> clusters_after(int level) const;
};

/// Recursive bisection of the element adjacency graph with both halves
/// required to stay connected.
MergeTree build_merge_tree(const SurfaceMesh& mesh);

/// Surface area by tensor Clenshaw–Curtis quadrature.
double surface_area(const SurfaceMesh& mesh);

}  // namespace shps
