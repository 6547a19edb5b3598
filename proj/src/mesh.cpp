#include "shps/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <unordered_map>

#include "shps/error.hpp"
#include "shps/io.hpp"
#include "shps/surface_ops.hpp"

namespace shps {

namespace {

constexpr double kPi = std::numbers::pi;

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) + 0x94D049BB133111EBULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

Vec3 side_point(const Element& e, int side, int t) {
  const auto& ref = reference_element(e.order);
  return e.nodes.row(ref.side_nodes[side][t]).transpose();
}

}  // namespace

Index SurfaceMesh::edge_node_count() const {
  return static_cast<Index>(interfaces.size() + boundary_edges.size()) * (order - 1);
}

std::vector<Index> SurfaceMesh::element_edge_ids(int element) const {
  const Index n = order - 1;
  const Index q = order - 2;
  std::vector<Index> ids;
  ids.reserve(static_cast<std::size_t>(4 * n));
  for (int s = 0; s < 4; ++s) {
    const SideLink& link = links[element][s];
    const Index edge = link.is_interface ? link.index : static_cast<Index>(interfaces.size()) + link.index;
    const Index base = edge * n;
    for (Index k = 0; k < n; ++k) ids.push_back(base + (link.reversed ? q - k : k));
  }
  return ids;
}

std::vector<Index> SurfaceMesh::boundary_edge_ids() const {
  const Index n = order - 1;
  std::vector<Index> ids;
  for (std::size_t j = 0; j < boundary_edges.size(); ++j) {
    const Index base = static_cast<Index>(interfaces.size() + j) * n;
    for (Index k = 0; k < n; ++k) ids.push_back(base + k);
  }
  return ids;
}

SurfaceMesh build_connectivity(std::vector<Element> elements, double tol) {
  if (elements.empty()) throw MeshError("mesh has no elements");
  const int p = elements.front().order;
  reference_element(p);
  const Index nodes_per = static_cast<Index>(p + 1) * (p + 1);
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::size_t e = 0; e < elements.size(); ++e) {
    const Element& el = elements[e];
    if (el.order != p)
      throw MeshError("mixed element orders: element " + std::to_string(e) + " has order " +
                      std::to_string(el.order) + ", expected " + std::to_string(p));
    if (el.nodes.rows() != nodes_per)
      throw MeshError("element " + std::to_string(e) + " has " + std::to_string(el.nodes.rows()) +
                      " nodes, expected " + std::to_string(nodes_per));
    if (!el.nodes.allFinite()) throw MeshError("element " + std::to_string(e) + " has non-finite nodes");
    lo = lo.cwiseMin(el.nodes.colwise().minCoeff().transpose());
    hi = hi.cwiseMax(el.nodes.colwise().maxCoeff().transpose());
  }
  if (tol <= 0.0) tol = 1e-8 * (hi - lo).norm();
  if (tol <= 0.0) throw MeshError("mesh bounding box is degenerate");

  const double cell = 4.0 * tol;
  auto key_of = [&](const Vec3& x) {
    return CellKey{static_cast<std::int64_t>(std::floor(x.x() / cell)),
                   static_cast<std::int64_t>(std::floor(x.y() / cell)),
                   static_cast<std::int64_t>(std::floor(x.z() / cell))};
  };
  const int n_elem = static_cast<int>(elements.size());
  // Cells hold (element*4 + side, t) for every side node. Corners are
  // included so an interior node landing on another element's corner (a
  // hanging node) is reported as nonconforming.
  std::unordered_map<CellKey, std::vector<std::pair<int, int>>, CellHash> grid;
  for (int e = 0; e < n_elem; ++e)
    for (int s = 0; s < 4; ++s)
      for (int t = 0; t <= p; ++t) grid[key_of(side_point(elements[e], s, t))].emplace_back(4 * e + s, t);

  SurfaceMesh mesh;
  mesh.order = p;
  mesh.links.assign(elements.size(), {});
  std::vector<int> partner(static_cast<std::size_t>(4 * n_elem), -1);
  std::vector<bool> reversed(static_cast<std::size_t>(4 * n_elem), false);

  for (int e = 0; e < n_elem; ++e) {
    for (int s = 0; s < 4; ++s) {
      std::vector<int> candidates;
      for (int t = 1; t < p; ++t) {
        const Vec3 x = side_point(elements[e], s, t);
        const CellKey k = key_of(x);
        for (std::int64_t dx = -1; dx <= 1; ++dx)
          for (std::int64_t dy = -1; dy <= 1; ++dy)
            for (std::int64_t dz = -1; dz <= 1; ++dz) {
              auto it = grid.find(CellKey{k.x + dx, k.y + dy, k.z + dz});
              if (it == grid.end()) continue;
              for (const auto& [code, tt] : it->second) {
                if (code == 4 * e + s) continue;
                if ((side_point(elements[code / 4], code % 4, tt) - x).norm() <= tol) candidates.push_back(code);
              }
            }
      }
      std::sort(candidates.begin(), candidates.end());
      candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

      std::vector<std::pair<int, bool>> matches;
      for (int code : candidates) {
        const Element& other = elements[code / 4];
        bool fwd = true, rev = true;
        for (int t = 0; t <= p; ++t) {
          const Vec3 x = side_point(elements[e], s, t);
          fwd = fwd && (x - side_point(other, code % 4, t)).norm() <= tol;
          rev = rev && (x - side_point(other, code % 4, p - t)).norm() <= tol;
        }
        if (!fwd && !rev)
          throw MeshError("nonconforming mesh: element " + std::to_string(e) + " " + side_name(Side(s)) +
                          " side partially coincides with element " + std::to_string(code / 4) + " " +
                          side_name(Side(code % 4)) + " side");
        matches.emplace_back(code, !fwd);
      }
      if (matches.size() > 1)
        throw MeshError("ambiguous mesh: element " + std::to_string(e) + " " + side_name(Side(s)) +
                        " side matches " + std::to_string(matches.size()) + " other sides");
      if (matches.size() == 1) {
        const int code = matches.front().first;
        if (code / 4 == e)
          throw MeshError("element " + std::to_string(e) + " is glued to itself along its " +
                          side_name(Side(s)) + " and " + side_name(Side(code % 4)) + " sides");
        partner[4 * e + s] = code;
        reversed[4 * e + s] = matches.front().second;
      }
    }
  }

  for (int e = 0; e < n_elem; ++e) {
    for (int s = 0; s < 4; ++s) {
      const int code = 4 * e + s;
      const int other = partner[code];
      if (other < 0) {
        mesh.links[e][s] = SideLink{false, static_cast<int>(mesh.boundary_edges.size()), false};
        mesh.boundary_edges.push_back(EdgeRef{e, Side(s), Orientation::Forward});
        continue;
      }
      if (partner[other] != code)
        throw MeshError("ambiguous mesh: matching of element " + std::to_string(e) + " " +
                        side_name(Side(s)) + " side is not symmetric");
      if (other < code) continue;
      const int idx = static_cast<int>(mesh.interfaces.size());
      const bool rev = reversed[code];
      mesh.interfaces.push_back(Interface{EdgeRef{e, Side(s), Orientation::Forward},
                                          EdgeRef{other / 4, Side(other % 4),
                                                  rev ? Orientation::Reversed : Orientation::Forward}});
      mesh.links[e][s] = SideLink{true, idx, false};
      mesh.links[other / 4][other % 4] = SideLink{true, idx, rev};
    }
  }
  mesh.closed = mesh.boundary_edges.empty();
  mesh.elements = std::move(elements);
  return mesh;
}

Element make_element(int id, int p, const PatchParam& param, const std::function<Vec3(double, double)>& map) {
  const auto& ref = reference_element(p);
  Element el;
  el.id = id;
  el.order = p;
  el.param = param;
  el.nodes.resize((p + 1) * (p + 1), 3);
  for (int j = 0; j <= p; ++j) {
    const double u = param.u0 + 0.5 * (ref.grid.nodes(j) + 1.0) * (param.u1 - param.u0);
    for (int i = 0; i <= p; ++i) {
      const double v = param.v0 + 0.5 * (ref.grid.nodes(i) + 1.0) * (param.v1 - param.v0);
      el.nodes.row(tensor_index(p, i, j)) = map(u, v).transpose();
    }
  }
  return el;
}

namespace {

// Outward-oriented parameterizations of the faces of [-1, 1]³.
Vec3 cube_face(int face, double u, double v) {
  switch (face) {
    case 0: return {1.0, u, v};
    case 1: return {-1.0, v, u};
    case 2: return {v, 1.0, u};
    case 3: return {u, -1.0, v};
    case 4: return {u, v, 1.0};
    default: return {v, u, -1.0};
  }
}

// Maps each in-face cube coordinate a to tan(πa/4) so the radial projection
// gives equal angular spacing.
Vec3 equiangular(const Vec3& x) {
  Vec3 y = x;
  for (int c = 0; c < 3; ++c)
    if (std::abs(x(c)) != 1.0) y(c) = std::tan(0.25 * kPi * x(c));
  return y;
}

SurfaceMesh cube_family(int n_ref, int p, const std::function<Vec3(const Vec3&)>& warp) {
  if (n_ref < 0) throw InvalidArgument("refinement level must be >= 0");
  if (p < 2) throw InvalidArgument("element order must be >= 2");
  const int n = 1 << n_ref;
  const double h = 2.0 / n;
  std::vector<Element> elements;
  elements.reserve(static_cast<std::size_t>(6 * n * n));
  for (int face = 0; face < 6; ++face)
    for (int b = 0; b < n; ++b)
      for (int a = 0; a < n; ++a) {
        const PatchParam prm{face, -1.0 + a * h, -1.0 + (a + 1) * h, -1.0 + b * h, -1.0 + (b + 1) * h};
        elements.push_back(make_element(static_cast<int>(elements.size()), p, prm,
                                        [&](double u, double v) { return warp(cube_face(face, u, v)); }));
      }
  return build_connectivity(std::move(elements));
}

}  // namespace

SurfaceMesh generate_cubed_sphere(int n_ref, int p) {
  return cube_family(n_ref, p, [](const Vec3& x) {
    const Vec3 y = equiangular(x);
    return Vec3(y / y.norm());
  });
}

SurfaceMesh generate_cube(int n_ref, int p) {
  return cube_family(n_ref, p, [](const Vec3& x) { return x; });
}

SurfaceMesh generate_blob(int n_ref, int p, double amplitude) {
  return cube_family(n_ref, p, [amplitude](const Vec3& x) {
    const Vec3 y = equiangular(x);
    const Vec3 s = y / y.norm();
    const double h = std::sin(2.0 * s.x()) * std::cos(s.y()) + 0.6 * s.z() * s.z() * s.y() + 0.4 * s.x() * s.z();
    return Vec3((1.0 + amplitude * h) * s);
  });
}

SurfaceMesh generate_flat(int nx, int ny, int p, double x0, double x1, double y0, double y1) {
  if (nx < 1 || ny < 1) throw InvalidArgument("flat mesh needs at least one element per direction");
  if (!(x1 > x0) || !(y1 > y0)) throw InvalidArgument("flat mesh extents must be increasing");
  std::vector<Element> elements;
  const double hx = (x1 - x0) / nx, hy = (y1 - y0) / ny;
  for (int b = 0; b < ny; ++b)
    for (int a = 0; a < nx; ++a) {
      const PatchParam prm{0, x0 + a * hx, x0 + (a + 1) * hx, y0 + b * hy, y0 + (b + 1) * hy};
      elements.push_back(make_element(static_cast<int>(elements.size()), p, prm,
                                      [](double u, double v) { return Vec3(u, v, 0.0); }));
    }
  return build_connectivity(std::move(elements));
}

TorusProfile twisted_square_profile(double a) {
  // Offset from the center of the side containing v, scaled to [-1, 1].
  auto side_offset = [](double v) {
    const double c = 0.5 * kPi * std::round(v / (0.5 * kPi));
    return std::pair{c, (v - c) / (0.25 * kPi)};
  };
  return TorusProfile{[a, side_offset](double, double v) { return a * std::hypot(1.0, side_offset(v).second); },
                      [side_offset](double, double v) {
                        const auto [c, s] = side_offset(v);
                        return c + std::atan(s);
                      },
                      0.5 * kPi, 0.25 * kPi};
}

TorusProfile deformed_profile(double r, double amplitude) {
  return TorusProfile{[r, amplitude](double u, double v) {
                        return r * (1.0 + amplitude * (0.6 * std::sin(2.0 * u) + 0.5 * std::cos(3.0 * v) * std::cos(u)));
                      },
                      {}, 0.0, 0.0};
}

SurfaceMesh generate_torus(double R, double r, int n_u, int n_v, int p, const std::optional<TorusProfile>& profile) {
  if (!(R > r && r > 0.0)) throw InvalidArgument("torus radii must satisfy R > r > 0");
  if (n_u < 2 || n_v < 2) throw InvalidArgument("torus needs n_u, n_v >= 2");
  if (p < 2) throw InvalidArgument("element order must be >= 2");
  const TorusProfile prof = profile ? *profile : TorusProfile{[r](double, double) { return r; }, {}, 0.0, 0.0};
  if (!prof.radius) throw InvalidArgument("torus profile has no radius function");
  const double hu = 2.0 * kPi / n_u, hv = 2.0 * kPi / n_v;
  std::vector<Element> elements;
  for (int b = 0; b < n_v; ++b)
    for (int a = 0; a < n_u; ++a) {
      const PatchParam prm{0, a * hu, (a + 1) * hu, prof.v_offset + b * hv, prof.v_offset + (b + 1) * hv};
      elements.push_back(make_element(static_cast<int>(elements.size()), p, prm, [&](double u, double v) {
        const double rho = prof.radius(u, v);
        const double phi = (prof.angle ? prof.angle(u, v) : v) + prof.twist * u / (2.0 * kPi);
        const double ring = R + rho * std::cos(phi);
        return Vec3(ring * std::cos(u), ring * std::sin(u), rho * std::sin(phi));
      }));
    }
  return build_connectivity(std::move(elements));
}

SurfaceMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file '" + path.string() + "'");
  std::string line;
  long line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  auto fail = [&](const std::string& what) {
    throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  if (!next_line()) fail("empty file");
  std::istringstream header(line);
  std::string magic;
  int version = 0, p = 0;
  long n = 0;
  if (!(header >> magic >> version >> p >> n) || magic != "SHPS") fail("expected header 'SHPS 1 <p> <N>'");
  if (version != 1) fail("unsupported mesh format version " + std::to_string(version));
  if (p < 2) fail("element order must be >= 2");
  if (n < 1) fail("element count must be >= 1");
  const int per = (p + 1) * (p + 1);
  std::vector<Element> elements;
  elements.reserve(static_cast<std::size_t>(n));
  bool pending = next_line();
  for (long e = 0; e < n; ++e) {
    if (!pending) fail("expected ELEM " + std::to_string(e) + ", found end of file");
    std::istringstream ls(line);
    std::string tag;
    long id = -1;
    if (!(ls >> tag >> id) || tag != "ELEM") fail("expected 'ELEM <id>'");
    if (id != e) fail("element ids must be consecutive from 0; expected " + std::to_string(e));
    Element el;
    el.id = static_cast<int>(e);
    el.order = p;
    el.nodes.resize(per, 3);
    int k = 0;
    for (; k < per; ++k) {
      if (!next_line()) break;
      std::istringstream ps(line);
      std::string first;
      ps >> first;
      if (first == "ELEM") break;
      double x, y, z;
      std::istringstream cs(line);
      if (!(cs >> x >> y >> z)) fail("element " + std::to_string(e) + ": malformed coordinate line");
      std::string extra;
      if (cs >> extra) fail("element " + std::to_string(e) + ": trailing data on coordinate line");
      el.nodes.row(k) << x, y, z;
    }
    if (k < per)
      fail("element " + std::to_string(e) + " has " + std::to_string(k) + " nodes, expected " + std::to_string(per));
    elements.push_back(std::move(el));
    pending = next_line();
  }
  if (pending) fail("unexpected data after " + std::to_string(n) + " elements");
  return build_connectivity(std::move(elements));
}

void save_mesh(const SurfaceMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write mesh file '" + path.string() + "'");
  out << "SHPS 1 " << mesh.order << ' ' << mesh.size() << '\n';
  for (int e = 0; e < mesh.size(); ++e) {
    out << "ELEM " << e << '\n';
    const auto& X = mesh.elements[e].nodes;
    for (Index k = 0; k < X.rows(); ++k)
      out << format_double(X(k, 0)) << ' ' << format_double(X(k, 1)) << ' ' << format_double(X(k, 2)) << '\n';
  }
  if (!out) throw Error("failed writing mesh file '" + path.string() + "'");
}

double surface_area(const SurfaceMesh& mesh) {
  double area = 0.0;
  for (const auto& el : mesh.elements) area += element_weights(el).sum();
  return area;
}

}  // namespace shps
