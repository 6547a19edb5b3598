#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <string>

#include "shps/error.hpp"
#include "shps/mesh.hpp"

using namespace shps;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("shps_test_mesh_" + std::to_string(::getpid()) + "_" + name);
}

Element flat_element(int id, int p, double x0, double y0, double size = 1.0) {
  return make_element(id, p, {}, [&](double u, double v) {
    return Vec3(x0 + 0.5 * (u + 1.0) * size, y0 + 0.5 * (v + 1.0) * size, 0.0);
  });
}

void check_side_conservation(const SurfaceMesh& mesh) {
  CHECK(4 * mesh.size() == 2 * static_cast<int>(mesh.interfaces.size()) + static_cast<int>(mesh.boundary_edges.size()));
  CHECK(mesh.closed == mesh.boundary_edges.empty());
}

/// Unordered interface set keyed by element node centroids so it survives renumbering.
std::set<std::pair<std::string, std::string>> interface_set(const SurfaceMesh& mesh) {
  auto key = [&](const EdgeRef& r) {
    const auto& ref = reference_element(mesh.order);
    Vec3 c = Vec3::Zero();
    for (Index k : ref.side_nodes[static_cast<int>(r.side)]) c += mesh.elements[r.element].nodes.row(k).transpose();
    c /= static_cast<double>(mesh.order + 1);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.9f %.9f %.9f", c(0), c(1), c(2));
    return std::string(buf);
  };
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& in : mesh.interfaces) {
    auto a = key(in.a), b = key(in.b);
    CHECK(a == b);
    out.insert({std::min(a, b), std::max(a, b)});
  }
  return out;
}

}  // namespace

TEST_CASE("connectivity counts") {
  SUBCASE("one element") {
    const SurfaceMesh m = build_connectivity({flat_element(0, 4, 0.0, 0.0)});
    CHECK(m.interfaces.empty());
    CHECK(m.boundary_edges.size() == 4);
    CHECK_FALSE(m.closed);
  }
  SUBCASE("two flat elements") {
    const SurfaceMesh m = build_connectivity({flat_element(0, 5, -1.0, 0.0), flat_element(1, 5, 0.0, 0.0)});
    CHECK(m.interfaces.size() == 1);
    CHECK(m.boundary_edges.size() == 6);
    check_side_conservation(m);
  }
  SUBCASE("cubed sphere") {
    const SurfaceMesh m = generate_cubed_sphere(0, 6);
    CHECK(m.size() == 6);
    CHECK(m.interfaces.size() == 12);
    CHECK(m.boundary_edges.empty());
    CHECK(m.closed);
  }
}

TEST_CASE("interface nodes coincide after orientation") {
  for (const SurfaceMesh& m : {generate_cubed_sphere(1, 6), generate_cube(1, 5), generate_torus(2.0, 0.7, 4, 6, 5)}) {
    const auto& ref = reference_element(m.order);
    for (const auto& in : m.interfaces) {
      CHECK(in.a.orientation == Orientation::Forward);
      const auto& na = ref.side_nodes[static_cast<int>(in.a.side)];
      const auto& nb = ref.side_nodes[static_cast<int>(in.b.side)];
      for (int k = 0; k <= m.order; ++k) {
        const int kb = in.b.orientation == Orientation::Reversed ? m.order - k : k;
        const Vec3 xa = m.elements[in.a.element].nodes.row(na[k]);
        const Vec3 xb = m.elements[in.b.element].nodes.row(nb[kb]);
        CHECK((xa - xb).norm() < 1e-12);
      }
    }
  }
}

TEST_CASE("connectivity errors") {
  SUBCASE("ambiguous: three elements share one side") {
    std::vector<Element> els{flat_element(0, 3, 0.0, 0.0), flat_element(1, 3, 1.0, 0.0), flat_element(2, 3, 1.0, 0.0)};
    CHECK_THROWS_AS(build_connectivity(els), MeshError);
  }
  SUBCASE("nonconforming: hanging nodes") {
    std::vector<Element> els{flat_element(0, 4, 0.0, 0.0), flat_element(1, 4, 1.0, 0.5)};
    CHECK_THROWS_AS(build_connectivity(els), MeshError);
    std::vector<Element> partial{flat_element(0, 2, 0.0, 0.0), flat_element(1, 2, 1.0, 0.0, 2.0)};
    CHECK_THROWS_AS(build_connectivity(partial), MeshError);
  }
  SUBCASE("mixed orders") {
    std::vector<Element> els{flat_element(0, 3, 0.0, 0.0), flat_element(1, 4, 1.0, 0.0)};
    CHECK_THROWS_AS(build_connectivity(els), MeshError);
  }
}

TEST_CASE("generators") {
  SUBCASE("cubed sphere sizes and node norms") {
    for (int n : {0, 1, 2}) {
      const SurfaceMesh m = generate_cubed_sphere(n, 6);
      CHECK(m.size() == 6 * (1 << (2 * n)));
      CHECK(m.closed);
      check_side_conservation(m);
      for (const auto& el : m.elements) CHECK((el.nodes.rowwise().norm().array() - 1.0).abs().maxCoeff() <= 1e-14);
    }
    CHECK(std::abs(surface_area(generate_cubed_sphere(1, 16)) - 4.0 * std::numbers::pi) < 1e-10);
  }
  SUBCASE("cube") {
    const SurfaceMesh m0 = generate_cube(0, 4);
    CHECK(m0.size() == 6);
    CHECK(m0.closed);
    const SurfaceMesh m1 = generate_cube(1, 4);
    CHECK(m1.size() == 24);
    CHECK(std::abs(surface_area(m1) - 24.0) < 1e-12);
    check_side_conservation(m1);
  }
  SUBCASE("torus") {
    const SurfaceMesh m = generate_torus(2.0, 1.0, 4, 4, 8);
    CHECK(m.closed);
    CHECK(m.size() == 16);
    CHECK(m.interfaces.size() == 32);
    const double pi = std::numbers::pi;
    CHECK(std::abs(surface_area(generate_torus(2.0, 1.0, 4, 4, 16)) - 4.0 * pi * pi * 2.0) < 1e-10);
  }
  SUBCASE("constant profile reproduces the plain torus") {
    const SurfaceMesh plain = generate_torus(2.0, 0.5, 4, 6, 5);
    const SurfaceMesh prof = generate_torus(2.0, 0.5, 4, 6, 5, TorusProfile{[](double, double) { return 0.5; }, {}, 0.0, 0.0});
    REQUIRE(plain.size() == prof.size());
    for (int e = 0; e < plain.size(); ++e) CHECK((plain.elements[e].nodes - prof.elements[e].nodes).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("variants are watertight") {
    for (const SurfaceMesh& m : {generate_torus(2.0, 0.6, 8, 8, 6, twisted_square_profile(0.6)),
                                 generate_torus(2.0, 0.7, 8, 4, 6, deformed_profile(0.7)), generate_blob(1, 6)}) {
      CHECK(m.closed);
      check_side_conservation(m);
    }
  }
  SUBCASE("flat sheet") {
    const SurfaceMesh m = generate_flat(3, 2, 4);
    CHECK(m.size() == 6);
    CHECK(m.interfaces.size() == 7);
    CHECK(m.boundary_edges.size() == 10);
    CHECK(std::abs(surface_area(m) - 1.0) < 1e-13);
  }
  SUBCASE("invalid parameters") {
    CHECK_THROWS_AS(generate_cubed_sphere(-1, 4), InvalidArgument);
    CHECK_THROWS_AS(generate_cubed_sphere(0, 1), InvalidArgument);
    CHECK_THROWS_AS(generate_torus(1.0, 1.0, 4, 4, 4), InvalidArgument);
  }
}

TEST_CASE("permuted element order gives the same interface set") {
  const SurfaceMesh m = generate_cubed_sphere(1, 4);
  std::vector<Element> els = m.elements;
  std::reverse(els.begin(), els.end());
  std::rotate(els.begin(), els.begin() + 7, els.end());
  for (std::size_t e = 0; e < els.size(); ++e) els[e].id = static_cast<int>(e);
  const SurfaceMesh permuted = build_connectivity(els);
  CHECK(permuted.interfaces.size() == m.interfaces.size());
  CHECK(interface_set(permuted) == interface_set(m));
}

TEST_CASE("connectivity tolerance is scale invariant") {
  SurfaceMesh m = generate_cubed_sphere(1, 5);
  for (double s : {1e-6, 1e6}) {
    std::vector<Element> els = m.elements;
    for (auto& el : els) el.nodes *= s;
    const SurfaceMesh scaled = build_connectivity(els);
    CHECK(scaled.interfaces.size() == m.interfaces.size());
    CHECK(scaled.closed);
  }
}

TEST_CASE("mesh files") {
  SUBCASE("round trip is bit exact") {
    const SurfaceMesh m = generate_cubed_sphere(1, 8);
    const fs::path path = temp_path("sphere.mesh");
    save_mesh(m, path);
    const SurfaceMesh back = load_mesh(path);
    fs::remove(path);
    REQUIRE(back.size() == m.size());
    for (int e = 0; e < m.size(); ++e) CHECK((back.elements[e].nodes.array() == m.elements[e].nodes.array()).all());
    CHECK(back.interfaces.size() == m.interfaces.size());
  }
  SUBCASE("two flat elements reload with one interface") {
    const fs::path path = temp_path("flat.mesh");
    save_mesh(generate_flat(2, 1, 4), path);
    const SurfaceMesh back = load_mesh(path);
    fs::remove(path);
    CHECK(back.interfaces.size() == 1);
  }
  SUBCASE("short element names the element") {
    const fs::path path = temp_path("short.mesh");
    {
      std::ofstream out(path);
      out << "SHPS 1 2 2\nELEM 0\n";
      for (int k = 0; k < 9; ++k) out << k << " 0 0\n";
      out << "ELEM 1\n";
      for (int k = 0; k < 8; ++k) out << k << " 1 0\n";
    }
    try {
      load_mesh(path);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("element 1") != std::string::npos);
    }
    fs::remove(path);
  }
  SUBCASE("malformed header and missing file") {
    const fs::path path = temp_path("bad.mesh");
    {
      std::ofstream out(path);
      out << "MESH 1 2 1\n";
    }
    CHECK_THROWS_AS(load_mesh(path), ParseError);
    fs::remove(path);
    CHECK_THROWS_AS(load_mesh(temp_path("does_not_exist.mesh")), ParseError);
  }
}

TEST_CASE("merge tree") {
  auto check_tree = [](const SurfaceMesh& m, const MergeTree& t) {
    const int n = m.size();
    CHECK(t.num_leaves == n);
    CHECK(static_cast<int>(t.merges.size()) == n - 1);
    CHECK(t.depth() <= static_cast<int>(std::ceil(std::log2(std::max(n, 1)))) + 2);
    CHECK(t.members(t.root()).size() == static_cast<std::size_t>(n));
    std::vector<std::set<int>> adj(static_cast<std::size_t>(n));
    for (const auto& in : m.interfaces) {
      adj[in.a.element].insert(in.b.element);
      adj[in.b.element].insert(in.a.element);
    }
    for (const auto& mp : t.merges) {
      const auto a = t.members(mp.alpha), b = t.members(mp.beta);
      const std::set<int> sa(a.begin(), a.end());
      bool adjacent = false;
      for (int e : b) {
        CHECK(sa.count(e) == 0);
        for (int nb : adj[e]) adjacent = adjacent || sa.count(nb);
      }
      CHECK(adjacent);
    }
    for (int level = -1; level < t.depth(); ++level) {
      const std::vector<int> cl = t.clusters_after(level);
      REQUIRE(cl.size() == static_cast<std::size_t>(n));
      std::map<int, int> counts;
      for (int c : cl) ++counts[c];
      std::size_t covered = 0;
      for (const auto& [c, k] : counts) covered += t.members(c).size();
      CHECK(covered == static_cast<std::size_t>(n));
    }
  };
  SUBCASE("two elements") {
    const SurfaceMesh m = generate_flat(2, 1, 3);
    const MergeTree t = build_merge_tree(m);
    REQUIRE(t.depth() == 1);
    REQUIRE(t.levels[0].size() == 1);
    const auto& mp = t.merges[t.levels[0][0]];
    CHECK(std::min(mp.alpha, mp.beta) == 0);
    CHECK(std::max(mp.alpha, mp.beta) == 1);
  }
  SUBCASE("six-element sphere merges 6, 3, 2, 1") {
    const SurfaceMesh m = generate_cubed_sphere(0, 4);
    const MergeTree t = build_merge_tree(m);
    CHECK(t.depth() == 3);
    std::vector<std::size_t> distinct;
    for (int level = 0; level < t.depth(); ++level) {
      const auto cl = t.clusters_after(level);
      distinct.push_back(std::set<int>(cl.begin(), cl.end()).size());
    }
    CHECK(distinct == std::vector<std::size_t>{3, 2, 1});
    check_tree(m, t);
  }
  SUBCASE("larger meshes") {
    const SurfaceMesh sphere = generate_cubed_sphere(2, 3);
    const MergeTree t = build_merge_tree(sphere);
    CHECK(t.depth() <= 9);
    check_tree(sphere, t);
    for (const SurfaceMesh& m : {generate_torus(2.0, 0.6, 8, 6, 3), generate_flat(5, 3, 3), generate_cube(1, 3)})
      check_tree(m, build_merge_tree(m));
  }
  SUBCASE("deterministic") {
    const SurfaceMesh m = generate_torus(2.0, 0.6, 8, 8, 3);
    const MergeTree a = build_merge_tree(m), b = build_merge_tree(m);
    REQUIRE(a.merges.size() == b.merges.size());
    for (std::size_t k = 0; k < a.merges.size(); ++k) {
      CHECK(a.merges[k].alpha == b.merges[k].alpha);
      CHECK(a.merges[k].beta == b.merges[k].beta);
    }
  }
  SUBCASE("disconnected mesh") {
    const SurfaceMesh m = build_connectivity({flat_element(0, 3, 0.0, 0.0), flat_element(1, 3, 5.0, 0.0)});
    CHECK_THROWS_AS(build_merge_tree(m), MeshError);
  }
}
