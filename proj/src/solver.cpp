#include "shps/solver.hpp"

#include <string>

#include "shps/error.hpp"
#include "shps/io.hpp"
#include "shps/parallel.hpp"

namespace shps {

template <typename Scalar>
Solution<Scalar> solve(const Factorization<Scalar>& fact, const Vec<Scalar>& g) {
  const SurfaceMesh& mesh = *fact.mesh;
  const Index nroot = static_cast<Index>(fact.root_boundary_ids.size());
  if (g.size() != nroot)
    throw InvalidArgument("solve: boundary data has " + std::to_string(g.size()) + " values, root boundary has " +
                          std::to_string(nroot));
  Solution<Scalar> sol;
  sol.mesh = fact.mesh;
  sol.edge_values = Vec<Scalar>::Zero(mesh.edge_node_count());
  sol.edge_values(fact.root_boundary_ids) = g;
  for (auto level = fact.tree.levels.rbegin(); level != fact.tree.levels.rend(); ++level) {
    const auto& list = *level;
    parallel_for(list.size(), fact.threads, [&](std::size_t k) {
      const auto& node = fact.merges[static_cast<std::size_t>(list[k])];
      Vec<Scalar> gs = node.v_I;
      if (!node.boundary_ids.empty()) gs.noalias() += node.S_I * Vec<Scalar>(sol.edge_values(node.boundary_ids));
      sol.edge_values(node.shared_ids) = gs;
    });
  }
  sol.values.resize(fact.leaves.size());
  parallel_for(fact.leaves.size(), fact.threads, [&](std::size_t e) {
    const auto ids = mesh.element_edge_ids(static_cast<int>(e));
    const auto& leaf = fact.leaves[e];
    sol.values[e] = leaf.S * Vec<Scalar>(sol.edge_values(ids)) + leaf.v;
  });
  return sol;
}

template <typename Scalar>
Scalar evaluate(const Solution<Scalar>& sol, int element, double xi, double eta) {
  if (element < 0 || element >= sol.mesh->size())
    throw InvalidArgument("evaluate: element " + std::to_string(element) + " out of range");
  if (!(xi >= -1.0 && xi <= 1.0 && eta >= -1.0 && eta <= 1.0))
    throw InvalidArgument("evaluate: parameters (" + std::to_string(xi) + ", " + std::to_string(eta) +
                          ") outside [-1, 1]^2");
  const auto& ref = reference_element(sol.mesh->order);
  const Eigen::MatrixXd rx = interp_matrix(ref.grid, Eigen::VectorXd::Constant(1, xi));
  const Eigen::MatrixXd re = interp_matrix(ref.grid, Eigen::VectorXd::Constant(1, eta));
  const Index m = ref.p + 1;
  const auto& u = sol.values[static_cast<std::size_t>(element)];
  Scalar value(0);
  for (Index j = 0; j < m; ++j) {
    if (rx(0, j) == 0.0) continue;
    Scalar col(0);
    for (Index i = 0; i < m; ++i) col += re(0, i) * u(j * m + i);
    value += rx(0, j) * col;
  }
  return value;
}

Eigen::MatrixX3d edge_node_points(const SurfaceMesh& mesh) {
  const auto& ref = reference_element(mesh.order);
  Eigen::MatrixX3d pts(mesh.edge_node_count(), 3);
  auto fill = [&](const EdgeRef& e, Index edge) {
    const Element& el = mesh.elements[e.element];
    Eigen::MatrixX3d X(ref.p + 1, 3);
    for (int t = 0; t <= ref.p; ++t) X.row(t) = el.nodes.row(ref.side_nodes[static_cast<int>(e.side)][t]);
    pts.middleRows(edge * ref.n_edge, ref.n_edge) = ref.to_edge * X;
  };
  for (std::size_t i = 0; i < mesh.interfaces.size(); ++i) fill(mesh.interfaces[i].a, static_cast<Index>(i));
  for (std::size_t j = 0; j < mesh.boundary_edges.size(); ++j)
    fill(mesh.boundary_edges[j], static_cast<Index>(mesh.interfaces.size() + j));
  return pts;
}

template <typename Scalar>
Vec<Scalar> sample_boundary(const Factorization<Scalar>& fact, const std::function<Scalar(const Vec3&)>& fn) {
  const Eigen::MatrixX3d pts = edge_node_points(*fact.mesh);
  Vec<Scalar> g(static_cast<Index>(fact.root_boundary_ids.size()));
  for (Index k = 0; k < g.size(); ++k) g(k) = fn(pts.row(fact.root_boundary_ids[static_cast<std::size_t>(k)]).transpose());
  return g;
}

template <typename Scalar>
Field<Scalar> sample_field(const SurfaceMesh& mesh, const std::function<Scalar(const Vec3&)>& fn) {
  Field<Scalar> out(mesh.elements.size());
  for (std::size_t e = 0; e < out.size(); ++e) {
    const auto& X = mesh.elements[e].nodes;
    out[e].resize(X.rows());
    for (Index k = 0; k < X.rows(); ++k) out[e](k) = fn(X.row(k).transpose());
  }
  return out;
}

template <typename Scalar>
double interface_continuity_error(const Solution<Scalar>& sol) {
  const SurfaceMesh& mesh = *sol.mesh;
  const auto& ref = reference_element(mesh.order);
  double scale = 0.0, diff = 0.0;
  for (const auto& u : sol.values) scale = std::max(scale, u.cwiseAbs().maxCoeff());
  for (const auto& f : mesh.interfaces) {
    const auto& ua = sol.values[static_cast<std::size_t>(f.a.element)];
    const auto& ub = sol.values[static_cast<std::size_t>(f.b.element)];
    const auto& sa = ref.side_nodes[static_cast<int>(f.a.side)];
    const auto& sb = ref.side_nodes[static_cast<int>(f.b.side)];
    const bool rev = f.b.orientation == Orientation::Reversed;
    for (int t = 1; t < ref.p; ++t) {
      const Index kb = sb[static_cast<std::size_t>(rev ? ref.p - t : t)];
      diff = std::max(diff, std::abs(ua(sa[static_cast<std::size_t>(t)]) - ub(kb)));
    }
  }
  return scale > 0.0 ? diff / scale : diff;
}

template <typename Scalar>
double flux_residual(const Factorization<Scalar>& fact, const Solution<Scalar>& sol) {
  const SurfaceMesh& mesh = *fact.mesh;
  Vec<Scalar> total = Vec<Scalar>::Zero(mesh.edge_node_count());
  double scale = 0.0;
  for (int e = 0; e < mesh.size(); ++e) {
    const auto ids = mesh.element_edge_ids(e);
    const auto& leaf = fact.leaves[static_cast<std::size_t>(e)];
    const Vec<Scalar> flux = leaf.Sigma * Vec<Scalar>(sol.edge_values(ids)) + leaf.v_flux;
    scale = std::max(scale, flux.cwiseAbs().maxCoeff());
    for (std::size_t k = 0; k < ids.size(); ++k) total(ids[k]) += flux(static_cast<Index>(k));
  }
  const Index ninterface = static_cast<Index>(mesh.interfaces.size()) * (mesh.order - 1);
  const double res = ninterface > 0 ? total.head(ninterface).cwiseAbs().maxCoeff() : 0.0;
  return scale > 0.0 ? res / scale : res;
}

template <typename Scalar>
void write_point_cloud(std::ostream& os, const SurfaceMesh& mesh, const Field<Scalar>& values) {
  for (int e = 0; e < mesh.size(); ++e) {
    os << "# element " << e << '\n';
    const auto& X = mesh.elements[static_cast<std::size_t>(e)].nodes;
    const auto& u = values[static_cast<std::size_t>(e)];
    for (Index k = 0; k < X.rows(); ++k) {
      os << format_double(X(k, 0)) << ' ' << format_double(X(k, 1)) << ' ' << format_double(X(k, 2));
      if constexpr (is_complex_v<Scalar>) {
        os << ' ' << format_double(u(k).real()) << ' ' << format_double(u(k).imag()) << '\n';
      } else {
        os << ' ' << format_double(u(k)) << '\n';
      }
    }
  }
}

template <typename Scalar>
void write_point_cloud(std::ostream& os, const Solution<Scalar>& sol) {
  write_point_cloud(os, *sol.mesh, sol.values);
}

#define SHPS_INSTANTIATE(S)                                                                            \
  template Solution<S> solve(const Factorization<S>&, const Vec<S>&);                                 \
  template S evaluate(const Solution<S>&, int, double, double);                                        \
  template Vec<S> sample_boundary(const Factorization<S>&, const std::function<S(const Vec3&)>&);      \
  template Field<S> sample_field(const SurfaceMesh&, const std::function<S(const Vec3&)>&);            \
  template double interface_continuity_error(const Solution<S>&);                                      \
  template double flux_residual(const Factorization<S>&, const Solution<S>&);                          \
  template void write_point_cloud(std::ostream&, const Solution<S>&);                                  \
  template void write_point_cloud(std::ostream&, const SurfaceMesh&, const Field<S>&);
SHPS_INSTANTIATE(double)
SHPS_INSTANTIATE(Complex)
#undef SHPS_INSTANTIATE

}  // namespace shps
