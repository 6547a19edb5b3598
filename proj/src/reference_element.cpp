#include "shps/reference_element.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "shps/error.hpp"

namespace shps {

const char* side_name(Side s) {
  switch (s) {
    case Side::South: return "south";
    case Side::East: return "east";
    case Side::North: return "north";
    case Side::West: return "west";
  }
  return "?";
}

namespace {

std::unique_ptr<ReferenceElement> build(int p) {
  auto ref = std::make_unique<ReferenceElement>();
  ReferenceElement& r = *ref;
  r.p = p;
  r.grid = cheb2_nodes(p);
  r.edge_grid = cheb1_nodes(p - 2);
  r.D = diff_matrix(p);
  std::tie(r.D_xi, r.D_eta) = tensor_diff(p);
  r.cc = cc_weights(p);
  const Index m = p + 1;
  r.cc2.resize(m * m);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < m; ++i) r.cc2(j * m + i) = r.cc(i) * r.cc(j);

  for (int t = 0; t <= p; ++t) {
    r.side_nodes[0].push_back(tensor_index(p, 0, t));
    r.side_nodes[1].push_back(tensor_index(p, t, p));
    r.side_nodes[2].push_back(tensor_index(p, p, t));
    r.side_nodes[3].push_back(tensor_index(p, t, 0));
  }
  for (int j = 1; j < p; ++j)
    for (int i = 1; i < p; ++i) r.interior.push_back(tensor_index(p, i, j));
  for (const auto& side : r.side_nodes)
    for (Index k : side)
      if (std::find(r.boundary.begin(), r.boundary.end(), k) == r.boundary.end()) r.boundary.push_back(k);

  r.n_edge = p - 1;
  r.n_b = 4 * r.n_edge;
  r.to_edge = interp_matrix(r.grid, r.edge_grid);
  r.from_edge = interp_matrix(r.edge_grid, r.grid);
  r.edge_weights = (r.cc.transpose() * r.from_edge).transpose();

  r.P = Eigen::MatrixXd::Zero(static_cast<Index>(r.boundary.size()), r.n_b);
  for (int s = 0; s < 4; ++s) {
    for (int t = 0; t <= p; ++t) {
      const Index k = r.side_nodes[s][t];
      const Index row = std::find(r.boundary.begin(), r.boundary.end(), k) - r.boundary.begin();
      const double share = (t == 0 || t == p) ? 0.5 : 1.0;
      r.P.block(row, s * r.n_edge, 1, r.n_edge) += share * r.from_edge.row(t);
    }
  }
  return ref;
}

}  // namespace

const ReferenceElement& reference_element(int p) {
  if (p < 2) throw InvalidArgument("element order must be >= 2, got " + std::to_string(p));
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<ReferenceElement>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(p);
  if (it == cache.end()) it = cache.emplace(p, build(p)).first;
  return *it->second;
}

}  // namespace shps
