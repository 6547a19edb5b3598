#include "shps/hierarchy.hpp"

#include <string>
#include <unordered_map>

#include "shps/error.hpp"
#include "shps/parallel.hpp"

namespace shps {

template <typename Scalar>
MergeNode<Scalar> merge_pair(const ClusterView<Scalar>& alpha, const ClusterView<Scalar>& beta,
                             const MergeOptions& options) {
  const auto& ids_a = *alpha.ids;
  const auto& ids_b = *beta.ids;
  std::unordered_map<Index, Index> pos_b;
  pos_b.reserve(ids_b.size());
  for (std::size_t k = 0; k < ids_b.size(); ++k) pos_b.emplace(ids_b[k], static_cast<Index>(k));

  MergeNode<Scalar> node;
  std::vector<char> b_shared(ids_b.size(), 0);
  for (std::size_t k = 0; k < ids_a.size(); ++k) {
    auto it = pos_b.find(ids_a[k]);
    if (it == pos_b.end()) {
      node.alpha_rest.push_back(static_cast<Index>(k));
      continue;
    }
    node.alpha_shared.push_back(static_cast<Index>(k));
    node.beta_shared.push_back(it->second);
    node.shared_ids.push_back(ids_a[k]);
    b_shared[static_cast<std::size_t>(it->second)] = 1;
  }
  for (std::size_t k = 0; k < ids_b.size(); ++k)
    if (!b_shared[k]) node.beta_rest.push_back(static_cast<Index>(k));
  if (node.shared_ids.empty()) throw MeshError("merge of clusters that share no edge nodes");
  for (Index k : node.alpha_rest) node.boundary_ids.push_back(ids_a[static_cast<std::size_t>(k)]);
  for (Index k : node.beta_rest) node.boundary_ids.push_back(ids_b[static_cast<std::size_t>(k)]);

  const Mat<Scalar>& Sa = *alpha.Sigma;
  const Mat<Scalar>& Sb = *beta.Sigma;
  const Index ns = static_cast<Index>(node.shared_ids.size());
  const Index nra = static_cast<Index>(node.alpha_rest.size());
  const Index nrb = static_cast<Index>(node.beta_rest.size());
  const Index nb = nra + nrb;

  Mat<Scalar> A = -(Sa(node.alpha_shared, node.alpha_shared) + Sb(node.beta_shared, node.beta_shared));
  Mat<Scalar> rhs(ns, nb);
  rhs.leftCols(nra) = Sa(node.alpha_shared, node.alpha_rest);
  rhs.rightCols(nrb) = Sb(node.beta_shared, node.beta_rest);
  node.coupling.resize(nb, ns);
  node.coupling.topRows(nra) = Sa(node.alpha_rest, node.alpha_shared);
  node.coupling.bottomRows(nrb) = Sb(node.beta_rest, node.beta_shared);

  node.interface = LuFactor<Scalar>(A);
  if (options.root_fix_weights && node.interface.rcond() < 1e-12) {
    Eigen::VectorXd q(ns);
    for (Index k = 0; k < ns; ++k) q(k) = (*options.root_fix_weights)(node.shared_ids[static_cast<std::size_t>(k)]);
    q /= q.norm();
    // Subtracting keeps the perturbation on the same side as the (negative
    // semidefinite) interface matrix, so nothing cancels.
    A -= (q * q.transpose()).template cast<Scalar>();
    node.interface = LuFactor<Scalar>(A);
    node.fix_q = q;
  }
  if (!(node.interface.min_pivot_ratio() >= 1e-14))
    throw SingularMergeError("singular interface system with " + std::to_string(ns) + " shared nodes (pivot ratio " +
                             std::to_string(node.interface.min_pivot_ratio()) + ")");

  node.S_I = node.interface.solve(rhs);
  node.Sigma = node.coupling * node.S_I;
  node.Sigma.topLeftCorner(nra, nra) += Sa(node.alpha_rest, node.alpha_rest);
  node.Sigma.bottomRightCorner(nrb, nrb) += Sb(node.beta_rest, node.beta_rest);
  merge_particular(node, *alpha.v_flux, *beta.v_flux);
  return node;
}

template <typename Scalar>
void merge_particular(MergeNode<Scalar>& node, const Vec<Scalar>& fa, const Vec<Scalar>& fb) {
  const Vec<Scalar> r = fa(node.alpha_shared) + fb(node.beta_shared);
  node.v_I = node.interface.solve(r);
  const Index nra = static_cast<Index>(node.alpha_rest.size());
  Vec<Scalar> flux(node.boundary_ids.size());
  flux.head(nra) = fa(node.alpha_rest);
  flux.tail(flux.size() - nra) = fb(node.beta_rest);
  if (flux.size() > 0) flux.noalias() += node.coupling * node.v_I;
  node.v_flux = std::move(flux);
}

Eigen::VectorXd edge_node_weights(const SurfaceMesh& mesh) {
  const auto& ref = reference_element(mesh.order);
  const int p = mesh.order;
  Eigen::VectorXd w(mesh.edge_node_count());
  auto fill = [&](const EdgeRef& e, Index edge) {
    const Element& el = mesh.elements[e.element];
    const int s = static_cast<int>(e.side);
    Eigen::MatrixX3d X(p + 1, 3);
    for (int t = 0; t <= p; ++t) X.row(t) = el.nodes.row(ref.side_nodes[s][t]);
    const Eigen::VectorXd jac = (ref.D * X).rowwise().norm();
    const Eigen::VectorXd jac_edge = ref.to_edge * jac;
    w.segment(edge * ref.n_edge, ref.n_edge) = ref.edge_weights.cwiseProduct(jac_edge);
  };
  for (std::size_t i = 0; i < mesh.interfaces.size(); ++i) fill(mesh.interfaces[i].a, static_cast<Index>(i));
  for (std::size_t j = 0; j < mesh.boundary_edges.size(); ++j)
    fill(mesh.boundary_edges[j], static_cast<Index>(mesh.interfaces.size() + j));
  return w;
}

template <typename Scalar>
std::vector<Index> Factorization<Scalar>::cluster_ids(int cluster) const {
  if (cluster < tree.num_leaves) return mesh->element_edge_ids(cluster);
  return merges[static_cast<std::size_t>(cluster - tree.num_leaves)].boundary_ids;
}

template <typename Scalar>
const Mat<Scalar>& Factorization<Scalar>::cluster_sigma(int cluster) const {
  if (cluster < tree.num_leaves) return leaves[static_cast<std::size_t>(cluster)].Sigma;
  return merges[static_cast<std::size_t>(cluster - tree.num_leaves)].Sigma;
}

template <typename Scalar>
const Vec<Scalar>& Factorization<Scalar>::cluster_flux(int cluster) const {
  if (cluster < tree.num_leaves) return leaves[static_cast<std::size_t>(cluster)].v_flux;
  return merges[static_cast<std::size_t>(cluster - tree.num_leaves)].v_flux;
}

template <typename Scalar>
std::size_t Factorization<Scalar>::memory_bytes() const {
  std::size_t entries = 0;
  std::size_t real_entries = 0;
  for (const auto& l : leaves) {
    entries += static_cast<std::size_t>(l.S.size() + l.Sigma.size() + l.interior.lu().size() + l.v.size() +
                                        l.v_flux.size());
    real_entries += static_cast<std::size_t>(l.flux_interior.size());
  }
  for (const auto& m : merges) {
    entries += static_cast<std::size_t>(m.interface.lu().size() + m.S_I.size() + m.coupling.size() + m.Sigma.size() +
                                        m.v_I.size() + m.v_flux.size());
    real_entries += m.shared_ids.size() + m.boundary_ids.size();
  }
  return entries * sizeof(Scalar) + real_entries * sizeof(double);
}

namespace {

template <typename Scalar>
bool zero_reaction(const SurfaceMesh& mesh, const CoefficientField<Scalar>& coeff) {
  if (!coeff.c) return true;
  for (const auto& el : mesh.elements)
    for (Index k = 0; k < el.nodes.rows(); ++k)
      if (coeff.c(el.nodes.row(k).transpose()) != Scalar(0)) return false;
  return true;
}

}  // namespace

template <typename Scalar>
Factorization<Scalar> build_factorization(std::shared_ptr<const SurfaceMesh> mesh, const CoefficientField<Scalar>& coeff,
                                          const MergeTree& tree, const FactorOptions& options) {
  if (!mesh) throw InvalidArgument("build_factorization: null mesh");
  if (tree.num_leaves != mesh->size())
    throw InvalidArgument("merge tree has " + std::to_string(tree.num_leaves) + " leaves but mesh has " +
                          std::to_string(mesh->size()) + " elements");
  Factorization<Scalar> fact;
  fact.mesh = mesh;
  fact.tree = tree;
  fact.closed = mesh->closed;
  fact.threads = std::max(1, options.threads);
  fact.leaves.resize(static_cast<std::size_t>(mesh->size()));
  parallel_for(fact.leaves.size(), fact.threads, [&](std::size_t e) {
    fact.leaves[e] = factor_leaf(mesh->elements[e], coeff);
    fact.leaves[e].element = static_cast<int>(e);
  });

  Eigen::VectorXd weights;
  if (fact.closed && zero_reaction(*mesh, coeff)) weights = edge_node_weights(*mesh);
  fact.merges.resize(tree.merges.size());
  const int root = tree.root();
  for (int level = 0; level < tree.depth(); ++level) {
    const auto& list = tree.levels[static_cast<std::size_t>(level)];
    parallel_for(list.size(), fact.threads, [&](std::size_t k) {
      const int m = list[k];
      const MergePair& pair = tree.merges[static_cast<std::size_t>(m)];
      const int cluster = tree.num_leaves + m;
      std::vector<Index> ids_a = fact.cluster_ids(pair.alpha);
      std::vector<Index> ids_b = fact.cluster_ids(pair.beta);
      ClusterView<Scalar> a{&ids_a, &fact.cluster_sigma(pair.alpha), &fact.cluster_flux(pair.alpha)};
      ClusterView<Scalar> b{&ids_b, &fact.cluster_sigma(pair.beta), &fact.cluster_flux(pair.beta)};
      MergeOptions opts;
      if (cluster == root && weights.size() > 0) opts.root_fix_weights = &weights;
      try {
        MergeNode<Scalar> node = merge_pair(a, b, opts);
        node.alpha = pair.alpha;
        node.beta = pair.beta;
        node.cluster = cluster;
        node.level = level;
        fact.merges[static_cast<std::size_t>(m)] = std::move(node);
      } catch (const SingularMergeError& e) {
        throw SingularMergeError(std::string(e.what()) + " at level " + std::to_string(level) + ", merging clusters " +
                                 std::to_string(pair.alpha) + " and " + std::to_string(pair.beta) +
                                 (cluster == root ? " (root)" : " (resonant subdomain)"));
      }
    });
  }
  if (!fact.merges.empty()) fact.rank_one_fix = fact.merges.back().fix_q.has_value();
  fact.root_boundary_ids = fact.cluster_ids(root);
  return fact;
}

template <typename Scalar>
void update_rhs(Factorization<Scalar>& fact, const Field<Scalar>& f) {
  const SurfaceMesh& mesh = *fact.mesh;
  if (static_cast<int>(f.size()) != mesh.size())
    throw InvalidArgument("update_rhs: load has " + std::to_string(f.size()) + " elements, mesh has " +
                          std::to_string(mesh.size()));
  const Index per = static_cast<Index>(mesh.order + 1) * (mesh.order + 1);
  for (std::size_t e = 0; e < f.size(); ++e)
    if (f[e].size() != per)
      throw InvalidArgument("update_rhs: element " + std::to_string(e) + " load has " + std::to_string(f[e].size()) +
                            " samples, expected " + std::to_string(per));
  parallel_for(fact.leaves.size(), fact.threads, [&](std::size_t e) {
    ParticularData<Scalar> pd = leaf_particular(fact.leaves[e], f[e]);
    fact.leaves[e].v = std::move(pd.v);
    fact.leaves[e].v_flux = std::move(pd.v_flux);
  });
  for (const auto& list : fact.tree.levels)
    parallel_for(list.size(), fact.threads, [&](std::size_t k) {
      auto& node = fact.merges[static_cast<std::size_t>(list[k])];
      merge_particular(node, fact.cluster_flux(node.alpha), fact.cluster_flux(node.beta));
    });
}

#define SHPS_INSTANTIATE(S)                                                                                         \
  template MergeNode<S> merge_pair(const ClusterView<S>&, const ClusterView<S>&, const MergeOptions&);              \
  template void merge_particular(MergeNode<S>&, const Vec<S>&, const Vec<S>&);                                      \
  template struct Factorization<S>;                                                                                 \
  template Factorization<S> build_factorization(std::shared_ptr<const SurfaceMesh>, const CoefficientField<S>&,     \
                                                const MergeTree&, const FactorOptions&);                            \
  template void update_rhs(Factorization<S>&, const Field<S>&);
SHPS_INSTANTIATE(double)
SHPS_INSTANTIATE(Complex)
#undef SHPS_INSTANTIATE

}  // namespace shps
