#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <string>

#include "shps/error.hpp"
#include "shps/mesh.hpp"

namespace shps {

namespace {

/// Weighted element adjacency: weight = number of shared sides.
using Graph = std::vector<std::vector<std::pair<int, int>>>;

Graph adjacency(const SurfaceMesh& mesh) {
  std::vector<std::map<int, int>> w(static_cast<std::size_t>(mesh.size()));
  for (const auto& f : mesh.interfaces) {
    ++w[f.a.element][f.b.element];
    ++w[f.b.element][f.a.element];
  }
  Graph g(w.size());
  for (std::size_t v = 0; v < w.size(); ++v)
    for (const auto& [u, c] : w[v]) g[v].emplace_back(u, c);
  return g;
}

/// Scratch state for work on one vertex subset. `tag[v] == stamp` marks members.
struct Partitioner {
  const Graph& g;
  std::vector<int> tag;
  std::vector<int> side;
  std::vector<int> seen;
  int stamp = 0;
  int seen_stamp = 0;

  explicit Partitioner(const Graph& graph)
      : g(graph), tag(graph.size(), -1), side(graph.size(), 0), seen(graph.size(), -1) {}

  void enter(const std::vector<int>& set) {
    ++stamp;
    for (int v : set) tag[v] = stamp;
  }
  bool member(int v) const { return tag[v] == stamp; }

  /// BFS inside the current subset restricted to vertices with side == which
  /// (which < 0: whole subset). Returns visit order.
  std::vector<int> bfs(int start, int which) {
    ++seen_stamp;
    std::vector<int> order{start};
    seen[start] = seen_stamp;
    for (std::size_t h = 0; h < order.size(); ++h)
      for (const auto& [u, c] : g[order[h]])
        if (member(u) && seen[u] != seen_stamp && (which < 0 || side[u] == which)) {
          seen[u] = seen_stamp;
          order.push_back(u);
        }
    return order;
  }

  bool part_connected(const std::vector<int>& set, int which) {
    int count = 0, start = -1;
    for (int v : set)
      if (side[v] == which) {
        ++count;
        if (start < 0) start = v;
      }
    return count > 0 && static_cast<int>(bfs(start, which).size()) == count;
  }

  int cut(const std::vector<int>& set) {
    int c = 0;
    for (int v : set)
      if (side[v] == 0)
        for (const auto& [u, w] : g[v])
          if (member(u) && side[u] == 1) c += w;
    return c;
  }

  /// Grows side 0 from seed to `target` vertices, always adding the frontier
  /// vertex with the best internal-minus-external gain (ties: lowest id).
  void grow(const std::vector<int>& set, int seed, int target) {
    for (int v : set) side[v] = 1;
    std::vector<int> gain(g.size(), 0);
    std::vector<char> frontier(g.size(), 0);
    std::vector<int> front;
    auto add = [&](int v) {
      side[v] = 0;
      frontier[v] = 0;
      for (const auto& [u, w] : g[v]) {
        if (!member(u) || side[u] == 0) continue;
        gain[u] += 2 * w;
        if (!frontier[u]) {
          frontier[u] = 1;
          front.push_back(u);
        }
      }
    };
    for (int v : set) {
      gain[v] = 0;
      for (const auto& [u, w] : g[v])
        if (member(u)) gain[v] -= w;
    }
    add(seed);
    for (int size = 1; size < target; ++size) {
      int best = -1;
      for (int v : front)
        if (frontier[v] && (best < 0 || gain[v] > gain[best] || (gain[v] == gain[best] && v < best))) best = v;
      if (best < 0) break;
      add(best);
      front.erase(std::remove_if(front.begin(), front.end(), [&](int v) { return !frontier[v]; }), front.end());
    }
  }

  /// Pairwise swaps across the cut that lower the cut weight and keep both
  /// halves connected.
  void refine(const std::vector<int>& set) {
    const int max_rounds = 4 * static_cast<int>(std::sqrt(static_cast<double>(set.size()))) + 4;
    for (int round = 0; round < max_rounds; ++round) {
      std::vector<int> d(g.size(), 0);
      std::vector<int> border0, border1;
      for (int v : set) {
        bool border = false;
        for (const auto& [u, w] : g[v]) {
          if (!member(u)) continue;
          if (side[u] == side[v]) {
            d[v] -= w;
          } else {
            d[v] += w;
            border = true;
          }
        }
        if (border) (side[v] == 0 ? border0 : border1).push_back(v);
      }
      struct Swap {
        int gain, a, b;
      };
      std::vector<Swap> swaps;
      for (int a : border0)
        for (int b : border1) {
          int wab = 0;
          for (const auto& [u, w] : g[a])
            if (u == b) wab = w;
          const int gain = d[a] + d[b] - 2 * wab;
          if (gain > 0) swaps.push_back({gain, a, b});
        }
      std::sort(swaps.begin(), swaps.end(), [](const Swap& x, const Swap& y) {
        return x.gain != y.gain ? x.gain > y.gain : (x.a != y.a ? x.a < y.a : x.b < y.b);
      });
      bool applied = false;
      for (const Swap& s : swaps) {
        std::swap(side[s.a], side[s.b]);
        if (part_connected(set, 0) && part_connected(set, 1)) {
          applied = true;
          break;
        }
        std::swap(side[s.a], side[s.b]);
      }
      if (!applied) return;
    }
  }

  /// Splits `set` (connected, size ≥ 2) into two connected parts, the first
  /// of size `target` when possible.
  std::pair<std::vector<int>, std::vector<int>> bisect(const std::vector<int>& set, int target) {
    enter(set);
    const int n = static_cast<int>(set.size());
    std::vector<int> seeds;
    {
      std::vector<int> order = bfs(set.front(), -1);
      order = bfs(order.back(), -1);
      seeds.push_back(order.back());
      if (n <= 64) {
        seeds.insert(seeds.end(), set.begin(), set.end());
      } else {
        std::vector<int> sorted = set;
        std::sort(sorted.begin(), sorted.end());
        for (int k = 0; k < 7; ++k) seeds.push_back(sorted[static_cast<std::size_t>(k) * n / 7]);
      }
    }
    int best_cut = -1;
    std::vector<int> best_side;
    for (int seed : seeds) {
      grow(set, seed, target);
      if (!part_connected(set, 0) || !part_connected(set, 1)) continue;
      const int c = cut(set);
      if (best_cut < 0 || c < best_cut) {
        best_cut = c;
        best_side.clear();
        for (int v : set) best_side.push_back(side[v]);
      }
    }
    if (best_cut < 0) {
      // No balanced connected split found: grow from the peripheral seed and
      // hand the complement's smaller components to side 0.
      grow(set, seeds.front(), target);
      std::vector<std::vector<int>> comps;
      std::vector<char> done(g.size(), 0);
      for (int v : set) {
        if (side[v] != 1 || done[v]) continue;
        std::vector<int> comp = bfs(v, 1);
        for (int u : comp) done[u] = 1;
        comps.push_back(std::move(comp));
      }
      std::size_t keep = 0;
      for (std::size_t c = 1; c < comps.size(); ++c)
        if (comps[c].size() > comps[keep].size()) keep = c;
      for (std::size_t c = 0; c < comps.size(); ++c)
        if (c != keep)
          for (int u : comps[c]) side[u] = 0;
      best_side.clear();
      for (int v : set) best_side.push_back(side[v]);
    }
    for (std::size_t k = 0; k < set.size(); ++k) side[set[k]] = best_side[k];
    refine(set);
    std::pair<std::vector<int>, std::vector<int>> parts;
    for (int v : set) (side[v] == 0 ? parts.first : parts.second).push_back(v);
    return parts;
  }
};

struct TreeNode {
  int leaf = -1;
  std::unique_ptr<TreeNode> left, right;
  int height = -1;
};

std::unique_ptr<TreeNode> split(Partitioner& part, std::vector<int> set) {
  auto node = std::make_unique<TreeNode>();
  if (set.size() == 1) {
    node->leaf = set.front();
    return node;
  }
  int half = 1;
  while (2 * half < static_cast<int>(set.size())) half *= 2;
  auto [a, b] = part.bisect(set, half);
  if (a.empty() || b.empty()) throw MeshError("merge tree: failed to split a connected cluster");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (b.front() < a.front()) std::swap(a, b);
  node->left = split(part, std::move(a));
  node->right = split(part, std::move(b));
  node->height = 1 + std::max(node->left->height, node->right->height);
  return node;
}

}  // namespace

std::vector<int> MergeTree::members(int cluster) const {
  if (cluster < num_leaves) return {cluster};
  const MergePair& m = merges.at(static_cast<std::size_t>(cluster - num_leaves));
  std::vector<int> a = members(m.alpha), b = members(m.beta);
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  return a;
}

std::vector<int> MergeTree::clusters_after(int level) const {
  std::vector<int> owner(static_cast<std::size_t>(num_leaves));
  std::iota(owner.begin(), owner.end(), 0);
  for (int l = 0; l <= level && l < depth(); ++l)
    for (int m : levels[l])
      for (int e : members(num_leaves + m)) owner[e] = num_leaves + m;
  return owner;
}

MergeTree build_merge_tree(const SurfaceMesh& mesh) {
  const int n = mesh.size();
  if (n == 0) throw MeshError("merge tree: empty mesh");
  const Graph g = adjacency(mesh);
  {
    Partitioner probe(g);
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    probe.enter(all);
    const auto reach = probe.bfs(0, -1);
    if (static_cast<int>(reach.size()) != n)
      throw MeshError("merge tree: mesh has multiple connected components (" + std::to_string(reach.size()) +
                      " of " + std::to_string(n) + " elements reachable from element 0)");
  }
  Partitioner part(g);
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  const auto root = split(part, all);

  MergeTree tree;
  tree.num_leaves = n;
  if (n == 1) return tree;
  tree.levels.resize(static_cast<std::size_t>(root->height + 1));
  // Gather merges per level in left-to-right order, then number them level by level.
  std::vector<std::vector<const TreeNode*>> by_level(tree.levels.size());
  std::function<void(const TreeNode*)> collect = [&](const TreeNode* t) {
    if (t->leaf >= 0) return;
    collect(t->left.get());
    collect(t->right.get());
    by_level[static_cast<std::size_t>(t->height)].push_back(t);
  };
  collect(root.get());
  std::map<const TreeNode*, int> cluster;
  auto id_of = [&](const TreeNode* t) { return t->leaf >= 0 ? t->leaf : cluster.at(t); };
  for (std::size_t l = 0; l < by_level.size(); ++l)
    for (const TreeNode* t : by_level[l]) {
      const int m = static_cast<int>(tree.merges.size());
      tree.merges.push_back(MergePair{id_of(t->left.get()), id_of(t->right.get()), static_cast<int>(l)});
      tree.levels[l].push_back(m);
      cluster[t] = n + m;
    }
  return tree;
}

}  // namespace shps
