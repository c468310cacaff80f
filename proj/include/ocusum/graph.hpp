#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ocusum/errors.hpp"

namespace ocusum {

/// Undirected graph on vertices 1..M with an unordered edge set.
/// Immutable after construction; all algorithms below are pure functions.
class UndirectedGraph {
 public:
  UndirectedGraph(int vertex_count, std::vector<std::pair<int, int>> edge_list)
      : vertex_count_(vertex_count) {
    if (vertex_count < 1) {
      throw ValidationError("vertex_count must be positive");
    }
    std::set<std::pair<int, int>> normalized;
    for (auto [i, j] : edge_list) {
      if (i == j) {
        throw ValidationError("self-loop on vertex " + std::to_string(i));
      }
      if (i < 1 || j < 1 || i > vertex_count || j > vertex_count) {
        throw VertexOutOfRangeError("edge (" + std::to_string(i) + "," +
                                    std::to_string(j) + ") outside 1.." +
                                    std::to_string(vertex_count));
      }
      normalized.emplace(std::min(i, j), std::max(i, j));
    }
    edges_.assign(normalized.begin(), normalized.end());
    adjacency_.assign(vertex_count + 1, {});
    for (auto [i, j] : edges_) {
      adjacency_[i].push_back(j);
      adjacency_[j].push_back(i);
    }
    for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
  }

  int vertex_count() const { return vertex_count_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int v) const { return adjacency_[v]; }

  bool adjacent(int i, int j) const {
    const auto& nbrs = neighbors(i);
    return std::binary_search(nbrs.begin(), nbrs.end(), j);
  }

  int max_degree() const {
    std::size_t best = 0;
    for (int v = 1; v <= vertex_count_; ++v) {
      best = std::max(best, neighbors(v).size());
    }
    return static_cast<int>(best);
  }

  bool operator==(const UndirectedGraph& other) const {
    return vertex_count_ == other.vertex_count_ && edges_ == other.edges_;
  }

 private:
  int vertex_count_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adjacency_;
};

/// Perfect clique sequence of a decomposable graph together with the
/// derived separator machinery. Clique indices are 1-based (slot 0 of
/// every per-clique vector is unused): separators and q exist for
/// k = 2..K, Q_j for j = 1..K.
struct PerfectSequence {
  int clique_count = 0;                      // K
  std::vector<std::vector<int>> cliques;     // [1..K], each sorted ascending
  std::vector<std::vector<int>> separators;  // [2..K], sorted ascending
  std::vector<std::vector<int>> histories;   // [1..K], sorted ascending
  std::vector<int> q;                        // [2..K]
  std::vector<std::vector<int>> Q;           // [1..K], sorted ascending
};

namespace detail {

/// Maximum-cardinality search. Returns vertices in visit order; ties
/// broken by smallest label so the result is deterministic.
inline std::vector<int> mcs_order(const UndirectedGraph& g) {
  const int m = g.vertex_count();
  std::vector<int> weight(m + 1, 0);
  std::vector<char> numbered(m + 1, 0);
  std::vector<int> order;
  order.reserve(m);
  for (int step = 0; step < m; ++step) {
    int best = -1;
    for (int v = 1; v <= m; ++v) {
      if (!numbered[v] && (best == -1 || weight[v] > weight[best])) best = v;
    }
    numbered[best] = 1;
    order.push_back(best);
    for (int u : g.neighbors(best)) {
      if (!numbered[u]) ++weight[u];
    }
  }
  return order;
}

/// Zero fill-in test on an MCS order (Tarjan & Yannakakis): for each
/// vertex, its earlier-visited neighbors minus the latest of them must
/// all be adjacent to that latest one. Holds everywhere iff chordal.
inline bool zero_fill_in(const UndirectedGraph& g, const std::vector<int>& order) {
  const int m = g.vertex_count();
  std::vector<int> position(m + 1, 0);
  for (int i = 0; i < m; ++i) position[order[i]] = i;
  for (int v = 1; v <= m; ++v) {
    int latest = -1;
    for (int u : g.neighbors(v)) {
      if (position[u] < position[v] && (latest == -1 || position[u] > position[latest])) {
        latest = u;
      }
    }
    if (latest == -1) continue;
    for (int u : g.neighbors(v)) {
      if (u != latest && position[u] < position[v] && !g.adjacent(u, latest)) {
        return false;
      }
    }
  }
  return true;
}

inline std::vector<int> sorted_intersection(const std::vector<int>& a,
                                            const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

inline bool is_subset(const std::vector<int>& sub, const std::vector<int>& super) {
  return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

}  // namespace detail

/// True iff the graph is chordal, i.e. every cycle longer than three has
/// a chord. Maximum-cardinality search followed by the zero fill-in check.
inline bool check_decomposable(const UndirectedGraph& g) {
  return detail::zero_fill_in(g, detail::mcs_order(g));
}

/// Computes a perfect clique sequence of a decomposable graph: maximal
/// cliques extracted along the MCS order, sorted by the MCS rank of the
/// vertex completing each clique (ties by smallest minimum label), with
/// histories, separators, q and Q derived from their definitions.
/// Throws NotDecomposableError when the graph is not chordal.
inline PerfectSequence perfect_sequence(const UndirectedGraph& g) {
  const int m = g.vertex_count();
  const std::vector<int> order = detail::mcs_order(g);
  if (!detail::zero_fill_in(g, order)) {
    throw NotDecomposableError("graph is not decomposable");
  }
  std::vector<int> position(m + 1, 0);
  for (int i = 0; i < m; ++i) position[order[i]] = i;

  // Candidate cliques: each vertex together with its earlier-visited
  // neighbors. For a chordal graph every maximal clique arises this way;
  // non-maximal and duplicate candidates are filtered out.
  std::vector<std::vector<int>> candidates;
  candidates.reserve(m);
  for (int v = 1; v <= m; ++v) {
    std::vector<int> c{v};
    for (int u : g.neighbors(v)) {
      if (position[u] < position[v]) c.push_back(u);
    }
    std::sort(c.begin(), c.end());
    candidates.push_back(std::move(c));
  }
  std::vector<std::vector<int>> cliques;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    bool keep = true;
    for (std::size_t j = 0; j < candidates.size() && keep; ++j) {
      if (i == j) continue;
      if (candidates[i].size() < candidates[j].size() &&
          detail::is_subset(candidates[i], candidates[j])) {
        keep = false;
      } else if (candidates[i] == candidates[j] && j < i) {
        keep = false;
      }
    }
    if (keep) cliques.push_back(candidates[i]);
  }

  auto completion_rank = [&](const std::vector<int>& c) {
    int r = -1;
    for (int v : c) r = std::max(r, position[v]);
    return r;
  };
  std::sort(cliques.begin(), cliques.end(),
            [&](const std::vector<int>& a, const std::vector<int>& b) {
              const int ra = completion_rank(a), rb = completion_rank(b);
              if (ra != rb) return ra < rb;
              return a.front() < b.front();
            });

  PerfectSequence seq;
  seq.clique_count = static_cast<int>(cliques.size());
  const int k_count = seq.clique_count;
  seq.cliques.assign(k_count + 1, {});
  seq.separators.assign(k_count + 1, {});
  seq.histories.assign(k_count + 1, {});
  seq.q.assign(k_count + 1, 0);
  seq.Q.assign(k_count + 1, {});
  for (int k = 1; k <= k_count; ++k) seq.cliques[k] = cliques[k - 1];

  std::vector<int> history;
  for (int k = 1; k <= k_count; ++k) {
    const auto& clique = seq.cliques[k];
    if (k > 1) {
      auto sep = detail::sorted_intersection(history, clique);
      for (std::size_t a = 0; a < sep.size(); ++a) {
        for (std::size_t b = a + 1; b < sep.size(); ++b) {
          if (!g.adjacent(sep[a], sep[b])) {
            throw NotDecomposableError("clique order is not perfect");
          }
        }
      }
      int q_k = 0;
      for (int j = 1; j < k; ++j) {
        if (detail::is_subset(sep, seq.cliques[j])) {
          q_k = j;
          break;
        }
      }
      if (q_k == 0) {
        throw NotDecomposableError("running intersection property violated");
      }
      seq.separators[k] = std::move(sep);
      seq.q[k] = q_k;
      seq.Q[q_k].push_back(k);
    }
    std::vector<int> merged;
    std::set_union(history.begin(), history.end(), clique.begin(), clique.end(),
                   std::back_inserter(merged));
    history = std::move(merged);
    seq.histories[k] = history;
  }
  return seq;
}

/// Edge-set union of two graphs on the same vertex count. The result
/// need not be decomposable even when both inputs are; callers must
/// re-check before deriving a perfect sequence.
inline UndirectedGraph union_graph(const UndirectedGraph& a, const UndirectedGraph& b) {
  if (a.vertex_count() != b.vertex_count()) {
    throw VertexCountMismatchError(
        "cannot union graphs on " + std::to_string(a.vertex_count()) + " and " +
        std::to_string(b.vertex_count()) + " vertices");
  }
  std::vector<std::pair<int, int>> edges = a.edges();
  edges.insert(edges.end(), b.edges().begin(), b.edges().end());
  return UndirectedGraph(a.vertex_count(), std::move(edges));
}

/// Chain of K 3-vertex cliques, consecutive cliques overlapping in a
/// 2-vertex separator: clique k = {k, k+1, k+2}, M = K + 2.
inline UndirectedGraph chain_graph(int clique_count) {
  if (clique_count < 1) throw ValidationError("clique_count must be >= 1");
  const int m = clique_count + 2;
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i + 1 <= m; ++i) edges.emplace_back(i, i + 1);
  for (int i = 1; i + 2 <= m; ++i) edges.emplace_back(i, i + 2);
  return UndirectedGraph(m, std::move(edges));
}

/// Binary tree of K 4-vertex cliques coupled through 1-vertex separators:
/// clique 1 = {1,2,3,4}; clique k >= 2 introduces vertices {3k-1,3k,3k+1}
/// and attaches to the 3rd (k even) or 4th (k odd) sorted vertex of
/// clique floor(k/2). M = 4 + 3(K-1).
inline UndirectedGraph tree_graph(int clique_count) {
  if (clique_count < 1) throw ValidationError("clique_count must be >= 1");
  std::vector<std::vector<int>> cliques(clique_count + 1);
  cliques[1] = {1, 2, 3, 4};
  for (int k = 2; k <= clique_count; ++k) {
    const auto& parent = cliques[k / 2];
    const int anchor = (k % 2 == 0) ? parent[2] : parent[3];
    cliques[k] = {anchor, 3 * k - 1, 3 * k, 3 * k + 1};
    std::sort(cliques[k].begin(), cliques[k].end());
  }
  const int m = 4 + 3 * (clique_count - 1);
  std::vector<std::pair<int, int>> edges;
  for (int k = 1; k <= clique_count; ++k) {
    const auto& c = cliques[k];
    for (std::size_t a = 0; a < c.size(); ++a) {
      for (std::size_t b = a + 1; b < c.size(); ++b) edges.emplace_back(c[a], c[b]);
    }
  }
  return UndirectedGraph(m, std::move(edges));
}

}  // namespace ocusum
