#pragma once

// Test-only oracles, written independently of the library code paths they
// check: a Bron-Kerbosch maximal-clique enumerator, a dense multivariate
// Gaussian log density, and a random chordal graph generator based on
// perfect-elimination construction.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <utility>
#include <vector>

#include "ocusum/graph.hpp"
#include "ocusum/rng.hpp"

namespace testutil {

/// All maximal cliques, each sorted, result sorted lexicographically.
inline std::vector<std::vector<int>> bron_kerbosch(const ocusum::UndirectedGraph& g) {
  std::vector<std::vector<int>> found;
  std::vector<int> r, p, x;
  for (int v = 1; v <= g.vertex_count(); ++v) p.push_back(v);

  auto expand = [&](auto&& self, std::vector<int> rr, std::vector<int> pp,
                    std::vector<int> xx) -> void {
    if (pp.empty() && xx.empty()) {
      found.push_back(rr);
      return;
    }
    const std::vector<int> candidates = pp;
    for (int v : candidates) {
      std::vector<int> rn = rr;
      rn.push_back(v);
      std::sort(rn.begin(), rn.end());
      std::vector<int> pn, xn;
      for (int u : pp) {
        if (g.adjacent(u, v)) pn.push_back(u);
      }
      for (int u : xx) {
        if (g.adjacent(u, v)) xn.push_back(u);
      }
      self(self, std::move(rn), std::move(pn), std::move(xn));
      pp.erase(std::find(pp.begin(), pp.end(), v));
      xx.push_back(v);
    }
  };
  expand(expand, {}, std::move(p), std::move(x));
  std::sort(found.begin(), found.end());
  return found;
}

/// Dense Gaussian log density via Cholesky of the full covariance;
/// deliberately avoids the library's marginal/precision machinery.
inline double dense_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                                const Eigen::MatrixXd& sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  Eigen::VectorXd diff = x - mu;
  Eigen::VectorXd solved = llt.solve(diff);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < sigma.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + logdet +
                 diff.dot(solved));
}

/// Full-joint log-likelihood ratio oracle.
inline double dense_llr(const Eigen::VectorXd& x, const Eigen::VectorXd& mu0,
                        const Eigen::MatrixXd& s0, const Eigen::VectorXd& mu1,
                        const Eigen::MatrixXd& s1) {
  return dense_log_density(x, mu1, s1) - dense_log_density(x, mu0, s0);
}

/// Random connected chordal graph on up to max_vertices vertices: each
/// new vertex attaches to a random nonempty subset of one existing
/// maximal clique. The clique list is maintained directly so the
/// construction never consults the code under test.
inline ocusum::UndirectedGraph random_chordal(ocusum::Rng& rng, int max_vertices) {
  const int m = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_vertices));
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> cliques{{1}};
  for (int v = 2; v <= m; ++v) {
    const auto& host = cliques[rng.next_u64() % cliques.size()];
    const int take = 1 + static_cast<int>(rng.next_u64() % host.size());
    std::vector<int> attach = host;
    for (int i = static_cast<int>(attach.size()) - 1; i > 0; --i) {
      std::swap(attach[i], attach[rng.next_u64() % static_cast<std::uint64_t>(i + 1)]);
    }
    attach.resize(take);
    std::sort(attach.begin(), attach.end());
    for (int u : attach) edges.emplace_back(u, v);
    std::vector<int> fresh = attach;
    fresh.push_back(v);
    std::sort(fresh.begin(), fresh.end());
    if (take == static_cast<int>(host.size())) {
      // The host clique is swallowed by the new one.
      cliques.erase(std::find(cliques.begin(), cliques.end(), host));
    }
    cliques.push_back(std::move(fresh));
  }
  return ocusum::UndirectedGraph(m, std::move(edges));
}

}  // namespace testutil
