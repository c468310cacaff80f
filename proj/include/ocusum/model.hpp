#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ocusum/errors.hpp"
#include "ocusum/graph.hpp"
#include "ocusum/mvn.hpp"
#include "ocusum/rng.hpp"

namespace ocusum {

enum class Hypothesis { pre, post };

/// Pre/post-change multivariate Gaussian pair tied to a decomposable
/// graph. Both covariances must be Markov with respect to the declared
/// graph (zero partial correlation across every non-edge). In the
/// structure-change case the declared graph is the union of the two
/// per-hypothesis graphs, which both densities are Markov against.
struct GaussianScenario {
  UndirectedGraph graph;
  PerfectSequence seq;
  Eigen::VectorXd mu0;
  Eigen::MatrixXd sigma0;
  Eigen::VectorXd mu1;
  Eigen::MatrixXd sigma1;
  std::optional<double> distance;  // separation proxy s, set by the builders

  const Eigen::VectorXd& mean(Hypothesis h) const { return h == Hypothesis::pre ? mu0 : mu1; }
  const Eigen::MatrixXd& covariance(Hypothesis h) const {
    return h == Hypothesis::pre ? sigma0 : sigma1;
  }
  int dimension() const { return graph.vertex_count(); }
};

namespace detail {

inline void check_spd(const Eigen::MatrixXd& sigma, const std::string& name) {
  if (sigma.rows() != sigma.cols()) throw ValidationError(name + " is not square");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw ValidationError(name + " is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sigma,
                                                        Eigen::EigenvaluesOnly);
  if (!(solver.eigenvalues().minCoeff() > 1e-10)) {
    throw NotPositiveDefiniteError(name + " is not positive definite");
  }
}

/// Zero-partial-correlation check: entries of the normalized precision
/// matrix at non-adjacent pairs must vanish (|.| < 1e-8).
inline void check_markov(const Eigen::MatrixXd& sigma, const UndirectedGraph& g,
                         const std::string& name) {
  Eigen::MatrixXd precision = sigma.llt().solve(
      Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
  const int m = g.vertex_count();
  for (int i = 1; i <= m; ++i) {
    for (int j = i + 1; j <= m; ++j) {
      if (g.adjacent(i, j)) continue;
      const double scale = std::sqrt(precision(i - 1, i - 1) * precision(j - 1, j - 1));
      if (std::abs(precision(i - 1, j - 1)) / scale >= 1e-8) {
        throw ValidationError(name + " is not Markov with respect to the graph: precision(" +
                              std::to_string(i) + "," + std::to_string(j) + ") != 0");
      }
    }
  }
}

}  // namespace detail

/// Validates and assembles a scenario. Throws when a covariance is not
/// symmetric positive definite, a density is not Markov with respect to
/// the graph, the dimensions disagree, or the two hypotheses coincide.
inline GaussianScenario make_scenario(UndirectedGraph graph, Eigen::VectorXd mu0,
                                      Eigen::MatrixXd sigma0, Eigen::VectorXd mu1,
                                      Eigen::MatrixXd sigma1,
                                      std::optional<double> distance = std::nullopt) {
  const int m = graph.vertex_count();
  if (mu0.size() != m || mu1.size() != m || sigma0.rows() != m || sigma1.rows() != m) {
    throw ValidationError("scenario parameter dimensions do not match the graph");
  }
  detail::check_spd(sigma0, "sigma0");
  detail::check_spd(sigma1, "sigma1");
  detail::check_markov(sigma0, graph, "pre-change density");
  detail::check_markov(sigma1, graph, "post-change density");
  if ((mu0 - mu1).cwiseAbs().maxCoeff() == 0.0 &&
      (sigma0 - sigma1).cwiseAbs().maxCoeff() == 0.0) {
    throw ValidationError("pre- and post-change distributions are identical");
  }
  PerfectSequence seq = perfect_sequence(graph);
  return GaussianScenario{std::move(graph), std::move(seq), std::move(mu0),
                          std::move(sigma0), std::move(mu1),  std::move(sigma1),
                          distance};
}

/// Separator weight pairs (alpha_k, beta_k), k = 2..K, with
/// alpha_k + beta_k = 1. A K=1 sequence needs no weights.
class CoefficientSet {
 public:
  /// Coefficient set for a single-clique graph (no separators).
  CoefficientSet() = default;

  /// Arbitrary valid weights: alphas[i] = alpha_{i+2}, each in [0,1].
  static CoefficientSet from_alphas(std::vector<double> alphas) {
    for (double a : alphas) {
      if (!(a >= 0.0 && a <= 1.0)) {
        throw ValidationError("alpha coefficients must lie in [0,1]");
      }
    }
    CoefficientSet set;
    set.clique_count_ = static_cast<int>(alphas.size()) + 1;
    set.alpha_ = std::move(alphas);
    return set;
  }

  int clique_count() const { return clique_count_; }
  double alpha(int k) const { return alpha_[k - 2]; }
  double beta(int k) const { return 1.0 - alpha_[k - 2]; }
  std::optional<double> xi() const { return xi_; }

 private:
  friend CoefficientSet build_coefficients(int, double);
  int clique_count_ = 1;
  std::vector<double> alpha_;  // index k-2 holds alpha_k
  std::optional<double> xi_;
};

/// Geometric weight scheme alpha_k = 1 - 2^(K-k) xi, beta_k = 2^(K-k) xi,
/// valid for xi strictly inside (0, 1/(2^(K-1)-1)).
inline CoefficientSet build_coefficients(int clique_count, double xi) {
  if (clique_count < 2) {
    throw ValidationError("coefficient scheme needs at least two cliques");
  }
  const double upper = 1.0 / (std::ldexp(1.0, clique_count - 1) - 1.0);
  if (!(xi > 0.0 && xi < upper)) {
    throw XiOutOfRangeError("xi must lie in (0, " + std::to_string(upper) + ")");
  }
  std::vector<double> alphas(clique_count - 1);
  for (int k = 2; k <= clique_count; ++k) {
    alphas[k - 2] = 1.0 - std::ldexp(xi, clique_count - k);
  }
  CoefficientSet set = CoefficientSet::from_alphas(std::move(alphas));
  set.xi_ = xi;
  return set;
}

/// The xi used when a config requests "auto": half the upper limit.
inline double auto_xi(int clique_count) {
  return 0.5 / (std::ldexp(1.0, clique_count - 1) - 1.0);
}

/// The K clique statistics of one time slot, their magnitude ordering and
/// their sum (the global log-likelihood ratio of the slot).
struct SlotStatistics {
  std::vector<double> raw;  // raw[k-1] = L_k
  std::vector<int> order;   // 1-based clique indices, |L| descending
  double global_llr = 0.0;

  int clique_count() const { return static_cast<int>(raw.size()); }

  static SlotStatistics from_raw(std::vector<double> values) {
    SlotStatistics stats;
    stats.order.resize(values.size());
    std::iota(stats.order.begin(), stats.order.end(), 1);
    // Ties broken by smaller clique index (stable sort).
    std::stable_sort(stats.order.begin(), stats.order.end(), [&](int a, int b) {
      return std::abs(values[a - 1]) > std::abs(values[b - 1]);
    });
    stats.global_llr = std::accumulate(values.begin(), values.end(), 0.0);
    stats.raw = std::move(values);
    return stats;
  }
};

namespace detail {

inline void validate_vertex_set(const std::vector<int>& vertices, int dimension) {
  if (vertices.empty()) throw EmptyVertexSetError("empty vertex set");
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (vertices[i] < 1 || vertices[i] > dimension) {
      throw VertexOutOfRangeError("vertex " + std::to_string(vertices[i]) + " outside 1.." +
                                  std::to_string(dimension));
    }
    if (i > 0 && vertices[i] <= vertices[i - 1]) {
      throw ValidationError("vertex set must be strictly increasing");
    }
  }
}

}  // namespace detail

/// Marginal (mean, covariance) of one hypothesis on a vertex subset,
/// rows/columns in ascending vertex order. The vertex list must be
/// strictly increasing.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> marginal(const GaussianScenario& scenario,
                                                            Hypothesis hypothesis,
                                                            const std::vector<int>& vertices) {
  detail::validate_vertex_set(vertices, scenario.dimension());
  return {detail::subvector(scenario.mean(hypothesis), vertices),
          detail::submatrix(scenario.covariance(hypothesis), vertices)};
}

/// log f1(x) - log f0(x) for the marginals on a vertex subset; x holds
/// the subset coordinates in ascending vertex order.
inline double clique_llr(const GaussianScenario& scenario, const std::vector<int>& vertices,
                         const Eigen::VectorXd& x) {
  detail::validate_vertex_set(vertices, scenario.dimension());
  if (x.size() != static_cast<Eigen::Index>(vertices.size())) {
    throw ValidationError("observation dimension does not match the vertex set");
  }
  GaussianQuadratic pre(scenario.mu0, scenario.sigma0, vertices);
  GaussianQuadratic post(scenario.mu1, scenario.sigma1, vertices);
  return post.log_density_sub(x) - pre.log_density_sub(x);
}

/// Precomputed per-slot machinery for one (scenario, coefficients) pair:
/// clique/separator marginal evaluators, the statistic combination rule
/// and the per-hypothesis junction-tree samplers. Immutable and safe to
/// share across threads; callers own their Rng.
class StatisticEngine {
 public:
  StatisticEngine(GaussianScenario scenario, CoefficientSet coeffs)
      : scenario_(std::move(scenario)), coeffs_(std::move(coeffs)) {
    const int k_count = scenario_.seq.clique_count;
    if (coeffs_.clique_count() != k_count) {
      throw ValidationError("coefficient set is for " +
                            std::to_string(coeffs_.clique_count()) + " cliques, scenario has " +
                            std::to_string(k_count));
    }
    clique_pre_.resize(k_count + 1);
    clique_post_.resize(k_count + 1);
    sep_pre_.resize(k_count + 1);
    sep_post_.resize(k_count + 1);
    for (int k = 1; k <= k_count; ++k) {
      const auto& clique = scenario_.seq.cliques[k];
      clique_pre_[k] = GaussianQuadratic(scenario_.mu0, scenario_.sigma0, clique);
      clique_post_[k] = GaussianQuadratic(scenario_.mu1, scenario_.sigma1, clique);
      if (k >= 2 && !scenario_.seq.separators[k].empty()) {
        const auto& sep = scenario_.seq.separators[k];
        sep_pre_[k] = GaussianQuadratic(scenario_.mu0, scenario_.sigma0, sep);
        sep_post_[k] = GaussianQuadratic(scenario_.mu1, scenario_.sigma1, sep);
      }
    }
    sampler_pre_ = JunctionSampler(scenario_.seq, scenario_.mu0, scenario_.sigma0);
    sampler_post_ = JunctionSampler(scenario_.seq, scenario_.mu1, scenario_.sigma1);
  }

  const GaussianScenario& scenario() const { return scenario_; }
  const CoefficientSet& coefficients() const { return coeffs_; }
  int clique_count() const { return scenario_.seq.clique_count; }
  int dimension() const { return scenario_.dimension(); }

  /// Fills raw[k-1] = L_k(x) for k = 1..K.
  void compute_raw(const Eigen::VectorXd& x, std::vector<double>& raw) const {
    const int k_count = clique_count();
    raw.resize(k_count);
    static thread_local std::vector<double> sep_llr;
    if (sep_llr.size() < static_cast<std::size_t>(k_count + 1)) sep_llr.resize(k_count + 1);
    for (int k = 2; k <= k_count; ++k) {
      sep_llr[k] = sep_post_[k].log_density(x) - sep_pre_[k].log_density(x);
    }
    for (int j = 1; j <= k_count; ++j) {
      double value = clique_post_[j].log_density(x) - clique_pre_[j].log_density(x);
      if (j >= 2) value -= coeffs_.alpha(j) * sep_llr[j];
      for (int k : scenario_.seq.Q[j]) value -= coeffs_.beta(k) * sep_llr[k];
      raw[j - 1] = value;
    }
  }

  SlotStatistics statistics(const Eigen::VectorXd& x) const {
    std::vector<double> raw;
    compute_raw(x, raw);
    return SlotStatistics::from_raw(std::move(raw));
  }

  /// Sum of the clique statistics (index order), no magnitude sort.
  double slot_sum(const Eigen::VectorXd& x) const {
    static thread_local std::vector<double> raw;
    compute_raw(x, raw);
    return std::accumulate(raw.begin(), raw.end(), 0.0);
  }

  void sample_into(Hypothesis h, Rng& rng, Eigen::VectorXd& out) const {
    (h == Hypothesis::pre ? sampler_pre_ : sampler_post_).sample_into(rng, out);
  }

  Eigen::VectorXd sample(Hypothesis h, Rng& rng) const {
    Eigen::VectorXd out;
    sample_into(h, rng, out);
    return out;
  }

 private:
  GaussianScenario scenario_;
  CoefficientSet coeffs_;
  std::vector<GaussianQuadratic> clique_pre_, clique_post_;  // [1..K]
  std::vector<GaussianQuadratic> sep_pre_, sep_post_;        // [2..K]
  JunctionSampler sampler_pre_, sampler_post_;
};

/// Clique statistics of one observation (one-shot form of
/// StatisticEngine::statistics).
inline SlotStatistics clique_statistics(const GaussianScenario& scenario,
                                        const CoefficientSet& coeffs,
                                        const Eigen::VectorXd& x) {
  return StatisticEngine(scenario, coeffs).statistics(x);
}

/// One draw from the chosen hypothesis via junction-tree sequential
/// sampling (one-shot form of StatisticEngine::sample).
inline Eigen::VectorXd sample_observation(const GaussianScenario& scenario, Hypothesis h,
                                          Rng& rng) {
  JunctionSampler sampler(scenario.seq, scenario.mean(h), scenario.covariance(h));
  Eigen::VectorXd out;
  sampler.sample_into(rng, out);
  return out;
}

namespace detail {

/// Graph-Markov covariance: precision with unit-normalized diagonal
/// dominance (J_ii = 1 + w * max_degree, J_ij = -w on edges, w = 0.25),
/// inverted. Positive definite and exactly Markov by construction.
inline Eigen::MatrixXd markov_covariance(const UndirectedGraph& g, double edge_weight = 0.25) {
  const int m = g.vertex_count();
  const double diag = 1.0 + edge_weight * g.max_degree();
  Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(m, m);
  precision.diagonal().setConstant(diag);
  for (auto [i, j] : g.edges()) {
    precision(i - 1, j - 1) = -edge_weight;
    precision(j - 1, i - 1) = -edge_weight;
  }
  Eigen::MatrixXd cov = precision.llt().solve(Eigen::MatrixXd::Identity(m, m));
  return 0.5 * (cov + cov.transpose());
}

inline double min_clique_mean_norm(const PerfectSequence& seq, const Eigen::VectorXd& mu) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= seq.clique_count; ++k) {
    best = std::min(best, subvector(mu, seq.cliques[k]).norm());
  }
  return best;
}

}  // namespace detail

/// Mean-shift testing problem: N(0, Sigma) before the change and
/// N(c*1, Sigma) after, Sigma Markov with respect to the graph.
/// Distance proxy: s = min_k ||mu restricted to clique k||.
inline GaussianScenario build_mean_shift_scenario(const UndirectedGraph& graph, double c) {
  if (c == 0.0) throw ValidationError("mean shift c must be nonzero");
  const int m = graph.vertex_count();
  Eigen::MatrixXd sigma = detail::markov_covariance(graph);
  GaussianScenario scenario =
      make_scenario(graph, Eigen::VectorXd::Zero(m), sigma,
                    Eigen::VectorXd::Constant(m, c), sigma);
  scenario.distance = detail::min_clique_mean_norm(scenario.seq, scenario.mu1);
  return scenario;
}

/// Structure-change variant: the detection process runs on the union
/// graph while each hypothesis keeps its own Markov structure. Pre-change
/// N(0, Sigma(pre graph)), post-change N(c*1, Sigma(post graph)).
inline GaussianScenario build_mean_shift_scenario(const UndirectedGraph& pre_graph,
                                                  const UndirectedGraph& post_graph, double c) {
  if (c == 0.0) throw ValidationError("mean shift c must be nonzero");
  UndirectedGraph joint = union_graph(pre_graph, post_graph);
  const int m = joint.vertex_count();
  GaussianScenario scenario = make_scenario(
      joint, Eigen::VectorXd::Zero(m), detail::markov_covariance(pre_graph),
      Eigen::VectorXd::Constant(m, c), detail::markov_covariance(post_graph));
  scenario.distance = detail::min_clique_mean_norm(scenario.seq, scenario.mu1);
  return scenario;
}

/// Covariance-change testing problem: N(0, I) before the change; after
/// the change each clique marginal has diagonal x^2 and off-diagonal
/// x/10, and the joint is the unique graph-Markov completion of those
/// blocks (precision = sum of padded clique-block inverses minus padded
/// separator-block inverses). Distance proxy: s = min_k lambda_min of
/// the prescribed clique blocks.
inline GaussianScenario build_cov_change_scenario(const UndirectedGraph& graph, double x) {
  PerfectSequence seq = perfect_sequence(graph);
  const int m = graph.vertex_count();

  auto block = [&](int size) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Constant(size, size, x / 10.0);
    b.diagonal().setConstant(x * x);
    return b;
  };
  auto checked_block_inverse = [&](const std::vector<int>& vertices) -> Eigen::MatrixXd {
    Eigen::MatrixXd b = block(static_cast<int>(vertices.size()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
    if (!(solver.eigenvalues().minCoeff() > 1e-10)) {
      throw NotPositiveDefiniteError("clique covariance block is not positive definite");
    }
    return solver.eigenvectors() * solver.eigenvalues().cwiseInverse().asDiagonal() *
           solver.eigenvectors().transpose();
  };

  Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(m, m);
  auto scatter = [&](const Eigen::MatrixXd& small, const std::vector<int>& vertices,
                     double sign) {
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      for (std::size_t j = 0; j < vertices.size(); ++j) {
        precision(vertices[i] - 1, vertices[j] - 1) += sign * small(i, j);
      }
    }
  };
  double min_block_eigenvalue = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= seq.clique_count; ++k) {
    scatter(checked_block_inverse(seq.cliques[k]), seq.cliques[k], 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        block(static_cast<int>(seq.cliques[k].size())), Eigen::EigenvaluesOnly);
    min_block_eigenvalue = std::min(min_block_eigenvalue, solver.eigenvalues().minCoeff());
  }
  for (int k = 2; k <= seq.clique_count; ++k) {
    if (!seq.separators[k].empty()) {
      scatter(checked_block_inverse(seq.separators[k]), seq.separators[k], -1.0);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(precision);
  if (!(solver.eigenvalues().minCoeff() > 1e-10)) {
    throw NotPositiveDefiniteError("assembled post-change covariance is not positive definite");
  }
  Eigen::MatrixXd sigma1 = solver.eigenvectors() *
                           solver.eigenvalues().cwiseInverse().asDiagonal() *
                           solver.eigenvectors().transpose();
  sigma1 = 0.5 * (sigma1 + sigma1.transpose());

  GaussianScenario scenario =
      make_scenario(graph, Eigen::VectorXd::Zero(m), Eigen::MatrixXd::Identity(m, m),
                    Eigen::VectorXd::Zero(m), sigma1);
  scenario.distance = min_block_eigenvalue;
  return scenario;
}

}  // namespace ocusum
