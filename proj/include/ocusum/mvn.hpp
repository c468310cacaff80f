#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ocusum/errors.hpp"
#include "ocusum/graph.hpp"
#include "ocusum/rng.hpp"

namespace ocusum {

namespace detail {

/// Principal subvector/submatrix for a sorted list of 1-based vertices.
inline Eigen::VectorXd subvector(const Eigen::VectorXd& v, const std::vector<int>& vertices) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(vertices.size()));
  for (std::size_t i = 0; i < vertices.size(); ++i) out[i] = v[vertices[i] - 1];
  return out;
}

inline Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& vertices) {
  const auto n = static_cast<Eigen::Index>(vertices.size());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      out(i, j) = m(vertices[i] - 1, vertices[j] - 1);
    }
  }
  return out;
}

/// Symmetric inverse with a conditioning guard. Throws
/// SingularCovarianceError when the matrix is not usable as a covariance
/// (non-positive eigenvalue or condition number above 1e12).
inline Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& cov, double* logdet_out) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const auto& vals = solver.eigenvalues();
  const double lo = vals.minCoeff();
  const double hi = vals.maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw SingularCovarianceError("marginal covariance is numerically singular (cond " +
                                  std::to_string(lo > 0.0 ? hi / lo : -1.0) + ")");
  }
  if (logdet_out) *logdet_out = vals.array().log().sum();
  return solver.eigenvectors() * vals.cwiseInverse().asDiagonal() *
         solver.eigenvectors().transpose();
}

}  // namespace detail

/// Frozen log-density evaluator for one Gaussian marginal, pinned to a
/// coordinate subset of the full observation vector. A default-constructed
/// instance represents the empty-set marginal whose density is 1.
class GaussianQuadratic {
 public:
  GaussianQuadratic() = default;

  GaussianQuadratic(const Eigen::VectorXd& mean_full, const Eigen::MatrixXd& cov_full,
                    const std::vector<int>& vertices) {
    coords_.reserve(vertices.size());
    for (int v : vertices) coords_.push_back(v - 1);
    mean_ = detail::subvector(mean_full, vertices);
    double logdet = 0.0;
    precision_ = detail::checked_inverse(detail::submatrix(cov_full, vertices), &logdet);
    const auto d = static_cast<double>(vertices.size());
    log_norm_ = -0.5 * (d * std::log(2.0 * std::numbers::pi) + logdet);
  }

  int dim() const { return static_cast<int>(coords_.size()); }

  /// Log density of the marginal, reading its coordinates out of the
  /// full-length observation vector.
  double log_density(const Eigen::VectorXd& x_full) const {
    const int d = dim();
    if (d == 0) return 0.0;
    static thread_local std::vector<double> diff;
    if (diff.size() < static_cast<std::size_t>(d)) diff.resize(d);
    for (int i = 0; i < d; ++i) diff[i] = x_full[coords_[i]] - mean_[i];
    double quad = 0.0;
    for (int i = 0; i < d; ++i) {
      double row = 0.0;
      for (int j = 0; j < d; ++j) row += precision_(i, j) * diff[j];
      quad += row * diff[i];
    }
    return log_norm_ - 0.5 * quad;
  }

  /// Log density evaluated on a vector holding just the subset coordinates.
  double log_density_sub(const Eigen::VectorXd& x_sub) const {
    const int d = dim();
    if (d == 0) return 0.0;
    Eigen::VectorXd diff = x_sub - mean_;
    return log_norm_ - 0.5 * diff.dot(precision_ * diff);
  }

 private:
  std::vector<int> coords_;  // 0-based positions in the full vector
  Eigen::VectorXd mean_;
  Eigen::MatrixXd precision_;
  double log_norm_ = 0.0;
};

/// Sequential sampler for a graph-Markov Gaussian: draws the first clique
/// from its marginal, then each later clique's new vertices from their
/// conditional given the already-drawn separator. For a density that is
/// Markov with respect to the clique sequence's graph this reproduces the
/// joint exactly.
class JunctionSampler {
 public:
  JunctionSampler() = default;

  JunctionSampler(const PerfectSequence& seq, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov)
      : dimension_(static_cast<int>(mean.size())) {
    for (int k = 1; k <= seq.clique_count; ++k) {
      const auto& clique = seq.cliques[k];
      const auto& sep = k > 1 ? seq.separators[k] : std::vector<int>{};
      std::vector<int> fresh;
      std::set_difference(clique.begin(), clique.end(), sep.begin(), sep.end(),
                          std::back_inserter(fresh));
      if (fresh.empty()) continue;  // clique fully determined by history
      Stage stage;
      for (int v : fresh) stage.new_coords.push_back(v - 1);
      for (int v : sep) stage.sep_coords.push_back(v - 1);
      stage.mean_new = detail::subvector(mean, fresh);
      Eigen::MatrixXd cov_new = detail::submatrix(cov, fresh);
      if (!sep.empty()) {
        stage.mean_sep = detail::subvector(mean, sep);
        Eigen::MatrixXd cov_sep = detail::submatrix(cov, sep);
        Eigen::MatrixXd cross(fresh.size(), sep.size());
        for (std::size_t i = 0; i < fresh.size(); ++i) {
          for (std::size_t j = 0; j < sep.size(); ++j) {
            cross(i, j) = cov(fresh[i] - 1, sep[j] - 1);
          }
        }
        stage.regression = detail::checked_inverse(cov_sep, nullptr).eval();
        stage.regression = (cross * stage.regression).eval();
        cov_new -= stage.regression * cross.transpose();
      }
      cov_new = 0.5 * (cov_new + cov_new.transpose());
      Eigen::LLT<Eigen::MatrixXd> llt(cov_new);
      if (llt.info() != Eigen::Success) {
        throw SingularCovarianceError("conditional covariance is not positive definite");
      }
      stage.chol = llt.matrixL();
      stages_.push_back(std::move(stage));
    }
  }

  int dimension() const { return dimension_; }

  void sample_into(Rng& rng, Eigen::VectorXd& out) const {
    out.resize(dimension_);
    static thread_local std::vector<double> z;
    for (const auto& stage : stages_) {
      const int d = static_cast<int>(stage.new_coords.size());
      if (z.size() < static_cast<std::size_t>(d)) z.resize(d);
      for (int i = 0; i < d; ++i) z[i] = rng.normal();
      for (int i = 0; i < d; ++i) {
        double value = stage.mean_new[i];
        for (int j = 0; j <= i; ++j) value += stage.chol(i, j) * z[j];
        for (std::size_t j = 0; j < stage.sep_coords.size(); ++j) {
          value += stage.regression(i, j) * (out[stage.sep_coords[j]] - stage.mean_sep[j]);
        }
        out[stage.new_coords[i]] = value;
      }
    }
  }

 private:
  struct Stage {
    std::vector<int> new_coords;  // 0-based
    std::vector<int> sep_coords;  // 0-based
    Eigen::VectorXd mean_new;
    Eigen::VectorXd mean_sep;
    Eigen::MatrixXd regression;  // |new| x |sep|
    Eigen::MatrixXd chol;        // lower factor of the conditional covariance
  };

  int dimension_ = 0;
  std::vector<Stage> stages_;
};

}  // namespace ocusum
