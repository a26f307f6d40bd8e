#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "matchtu/matrix.hpp"
#include "matchtu/random.hpp"

namespace matchtu {

struct FactorizeConfig {
  std::size_t dim = 8;   // D
  double reg = 0.01;     // ridge weight
  double alpha = 40.0;   // confidence weight on observed interactions
  int iters = 15;        // alternations (one row sweep + one column sweep)
  std::uint64_t seed = 0;
};

struct FactorizeResult {
  Matrix row_factors;  // rows x D
  Matrix col_factors;  // cols x D
  // Weighted objective before any sweep and after each alternation
  // (iters + 1 values); non-increasing by the block-coordinate property.
  std::vector<double> objective;
  int warnings = 0;  // singular normal equations patched with a ridge floor
};

namespace detail {

using EMatrix = Eigen::MatrixXd;
using EVector = Eigen::VectorXd;

// Solves (gram + alpha * sum_{j in pos} y_j y_j^T) x = (1 + alpha) * sum y_j
// for every row of `out`, where pos is the set of 1-entries in the
// corresponding line of `obs` read along `axis` (0: rows, 1: columns).
inline int ials_half_sweep(const Matrix& obs, int axis, double alpha,
                           double reg, const EMatrix& other, EMatrix& out) {
  const std::size_t count = axis == 0 ? obs.rows() : obs.cols();
  const std::size_t other_count = axis == 0 ? obs.cols() : obs.rows();
  const auto D = other.cols();

  EMatrix gram = other.transpose() * other;
  gram.diagonal().array() += reg;

  int warnings = 0;
  for (std::size_t i = 0; i < count; ++i) {
    EMatrix normal = gram;
    EVector rhs = EVector::Zero(D);
    for (std::size_t j = 0; j < other_count; ++j) {
      const double o = axis == 0 ? obs(i, j) : obs(j, i);
      if (o != 0.0) {
        normal.noalias() +=
            alpha * other.row(j).transpose() * other.row(j);
        rhs.noalias() += (1.0 + alpha) * other.row(j).transpose();
      }
    }
    Eigen::LLT<EMatrix> llt(normal);
    if (llt.info() != Eigen::Success) {
      // Singular normal equations; nudge the ridge and retry.
      normal.diagonal().array() += 1e-8 * (1.0 + normal.trace() / D);
      llt.compute(normal);
      ++warnings;
    }
    out.row(i) = llt.solve(rhs).transpose();
  }
  return warnings;
}

inline double ials_objective(const Matrix& obs, double alpha, double reg,
                             const EMatrix& rows, const EMatrix& cols) {
  double acc = 0.0;
  for (std::size_t i = 0; i < obs.rows(); ++i) {
    for (std::size_t j = 0; j < obs.cols(); ++j) {
      const double o = obs(i, j);
      const double err = o - rows.row(i).dot(cols.row(j));
      acc += (1.0 + alpha * o) * err * err;
    }
  }
  acc += reg * (rows.squaredNorm() + cols.squaredNorm());
  return acc;
}

}  // namespace detail

// Implicit-feedback alternating least squares on a dense binary interaction
// matrix: confidence 1 + alpha on observed entries, 1 on the rest, ridge
// regularization, alternating exact normal-equation solves.
inline FactorizeResult factorize_implicit(const Matrix& obs,
                                          const FactorizeConfig& cfg) {
  if (obs.empty()) {
    throw std::invalid_argument("factorize_implicit: empty matrix");
  }
  if (cfg.dim < 1) {
    throw std::invalid_argument("factorize_implicit: dim must be >= 1");
  }
  if (cfg.iters < 1) {
    throw std::invalid_argument("factorize_implicit: iters must be >= 1");
  }
  if (cfg.reg < 0.0 || cfg.alpha < 0.0) {
    throw std::invalid_argument(
        "factorize_implicit: reg and alpha must be non-negative");
  }
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double o = obs.data()[i];
    if (o != 0.0 && o != 1.0) {
      throw std::invalid_argument(
          "factorize_implicit: observation entries must be 0 or 1");
    }
  }

  const std::size_t R = obs.rows();
  const std::size_t C = obs.cols();
  const auto D = static_cast<Eigen::Index>(cfg.dim);

  detail::EMatrix rows(R, D), cols(C, D);
  {
    Rng rng(cfg.seed);
    const double hi = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    for (std::size_t i = 0; i < R; ++i) {
      for (Eigen::Index d = 0; d < D; ++d) rows(i, d) = rng.uniform(0.0, hi);
    }
    for (std::size_t j = 0; j < C; ++j) {
      for (Eigen::Index d = 0; d < D; ++d) cols(j, d) = rng.uniform(0.0, hi);
    }
  }

  FactorizeResult result;
  result.objective.reserve(cfg.iters + 1);
  result.objective.push_back(
      detail::ials_objective(obs, cfg.alpha, cfg.reg, rows, cols));
  for (int it = 0; it < cfg.iters; ++it) {
    result.warnings +=
        detail::ials_half_sweep(obs, 0, cfg.alpha, cfg.reg, cols, rows);
    result.warnings +=
        detail::ials_half_sweep(obs, 1, cfg.alpha, cfg.reg, rows, cols);
    result.objective.push_back(
        detail::ials_objective(obs, cfg.alpha, cfg.reg, rows, cols));
  }

  result.row_factors = Matrix(R, cfg.dim);
  result.col_factors = Matrix(C, cfg.dim);
  for (std::size_t i = 0; i < R; ++i) {
    for (Eigen::Index d = 0; d < D; ++d) {
      result.row_factors(i, d) = rows(i, d);
    }
  }
  for (std::size_t j = 0; j < C; ++j) {
    for (Eigen::Index d = 0; d < D; ++d) {
      result.col_factors(j, d) = cols(j, d);
    }
  }
  return result;
}

}  // namespace matchtu
