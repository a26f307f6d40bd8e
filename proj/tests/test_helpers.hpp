#pragma once

// Shared helpers for the test suites, including the independent fixed-point
// oracle the solver results are checked against.

#include <cmath>
#include <cstdint>
#include <vector>

#include "matchtu/market.hpp"
#include "matchtu/matrix.hpp"
#include "matchtu/random.hpp"

namespace testutil {

struct OracleResult {
  std::vector<double> mu_x0;
  std::vector<double> mu_0y;
  matchtu::Matrix mu;
  int iters = 0;
  double final_delta = 0.0;
};

// Damped Jacobi successive substitution on the unmatched masses: both sides
// are re-solved from the previous iterate's masses (no scaling vectors, no
// Gauss-Seidel sweep), which keeps it an independent route to the same fixed
// point as the production solver.
inline OracleResult fixed_point_oracle(const matchtu::Matrix& phi,
                                       const std::vector<double>& n,
                                       const std::vector<double>& m,
                                       double beta, double damping = 0.5,
                                       double tol = 1e-14,
                                       int max_iters = 500000) {
  const std::size_t X = phi.rows();
  const std::size_t Y = phi.cols();
  matchtu::Matrix A(X, Y);
  for (std::size_t x = 0; x < X; ++x) {
    for (std::size_t y = 0; y < Y; ++y) {
      A(x, y) = std::exp(phi(x, y) / (2.0 * beta));
    }
  }

  std::vector<double> mx(n.begin(), n.end());
  std::vector<double> my(m.begin(), m.end());
  OracleResult out;
  for (out.iters = 0; out.iters < max_iters; ++out.iters) {
    std::vector<double> nx(X), ny(Y);
    for (std::size_t x = 0; x < X; ++x) {
      double t = 0.0;
      for (std::size_t y = 0; y < Y; ++y) t += A(x, y) * std::sqrt(my[y]);
      const double z = (-t + std::sqrt(t * t + 4.0 * n[x])) / 2.0;
      nx[x] = (1.0 - damping) * mx[x] + damping * z * z;
    }
    for (std::size_t y = 0; y < Y; ++y) {
      double t = 0.0;
      for (std::size_t x = 0; x < X; ++x) t += A(x, y) * std::sqrt(mx[x]);
      const double z = (-t + std::sqrt(t * t + 4.0 * m[y])) / 2.0;
      ny[y] = (1.0 - damping) * my[y] + damping * z * z;
    }
    double delta = 0.0;
    for (std::size_t x = 0; x < X; ++x) {
      delta = std::max(delta, std::abs(nx[x] - mx[x]) / nx[x]);
    }
    for (std::size_t y = 0; y < Y; ++y) {
      delta = std::max(delta, std::abs(ny[y] - my[y]) / ny[y]);
    }
    mx = nx;
    my = ny;
    out.final_delta = delta;
    if (delta < tol) break;
  }

  out.mu = matchtu::Matrix(X, Y);
  for (std::size_t x = 0; x < X; ++x) {
    for (std::size_t y = 0; y < Y; ++y) {
      out.mu(x, y) = A(x, y) * std::sqrt(mx[x] * my[y]);
    }
  }
  out.mu_x0 = std::move(mx);
  out.mu_0y = std::move(my);
  return out;
}

inline matchtu::Matrix random_matrix(std::size_t rows, std::size_t cols,
                                     std::uint64_t seed, double lo = 0.0,
                                     double hi = 1.0) {
  matchtu::Rng rng(seed);
  matchtu::Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform(lo, hi);
  }
  return m;
}

// Positive per-user masses drawn around C/side and rescaled to sum to C.
inline matchtu::MassSpec random_mass(std::size_t X, std::size_t Y, double C,
                                     std::uint64_t seed) {
  matchtu::Rng rng(seed);
  matchtu::MassSpec mass;
  mass.total_mass = C;
  mass.n.resize(X);
  mass.m.resize(Y);
  double sum = 0.0;
  for (auto& v : mass.n) sum += (v = rng.uniform(0.5, 1.5));
  for (auto& v : mass.n) v *= C / sum;
  sum = 0.0;
  for (auto& v : mass.m) sum += (v = rng.uniform(0.5, 1.5));
  for (auto& v : mass.m) v *= C / sum;
  return mass;
}

inline double max_rel_diff(const matchtu::Matrix& a, const matchtu::Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst,
                     std::abs(a.data()[i] - b.data()[i]) /
                         std::abs(b.data()[i]));
  }
  return worst;
}

}  // namespace testutil
