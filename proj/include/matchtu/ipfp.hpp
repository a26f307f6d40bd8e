#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "matchtu/market.hpp"
#include "matchtu/matrix.hpp"
#include "matchtu/memory.hpp"

namespace matchtu {

struct SolverConfig {
  double beta = 1.0;        // entropy scale; larger flattens the matching
  int max_iters = 100;      // iteration budget I
  double residual_tol = 0.0;  // 0 disables early stopping
  std::size_t batch_size = 100;  // mini-batch solver only
};

// Scaling vectors u_x = sqrt(mu_{x,0}) and v_y = sqrt(mu_{0,y}) — the
// solver's entire mutable state — plus where the iteration stopped.
struct ScalingState {
  DVec u;
  DVec v;
  int iters_run = 0;
  double final_residual = 0.0;
};

struct IpfpDiagnostics {
  // Max relative change of (u, v) per iteration; this is also the quantity
  // the early-stopping rule compares against residual_tol.
  std::vector<double> per_iter_residual;
  std::vector<double> wall_time_per_iter_s;
  int iters_run = 0;
  bool converged = false;  // only meaningful when residual_tol > 0
};

// Equilibrium matching held entrywise: mu is |X| x |Y|, mu_x0 / mu_0y are the
// unmatched masses per side.
struct DenseMatching {
  Matrix mu;
  DVec mu_x0;
  DVec mu_0y;
};

// Equilibrium matching held as per-user vectors of width 2D+2 whose scaled
// dot product gives log mu: psi_x = (f_x, k_x, beta*log mu_{x,0}, 1) and
// xi_y = (g_y, l_y, 1, beta*log mu_{0,y}), so that
// mu_{x,y} = exp(<psi_x, xi_y> / 2beta) without materializing mu.
struct FactorizedMatching {
  Matrix psi;  // |X| x (2D+2)
  Matrix xi;   // |Y| x (2D+2)
  double beta = 1.0;
};

using MatchingPattern = std::variant<DenseMatching, FactorizedMatching>;

struct BatchSolveResult {
  DenseMatching matching;
  ScalingState state;
  IpfpDiagnostics diagnostics;
};

struct MinibatchSolveResult {
  FactorizedMatching matching;
  ScalingState state;
  IpfpDiagnostics diagnostics;
};

// Largest exp argument the kernel accepts before erroring out; beyond this
// exp(phi/2beta) leaves the double range (overflow or a hard zero).
inline constexpr double kKernelExpArgLimit = 700.0;

// Dense expansion refusal threshold for solve_batch on factorized input.
inline constexpr std::size_t kDenseEntryLimit = std::size_t{1} << 31;

class KernelOverflowError : public std::runtime_error {
 public:
  KernelOverflowError(double beta, double max_abs_phi)
      : std::runtime_error(
            "non-finite kernel: max |phi| = " + std::to_string(max_abs_phi) +
            " with beta = " + std::to_string(beta) +
            " puts |phi|/2beta above " + std::to_string(kKernelExpArgLimit)),
        beta(beta),
        max_abs_phi(max_abs_phi) {}

  double beta;
  double max_abs_phi;
};

// One coordinate update: the positive root of u^2 + 2 s u = mass_entry,
// evaluated as mass/(sqrt(mass + s^2) + s). The textbook form
// sqrt(mass + s^2) - s cancels catastrophically once s^2 >> mass.
inline double ipfp_u_update(double s, double mass_entry) {
  return mass_entry / (std::sqrt(mass_entry + s * s) + s);
}

namespace detail {

inline double factor_phi(const FactorizedPrefs& f, std::size_t x,
                         std::size_t y) {
  const std::size_t D = f.F.cols();
  return dot(f.F.row(x), f.G.row(y), D) + dot(f.K.row(x), f.L.row(y), D);
}

// Fills `out` rows [0, nrows) with phi values for left-side rows
// [row0, row0 + nrows) against every right-side row, returning max |phi|.
// Tiled over the right side so its factor slab stays cache-resident while
// the batch streams past it.
inline double fill_phi_rows(const Matrix& left_a, const Matrix& left_b,
                            std::size_t row0, std::size_t nrows,
                            const Matrix& right_a, const Matrix& right_b,
                            Matrix& out) {
  const std::size_t D = left_a.cols();
  const std::size_t N = right_a.rows();
  // Size the right-hand tile so both factor slabs sit in L1d.
  const std::size_t kTile =
      std::max<std::size_t>(32, 40960 / (16 * std::max<std::size_t>(D, 1)));
  double max_abs = 0.0;
  for (std::size_t t0 = 0; t0 < N; t0 += kTile) {
    const std::size_t t1 = std::min(N, t0 + kTile);
#pragma omp parallel for schedule(static) reduction(max : max_abs)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(nrows); ++r) {
      const double* a = left_a.row(row0 + r);
      const double* b = left_b.row(row0 + r);
      double* orow = out.row(r);
      double local = 0.0;
      for (std::size_t c = t0; c < t1; ++c) {
        const double phi =
            dot(a, right_a.row(c), D) + dot(b, right_b.row(c), D);
        local = std::max(local, std::abs(phi));
        orow[c] = phi;
      }
      max_abs = std::max(max_abs, local);
    }
  }
  return max_abs;
}

inline void exp_rows_inplace(Matrix& m, std::size_t nrows, double divisor) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(nrows); ++r) {
    double* row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      row[c] = std::exp(row[c] / divisor);
    }
  }
}

inline void check_exp_argument(double max_abs_phi, double beta) {
  if (max_abs_phi / (2.0 * beta) > kKernelExpArgLimit) {
    throw KernelOverflowError(beta, max_abs_phi);
  }
}

// u_x <- update(s_x, n_x) with s = (A v)/2, row by row.
inline void kernel_u_update(const Matrix& A, std::size_t nrows,
                            std::size_t row0, const DVec& v, const DVec& n,
                            DVec& u) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(nrows); ++r) {
    const double s = 0.5 * dot(A.row(r), v.data(), A.cols());
    u[row0 + r] = ipfp_u_update(s, n[row0 + r]);
  }
}

// v_y <- update(s_y, m_y) with s = (A^T u)/2, accumulated in ascending-x
// order per column; matches a sequential dot over x exactly.
inline void dense_v_update(const Matrix& A, const DVec& u, const DVec& m,
                           DVec& v, DVec& s_work) {
  const std::size_t X = A.rows();
  const std::size_t Y = A.cols();
  const std::size_t kChunk = 2048;
  const std::size_t nchunks = (Y + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(nchunks);
       ++ci) {
    const std::size_t y0 = static_cast<std::size_t>(ci) * kChunk;
    const std::size_t y1 = std::min(Y, y0 + kChunk);
    std::fill(s_work.begin() + y0, s_work.begin() + y1, 0.0);
    for (std::size_t x = 0; x < X; ++x) {
      const double ux = u[x];
      const double* row = A.row(x);
      for (std::size_t y = y0; y < y1; ++y) s_work[y] += row[y] * ux;
    }
  }
  for (std::size_t y = 0; y < Y; ++y) {
    v[y] = ipfp_u_update(0.5 * s_work[y], m[y]);
  }
}

inline double max_rel_change(const DVec& prev, const DVec& cur) {
  double r = 0.0;
  for (std::size_t i = 0; i < cur.size(); ++i) {
    r = std::max(r, std::abs(cur[i] - prev[i]) / cur[i]);
  }
  return r;
}

inline void validate_solver_inputs(const MarketShape& shape,
                                   const MassSpec& mass,
                                   const SolverConfig& cfg) {
  if (!(cfg.beta > 0.0)) {
    throw std::invalid_argument("solver: beta must be positive");
  }
  if (cfg.max_iters < 1) {
    throw std::invalid_argument("solver: max_iters must be >= 1");
  }
  if (cfg.residual_tol < 0.0) {
    throw std::invalid_argument("solver: residual_tol must be >= 0");
  }
  if (mass.n.size() != shape.num_candidates ||
      mass.m.size() != shape.num_employers) {
    throw std::invalid_argument("solver: mass vectors do not match the model");
  }
}

}  // namespace detail

// Materializes the kernel A = exp(phi / 2beta). Factorized models are
// expanded entry by entry; dense models add P and Q. Refuses factorized
// expansions past kDenseEntryLimit and errors before exponentiating anything
// that would overflow.
inline Matrix build_dense_kernel(const PreferenceModel& prefs, double beta) {
  const MarketShape shape = shape_of(prefs);
  const std::size_t X = shape.num_candidates;
  const std::size_t Y = shape.num_employers;
  const double divisor = 2.0 * beta;

  if (const auto* f = std::get_if<FactorizedPrefs>(&prefs)) {
    if (X != 0 && Y > kDenseEntryLimit / X) {
      throw std::invalid_argument(
          "build_dense_kernel: " + std::to_string(X) + "x" +
          std::to_string(Y) +
          " expansion exceeds the dense entry limit; use solve_minibatch");
    }
    Matrix A(X, Y);
    const double max_abs =
        detail::fill_phi_rows(f->F, f->K, 0, X, f->G, f->L, A);
    detail::check_exp_argument(max_abs, beta);
    detail::exp_rows_inplace(A, X, divisor);
    return A;
  }

  const auto& d = std::get<DensePrefs>(prefs);
  Matrix A(X, Y);
  double max_abs = 0.0;
  const double* p = d.P.data();
  const double* q = d.Q.data();
  double* a = A.data();
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double phi = p[i] + q[i];
    max_abs = std::max(max_abs, std::abs(phi));
    a[i] = phi;
  }
  detail::check_exp_argument(max_abs, beta);
  detail::exp_rows_inplace(A, X, divisor);
  return A;
}

// Batch IPFP: materializes the full kernel once, then alternates whole-side
// scaling updates (the v-side always consumes the freshly updated u). With
// residual_tol = 0 it runs exactly max_iters; otherwise it stops as soon as
// the max relative change of (u, v) drops below the tolerance.
inline BatchSolveResult solve_batch(const PreferenceModel& prefs,
                                    const MassSpec& mass,
                                    const SolverConfig& cfg) {
  const MarketShape shape = shape_of(prefs);
  detail::validate_solver_inputs(shape, mass, cfg);

  const std::size_t X = shape.num_candidates;
  const std::size_t Y = shape.num_employers;

  Matrix A = build_dense_kernel(prefs, cfg.beta);

  DVec u(X, 1.0), v(Y, 1.0);
  DVec u_prev(X), v_prev(Y), s_work(Y);

  IpfpDiagnostics diag;
  diag.per_iter_residual.reserve(cfg.max_iters);
  diag.wall_time_per_iter_s.reserve(cfg.max_iters);

  double residual = 0.0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    u_prev = u;
    v_prev = v;
    const auto t0 = std::chrono::steady_clock::now();
    detail::kernel_u_update(A, X, 0, v, mass.n, u);
    detail::dense_v_update(A, u, mass.m, v, s_work);
    const auto t1 = std::chrono::steady_clock::now();

    residual = std::max(detail::max_rel_change(u_prev, u),
                        detail::max_rel_change(v_prev, v));
    diag.per_iter_residual.push_back(residual);
    diag.wall_time_per_iter_s.push_back(
        std::chrono::duration<double>(t1 - t0).count());
    diag.iters_run = iter + 1;
    if (cfg.residual_tol > 0.0 && residual < cfg.residual_tol) {
      diag.converged = true;
      break;
    }
  }

  // mu = A ⊙ (u ⊗ v), reusing the kernel's storage.
  for (std::size_t x = 0; x < X; ++x) {
    const double ux = u[x];
    double* row = A.row(x);
    for (std::size_t y = 0; y < Y; ++y) row[y] = row[y] * (ux * v[y]);
  }
  DVec mu_x0(X), mu_0y(Y);
  for (std::size_t x = 0; x < X; ++x) mu_x0[x] = u[x] * u[x];
  for (std::size_t y = 0; y < Y; ++y) mu_0y[y] = v[y] * v[y];

  ScalingState state{u, v, diag.iters_run, residual};
  return BatchSolveResult{
      DenseMatching{std::move(A), std::move(mu_x0), std::move(mu_0y)},
      std::move(state), std::move(diag)};
}

// Mini-batch IPFP: regenerates kernel rows from the factor vectors one batch
// at a time, so live state stays O(B * max(|X|,|Y|) + (|X|+|Y|) * D). Within
// one side the batches write disjoint slices and read only the other side's
// vector, so the result is identical for every batch size.
inline MinibatchSolveResult solve_minibatch(const PreferenceModel& prefs,
                                            const MassSpec& mass,
                                            const SolverConfig& cfg) {
  const auto* f = std::get_if<FactorizedPrefs>(&prefs);
  if (f == nullptr) {
    throw std::invalid_argument(
        "solve_minibatch: dense models are not accepted; mini-batch updates "
        "need factor vectors");
  }
  const MarketShape shape = shape_of(prefs);
  detail::validate_solver_inputs(shape, mass, cfg);
  if (cfg.batch_size < 1) {
    throw std::invalid_argument("solve_minibatch: batch_size must be >= 1");
  }

  const std::size_t X = shape.num_candidates;
  const std::size_t Y = shape.num_employers;
  const std::size_t D = shape.factor_dim;
  const std::size_t Bx = std::min(cfg.batch_size, X);
  const std::size_t By = std::min(cfg.batch_size, Y);
  const double divisor = 2.0 * cfg.beta;

  Matrix Au(Bx, Y);  // kernel rows for one candidate batch
  Matrix Av(By, X);  // kernel rows for one employer batch

  DVec u(X, 1.0), v(Y, 1.0);
  DVec u_prev(X), v_prev(Y);

  IpfpDiagnostics diag;
  diag.per_iter_residual.reserve(cfg.max_iters);
  diag.wall_time_per_iter_s.reserve(cfg.max_iters);

  double residual = 0.0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    u_prev = u;
    v_prev = v;
    const auto t0 = std::chrono::steady_clock::now();

    for (std::size_t x0 = 0; x0 < X; x0 += Bx) {
      const std::size_t rows = std::min(Bx, X - x0);
      const double max_abs =
          detail::fill_phi_rows(f->F, f->K, x0, rows, f->G, f->L, Au);
      detail::check_exp_argument(max_abs, cfg.beta);
      detail::exp_rows_inplace(Au, rows, divisor);
      detail::kernel_u_update(Au, rows, x0, v, mass.n, u);
    }

    for (std::size_t y0 = 0; y0 < Y; y0 += By) {
      const std::size_t rows = std::min(By, Y - y0);
      const double max_abs =
          detail::fill_phi_rows(f->G, f->L, y0, rows, f->F, f->K, Av);
      detail::check_exp_argument(max_abs, cfg.beta);
      detail::exp_rows_inplace(Av, rows, divisor);
      // Sequential accumulation over x, matching the batch solver's
      // column-order sums bit for bit.
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
        const double s = 0.5 * dot_sequential(Av.row(r), u.data(), X);
        v[y0 + r] = ipfp_u_update(s, mass.m[y0 + r]);
      }
    }

    const auto t1 = std::chrono::steady_clock::now();
    residual = std::max(detail::max_rel_change(u_prev, u),
                        detail::max_rel_change(v_prev, v));
    diag.per_iter_residual.push_back(residual);
    diag.wall_time_per_iter_s.push_back(
        std::chrono::duration<double>(t1 - t0).count());
    diag.iters_run = iter + 1;
    if (cfg.residual_tol > 0.0 && residual < cfg.residual_tol) {
      diag.converged = true;
      break;
    }
  }

  // Stable factor vectors of width 2D+2. The third block carries
  // beta*log(mu_{x,0}) = 2beta*log(u_x) against xi's constant 1, and
  // symmetrically for the employer side, so that
  // <psi_x, xi_y> / 2beta = phi/2beta + log(u_x v_y) = log mu_{x,y}.
  Matrix psi(X, 2 * D + 2);
  Matrix xi(Y, 2 * D + 2);
  for (std::size_t x = 0; x < X; ++x) {
    double* row = psi.row(x);
    const double* frow = f->F.row(x);
    const double* krow = f->K.row(x);
    for (std::size_t d = 0; d < D; ++d) row[d] = frow[d];
    for (std::size_t d = 0; d < D; ++d) row[D + d] = krow[d];
    row[2 * D] = 2.0 * cfg.beta * std::log(u[x]);
    row[2 * D + 1] = 1.0;
  }
  for (std::size_t y = 0; y < Y; ++y) {
    double* row = xi.row(y);
    const double* grow = f->G.row(y);
    const double* lrow = f->L.row(y);
    for (std::size_t d = 0; d < D; ++d) row[d] = grow[d];
    for (std::size_t d = 0; d < D; ++d) row[D + d] = lrow[d];
    row[2 * D] = 1.0;
    row[2 * D + 1] = 2.0 * cfg.beta * std::log(v[y]);
  }

  ScalingState state{u, v, diag.iters_run, residual};
  return MinibatchSolveResult{
      FactorizedMatching{std::move(psi), std::move(xi), cfg.beta},
      std::move(state), std::move(diag)};
}

// Match mass for one pair from its stable factor vectors.
inline double reconstruct_mu(std::span<const double> psi_row,
                             std::span<const double> xi_row, double beta) {
  if (psi_row.size() != xi_row.size()) {
    throw std::invalid_argument("reconstruct_mu: vector length mismatch");
  }
  if (psi_row.size() < 2 || psi_row.size() % 2 != 0) {
    throw std::invalid_argument(
        "reconstruct_mu: vectors must have length 2D+2");
  }
  if (!(beta > 0.0)) {
    throw std::invalid_argument("reconstruct_mu: beta must be positive");
  }
  return std::exp(dot(psi_row, xi_row) / (2.0 * beta));
}

inline Matrix reconstruct_mu_matrix(const FactorizedMatching& fm) {
  Matrix mu(fm.psi.rows(), fm.xi.rows());
  for (std::size_t x = 0; x < fm.psi.rows(); ++x) {
    double* row = mu.row(x);
    for (std::size_t y = 0; y < fm.xi.rows(); ++y) {
      row[y] = reconstruct_mu(fm.psi.row_span(x), fm.xi.row_span(y), fm.beta);
    }
  }
  return mu;
}

// Max relative violation of the stability relation
// mu_{x,y} = exp(phi/2beta) * u_x * v_y over all pairs. Solver outputs
// satisfy this by construction; the substantive convergence check is
// constraint_residual.
inline double stability_residual(const PreferenceModel& prefs,
                                 const MatchingPattern& pattern,
                                 const ScalingState& state, double beta) {
  const MarketShape shape = shape_of(prefs);
  const std::size_t X = shape.num_candidates;
  const std::size_t Y = shape.num_employers;
  if (state.u.size() != X || state.v.size() != Y) {
    throw std::invalid_argument("stability_residual: state shape mismatch");
  }
  if (!(beta > 0.0)) {
    throw std::invalid_argument("stability_residual: beta must be positive");
  }
  const double divisor = 2.0 * beta;

  auto mu_at = [&](std::size_t x, std::size_t y) -> double {
    if (const auto* d = std::get_if<DenseMatching>(&pattern)) {
      return d->mu(x, y);
    }
    const auto& fm = std::get<FactorizedMatching>(pattern);
    return reconstruct_mu(fm.psi.row_span(x), fm.xi.row_span(y), fm.beta);
  };

  if (const auto* d = std::get_if<DenseMatching>(&pattern)) {
    if (d->mu.rows() != X || d->mu.cols() != Y) {
      throw std::invalid_argument("stability_residual: pattern shape mismatch");
    }
  } else {
    const auto& fm = std::get<FactorizedMatching>(pattern);
    if (fm.psi.rows() != X || fm.xi.rows() != Y) {
      throw std::invalid_argument("stability_residual: pattern shape mismatch");
    }
  }

  double worst = 0.0;
  for (std::size_t x = 0; x < X; ++x) {
    for (std::size_t y = 0; y < Y; ++y) {
      const double mu = mu_at(x, y);
      const double expected =
          std::exp(joint_utility(prefs, x, y) / divisor) *
          (state.u[x] * state.v[y]);
      worst = std::max(worst, std::abs(mu - expected) / mu);
    }
  }
  return worst;
}

// Max relative violation of the capacity constraints:
// |mu_{x,0} + sum_y mu_{x,y} - n_x| / n_x over rows and the symmetric
// expression over columns. Decreases toward zero as IPFP converges.
inline double constraint_residual(const DenseMatching& pattern,
                                  const MassSpec& mass) {
  const std::size_t X = pattern.mu.rows();
  const std::size_t Y = pattern.mu.cols();
  if (mass.n.size() != X || mass.m.size() != Y ||
      pattern.mu_x0.size() != X || pattern.mu_0y.size() != Y) {
    throw std::invalid_argument("constraint_residual: shape mismatch");
  }

  double worst = 0.0;
  std::vector<double> col_sum(Y, 0.0);
  for (std::size_t x = 0; x < X; ++x) {
    const double* row = pattern.mu.row(x);
    double row_sum = 0.0;
    for (std::size_t y = 0; y < Y; ++y) {
      row_sum += row[y];
      col_sum[y] += row[y];
    }
    worst = std::max(worst,
                     std::abs(pattern.mu_x0[x] + row_sum - mass.n[x]) /
                         mass.n[x]);
  }
  for (std::size_t y = 0; y < Y; ++y) {
    worst = std::max(worst,
                     std::abs(pattern.mu_0y[y] + col_sum[y] - mass.m[y]) /
                         mass.m[y]);
  }
  return worst;
}

}  // namespace matchtu
