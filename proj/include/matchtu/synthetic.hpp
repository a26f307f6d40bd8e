#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "matchtu/market.hpp"
#include "matchtu/matrix.hpp"
#include "matchtu/random.hpp"

namespace matchtu {

// Synthetic market recipe: preference entries interpolate between i.i.d.
// uniform noise and a shared index ramp. lambda = 0 gives independent
// tastes; lambda = 1 makes every user on a side rank the other side
// identically (maximal crowding).
struct CrowdingConfig {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  MarketShape shape;
};

// p(x,y) = (1-lambda) * U + lambda * (y+1)/|Y|
// q(y,x) = (1-lambda) * U' + lambda * (x+1)/|X|
// with U, U' drawn from the seeded stream (all of P first, then all of Q,
// row-major). Every entry lands in [0, 1].
inline DensePrefs generate_preferences(const CrowdingConfig& cfg) {
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) {
    throw std::invalid_argument(
        "generate_preferences: lambda must lie in [0, 1]");
  }
  const std::size_t X = cfg.shape.num_candidates;
  const std::size_t Y = cfg.shape.num_employers;
  if (X < 1 || Y < 1) {
    throw std::invalid_argument("generate_preferences: empty market side");
  }

  Rng rng(cfg.seed);
  const double lam = cfg.lambda;
  const double mix = 1.0 - lam;

  DensePrefs prefs{Matrix(X, Y), Matrix(X, Y)};
  for (std::size_t x = 0; x < X; ++x) {
    double* row = prefs.P.row(x);
    for (std::size_t y = 0; y < Y; ++y) {
      const double ramp = static_cast<double>(y + 1) / static_cast<double>(Y);
      row[y] = mix * rng.next_double() + lam * ramp;
    }
  }
  for (std::size_t x = 0; x < X; ++x) {
    const double ramp = static_cast<double>(x + 1) / static_cast<double>(X);
    double* row = prefs.Q.row(x);
    for (std::size_t y = 0; y < Y; ++y) {
      row[y] = mix * rng.next_double() + lam * ramp;
    }
  }
  return prefs;
}

// Binary interaction matrices, candidate-major on both sides.
struct ObservationMatrix {
  Matrix candidate_side;  // O_p, entry ~ Bernoulli(p(x,y))
  Matrix employer_side;   // O_q, entry ~ Bernoulli(q(y,x))
};

// Draws one Bernoulli sample per preference entry, each side from its own
// derived substream.
inline ObservationMatrix sample_observations(const DensePrefs& prefs,
                                             std::uint64_t seed) {
  const std::size_t X = prefs.P.rows();
  const std::size_t Y = prefs.P.cols();
  for (const Matrix* m : {&prefs.P, &prefs.Q}) {
    const double* p = m->data();
    for (std::size_t i = 0; i < m->size(); ++i) {
      if (!(p[i] >= 0.0 && p[i] <= 1.0)) {
        throw std::invalid_argument(
            "sample_observations: preference entry outside [0, 1] is not a "
            "probability");
      }
    }
  }

  ObservationMatrix obs{Matrix(X, Y), Matrix(X, Y)};
  Rng rng_p(derive_seed(seed, 0));
  Rng rng_q(derive_seed(seed, 1));
  for (std::size_t i = 0; i < obs.candidate_side.size(); ++i) {
    obs.candidate_side.data()[i] =
        rng_p.next_double() < prefs.P.data()[i] ? 1.0 : 0.0;
  }
  for (std::size_t i = 0; i < obs.employer_side.size(); ++i) {
    obs.employer_side.data()[i] =
        rng_q.next_double() < prefs.Q.data()[i] ? 1.0 : 0.0;
  }
  return obs;
}

// Factor vectors drawn uniformly from [0, 1/sqrt(D)], the sampling used for
// the scaling benchmarks. Fill order: F, K, G, L, each row-major.
inline FactorizedPrefs sample_uniform_factors(const MarketShape& shape,
                                              std::uint64_t seed) {
  if (shape.factor_dim < 1) {
    throw std::invalid_argument("sample_uniform_factors: factor_dim must be >= 1");
  }
  const std::size_t X = shape.num_candidates;
  const std::size_t Y = shape.num_employers;
  const std::size_t D = shape.factor_dim;
  const double hi = 1.0 / std::sqrt(static_cast<double>(D));

  Rng rng(seed);
  FactorizedPrefs f{Matrix(X, D), Matrix(X, D), Matrix(Y, D), Matrix(Y, D)};
  for (Matrix* m : {&f.F, &f.K, &f.G, &f.L}) {
    double* p = m->data();
    for (std::size_t i = 0; i < m->size(); ++i) p[i] = rng.uniform(0.0, hi);
  }
  return f;
}

}  // namespace matchtu
