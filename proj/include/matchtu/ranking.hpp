#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "matchtu/ipfp.hpp"
#include "matchtu/market.hpp"
#include "matchtu/matrix.hpp"

namespace matchtu {

// Recommendation policies under comparison: three classical reciprocal
// scorers plus the equilibrium matching from either solver.
enum class PolicyKind {
  kNaive,              // candidate-side score p alone
  kReciprocalProduct,  // p * q
  kCrossRatio,         // cross-ratio uninorm of p and q
  kTuBatch,            // equilibrium mu from the batch solver
  kTuMinibatch,        // equilibrium mu reconstructed from stable factors
};

inline const char* to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kNaive: return "naive";
    case PolicyKind::kReciprocalProduct: return "reciprocal";
    case PolicyKind::kCrossRatio: return "cross-ratio";
    case PolicyKind::kTuBatch: return "tu-batch";
    case PolicyKind::kTuMinibatch: return "tu-minibatch";
  }
  return "unknown";
}

inline std::optional<PolicyKind> parse_policy(const std::string& name) {
  if (name == "naive") return PolicyKind::kNaive;
  if (name == "reciprocal") return PolicyKind::kReciprocalProduct;
  if (name == "cross-ratio") return PolicyKind::kCrossRatio;
  if (name == "tu-batch") return PolicyKind::kTuBatch;
  if (name == "tu-minibatch") return PolicyKind::kTuMinibatch;
  return std::nullopt;
}

// Cross-ratio uninorm: pq / (pq + (1-p)(1-q)). Symmetric, neutral at 0.5,
// and annihilated by a hard zero; the conflicting 0/0 corner is defined as 0
// (no match when one side fully rejects).
inline double cross_ratio(double p, double q) {
  const double num = p * q;
  const double den = num + (1.0 - p) * (1.0 - q);
  return den == 0.0 ? 0.0 : num / den;
}

// Presentation lists for both sides, one permutation per user.
struct RankingTable {
  std::vector<std::vector<std::uint32_t>> candidate_lists;  // per x over y
  std::vector<std::vector<std::uint32_t>> employer_lists;   // per y over x
};

namespace detail {

inline Matrix candidate_scores(const PreferenceModel& prefs) {
  if (const auto* d = std::get_if<DensePrefs>(&prefs)) return d->P;
  const auto& f = std::get<FactorizedPrefs>(prefs);
  const std::size_t X = f.F.rows(), Y = f.G.rows(), D = f.F.cols();
  Matrix p(X, Y);
  for (std::size_t x = 0; x < X; ++x) {
    double* row = p.row(x);
    for (std::size_t y = 0; y < Y; ++y) {
      row[y] = dot(f.F.row(x), f.G.row(y), D);
    }
  }
  return p;
}

inline Matrix employer_scores(const PreferenceModel& prefs) {
  if (const auto* d = std::get_if<DensePrefs>(&prefs)) return d->Q;
  const auto& f = std::get<FactorizedPrefs>(prefs);
  const std::size_t X = f.K.rows(), Y = f.L.rows(), D = f.K.cols();
  Matrix q(X, Y);
  for (std::size_t x = 0; x < X; ++x) {
    double* row = q.row(x);
    for (std::size_t y = 0; y < Y; ++y) {
      row[y] = dot(f.K.row(x), f.L.row(y), D);
    }
  }
  return q;
}

inline void require_unit_interval(const Matrix& m, const char* what) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double v = m.data()[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument(std::string("score_policy: ") + what +
                                  " entries must lie in [0, 1]");
    }
  }
}

}  // namespace detail

// Builds the |X| x |Y| score matrix a policy ranks by. TU policies read the
// equilibrium pattern (dense mu directly, factorized mu reconstructed
// pairwise) and require tu_pattern.
inline Matrix score_policy(PolicyKind kind, const PreferenceModel& prefs,
                           const MatchingPattern* tu_pattern = nullptr) {
  switch (kind) {
    case PolicyKind::kNaive:
      return detail::candidate_scores(prefs);
    case PolicyKind::kReciprocalProduct: {
      Matrix p = detail::candidate_scores(prefs);
      const Matrix q = detail::employer_scores(prefs);
      for (std::size_t i = 0; i < p.size(); ++i) {
        p.data()[i] *= q.data()[i];
      }
      return p;
    }
    case PolicyKind::kCrossRatio: {
      Matrix p = detail::candidate_scores(prefs);
      const Matrix q = detail::employer_scores(prefs);
      detail::require_unit_interval(p, "candidate-side");
      detail::require_unit_interval(q, "employer-side");
      for (std::size_t i = 0; i < p.size(); ++i) {
        p.data()[i] = cross_ratio(p.data()[i], q.data()[i]);
      }
      return p;
    }
    case PolicyKind::kTuBatch:
    case PolicyKind::kTuMinibatch: {
      if (tu_pattern == nullptr) {
        throw std::invalid_argument(
            "score_policy: TU policies need a solved matching pattern");
      }
      if (const auto* d = std::get_if<DenseMatching>(tu_pattern)) {
        return d->mu;
      }
      return reconstruct_mu_matrix(std::get<FactorizedMatching>(*tu_pattern));
    }
  }
  throw std::invalid_argument("score_policy: unknown policy");
}

// Descending sort per candidate over employers and per employer over
// candidates; ties break toward the lower index so runs are reproducible
// across platforms.
inline RankingTable build_rankings(const Matrix& scores) {
  const std::size_t X = scores.rows();
  const std::size_t Y = scores.cols();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores.data()[i])) {
      throw std::invalid_argument("build_rankings: non-finite score");
    }
  }

  RankingTable table;
  table.candidate_lists.assign(X, {});
  table.employer_lists.assign(Y, {});

  for (std::size_t x = 0; x < X; ++x) {
    auto& list = table.candidate_lists[x];
    list.resize(Y);
    std::iota(list.begin(), list.end(), 0u);
    const double* row = scores.row(x);
    std::stable_sort(list.begin(), list.end(),
                     [row](std::uint32_t a, std::uint32_t b) {
                       return row[a] > row[b];
                     });
  }
  for (std::size_t y = 0; y < Y; ++y) {
    auto& list = table.employer_lists[y];
    list.resize(X);
    std::iota(list.begin(), list.end(), 0u);
    std::stable_sort(list.begin(), list.end(),
                     [&scores, y](std::uint32_t a, std::uint32_t b) {
                       return scores(a, y) > scores(b, y);
                     });
  }
  return table;
}

enum class ExamKind { kExponential };

inline std::optional<ExamKind> parse_exam(const std::string& name) {
  if (name == "exp") return ExamKind::kExponential;
  return std::nullopt;
}

inline const char* to_string(ExamKind kind) {
  switch (kind) {
    case ExamKind::kExponential: return "exp";
  }
  return "unknown";
}

// Probability that a user inspects rank position k (1-based):
// v(k) = exp(-(k-1)), so the top slot is always examined.
inline double examination(std::int64_t k, ExamKind kind) {
  if (k < 1) {
    throw std::invalid_argument("examination: rank positions start at 1");
  }
  switch (kind) {
    case ExamKind::kExponential:
      return std::exp(-static_cast<double>(k - 1));
  }
  throw std::invalid_argument("examination: unknown kind");
}

}  // namespace matchtu
