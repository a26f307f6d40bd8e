#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "matchtu/ials.hpp"
#include "matchtu/ipfp.hpp"
#include "matchtu/market.hpp"
#include "matchtu/ranking.hpp"
#include "matchtu/random.hpp"
#include "matchtu/synthetic.hpp"

namespace matchtu {

// The position-based two-sided welfare this library reports: a pair matches
// when each side examines the other's slot and accepts with probability
// equal to its true preference. Recorded in every report for auditability.
inline constexpr const char* kWelfareFormula =
    "sum_{x,y} p[x,y]*v(rank_x(y)) * q[x,y]*v(rank_y(x))";

// Expected total matches of a ranking policy under the examination model,
// always evaluated against the true (generating or imputed) preferences.
inline double expected_matches(const Matrix& true_p, const Matrix& true_q,
                               const RankingTable& rankings, ExamKind exam) {
  const std::size_t X = true_p.rows();
  const std::size_t Y = true_p.cols();
  if (true_q.rows() != X || true_q.cols() != Y) {
    throw std::invalid_argument("expected_matches: p/q shape mismatch");
  }
  if (rankings.candidate_lists.size() != X ||
      rankings.employer_lists.size() != Y) {
    throw std::invalid_argument(
        "expected_matches: rankings do not cover the market");
  }
  for (const Matrix* m : {&true_p, &true_q}) {
    for (std::size_t i = 0; i < m->size(); ++i) {
      const double v = m->data()[i];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument(
            "expected_matches: true preferences must lie in [0, 1]");
      }
    }
  }

  // Invert the lists once: exam weight by rank position, addressed by pair.
  Matrix cand_weight(X, Y);
  Matrix emp_weight(X, Y);
  for (std::size_t x = 0; x < X; ++x) {
    const auto& list = rankings.candidate_lists[x];
    if (list.size() != Y) {
      throw std::invalid_argument("expected_matches: ragged candidate list");
    }
    for (std::size_t pos = 0; pos < Y; ++pos) {
      cand_weight(x, list[pos]) =
          examination(static_cast<std::int64_t>(pos) + 1, exam);
    }
  }
  for (std::size_t y = 0; y < Y; ++y) {
    const auto& list = rankings.employer_lists[y];
    if (list.size() != X) {
      throw std::invalid_argument("expected_matches: ragged employer list");
    }
    for (std::size_t pos = 0; pos < X; ++pos) {
      emp_weight(list[pos], y) =
          examination(static_cast<std::int64_t>(pos) + 1, exam);
    }
  }

  double total = 0.0;
  for (std::size_t x = 0; x < X; ++x) {
    for (std::size_t y = 0; y < Y; ++y) {
      total += true_p(x, y) * cand_weight(x, y) * true_q(x, y) *
               emp_weight(x, y);
    }
  }
  return total;
}

struct ComparisonConfig {
  MarketShape shape{1000, 500, 0};
  double lambda = 0.0;
  double beta = 1.0;
  int solver_iters = 100;
  std::size_t minibatch_size = 128;
  int repetitions = 10;
  std::uint64_t seed = 0;
  FactorizeConfig factorization;  // used for the mini-batch TU policy
  ExamKind exam = ExamKind::kExponential;
  std::vector<PolicyKind> policies{
      PolicyKind::kNaive, PolicyKind::kReciprocalProduct,
      PolicyKind::kCrossRatio, PolicyKind::kTuBatch,
      PolicyKind::kTuMinibatch};
};

struct PolicyStats {
  PolicyKind policy;
  std::vector<double> values;  // one expected-match total per repetition
  double mean = 0.0;
  std::optional<double> std_error;  // absent with fewer than 2 repetitions
};

struct WelfareReport {
  ComparisonConfig config;
  std::vector<PolicyStats> per_policy;
  int repetitions = 0;
  std::string formula = kWelfareFormula;

  const PolicyStats& stats_for(PolicyKind kind) const {
    for (const auto& s : per_policy) {
      if (s.policy == kind) return s;
    }
    throw std::out_of_range("WelfareReport: policy not evaluated");
  }
};

namespace detail {

template <class F>
auto run_stage(const char* stage, F&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(stage) + ": " + e.what());
  }
}

}  // namespace detail

// One full synthetic-market evaluation: per repetition, generate true
// preferences, simulate observations, factorize them, solve whichever TU
// variants are requested, rank every policy's scores, and accumulate the
// expected-match totals. Baselines and the batch solver see the true dense
// preferences; the mini-batch solver works from the fitted factors, which is
// what costs it the small gap in the reports.
inline WelfareReport run_comparison(const ComparisonConfig& cfg) {
  if (cfg.repetitions < 1) {
    throw std::invalid_argument("run_comparison: repetitions must be >= 1");
  }
  if (cfg.policies.empty()) {
    throw std::invalid_argument("run_comparison: no policies requested");
  }

  const bool want_batch =
      std::find(cfg.policies.begin(), cfg.policies.end(),
                PolicyKind::kTuBatch) != cfg.policies.end();
  const bool want_minibatch =
      std::find(cfg.policies.begin(), cfg.policies.end(),
                PolicyKind::kTuMinibatch) != cfg.policies.end();

  WelfareReport report;
  report.config = cfg;
  report.repetitions = cfg.repetitions;
  for (PolicyKind kind : cfg.policies) {
    report.per_policy.push_back(PolicyStats{kind, {}, 0.0, std::nullopt});
  }

  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const std::uint64_t rep_seed = derive_seed(cfg.seed, rep);

    const DensePrefs truth = detail::run_stage("generate", [&] {
      return generate_preferences({cfg.lambda, rep_seed, cfg.shape});
    });
    const PreferenceModel truth_model = truth;

    std::optional<MassSpec> mass;
    std::optional<MatchingPattern> batch_pattern;
    std::optional<MatchingPattern> minibatch_pattern;

    if (want_batch || want_minibatch) {
      mass = uniform_mass(cfg.shape, 1.0);
    }
    if (want_batch) {
      batch_pattern = detail::run_stage("solve-batch", [&] {
        SolverConfig scfg{cfg.beta, cfg.solver_iters, 0.0, 0};
        return MatchingPattern(
            solve_batch(truth_model, *mass, scfg).matching);
      });
    }
    if (want_minibatch) {
      const ObservationMatrix obs = detail::run_stage("observe", [&] {
        return sample_observations(truth, derive_seed(rep_seed, 1));
      });
      const PreferenceModel fitted = detail::run_stage("factorize", [&] {
        FactorizeConfig fc = cfg.factorization;
        fc.seed = derive_seed(rep_seed, 2);
        const FactorizeResult p_fit =
            factorize_implicit(obs.candidate_side, fc);
        fc.seed = derive_seed(rep_seed, 3);
        const FactorizeResult q_fit =
            factorize_implicit(obs.employer_side, fc);
        return PreferenceModel(FactorizedPrefs{
            p_fit.row_factors, q_fit.row_factors, p_fit.col_factors,
            q_fit.col_factors});
      });
      minibatch_pattern = detail::run_stage("solve-minibatch", [&] {
        SolverConfig scfg{cfg.beta, cfg.solver_iters, 0.0,
                          cfg.minibatch_size};
        return MatchingPattern(
            solve_minibatch(fitted, *mass, scfg).matching);
      });
    }

    for (auto& stats : report.per_policy) {
      const MatchingPattern* pattern = nullptr;
      if (stats.policy == PolicyKind::kTuBatch) {
        pattern = &*batch_pattern;
      } else if (stats.policy == PolicyKind::kTuMinibatch) {
        pattern = &*minibatch_pattern;
      }
      const double value = detail::run_stage("evaluate", [&] {
        const Matrix scores =
            score_policy(stats.policy, truth_model, pattern);
        const RankingTable rankings = build_rankings(scores);
        return expected_matches(truth.P, truth.Q, rankings, cfg.exam);
      });
      stats.values.push_back(value);
    }
  }

  for (auto& stats : report.per_policy) {
    double sum = 0.0;
    for (double v : stats.values) sum += v;
    stats.mean = sum / static_cast<double>(stats.values.size());
    if (stats.values.size() >= 2) {
      double ss = 0.0;
      for (double v : stats.values) ss += (v - stats.mean) * (v - stats.mean);
      const double n = static_cast<double>(stats.values.size());
      stats.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
  }
  return report;
}

}  // namespace matchtu
