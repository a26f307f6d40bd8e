#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "matchtu/matrix.hpp"
#include "matchtu/memory.hpp"

namespace matchtu {

// Relative tolerance on the per-side mass sums against the total mass.
inline constexpr double kMassRelTolerance = 1e-9;

struct MarketShape {
  std::size_t num_candidates = 0;  // |X|
  std::size_t num_employers = 0;   // |Y|
  std::size_t factor_dim = 0;      // D; 0 means dense-only model
};

// Bilateral scores held as full matrices. Q is stored candidate-major, i.e.
// Q(x, y) is the employer-side score q_{y,x}, so the joint utility is the
// elementwise sum P + Q.
struct DensePrefs {
  Matrix P;
  Matrix Q;
};

// Bilateral scores induced by factor vectors: the candidate-side score for
// (x, y) is <F.row(x), G.row(y)> and the employer-side score is
// <K.row(x), L.row(y)>. F, K are |X| x D; G, L are |Y| x D.
struct FactorizedPrefs {
  Matrix F;
  Matrix K;
  Matrix G;
  Matrix L;
};

using PreferenceModel = std::variant<DensePrefs, FactorizedPrefs>;

inline MarketShape shape_of(const PreferenceModel& prefs) {
  if (const auto* d = std::get_if<DensePrefs>(&prefs)) {
    return {d->P.rows(), d->P.cols(), 0};
  }
  const auto& f = std::get<FactorizedPrefs>(prefs);
  return {f.F.rows(), f.G.rows(), f.F.cols()};
}

// Normalized capacities: n over candidates, m over employers, both summing to
// the shared total mass.
struct MassSpec {
  DVec n;
  DVec m;
  double total_mass = 0.0;  // C
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {

inline bool all_finite(const Matrix& m) {
  const double* p = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(p[i])) return false;
  }
  return true;
}

inline std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

}  // namespace detail

// Checks every market invariant and reports all violations; an empty report
// means the market can be handed to a solver.
inline ValidationReport validate_market(const MarketShape& shape,
                                        const PreferenceModel& prefs,
                                        const MassSpec& mass) {
  ValidationReport report;
  auto flag = [&report](const std::string& text) {
    report.violations.push_back(text);
  };

  const std::size_t X = shape.num_candidates;
  const std::size_t Y = shape.num_employers;
  if (X < 1) flag("shape: num_candidates must be >= 1");
  if (Y < 1) flag("shape: num_employers must be >= 1");

  if (const auto* d = std::get_if<DensePrefs>(&prefs)) {
    if (d->P.rows() != d->Q.rows() || d->P.cols() != d->Q.cols()) {
      flag("prefs: P is " + detail::dims(d->P) + " but Q is " +
           detail::dims(d->Q));
    }
    if (d->P.rows() != X || d->P.cols() != Y) {
      flag("prefs: P is " + detail::dims(d->P) +
           ", expected " + std::to_string(X) + "x" + std::to_string(Y));
    }
    if (!detail::all_finite(d->P)) flag("prefs: P has non-finite entries");
    if (!detail::all_finite(d->Q)) flag("prefs: Q has non-finite entries");
  } else {
    const auto& f = std::get<FactorizedPrefs>(prefs);
    if (shape.factor_dim < 1) {
      flag("shape: factor_dim must be >= 1 for a factorized model");
    }
    const std::size_t D = shape.factor_dim;
    auto check = [&](const Matrix& m, const char* name, std::size_t rows) {
      if (m.rows() != rows || m.cols() != D) {
        flag(std::string("prefs: ") + name + " is " + detail::dims(m) +
             ", expected " + std::to_string(rows) + "x" + std::to_string(D));
      }
      if (!detail::all_finite(m)) {
        flag(std::string("prefs: ") + name + " has non-finite entries");
      }
    };
    check(f.F, "F", X);
    check(f.K, "K", X);
    check(f.G, "G", Y);
    check(f.L, "L", Y);
  }

  if (mass.n.size() != X) {
    flag("mass: n has length " + std::to_string(mass.n.size()) +
         ", expected " + std::to_string(X));
  }
  if (mass.m.size() != Y) {
    flag("mass: m has length " + std::to_string(mass.m.size()) +
         ", expected " + std::to_string(Y));
  }
  if (!(mass.total_mass > 0.0) || !std::isfinite(mass.total_mass)) {
    flag("mass: total mass C must be positive and finite");
  }

  auto check_side = [&](const DVec& side, const char* name) {
    double sum = 0.0;
    bool positive = true;
    for (double value : side) {
      if (!(value > 0.0) || !std::isfinite(value)) positive = false;
      sum += value;
    }
    if (!positive) {
      flag(std::string("mass: ") + name + " has non-positive entries");
    }
    if (mass.total_mass > 0.0 &&
        std::abs(sum - mass.total_mass) >
            kMassRelTolerance * mass.total_mass) {
      std::ostringstream os;
      os << "mass: sum(" << name << ") = " << sum << " differs from C = "
         << mass.total_mass;
      flag(os.str());
    }
  };
  if (!mass.n.empty()) check_side(mass.n, "n");
  if (!mass.m.empty()) check_side(mass.m, "m");

  return report;
}

// Joint utility phi(x, y): the sum of both sides' observable scores.
inline double joint_utility(const PreferenceModel& prefs, std::size_t x,
                            std::size_t y) {
  const MarketShape shape = shape_of(prefs);
  if (x >= shape.num_candidates || y >= shape.num_employers) {
    throw std::out_of_range("joint_utility: index out of range");
  }
  if (const auto* d = std::get_if<DensePrefs>(&prefs)) {
    return d->P(x, y) + d->Q(x, y);
  }
  const auto& f = std::get<FactorizedPrefs>(prefs);
  const std::size_t D = f.F.cols();
  return dot(f.F.row(x), f.G.row(y), D) + dot(f.K.row(x), f.L.row(y), D);
}

// Equal per-user capacities on both sides: n_x = C/|X|, m_y = C/|Y|.
inline MassSpec uniform_mass(const MarketShape& shape, double total_mass) {
  if (!(total_mass > 0.0)) {
    throw std::invalid_argument("uniform_mass: total mass must be positive");
  }
  if (shape.num_candidates < 1 || shape.num_employers < 1) {
    throw std::invalid_argument("uniform_mass: empty market side");
  }
  MassSpec mass;
  mass.n.assign(shape.num_candidates,
                total_mass / static_cast<double>(shape.num_candidates));
  mass.m.assign(shape.num_employers,
                total_mass / static_cast<double>(shape.num_employers));
  mass.total_mass = total_mass;
  return mass;
}

// Materializes the score matrices implied by factor vectors. Entry
// reductions use the same fixed-order dot as every solver kernel.
inline DensePrefs expand_to_dense(const FactorizedPrefs& f) {
  const std::size_t X = f.F.rows();
  const std::size_t Y = f.G.rows();
  const std::size_t D = f.F.cols();
  DensePrefs dense{Matrix(X, Y), Matrix(X, Y)};
  for (std::size_t x = 0; x < X; ++x) {
    double* prow = dense.P.row(x);
    double* qrow = dense.Q.row(x);
    for (std::size_t y = 0; y < Y; ++y) {
      prow[y] = dot(f.F.row(x), f.G.row(y), D);
      qrow[y] = dot(f.K.row(x), f.L.row(y), D);
    }
  }
  return dense;
}

}  // namespace matchtu
