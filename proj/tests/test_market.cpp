#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "matchtu/market.hpp"
#include "test_helpers.hpp"

using namespace matchtu;

TEST_CASE("uniform_mass splits the total evenly", "[market]") {
  SECTION("2x2, C=1") {
    const MassSpec mass = uniform_mass({2, 2, 0}, 1.0);
    REQUIRE(mass.n == DVec{0.5, 0.5});
    REQUIRE(mass.m == DVec{0.5, 0.5});
    REQUIRE(mass.total_mass == 1.0);
  }
  SECTION("1000 candidates x 500 employers, C=1") {
    const MassSpec mass = uniform_mass({1000, 500, 0}, 1.0);
    REQUIRE(mass.n.size() == 1000);
    REQUIRE(mass.m.size() == 500);
    REQUIRE(mass.n[0] == 0.001);
    REQUIRE(mass.m[0] == 0.002);
  }
  SECTION("single pair") {
    const MassSpec mass = uniform_mass({1, 1, 0}, 1.0);
    REQUIRE(mass.n == DVec{1.0});
    REQUIRE(mass.m == DVec{1.0});
  }
  SECTION("rejects non-positive totals") {
    REQUIRE_THROWS_AS(uniform_mass({2, 2, 0}, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(uniform_mass({2, 2, 0}, -1.0), std::invalid_argument);
  }
}

TEST_CASE("validate_market reports every violation", "[market]") {
  const MarketShape shape{2, 2, 0};
  const DensePrefs prefs{Matrix(2, 2, 0.5), Matrix(2, 2, 0.5)};

  SECTION("uniform 2x2 market is clean") {
    const auto report =
        validate_market(shape, prefs, uniform_mass(shape, 1.0));
    REQUIRE(report.ok());
  }

  SECTION("mass sum mismatch is flagged") {
    MassSpec mass;
    mass.n = {0.6, 0.5};
    mass.m = {0.5, 0.5};
    mass.total_mass = 1.0;
    const auto report = validate_market(shape, prefs, mass);
    REQUIRE_FALSE(report.ok());
    REQUIRE(report.violations.size() == 1);
    REQUIRE_THAT(report.violations[0],
                 Catch::Matchers::ContainsSubstring("sum(n)"));
  }

  SECTION("mass sums within the relative tolerance pass") {
    MassSpec mass = uniform_mass(shape, 1.0);
    mass.n[0] += 0.9e-9;  // |sum - C| < 1e-9 * C
    REQUIRE(validate_market(shape, prefs, mass).ok());
    mass.n[0] += 2e-9;
    REQUIRE_FALSE(validate_market(shape, prefs, mass).ok());
  }

  SECTION("factor width mismatch is flagged") {
    const MarketShape fshape{3, 4, 50};
    FactorizedPrefs f{Matrix(3, 50, 0.1), Matrix(3, 50, 0.1),
                      Matrix(4, 49, 0.1), Matrix(4, 50, 0.1)};
    const auto report =
        validate_market(fshape, PreferenceModel(std::move(f)),
                        uniform_mass(fshape, 1.0));
    REQUIRE_FALSE(report.ok());
    REQUIRE(report.violations.size() == 1);
    REQUIRE_THAT(report.violations[0],
                 Catch::Matchers::ContainsSubstring("G"));
  }

  SECTION("non-finite entries and bad masses accumulate") {
    DensePrefs bad = prefs;
    bad.P(0, 1) = std::numeric_limits<double>::quiet_NaN();
    MassSpec mass = uniform_mass(shape, 1.0);
    mass.m[1] = -mass.m[1];
    const auto report = validate_market(shape, PreferenceModel(bad), mass);
    REQUIRE(report.violations.size() >= 2);
  }

  SECTION("factorized model with factor_dim 0 is rejected") {
    const MarketShape fshape{2, 2, 0};
    FactorizedPrefs f{Matrix(2, 1, 0.1), Matrix(2, 1, 0.1),
                      Matrix(2, 1, 0.1), Matrix(2, 1, 0.1)};
    const auto report = validate_market(fshape, PreferenceModel(std::move(f)),
                                        uniform_mass(fshape, 1.0));
    REQUIRE_FALSE(report.ok());
  }
}

TEST_CASE("joint_utility sums both sides", "[market]") {
  SECTION("dense") {
    DensePrefs prefs{Matrix(1, 1, 0.2), Matrix(1, 1, 0.3)};
    REQUIRE(joint_utility(PreferenceModel(prefs), 0, 0) == 0.5);
  }
  SECTION("factorized zeros") {
    FactorizedPrefs f{Matrix(1, 3, 0.0), Matrix(1, 3, 0.0),
                      Matrix(1, 3, 0.0), Matrix(1, 3, 0.0)};
    REQUIRE(joint_utility(PreferenceModel(std::move(f)), 0, 0) == 0.0);
  }
  SECTION("factorized hand example") {
    FactorizedPrefs f{Matrix::from_rows({{1.0, 0.0}}),
                      Matrix::from_rows({{0.0, 1.0}}),
                      Matrix::from_rows({{1.0, 0.0}}),
                      Matrix::from_rows({{0.0, 1.0}})};
    REQUIRE(joint_utility(PreferenceModel(std::move(f)), 0, 0) == 2.0);
  }
  SECTION("out-of-range index") {
    DensePrefs prefs{Matrix(2, 2, 0.0), Matrix(2, 2, 0.0)};
    REQUIRE_THROWS_AS(joint_utility(PreferenceModel(prefs), 2, 0),
                      std::out_of_range);
    REQUIRE_THROWS_AS(joint_utility(PreferenceModel(prefs), 0, 2),
                      std::out_of_range);
  }
}

TEST_CASE("expanded dense model agrees with the factorized path",
          "[market][property]") {
  const MarketShape shape{23, 17, 6};
  const auto f = [&] {
    Rng rng(31);
    FactorizedPrefs f{Matrix(23, 6), Matrix(23, 6), Matrix(17, 6),
                      Matrix(17, 6)};
    for (Matrix* m : {&f.F, &f.K, &f.G, &f.L}) {
      for (std::size_t i = 0; i < m->size(); ++i) {
        m->data()[i] = rng.uniform(-1.0, 1.0);
      }
    }
    return f;
  }();
  const DensePrefs dense = expand_to_dense(f);
  const PreferenceModel fm(f), dm(dense);
  for (std::size_t x = 0; x < shape.num_candidates; ++x) {
    for (std::size_t y = 0; y < shape.num_employers; ++y) {
      REQUIRE_THAT(joint_utility(dm, x, y),
                   Catch::Matchers::WithinAbs(joint_utility(fm, x, y), 1e-12));
    }
  }
}
