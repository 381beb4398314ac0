#include <random>

#include "doctest.h"
#include "random_markets.hpp"
#include "spectrum/market.hpp"

using namespace spectrum;
using spectrum::testing::reference_market;
using spectrum::testing::random_parameters;
using spectrum::testing::uniform;

namespace {

MarketParameters params2(double a1, double a2, double b1, double b2, double mu) {
  return MarketParameters{{a1, a2}, {b1, b2}, mu};
}

}  // namespace

TEST_CASE("substitutability matrix") {
  const Matrix t = build_substitutability_matrix(params2(1, 1, 2, 1, 0.5));
  CHECK(t(0, 0) == 2.0);
  CHECK(t(0, 1) == 0.5);
  CHECK(t(1, 0) == 0.5);
  CHECK(t(1, 1) == 1.0);

  const Matrix id = build_substitutability_matrix(MarketParameters{{1, 1, 1}, {1, 1, 1}, 0.0});
  CHECK(id.isIdentity());

  const Matrix t3 = build_substitutability_matrix(params2(1, 1, 3, 3, 1));
  CHECK(t3(0, 1) == 1.0);
  CHECK(t3(1, 1) == 3.0);
}

TEST_CASE("positive definiteness") {
  CHECK(check_positive_definite(build_substitutability_matrix(params2(1, 1, 2, 1, 0.5))));
  CHECK_FALSE(check_positive_definite(build_substitutability_matrix(params2(1, 1, 1, 1, 1.5))));
  CHECK(check_positive_definite(Matrix::Identity(4, 4)));

  Matrix asym(2, 2);
  asym << 1.0, 0.2, 0.1, 1.0;
  CHECK_THROWS_AS(check_positive_definite(asym), Error);
}

TEST_CASE("demand model from utility parameters") {
  const DemandModel m = derive_demand_model(params2(10, 10, 2, 1, 0.5));
  CHECK(m.b[0] == doctest::Approx(0.5714).epsilon(1e-3));
  CHECK(m.b[1] == doctest::Approx(1.1429).epsilon(1e-3));
  CHECK(m.cross(0, 1) == doctest::Approx(0.2857).epsilon(1e-3));
  CHECK(m.a[0] == doctest::Approx(2.857).epsilon(1e-3));
  CHECK(m.a[1] == doctest::Approx(8.571).epsilon(1e-3));

  const DemandModel d = derive_demand_model(params2(10, 10, 2, 4, 0.0));
  CHECK(d.b[0] == doctest::Approx(0.5));
  CHECK(d.b[1] == doctest::Approx(0.25));
  CHECK(d.cross(0, 1) == 0.0);
  CHECK(d.a[0] == doctest::Approx(5.0));
  CHECK(d.a[1] == doctest::Approx(2.5));
}

TEST_CASE("derived cross slopes are exactly symmetric") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 50; ++k) {
    const DemandModel m = derive_demand_model(random_parameters(rng, 2 + k % 6));
    CHECK(m.c.isApprox(m.c.transpose(), 0.0));
    CHECK((m.c - m.c.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("demand and inverse demand") {
  const DemandModel& m = reference_market();
  const DemandVector q = demand(m, PriceVector{9.58, 5.55});
  CHECK(q[0] == doctest::Approx(19.16).epsilon(0.02 / 19.16));
  CHECK(q[1] == doctest::Approx(22.18).epsilon(0.02 / 22.18));

  const DemandVector q0 = demand(m, PriceVector{0.0, 0.0});
  CHECK(q0[0] == 30.0);
  CHECK(q0[1] == 30.0);

  const DemandVector q1 = demand(m, PriceVector{10.0, 0.0});
  CHECK(q1[0] == doctest::Approx(10.0));
  CHECK(q1[1] == doctest::Approx(45.0));

  const MarketParameters p = params2(10, 10, 2, 1, 0.5);
  const PriceVector at0 = inverse_demand(p, DemandVector{0.0, 0.0});
  CHECK(at0[0] == 10.0);
  CHECK(at0[1] == 10.0);
  const PriceVector pq = inverse_demand(p, DemandVector{1.0, 2.0});
  CHECK(pq[0] == doctest::Approx(7.0));
  CHECK(pq[1] == doctest::Approx(7.5));

  CHECK_THROWS_AS(demand(m, PriceVector{1.0, 2.0, 3.0}), Error);
}

TEST_CASE("secondary user utility") {
  const MarketParameters p = params2(10, 10, 2, 1, 0.5);
  CHECK(secondary_utility(p, DemandVector{0.0, 0.0}, PriceVector{3.0, 4.0}) == 0.0);
  CHECK(secondary_utility(p, DemandVector{1.0, 2.0}, PriceVector{7.0, 7.5}) ==
        doctest::Approx(4.0));
  CHECK_THROWS_AS(secondary_utility(p, DemandVector{1.0}, PriceVector{7.0, 7.5}), Error);
}

TEST_CASE("random markets keep the positive definite and sign structure") {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 1000; ++k) {
    const MarketParameters p = random_parameters(rng, 2 + static_cast<std::size_t>(k % 7));
    REQUIRE(check_positive_definite(build_substitutability_matrix(p)));
    const DemandModel m = derive_demand_model(p);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(m.b[static_cast<Eigen::Index>(i)] > 0.0);
      for (std::size_t j = 0; j < m.size(); ++j) {
        if (i != j) CHECK(m.cross(i, j) > 0.0);
      }
    }
  }
}

TEST_CASE("demand and inverse demand are mutual inverses") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 300; ++k) {
    const std::size_t n = 2 + static_cast<std::size_t>(k % 5);
    const MarketParameters params = random_parameters(rng, n);
    const DemandModel m = derive_demand_model(params);
    Vector pv(static_cast<Eigen::Index>(n));
    Vector qv(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < pv.size(); ++i) {
      pv[i] = uniform(rng, 0.0, 20.0);
      qv[i] = uniform(rng, 0.0, 20.0);
    }
    const PriceVector p(pv);
    const DemandVector q(qv);
    CHECK((inverse_demand(params, demand(m, p)).vec() - pv).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((demand(m, inverse_demand(params, q)).vec() - qv).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("utility gradient matches central differences") {
  std::mt19937_64 rng(99);
  const double h = 1e-5;
  for (int k = 0; k < 300; ++k) {
    const std::size_t n = 2 + static_cast<std::size_t>(k % 5);
    const MarketParameters params = random_parameters(rng, n);
    Vector qv(static_cast<Eigen::Index>(n));
    Vector pv(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < qv.size(); ++i) {
      qv[i] = uniform(rng, 0.0, 20.0);
      pv[i] = uniform(rng, 0.0, 20.0);
    }
    const PriceVector p(pv);
    const Vector g = secondary_utility_gradient(params, DemandVector(qv), p);
    for (Eigen::Index i = 0; i < qv.size(); ++i) {
      Vector up = qv;
      Vector dn = qv;
      up[i] += h;
      dn[i] -= h;
      const double fd = (secondary_utility(params, DemandVector(up), p) -
                         secondary_utility(params, DemandVector(dn), p)) /
                        (2.0 * h);
      CHECK(std::abs(fd - g[i]) <= 1e-5 * std::max(1.0, std::abs(g[i])));
      // Stationarity form: alpha_i - beta_i q_i - mu sum_{j != i} q_j - p_i
      const double expected = params.alpha[static_cast<std::size_t>(i)] -
                              params.beta[static_cast<std::size_t>(i)] * qv[i] -
                              params.mu * (qv.sum() - qv[i]) - pv[i];
      CHECK(std::abs(fd - expected) < 1e-6 * std::max(1.0, std::abs(expected)));
    }
  }
}

TEST_CASE("market validation") {
  CHECK_NOTHROW(params2(1, 1, 2, 1, 0.5).validate(true));
  CHECK_THROWS_AS(params2(1, 1, 0.2, 1, 0.5).validate(true), Error);
  CHECK_NOTHROW(params2(1, 1, 0.2, 1, 0.5).validate(false));
  CHECK_THROWS_AS((MarketParameters{{1}, {1}, 0.0}.validate(false)), Error);

  Matrix c(2, 2);
  c << 0.0, 1.0, 0.5, 0.0;
  CHECK_THROWS_AS(DemandModel::from_coefficients(Vector{{1.0, 1.0}}, Vector{{1.0, 1.0}}, c), Error);
  CHECK_THROWS_AS(DemandModel::duopoly(1, 1, 0.0, 1, 0.5), Error);
  CHECK(DemandModel::duopoly(-1, 1, 1, 1, 0.5).nonpositive_intercept);

  CHECK_NOTHROW((CapacitySpec{{10.0, kUnlimited}}.validate(2)));
  CHECK_THROWS_AS(CapacitySpec{{10.0}}.validate(2), Error);
  CHECK_THROWS_AS((CapacitySpec{{-1.0, 2.0}}.validate(2)), Error);
}

TEST_CASE("parameters recovered from a duopoly demand model") {
  const MarketParameters mp = market_parameters_from_demand(reference_market());
  CHECK(mp.alpha[0] == doctest::Approx(28.696).epsilon(1e-4));
  CHECK(mp.alpha[1] == doctest::Approx(18.261).epsilon(1e-4));
  CHECK(mp.beta[0] == doctest::Approx(0.6957).epsilon(1e-4));
  CHECK(mp.beta[1] == doctest::Approx(0.3478).epsilon(1e-4));
  CHECK(mp.mu == doctest::Approx(0.2609).epsilon(1e-3));
  const DemandModel back = derive_demand_model(mp);
  CHECK((back.a - reference_market().a).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((back.b - reference_market().b).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(std::abs(back.cross(0, 1) - 1.5) < 1e-10);
}

TEST_CASE("capacity from traffic load") {
  const CapacitySpec caps = CapacitySpec::from_load({20.0, 30.0}, {10.0, 4.0}, {2.0, 1.0});
  CHECK(caps[0] == doctest::Approx(15.0));
  CHECK(caps[1] == doctest::Approx(26.0));
  CHECK_THROWS_AS(CapacitySpec::from_load({1.0}, {10.0}, {2.0}), Error);
}
