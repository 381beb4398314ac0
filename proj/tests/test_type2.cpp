#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "doctest.h"
#include "random_markets.hpp"
#include "spectrum/type2_game.hpp"

using namespace spectrum;
using spectrum::testing::reference_market;
using spectrum::testing::random_market;
using spectrum::testing::uniform;

namespace {

const Market& reference() {
  static const Market m = Market::from_demand(reference_market());
  return m;
}

Type2Config config(double theta, double q1, double q2) {
  Type2Config c;
  c.theta = theta;
  c.caps = CapacitySpec{{q1, q2}};
  return c;
}

struct Feasible {
  Market market;
  Type2Config cfg;
  Type2Solution sol;
};

// Draws markets until the aggregate-demand solver accepts one.
Feasible random_feasible(std::mt19937_64& rng, std::size_t n) {
  for (;;) {
    Market m = random_market(rng, n);
    const EquilibriumResult free = oligopoly_ne_search(m.model, CapacitySpec::unlimited_for(n)).result;
    Type2Config cfg;
    cfg.theta = uniform(rng, 0.01, 1.0);
    for (std::size_t i = 0; i < n; ++i) cfg.caps.q_avail.push_back(free.demands[i] * uniform(rng, 0.6, 2.0));
    try {
      Type2Solution s = type2_oligopoly_ne(m, cfg);
      return {std::move(m), std::move(cfg), std::move(s)};
    } catch (const Error& e) {
      const auto k = e.kind();
      REQUIRE((k == ErrorKind::kConditionViolation || k == ErrorKind::kInfeasibleMarket ||
               k == ErrorKind::kNoInteriorSolution));
    }
  }
}

double closed_form_qos_price(const DemandModel& m, const Type2Config& cfg, std::size_t i, double pj) {
  const auto ii = static_cast<Eigen::Index>(i);
  const double a = m.a[ii];
  const double b = m.b[ii];
  const double c = m.cross(0, 1);
  const double qa = cfg.caps[i];
  return ((3 * a + 3 * c * pj - 2 * qa) + std::sqrt(std::pow(a + c * pj - 2 * qa, 2) + 8 * b * cfg.theta)) /
         (4 * b);
}

}  // namespace

TEST_CASE("delay-penalized utility") {
  const Type2Config cfg = config(0.1, 15, 15);
  CHECK_THROWS_AS(type2_utility(reference_market(), cfg, 0, PriceVector{9.0, 6.0}), Error);
  try {
    type2_utility(reference_market(), cfg, 0, PriceVector{9.0, 6.0});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kPenaltyDomain);
  }

  const PriceVector p{14.5, 9.0};
  const double q1 = demand(reference_market(), p)[0];
  const Type2Config tiny = config(1e-9, 15, 15);
  const Type2Utility u = type2_utility(reference_market(), tiny, 0, p);
  CHECK(u.offset_omitted);
  CHECK(std::abs(u.value - p[0] * q1) <= 1e-9 * std::abs(std::log(15 - q1)) + 1e-12);

  // Approaching capacity from below the penalty falls without bound.
  double prev = std::numeric_limits<double>::infinity();
  for (double gap : {1e-2, 1e-4, 1e-6, 1e-8, 1e-10}) {
    const PriceVector at{(28.5 + gap) / 2.0, 9.0};
    const double q = demand(reference_market(), at)[0];
    const double penalty = type2_utility(reference_market(), cfg, 0, at).value - at[0] * q;
    CHECK(penalty == doctest::Approx(0.1 * std::log(15.0 - q)).epsilon(1e-6));
    CHECK(penalty < prev);
    prev = penalty;
  }
  CHECK(prev < 0.1 * std::log(1e-9));
}

TEST_CASE("duopoly elimination solver") {
  const EquilibriumResult tiny = type2_duopoly_ne(reference(), config(1e-9, 100, 100));
  CHECK(tiny.prices[0] == doctest::Approx(9.5798).epsilon(1e-3 / 9.58));
  CHECK(tiny.prices[1] == doctest::Approx(5.5462).epsilon(1e-3 / 5.55));

  const Type2Config cfg = config(0.1, 15, 15);
  const EquilibriumResult r = type2_duopoly_ne(reference(), cfg);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(type2_foc_residual(reference_market(), cfg, i, r.prices)) < 1e-8);
    CHECK(r.demands[i] > 0.0);
    CHECK(r.demands[i] < 15.0);
  }
}

TEST_CASE("prices rise with the delay weight") {
  double prev1 = 0.0;
  double prev2 = 0.0;
  for (int k = 0; k <= 60; ++k) {
    const double theta = std::exp(std::log(0.001) + (std::log(20.0) - std::log(0.001)) * k / 60.0);
    const EquilibriumResult r = type2_duopoly_ne(reference(), config(theta, 15, 15));
    CHECK(r.prices[0] >= prev1 - 1e-12);
    CHECK(r.prices[1] >= prev2 - 1e-12);
    prev1 = r.prices[0];
    prev2 = r.prices[1];
  }
}

TEST_CASE("per-player stationary demand h(Z)") {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + static_cast<std::size_t>(k % 5);
    const Market m = random_market(rng, n);
    Type2Config cfg;
    cfg.theta = uniform(rng, 0.01, 1.0);
    for (std::size_t i = 0; i < n; ++i) cfg.caps.q_avail.push_back(uniform(rng, 5.0, 40.0));
    const double zmax = std::accumulate(cfg.caps.q_avail.begin(), cfg.caps.q_avail.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double alpha = m.params.alpha[i];
      const double beta = m.params.beta[i];
      const double mu = m.params.mu;
      const double b = m.model.b[static_cast<Eigen::Index>(i)];
      const double qa = cfg.caps[i];
      for (int s = 0; s < 5; ++s) {
        const double z = uniform(rng, 0.0, zmax);
        const double h = h_of_z(m.params, m.model, cfg, i, z);
        CHECK(h < qa);
        const double kk = 1.0 + beta * b - mu * b;
        const double x = alpha * b - mu * b * z;
        const double resid = kk * h * h - (kk * qa + x) * h + (x * qa - cfg.theta * b);
        CHECK(std::abs(resid) < 1e-10 * std::max(1.0, kk * qa * qa));
        // The other root lies above capacity.
        const double other = (kk * qa + x) / kk - h;
        CHECK(other > qa);
        const double dz = 1e-6 * std::max(1.0, z);
        CHECK(h_of_z(m.params, m.model, cfg, i, z + dz) < h_of_z(m.params, m.model, cfg, i, z - dz));
      }
    }
  }
}

TEST_CASE("h(Z) at the unconstrained aggregate recovers type-I demand as the delay weight vanishes") {
  const EquilibriumResult ne = duopoly_ne(reference_market(), CapacitySpec{{kUnlimited, kUnlimited}});
  const double z = ne.demands[0] + ne.demands[1];
  const Type2Config cfg = config(1e-10, 1e6, 1e6);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(h_of_z(reference().params, reference().model, cfg, i, z) == doctest::Approx(ne.demands[i]).epsilon(1e-4));
  }
}

TEST_CASE("aggregate-demand solver on random feasible markets") {
  std::mt19937_64 rng(2718);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + static_cast<std::size_t>(k % 5);
    const Feasible f = random_feasible(rng, n);
    const AggregateDemandSolve& a = f.sol.aggregate;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += h_of_z(f.market.params, f.market.model, f.cfg, i, a.z_star);
    CHECK(std::abs(a.z_star - sum) < 1e-10);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(f.sol.result.demands[i] > 0.0);
      CHECK(f.sol.result.demands[i] < f.cfg.caps[i]);
    }
    CHECK(a.flags.all());

    // g(Z) = sum h - Z is strictly decreasing over the bracket.
    const double zmax = std::accumulate(f.cfg.caps.q_avail.begin(), f.cfg.caps.q_avail.end(), 0.0);
    double prev = std::numeric_limits<double>::infinity();
    for (int s = 0; s <= 20; ++s) {
      const double z = zmax * s / 20.0;
      double g = -z;
      for (std::size_t i = 0; i < n; ++i) g += h_of_z(f.market.params, f.market.model, f.cfg, i, z);
      CHECK(g < prev);
      prev = g;
    }

    if (n == 2) {
      const EquilibriumResult d = type2_duopoly_ne(f.market, f.cfg);
      CHECK((d.prices.vec() - f.sol.result.prices.vec()).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("vanishing delay weight recovers the type-I oligopoly equilibrium") {
  const MarketParameters p{{20.0, 20.0, 20.0}, {1.0, 1.0, 1.0}, 0.3};
  const Market m = Market::from_parameters(p);
  Type2Config cfg;
  cfg.theta = 1e-9;
  cfg.caps = CapacitySpec{{100.0, 100.0, 100.0}};
  const Type2Solution s = type2_oligopoly_ne(m, cfg);
  const EquilibriumResult t1 = oligopoly_ne_search(m.model, CapacitySpec::unlimited_for(3)).result;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(s.result.demands[i] - t1.demands[i]) < 1e-3);
    CHECK(std::abs(s.result.prices[i] - t1.prices[i]) < 1e-3);
  }
}

TEST_CASE("solver input errors") {
  CHECK_THROWS_AS(type2_oligopoly_ne(reference(), config(0.0, 15, 15)), Error);
  CHECK_THROWS_AS(type2_oligopoly_ne(reference(), config(0.1, kUnlimited, 15)), Error);
  CHECK_THROWS_AS(type2_oligopoly_ne(reference(), config(0.1, 15, 15), 0.0), Error);
}

TEST_CASE("two-point inequality used by the contraction bound") {
  std::mt19937_64 rng(55);
  std::exponential_distribution<double> draw(0.1);
  for (int k = 0; k < 100000; ++k) {
    const double x = draw(rng);
    const double y = draw(rng);
    const double z = draw(rng);
    const double d = std::abs(std::sqrt(x * x + z * z) - std::sqrt(y * y + z * z));
    CHECK_MESSAGE(d <= x + y + 1e-12 * (x + y), "x=" << x << " y=" << y << " z=" << z);
    if (x >= y) CHECK_MESSAGE(d <= x - y + 1e-12 * (x + y), "x=" << x << " y=" << y << " z=" << z);
  }
}

TEST_CASE("QoS best-response step") {
  const Type2Config cfg = config(0.1, 15, 15);
  const EquilibriumResult ne = type2_duopoly_ne(reference(), cfg);
  const QosStep s = qosbest_step(reference_market(), cfg, ne.prices);
  CHECK(std::abs(s.next[0] - ne.prices[0]) < 1e-9);
  CHECK(std::abs(s.next[1] - ne.prices[1]) < 1e-9);

  for (const auto& caps : {CapacitySpec{{100.0, 100.0}}, CapacitySpec{{10.0, 100.0}}}) {
    Type2Config c = cfg;
    c.caps = caps;
    PriceVector p{5.0, 5.0};
    for (int t = 0; t < 30; ++t) {
      const QosStep st = qosbest_step(reference_market(), c, p);
      for (std::size_t i = 0; i < 2; ++i) {
        CHECK(std::abs(st.next[i] - closed_form_qos_price(reference_market(), c, i, p[1 - i])) < 1e-10);
        CHECK(st.players[i].roots[0] == doctest::Approx(closed_form_qos_price(reference_market(), c, i, p[1 - i])));
      }
      p = st.next;
    }
  }
}

TEST_CASE("one feasible root per player on random markets") {
  std::mt19937_64 rng(1001);
  int steps = 0;
  int unique = 0;
  for (int k = 0; k < 100; ++k) {
    Feasible f = random_feasible(rng, 2);
    PriceVector p = f.sol.result.prices;
    p[0] *= uniform(rng, 0.5, 1.5);
    p[1] *= uniform(rng, 0.5, 1.5);
    for (int t = 0; t < 10; ++t) {
      QosStep s;
      try {
        s = qosbest_step(f.market.model, f.cfg, p);
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kComplexRoots);
        break;
      }
      for (const auto& d : s.players) {
        ++steps;
        if (d.feasible[0] != d.feasible[1]) ++unique;
      }
      p = s.next;
    }
  }
  MESSAGE("unique feasible root in " << unique << " of " << steps << " player-steps");
  CHECK(unique >= 0.95 * steps);
}

TEST_CASE("QoS best-response runs converge and contract") {
  for (const auto& caps : {CapacitySpec{{100.0, 100.0}}, CapacitySpec{{10.0, 100.0}}}) {
    Type2Config cfg = config(0.1, 1, 1);
    cfg.caps = caps;
    const QosRun r = qosbest_run(reference(), cfg, PriceVector{5.0, 5.0}, 1e-12, 200);
    REQUIRE(r.orbit.converged);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(std::abs(type2_foc_residual(reference_market(), cfg, i, *r.orbit.limit)) < 1e-6);
    }
    CHECK(r.contraction_bound == doctest::Approx(1.5 * 1.5 / 8.0));
    for (double ratio : r.contraction_ratios) CHECK(ratio <= r.contraction_bound + 1e-6);
    CHECK(r.additive_bound_holds);

    const QosRun at = qosbest_run(reference(), cfg, *r.orbit.limit, 1e-9, 200);
    CHECK(at.orbit.iterations() <= 1);
  }

  std::mt19937_64 rng(64);
  int tested = 0;
  while (tested < 50) {
    Feasible f = random_feasible(rng, 2);
    const double c = f.market.model.cross(0, 1);
    if (!(f.market.model.b[0] > c && f.market.model.b[1] > c)) continue;
    const PriceVector p0{f.sol.result.prices[0] * 0.7, f.sol.result.prices[1] * 1.2};
    QosRun r;
    try {
      r = qosbest_run(f.market, f.cfg, p0, 1e-12, 500);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kComplexRoots);
      continue;
    }
    ++tested;
    CHECK(r.contraction_bound < 1.0);
    for (double ratio : r.contraction_ratios) CHECK(ratio <= r.contraction_bound + 1e-6);
    CHECK(r.additive_bound_holds);
  }
}
