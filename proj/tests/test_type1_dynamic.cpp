#include <Eigen/Eigenvalues>
#include <random>
#include <sstream>

#include "doctest.h"
#include "random_markets.hpp"
#include "spectrum/type1_dynamic.hpp"

using namespace spectrum;
using spectrum::testing::reference_market;
using spectrum::testing::random_duopoly;
using spectrum::testing::uniform;

namespace {

const double kInf = kUnlimited;
const CapacitySpec kAmple{{100.0, 100.0}};
const CapacitySpec kShort{{10.0, 100.0}};

double dist(const PriceVector& a, const PriceVector& b) {
  return (a.vec() - b.vec()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("best-response step") {
  const EquilibriumResult ne = duopoly_ne(reference_market(), kAmple);
  CHECK(dist(strict_best_step(reference_market(), kAmple, ne.prices), ne.prices) < 1e-12);

  BranchPair br{};
  const PriceVector p = strict_best_step(reference_market(), kAmple, PriceVector{5.0, 5.0}, &br);
  CHECK(p[0] == doctest::Approx(9.375));
  CHECK(p[1] == doctest::Approx(4.6875));
  CHECK(br[0] == Branch::kBestResponse);

  const PriceVector q = strict_best_step(reference_market(), kShort, PriceVector{5.0, 5.0}, &br);
  CHECK(q[0] == doctest::Approx(13.75));
  CHECK(br[0] == Branch::kCapacityBinding);
  CHECK(br[1] == Branch::kBestResponse);
}

TEST_CASE("best-response runs converge to the static equilibrium") {
  for (const CapacitySpec& caps : {kAmple, kShort}) {
    const OrbitRecord o = strict_best_run(reference_market(), caps, PriceVector{5.0, 5.0}, 1e-6, 200);
    REQUIRE(o.converged);
    CHECK(o.iterations() <= 200);
    const EquilibriumResult ne = duopoly_ne(reference_market(), caps);
    CHECK(dist(*o.limit, ne.prices) < 1e-5);
    CHECK(*o.limit_error < 1e-5);
    CHECK(o.trajectory.size() == o.rule_taken.size());
    CHECK(o.rule_taken.front()[0] == Branch::kInitial);
  }
  const OrbitRecord s = strict_best_run(reference_market(), kShort, PriceVector{5.0, 5.0}, 1e-6, 200);
  CHECK(s.limit->operator[](0) == doctest::Approx(14.909).epsilon(1e-3 / 14.909));
  CHECK(s.limit->operator[](1) == doctest::Approx(6.545).epsilon(1e-3 / 6.545));

  const EquilibriumResult ne = duopoly_ne(reference_market(), kAmple);
  const OrbitRecord at = strict_best_run(reference_market(), kAmple, ne.prices, 1e-6, 200);
  CHECK(at.converged);
  CHECK(at.iterations() <= 1);

  CHECK_THROWS_AS(strict_best_run(reference_market(), kAmple, ne.prices, 0.0, 10), Error);
  const OrbitRecord capped = strict_best_run(reference_market(), kAmple, PriceVector{5.0, 5.0}, 1e-14, 3);
  CHECK_FALSE(capped.converged);
}

TEST_CASE("best-response runs on random markets (empirical convergence check)") {
  std::mt19937_64 rng(77);
  int converged = 0;
  int agree = 0;
  const int total = 200;
  for (int k = 0; k < total; ++k) {
    const DemandModel m = random_duopoly(rng);
    const EquilibriumResult free = duopoly_ne(m, CapacitySpec{{kInf, kInf}});
    CapacitySpec caps{{kInf, kInf}};
    for (std::size_t i = 0; i < 2; ++i) {
      if (uniform(rng, 0, 1) < 0.6) caps.q_avail[i] = free.demands[i] * uniform(rng, 0.3, 1.5);
    }
    const double tol = 1e-9;
    const OrbitRecord o = strict_best_run(m, caps, PriceVector{1.0, 1.0}, tol, 5000);
    if (!o.converged) continue;
    ++converged;
    if (*o.limit_error <= 10.0 * tol * std::max(1.0, free.prices.vec().maxCoeff())) ++agree;
  }
  MESSAGE("converged " << converged << "/" << total << ", matching the static equilibrium " << agree);
  CHECK(converged == total);
  CHECK(agree == converged);
}

TEST_CASE("linear best-response maps are contractions when b1 b2 > c^2") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 500; ++k) {
    const DemandModel m = random_duopoly(rng);
    const double c = m.cross(0, 1);
    const double b1 = m.b[0];
    const double b2 = m.b[1];
    Matrix free(2, 2);
    free << 0.0, c / (2 * b1), c / (2 * b2), 0.0;
    Matrix one_bound(2, 2);
    one_bound << 0.0, c / b1, c / (2 * b2), 0.0;
    for (const Matrix& j : {free, one_bound}) {
      const auto ev = eigenvalues_2x2(j);
      CHECK(std::max(std::abs(ev[0]), std::abs(ev[1])) < 1.0);
    }
  }
}

TEST_CASE("bounded-rationality step") {
  const LearningRates g{{0.01, 0.01}};
  std::mt19937_64 rng(1);
  const EquilibriumResult ne = duopoly_ne(reference_market(), kAmple);
  CHECK(dist(strict_br_step(reference_market(), kAmple, g, ne.prices, rng), ne.prices) < 1e-12);

  const PriceVector p = strict_br_step(reference_market(), kAmple, g, PriceVector{5.0, 5.0}, rng);
  CHECK(p[0] == doctest::Approx(5.875));
  CHECK(p[1] == doctest::Approx(4.875));

  const PriceVector q = strict_br_step(reference_market(), kShort, g, PriceVector{5.0, 5.0}, rng);
  CHECK(q[0] == doctest::Approx(13.75));

  StrictBrMap map(reference_market(), kAmple, g, 9);
  const StrictBrMap::Step s = map.step(PriceVector{0.0, 5.0});
  CHECK(s.escaped[0]);
  CHECK_FALSE(s.escaped[1]);
  CHECK(s.next[0] >= 0.0);
  CHECK(s.next[0] < kEscapeDefault);

  StrictBrMap wild(reference_market(), CapacitySpec{{kInf, kInf}}, g, 1);
  CHECK_THROWS_AS(wild.step(PriceVector{1e11, 1.0}), Error);
  CHECK_THROWS_AS(StrictBrMap(reference_market(), kAmple, LearningRates{{0.0, 0.01}}, 1), Error);
}

TEST_CASE("portable uniform draws are reproducible") {
  std::mt19937_64 a(5), b(5);
  for (int i = 0; i < 100; ++i) {
    const double x = portable_uniform(a, 0.01);
    CHECK(x == portable_uniform(b, 0.01));
    CHECK(x >= 0.0);
    CHECK(x < 0.01);
  }
}

TEST_CASE("fixed points of the bounded-rationality map") {
  const auto fp = br_fixed_points(reference_market(), kAmple);
  REQUIRE(fp.size() == 4);
  CHECK(fp[3][0] == doctest::Approx(9.58).epsilon(0.01 / 9.58));
  CHECK(fp[3][1] == doctest::Approx(5.55).epsilon(0.01 / 5.55));
  CHECK(fp[1][0] == doctest::Approx(7.5));
  CHECK(fp[1][1] == 0.0);

  const auto fp2 = br_fixed_points(reference_market(), CapacitySpec{{10.0, kInf}});
  REQUIRE(fp2.size() == 2);
  CHECK(fp2[1][0] == doctest::Approx(14.909).epsilon(1e-3 / 14.909));
  CHECK(fp2[1][1] == doctest::Approx(6.545).epsilon(1e-3 / 6.545));

  const LearningRates g{{0.02, 0.03}};
  for (const CapacitySpec& caps : {kAmple, kShort, CapacitySpec{{kInf, 10.0}}}) {
    for (const PriceVector& p : br_fixed_points(reference_market(), caps)) {
      std::mt19937_64 rng(1);
      CHECK(dist(strict_br_step(reference_market(), caps, g, p, rng, 0.0), p) < 1e-12);
    }
  }
}

TEST_CASE("Jacobian of the active branch") {
  const LearningRates g{{0.01, 0.01}};
  const Matrix j0 = br_jacobian(reference_market(), kAmple, g, PriceVector{0.0, 0.0});
  CHECK(j0(0, 0) == doctest::Approx(1.0 + 0.01 * 30));
  CHECK(j0(1, 1) == doctest::Approx(1.0 + 0.01 * 30));
  CHECK(j0(0, 1) == 0.0);
  CHECK(j0(1, 0) == 0.0);

  const EquilibriumResult ne = duopoly_ne(reference_market(), kAmple);
  const Matrix j4 = br_jacobian(reference_market(), kAmple, g, ne.prices);
  CHECK(j4(0, 0) == doctest::Approx(0.6168).epsilon(1e-3));
  CHECK(j4(0, 1) == doctest::Approx(0.01 * 1.5 * ne.prices[0]));
  CHECK(j4(1, 0) == doctest::Approx(0.01 * 1.5 * ne.prices[1]));

  const Matrix jc = br_jacobian(reference_market(), kShort, g, PriceVector{5.0, 5.0});
  CHECK(jc(0, 0) == 0.0);
  CHECK(jc(0, 1) == doctest::Approx(1.5 / 2.0));

  // At (5, 5) with gamma1 = 0.1 both branches of player 1 give 13.75.
  CHECK_THROWS_AS(br_jacobian(reference_market(), kShort, LearningRates{{0.1, 0.01}}, PriceVector{5.0, 5.0}),
                  Error);
}

TEST_CASE("Jacobian matches central differences") {
  std::mt19937_64 rng(12);
  const double h = 1e-6;
  int checked = 0;
  for (int k = 0; k < 400; ++k) {
    const CapacitySpec& caps = (k % 2) ? kAmple : kShort;
    const LearningRates g{{uniform(rng, 0.005, 0.09), uniform(rng, 0.005, 0.06)}};
    const PriceVector at{uniform(rng, 0.5, 20.0), uniform(rng, 0.5, 12.0)};
    Matrix j;
    try {
      j = br_jacobian(reference_market(), caps, g, at);
    } catch (const Error&) {
      continue;
    }
    Matrix fd(2, 2);
    bool crosses = false;
    for (int col = 0; col < 2; ++col) {
      PriceVector up = at, dn = at;
      up[static_cast<std::size_t>(col)] += h;
      dn[static_cast<std::size_t>(col)] -= h;
      StrictBrMap m1(reference_market(), caps, g, 0), m2(reference_market(), caps, g, 0);
      const auto su = m1.step(up);
      const auto sd = m2.step(dn);
      if (su.branches != sd.branches || su.escaped[0] || su.escaped[1] || sd.escaped[0] ||
          sd.escaped[1]) {
        crosses = true;
      }
      fd.col(col) = (su.next.vec() - sd.next.vec()) / (2.0 * h);
    }
    if (crosses) continue;
    ++checked;
    CHECK((fd - j).cwiseAbs().maxCoeff() < 1e-5);
  }
  CHECK(checked > 200);
}

TEST_CASE("closed-form eigenvalues agree with a general eigen solver") {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 1000; ++k) {
    Matrix j(2, 2);
    j << uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2);
    const auto ev = eigenvalues_2x2(j);
    Eigen::EigenSolver<Matrix> es(j);
    const auto ref = es.eigenvalues();
    const double mine = std::max(std::abs(ev[0]), std::abs(ev[1]));
    const double theirs = std::max(std::abs(ref[0]), std::abs(ref[1]));
    CHECK(std::abs(mine - theirs) < 1e-10);
    CHECK(std::abs((ev[0] + ev[1]).real() - j.trace()) < 1e-10);
    CHECK(std::abs((ev[0] * ev[1]).real() - j.determinant()) < 1e-10);
  }
}

TEST_CASE("stability of the fixed points") {
  const StabilityReport r = stability_analysis(reference_market(), kAmple, LearningRates{{0.01, 0.01}});
  REQUIRE(r.stable.size() == 4);
  CHECK_FALSE(r.stable[0]);
  CHECK_FALSE(r.stable[1]);
  CHECK_FALSE(r.stable[2]);
  CHECK(r.stable[3]);

  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const LearningRates g{{uniform(rng, 0.005, 0.04), uniform(rng, 0.005, 0.04)}};
    const StabilityReport s = stability_analysis(reference_market(), kAmple, g);
    if (!s.stable[3]) continue;
    const PriceVector& ne = s.fixed_points[3];
    const PriceVector p0{ne[0] * (1.0 + uniform(rng, -0.01, 0.01)), ne[1] * (1.0 + uniform(rng, -0.01, 0.01))};
    StrictBrMap map(reference_market(), kAmple, g, 1);
    const OrbitRecord o = map.run(p0, 20000, 1e-12);
    CHECK(o.converged);
    CHECK(dist(*o.limit, ne) < 1e-8);
  }
}

TEST_CASE("both players short of capacity follow best responses") {
  const CapacitySpec both{{10.0, 15.0}};
  CHECK(routes_to_best_response(reference_market(), both));
  StrictBrMap map(reference_market(), both, LearningRates{{0.08, 0.08}}, 1);
  CHECK(map.best_response_mode());
  const PriceVector p{5.0, 5.0};
  CHECK(dist(map.step(p).next, strict_best_step(reference_market(), both, p)) == 0.0);
}

TEST_CASE("orbits are reproducible and tabulated") {
  const LearningRates g{{0.07, 0.02}};
  StrictBrMap a(reference_market(), kAmple, g, 42), b(reference_market(), kAmple, g, 42);
  const OrbitRecord oa = a.run(PriceVector{5.0, 5.0}, 3000);
  const OrbitRecord ob = b.run(PriceVector{5.0, 5.0}, 3000);
  REQUIRE(oa.trajectory.size() == ob.trajectory.size());
  for (std::size_t t = 0; t < oa.trajectory.size(); ++t) CHECK(oa.trajectory[t] == ob.trajectory[t]);

  const Table t = orbit_table(oa);
  CHECK(t.columns == std::vector<std::string>{"t", "p1", "p2", "branch1", "branch2"});
  CHECK(t.rows.size() == 3001);
  std::ostringstream out;
  write_orbit_csv(out, oa);
  CHECK(out.str().rfind("t,p1,p2,branch1,branch2\n0,5,5,initial,initial\n", 0) == 0);
}
