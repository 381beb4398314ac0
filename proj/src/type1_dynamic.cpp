#include "spectrum/type1_dynamic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spectrum/csv.hpp"

namespace spectrum {

namespace {

struct Coeffs {
  double a[2];
  double b[2];
  double c;
  double qa[2];
  bool unlimited[2];
};

Coeffs coeffs_of(const DemandModel& model, const CapacitySpec& caps) {
  require_size(2, model.size(), "duopoly market");
  caps.validate(2);
  Coeffs k{};
  for (int i = 0; i < 2; ++i) {
    k.a[i] = model.a[i];
    k.b[i] = model.b[i];
    k.qa[i] = caps[static_cast<std::size_t>(i)];
    k.unlimited[i] = caps.unlimited(static_cast<std::size_t>(i));
  }
  k.c = model.cross(0, 1);
  return k;
}

double capacity_branch(const Coeffs& k, int i, double pj) {
  if (k.unlimited[i]) return -kUnlimited;
  return (k.a[i] - k.qa[i] + k.c * pj) / k.b[i];
}

struct PlayerUpdate {
  double value;
  Branch branch;
  double d_own;
  double d_other;
};

PlayerUpdate best_update(const Coeffs& k, int i, double pj) {
  const double br = (k.c * pj + k.a[i]) / (2.0 * k.b[i]);
  const double cap = capacity_branch(k, i, pj);
  if (cap > br) return {cap, Branch::kCapacityBinding, 0.0, k.c / k.b[i]};
  return {br, Branch::kBestResponse, 0.0, k.c / (2.0 * k.b[i])};
}

PlayerUpdate gradient_update(const Coeffs& k, double gamma, int i, double pi, double pj) {
  const double grad = pi + gamma * pi * (k.a[i] - 2.0 * k.b[i] * pi + k.c * pj);
  const double cap = capacity_branch(k, i, pj);
  if (cap > grad) return {cap, Branch::kCapacityBinding, 0.0, k.c / k.b[i]};
  return {grad, Branch::kGradient, 1.0 + gamma * (k.a[i] - 4.0 * k.b[i] * pi + k.c * pj),
          gamma * k.c * pi};
}

void guard_finite(double v) {
  if (!std::isfinite(v) || std::abs(v) > kOverflowGuard) {
    throw Error(ErrorKind::kNonFinite, "price orbit left the finite range");
  }
}

double max_step(const PriceVector& x, const PriceVector& y) {
  return (x.vec() - y.vec()).cwiseAbs().maxCoeff();
}

}  // namespace

void LearningRates::validate() const {
  for (double g : gamma) {
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw Error(ErrorKind::kValidationError, "learning rates must be > 0");
    }
  }
}

std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::kInitial: return "initial";
    case Branch::kBestResponse: return "best_response";
    case Branch::kCapacityBinding: return "capacity";
    case Branch::kGradient: return "gradient";
  }
  return "unknown";
}

PriceVector strict_best_step(const DemandModel& model, const CapacitySpec& caps,
                             const PriceVector& p, BranchPair* branches) {
  const Coeffs k = coeffs_of(model, caps);
  require_size(2, p.size(), "price vector");
  const PlayerUpdate u0 = best_update(k, 0, p[1]);
  const PlayerUpdate u1 = best_update(k, 1, p[0]);
  if (branches) *branches = {u0.branch, u1.branch};
  return PriceVector{u0.value, u1.value};
}

OrbitRecord strict_best_run(const DemandModel& model, const CapacitySpec& caps,
                            const PriceVector& p0, double tol, std::size_t max_iter) {
  if (!(tol > 0.0)) throw Error(ErrorKind::kInvalidArgument, "tol must be > 0");
  OrbitRecord orbit;
  orbit.trajectory.push_back(p0);
  orbit.rule_taken.push_back({Branch::kInitial, Branch::kInitial});
  PriceVector p = p0;
  for (std::size_t t = 0; t < max_iter; ++t) {
    BranchPair br{};
    PriceVector next = strict_best_step(model, caps, p, &br);
    orbit.trajectory.push_back(next);
    orbit.rule_taken.push_back(br);
    const double change = max_step(next, p);
    p = std::move(next);
    if (change < tol) {
      orbit.converged = true;
      orbit.limit = p;
      break;
    }
  }
  if (orbit.converged) {
    const EquilibriumResult ne = oligopoly_ne_search(model, caps).result;
    orbit.limit_error = max_step(*orbit.limit, ne.prices);
  }
  return orbit;
}

double portable_uniform(std::mt19937_64& rng, double eps) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 * eps;
}

bool routes_to_best_response(const DemandModel& model, const CapacitySpec& caps) {
  return duopoly_ne(model, caps).case_label == CaseLabel::kCase4;
}

StrictBrMap::StrictBrMap(const DemandModel& model, const CapacitySpec& caps, LearningRates rates,
                         std::uint64_t seed, double escape)
    : model_(model),
      caps_(caps),
      rates_(rates),
      escape_(escape),
      best_response_mode_(routes_to_best_response(model, caps)),
      rng_(seed) {
  rates_.validate();
  if (!(escape >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "escape width must be >= 0");
}

StrictBrMap::Step StrictBrMap::step(const PriceVector& p) {
  require_size(2, p.size(), "price vector");
  const Coeffs k = coeffs_of(model_, caps_);
  PlayerUpdate u[2];
  for (int i = 0; i < 2; ++i) {
    const double own = p[static_cast<std::size_t>(i)];
    const double other = p[static_cast<std::size_t>(1 - i)];
    u[i] = best_response_mode_ ? best_update(k, i, other)
                               : gradient_update(k, rates_.gamma[static_cast<std::size_t>(i)], i,
                                                 own, other);
  }
  Step s{PriceVector::zeros(2), {u[0].branch, u[1].branch}, {false, false}, Matrix(2, 2)};
  for (int i = 0; i < 2; ++i) {
    double v = u[i].value;
    guard_finite(v);
    if (v <= kZeroPrice) {
      v = portable_uniform(rng_, escape_);
      s.escaped[static_cast<std::size_t>(i)] = true;
    }
    s.next[static_cast<std::size_t>(i)] = v;
    s.jacobian(i, i) = u[i].d_own;
    s.jacobian(i, 1 - i) = u[i].d_other;
  }
  return s;
}

OrbitRecord StrictBrMap::run(const PriceVector& p0, std::size_t steps, double tol) {
  OrbitRecord orbit;
  orbit.trajectory.reserve(steps + 1);
  orbit.trajectory.push_back(p0);
  orbit.rule_taken.push_back({Branch::kInitial, Branch::kInitial});
  PriceVector p = p0;
  for (std::size_t t = 0; t < steps; ++t) {
    Step s = step(p);
    orbit.escapes += static_cast<std::size_t>(s.escaped[0]) + static_cast<std::size_t>(s.escaped[1]);
    const double change = max_step(s.next, p);
    orbit.trajectory.push_back(s.next);
    orbit.rule_taken.push_back(s.branches);
    p = std::move(s.next);
    if (tol > 0.0 && change < tol) {
      orbit.converged = true;
      orbit.limit = p;
      break;
    }
  }
  return orbit;
}

PriceVector strict_br_step(const DemandModel& model, const CapacitySpec& caps,
                           const LearningRates& rates, const PriceVector& p,
                           std::mt19937_64& rng, double escape) {
  rates.validate();
  const Coeffs k = coeffs_of(model, caps);
  require_size(2, p.size(), "price vector");
  const bool br_mode = routes_to_best_response(model, caps);
  PriceVector next = PriceVector::zeros(2);
  for (int i = 0; i < 2; ++i) {
    const double own = p[static_cast<std::size_t>(i)];
    const double other = p[static_cast<std::size_t>(1 - i)];
    double v = br_mode ? best_update(k, i, other).value
                       : gradient_update(k, rates.gamma[static_cast<std::size_t>(i)], i, own, other)
                             .value;
    guard_finite(v);
    if (v <= kZeroPrice) v = portable_uniform(rng, escape);
    next[static_cast<std::size_t>(i)] = v;
  }
  return next;
}

std::vector<PriceVector> br_fixed_points(const DemandModel& model, const CapacitySpec& caps) {
  const Coeffs k = coeffs_of(model, caps);
  const EquilibriumResult ne = duopoly_ne(model, caps);
  switch (ne.case_label) {
    case CaseLabel::kCase1:
      return {PriceVector{0.0, 0.0}, PriceVector{k.a[0] / (2.0 * k.b[0]), 0.0},
              PriceVector{0.0, k.a[1] / (2.0 * k.b[1])}, ne.prices};
    case CaseLabel::kCase2:
      return {PriceVector{(k.a[0] - k.qa[0]) / k.b[0], 0.0}, ne.prices};
    case CaseLabel::kCase3:
      return {PriceVector{0.0, (k.a[1] - k.qa[1]) / k.b[1]}, ne.prices};
    default:
      return {ne.prices};
  }
}

Matrix br_jacobian(const DemandModel& model, const CapacitySpec& caps, const LearningRates& rates,
                   const PriceVector& at) {
  rates.validate();
  const Coeffs k = coeffs_of(model, caps);
  require_size(2, at.size(), "price vector");
  const bool br_mode = routes_to_best_response(model, caps);
  Matrix j(2, 2);
  for (int i = 0; i < 2; ++i) {
    const double own = at[static_cast<std::size_t>(i)];
    const double other = at[static_cast<std::size_t>(1 - i)];
    const double cap = capacity_branch(k, i, other);
    const PlayerUpdate u = br_mode ? best_update(k, i, other)
                                   : gradient_update(k, rates.gamma[static_cast<std::size_t>(i)],
                                                     i, own, other);
    const double alt = br_mode ? (k.c * other + k.a[i]) / (2.0 * k.b[i])
                               : own + rates.gamma[static_cast<std::size_t>(i)] * own *
                                           (k.a[i] - 2.0 * k.b[i] * own + k.c * other);
    if (std::abs(cap - alt) <= 1e-9) {
      throw Error(ErrorKind::kBoundaryPoint,
                  "player " + std::to_string(i + 1) + " is on the branch switch; Jacobian undefined");
    }
    j(i, i) = u.d_own;
    j(i, 1 - i) = u.d_other;
  }
  return j;
}

std::array<std::complex<double>, 2> eigenvalues_2x2(const Matrix& j) {
  const double tr = j(0, 0) + j(1, 1);
  const double det = j(0, 0) * j(1, 1) - j(0, 1) * j(1, 0);
  const std::complex<double> root = std::sqrt(std::complex<double>(tr * tr - 4.0 * det, 0.0));
  return {(tr + root) / 2.0, (tr - root) / 2.0};
}

StabilityReport stability_analysis(const DemandModel& model, const CapacitySpec& caps,
                                   const LearningRates& rates) {
  StabilityReport rep;
  rep.fixed_points = br_fixed_points(model, caps);
  for (const PriceVector& fp : rep.fixed_points) {
    Matrix j = br_jacobian(model, caps, rates, fp);
    const auto ev = eigenvalues_2x2(j);
    rep.stable.push_back(std::max(std::abs(ev[0]), std::abs(ev[1])) < 1.0 - 1e-12);
    rep.eigenvalues.push_back(ev);
    rep.jacobians.push_back(std::move(j));
  }
  return rep;
}

Table orbit_table(const OrbitRecord& orbit) {
  Table t;
  t.columns = {"t", "p1", "p2", "branch1", "branch2"};
  t.rows.reserve(orbit.trajectory.size());
  for (std::size_t k = 0; k < orbit.trajectory.size(); ++k) {
    const auto& p = orbit.trajectory[k];
    const auto& br = orbit.rule_taken[k];
    t.rows.push_back({static_cast<long long>(k), p[0], p[1], std::string(to_string(br[0])),
                      std::string(to_string(br[1]))});
  }
  return t;
}

void write_orbit_csv(std::ostream& out, const OrbitRecord& orbit) {
  write_table_csv(out, orbit_table(orbit));
}

}  // namespace spectrum
