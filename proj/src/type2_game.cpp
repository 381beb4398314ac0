#include "spectrum/type2_game.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace spectrum {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

double raw_demand(const DemandModel& model, std::size_t i, const PriceVector& p) {
  double q = model.a[idx(i)] - model.b[idx(i)] * p[i];
  for (std::size_t j = 0; j < model.size(); ++j) {
    if (j != i) q += model.cross(i, j) * p[j];
  }
  return q;
}

// Utility up to the constant offset; -inf outside the penalty domain.
double utility_or_floor(double price, double q, double qa, double theta) {
  if (q >= qa) return -std::numeric_limits<double>::infinity();
  return price * q + theta * std::log(qa - q);
}

void check_market(const Market& market, const Type2Config& cfg) {
  cfg.validate(market.size());
  require_size(market.params.size(), market.size(), "market parameters");
}

FeasibilityFlags a_priori_flags(const Market& market, const Type2Config& cfg) {
  FeasibilityFlags f;
  const auto& pr = market.params;
  const auto& m = market.model;
  for (std::size_t i = 0; i < market.size(); ++i) {
    if (!(pr.beta[i] > pr.mu)) f.own_effect_dominates = false;
    if (!(pr.alpha[i] > 0.0 && pr.beta[i] > 0.0 && pr.mu > 0.0 && m.a[idx(i)] > 0.0 &&
          m.b[idx(i)] > 0.0)) {
      f.positive_parameters = false;
    }
    for (std::size_t j = 0; j < market.size(); ++j) {
      if (j != i && !(m.cross(i, j) > 0.0)) f.positive_parameters = false;
    }
    if (!(pr.alpha[i] * cfg.caps[i] >= cfg.theta)) f.capacity_covers_theta = false;
  }
  return f;
}

void raise_on_flags(const FeasibilityFlags& f) {
  const char* which = !f.own_effect_dominates   ? "beta_i > mu"
                      : !f.positive_parameters  ? "positive market parameters"
                      : !f.capacity_covers_theta ? "alpha_i q_i^a >= theta"
                      : !f.nonnegative_demand    ? "nonnegative demand at Z*"
                                                 : nullptr;
  if (which) {
    throw Error(ErrorKind::kConditionViolation, std::string("existence condition failed: ") + which);
  }
}

EquilibriumResult type2_outcome(const DemandModel& model, const Type2Config& cfg,
                                const PriceVector& p, const Vector& q) {
  const std::size_t n = model.size();
  EquilibriumResult r;
  r.prices = p;
  r.demands = DemandVector(q);
  r.payoffs.resize(n);
  r.binding.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) r.payoffs[i] = type2_utility(model, cfg, i, p).value;
  r.case_label = CaseLabel::kOligopolyGeneral;
  return r;
}

void check_foc(const DemandModel& model, const Type2Config& cfg, const PriceVector& p) {
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double res = type2_foc_residual(model, cfg, i, p);
    const double scale = std::max(1.0, std::abs(model.a[idx(i)]));
    if (!(std::abs(res) <= 1e-8 * scale)) {
      std::ostringstream os;
      os << "first-order condition of player " << i + 1 << " off by " << res;
      throw Error(ErrorKind::kTolerance, os.str());
    }
  }
}

}  // namespace

void Type2Config::validate(std::size_t n) const {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    throw Error(ErrorKind::kValidationError, "theta must be > 0");
  }
  caps.validate(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (caps.unlimited(i)) {
      throw Error(ErrorKind::kValidationError, "the delay penalty needs finite capacities");
    }
  }
  if (load_terms) {
    require_size(n, load_terms->size(), "load terms");
    for (double b : *load_terms) {
      if (!(b > 0.0)) throw Error(ErrorKind::kValidationError, "load terms must be > 0");
    }
  }
}

Type2Utility type2_utility(const DemandModel& model, const Type2Config& cfg, std::size_t i,
                           const PriceVector& p) {
  require_size(model.size(), p.size(), "price vector");
  require_size(model.size(), cfg.caps.size(), "capacities");
  const double q = raw_demand(model, i, p);
  const double qa = cfg.caps[i];
  if (!(q < qa)) {
    throw Error(ErrorKind::kPenaltyDomain, "demand of player " + std::to_string(i + 1) +
                                               " reaches its capacity");
  }
  Type2Utility u;
  u.value = p[i] * q + cfg.theta * std::log(qa - q);
  if (cfg.load_terms) {
    u.value -= cfg.theta * std::log((*cfg.load_terms)[i]);
    u.offset_omitted = false;
  }
  return u;
}

double type2_foc_residual(const DemandModel& model, const Type2Config& cfg, std::size_t i,
                          const PriceVector& p) {
  const double q = raw_demand(model, i, p);
  const double b = model.b[idx(i)];
  return q - b * p[i] + cfg.theta * b / (cfg.caps[i] - q);
}

double h_of_z(const MarketParameters& params, const DemandModel& model, const Type2Config& cfg,
              std::size_t i, double z) {
  const double b = model.b[idx(i)];
  const double k = 1.0 + params.beta[i] * b - params.mu * b;
  const double qa = cfg.caps[i];
  const double x = params.alpha[i] * b - params.mu * b * z;
  // k q^2 - (k qa + x) q + (x qa - theta b) = 0
  const double bq = k * qa + x;
  const double cq = x * qa - cfg.theta * b;
  const double d = (x - k * qa) * (x - k * qa) + 4.0 * k * cfg.theta * b;
  const double s = std::sqrt(d);
  if (bq > 0.0) return 2.0 * cq / (bq + s);
  return (bq - s) / (2.0 * k);
}

EquilibriumResult type2_duopoly_ne(const Market& market, const Type2Config& cfg) {
  require_size(2, market.size(), "duopoly market");
  check_market(market, cfg);
  const auto& pr = market.params;
  const auto& m = market.model;
  if (!(pr.mu > 0.0)) return type2_oligopoly_ne(market, cfg).result;

  const double b1 = m.b[0], b2 = m.b[1];
  const double q1a = cfg.caps[0], q2a = cfg.caps[1];
  const double th = cfg.theta;

  // Player 1's stationarity solved for q2.
  auto q2_of = [&](double q1) {
    return (b1 * pr.alpha[0] - (1.0 + pr.beta[0] * b1) * q1 - th * b1 / (q1a - q1)) /
           (pr.mu * b1);
  };
  // Player 2's stationarity along that curve; strictly decreasing in q1.
  auto diff = [&](double q1) {
    const double q2 = q2_of(q1);
    return (1.0 + pr.beta[1] * b2) * q2 + pr.mu * b2 * q1 - b2 * pr.alpha[1] +
           th * b2 / (q2a - q2);
  };

  double lo = 0.0;
  if (q2_of(0.0) >= q2a) {
    // q2 falls through q2a somewhere in (0, q1a); the bracket starts there.
    double a = 0.0, b = q1a;
    for (int it = 0; it < 200 && b - a > 0.0; ++it) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      (q2_of(mid) >= q2a ? a : b) = mid;
    }
    lo = b;
  } else if (!(diff(0.0) > 0.0)) {
    std::ostringstream os;
    os << "stationarity gap at q1 = 0 is " << diff(0.0) << " (must be > 0)";
    throw Error(ErrorKind::kNoInteriorSolution, os.str());
  }

  double a = lo, b = q1a;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    const double v = diff(mid);
    if (v == 0.0) {
      a = b = mid;
      break;
    }
    (v > 0.0 ? a : b) = mid;
  }
  double q1 = 0.5 * (a + b);
  double q2 = q2_of(q1);

  // Near the capacity barrier q2_of amplifies the last bit of q1, so finish
  // with Newton on both stationarity equations, whose Jacobian is diagonally
  // dominant.
  for (int it = 0; it < 8 && q1 < q1a && q2 < q2a; ++it) {
    const double g1 = q1a - q1, g2 = q2a - q2;
    const double f1 = b1 * pr.alpha[0] - (1.0 + pr.beta[0] * b1) * q1 - pr.mu * b1 * q2 - th * b1 / g1;
    const double f2 = b2 * pr.alpha[1] - (1.0 + pr.beta[1] * b2) * q2 - pr.mu * b2 * q1 - th * b2 / g2;
    const double j11 = -(1.0 + pr.beta[0] * b1) - th * b1 / (g1 * g1);
    const double j22 = -(1.0 + pr.beta[1] * b2) - th * b2 / (g2 * g2);
    const double j12 = -pr.mu * b1, j21 = -pr.mu * b2;
    const double det = j11 * j22 - j12 * j21;
    const double d1 = (f1 * j22 - f2 * j12) / det;
    const double d2 = (f2 * j11 - f1 * j21) / det;
    // Never step across a capacity.
    if (!(q1 - d1 < q1a && q2 - d2 < q2a)) break;
    q1 -= d1;
    q2 -= d2;
    if (std::abs(d1) + std::abs(d2) < 1e-15 * (q1a + q2a)) break;
  }
  if (!(q1 > 0.0 && q1 < q1a && q2 > 0.0 && q2 < q2a)) {
    throw Error(ErrorKind::kNoInteriorSolution, "stationary demands leave (0, q^a)");
  }

  const Vector q{{q1, q2}};
  const PriceVector p = inverse_demand(pr, DemandVector(q));
  check_foc(m, cfg, p);
  return type2_outcome(m, cfg, p, demand(m, p).vec());
}

Type2Solution type2_oligopoly_ne(const Market& market, const Type2Config& cfg, double tol) {
  check_market(market, cfg);
  if (!(tol > 0.0)) throw Error(ErrorKind::kInvalidArgument, "tol must be > 0");
  const std::size_t n = market.size();
  const auto& pr = market.params;
  const auto& m = market.model;

  Type2Solution sol;
  AggregateDemandSolve& agg = sol.aggregate;
  agg.flags = a_priori_flags(market, cfg);
  raise_on_flags(agg.flags);

  auto g = [&](double z) {
    double s = -z;
    for (std::size_t i = 0; i < n; ++i) s += h_of_z(pr, m, cfg, i, z);
    return s;
  };

  const double g0 = g(0.0);
  if (!(g0 > 0.0)) {
    std::ostringstream os;
    os << "sum of h_i(0) is not positive (gap " << g0 << ")";
    throw Error(ErrorKind::kInfeasibleMarket, os.str());
  }
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) hi += cfg.caps[i];

  double z = 0.0;
  double gz = g0;
  for (std::size_t it = 0; it < 200; ++it) {
    z = 0.5 * (lo + hi);
    gz = g(z);
    agg.bisection_steps = it + 1;
    if (std::abs(gz) < tol) break;
    if (gz > 0.0) {
      lo = z;
    } else {
      hi = z;
    }
    if (!(lo < 0.5 * (lo + hi) && 0.5 * (lo + hi) < hi)) break;
  }
  agg.z_star = z;
  agg.residual = std::abs(gz);
  if (agg.residual > 1e3 * tol) {
    std::ostringstream os;
    os << "aggregate-demand bisection stalled at residual " << agg.residual;
    throw Error(ErrorKind::kTolerance, os.str());
  }

  Vector q(idx(n));
  for (std::size_t i = 0; i < n; ++i) {
    q[idx(i)] = h_of_z(pr, m, cfg, i, z);
    const double b = m.b[idx(i)];
    if (pr.mu * b * z * cfg.caps[i] - pr.alpha[i] * b * cfg.caps[i] + cfg.theta * b > 0.0) {
      agg.flags.nonnegative_demand = false;
    }
  }
  raise_on_flags(agg.flags);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(q[idx(i)] > 0.0 && q[idx(i)] < cfg.caps[i])) {
      throw Error(ErrorKind::kConditionViolation,
                  "demand of player " + std::to_string(i + 1) + " outside (0, q^a)");
    }
  }
  agg.per_player_q = DemandVector(q);

  const PriceVector p = inverse_demand(pr, agg.per_player_q);
  check_foc(m, cfg, p);
  sol.result = type2_outcome(m, cfg, p, demand(m, p).vec());
  return sol;
}

QosStep qosbest_step(const DemandModel& model, const Type2Config& cfg, const PriceVector& p) {
  require_size(2, model.size(), "duopoly market");
  cfg.validate(2);
  require_size(2, p.size(), "price vector");
  const double c = model.cross(0, 1);
  QosStep out{PriceVector::zeros(2), {}};
  for (std::size_t i = 0; i < 2; ++i) {
    const std::size_t j = 1 - i;
    const double b = model.b[idx(i)];
    const double qa = cfg.caps[i];
    const double s = model.a[idx(i)] + c * p[j];
    // 2b^2 p^2 + (2b(qa - s) - b s) p - s(qa - s) - b theta = 0
    const double disc = (s - 2.0 * qa) * (s - 2.0 * qa) + 8.0 * b * cfg.theta;
    if (disc < 0.0) {
      std::ostringstream os;
      os << "price quadratic of player " << i + 1 << " has no real roots (s=" << s
         << ", qa=" << qa << ", theta=" << cfg.theta << ")";
      throw Error(ErrorKind::kComplexRoots, os.str());
    }
    const double r = std::sqrt(disc);
    auto& d = out.players[i];
    d.roots = {(3.0 * s - 2.0 * qa + r) / (4.0 * b), (3.0 * s - 2.0 * qa - r) / (4.0 * b)};
    for (std::size_t k = 0; k < 2; ++k) {
      d.demands[k] = s - b * d.roots[k];
      d.feasible[k] = d.demands[k] > 0.0 && d.demands[k] < qa;
    }
    if (d.feasible[0] != d.feasible[1]) {
      d.chosen = d.feasible[0] ? 0 : 1;
    } else {
      d.decided_by_utility = true;
      const double u0 = utility_or_floor(d.roots[0], d.demands[0], qa, cfg.theta);
      const double u1 = utility_or_floor(d.roots[1], d.demands[1], qa, cfg.theta);
      if (std::abs(u0 - u1) <= 1e-12 || (std::isinf(u0) && std::isinf(u1))) {
        d.chosen = d.roots[0] <= d.roots[1] ? 0 : 1;
      } else {
        d.chosen = u0 > u1 ? 0 : 1;
      }
    }
    out.next[i] = d.roots[d.chosen];
  }
  return out;
}

QosRun qosbest_run(const Market& market, const Type2Config& cfg, const PriceVector& p0, double tol,
                   std::size_t max_iter) {
  require_size(2, market.size(), "duopoly market");
  check_market(market, cfg);
  if (!(tol > 0.0)) throw Error(ErrorKind::kInvalidArgument, "tol must be > 0");
  const auto& m = market.model;
  const double c = m.cross(0, 1);
  if (!(m.b[0] > c && m.b[1] > c && c > 0.0)) {
    throw Error(ErrorKind::kConditionViolation, "convergence needs b_1 > c > 0 and b_2 > c > 0");
  }

  QosRun run;
  run.contraction_bound = c * c / (m.b[0] * m.b[1]);
  run.orbit.trajectory.push_back(p0);
  run.orbit.rule_taken.push_back({Branch::kInitial, Branch::kInitial});
  PriceVector p = p0;
  for (std::size_t t = 0; t < max_iter; ++t) {
    QosStep s = qosbest_step(m, cfg, p);
    const double change = (s.next.vec() - p.vec()).cwiseAbs().maxCoeff();
    p = s.next;
    run.orbit.trajectory.push_back(p);
    run.orbit.rule_taken.push_back({Branch::kBestResponse, Branch::kBestResponse});
    run.steps.push_back(std::move(s));
    if (change < tol) {
      run.orbit.converged = true;
      run.orbit.limit = p;
      break;
    }
  }

  const EquilibriumResult ne = type2_duopoly_ne(market, cfg);
  run.reference = ne.prices;
  if (run.orbit.converged) {
    run.orbit.limit_error = (run.orbit.limit->vec() - ne.prices.vec()).cwiseAbs().maxCoeff();
  }
  const auto& traj = run.orbit.trajectory;
  const double p2s = ne.prices[1];
  for (std::size_t t = 0; t + 2 < traj.size(); ++t) {
    const double before = std::abs(traj[t][1] - p2s);
    const double after = std::abs(traj[t + 2][1] - p2s);
    if (after > run.contraction_bound * before + 1e-9) run.additive_bound_holds = false;
    if (before > 1e-8) run.contraction_ratios.push_back(after / before);
  }
  return run;
}

}  // namespace spectrum
