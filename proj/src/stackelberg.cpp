#include "spectrum/stackelberg.hpp"

#include <optional>

namespace spectrum {

namespace {

struct Point {
  double pl;
  double pf;
  CaseLabel label;
  bool is_static;
};

// Binding player in the original labelling -> Case2 (player 1) or Case3.
CaseLabel single_binding_case(std::size_t binding_player) {
  return binding_player == 0 ? CaseLabel::kCase2 : CaseLabel::kCase3;
}

}  // namespace

StackelbergResult stackelberg_ne(const DemandModel& model, const CapacitySpec& caps,
                                 std::size_t leader) {
  require_size(2, model.size(), "duopoly market");
  caps.validate(2);
  if (leader > 1) throw Error(ErrorKind::kInvalidArgument, "leader must be player 1 or 2");
  const std::size_t l = leader;
  const std::size_t f = 1 - leader;

  // Everything below is written in leader/follower coordinates, so the
  // player-2-leads case is the same code under relabelling.
  const double al = model.a[static_cast<Eigen::Index>(l)];
  const double af = model.a[static_cast<Eigen::Index>(f)];
  const double bl = model.b[static_cast<Eigen::Index>(l)];
  const double bf = model.b[static_cast<Eigen::Index>(f)];
  const double c = model.cross(0, 1);
  const double ql = caps[l];
  const double qf = caps[f];
  if (!(bl * bf - c * c > 0.0)) throw Error(ErrorKind::kDegenerateMarket, "b1 b2 - c^2 <= 0");

  auto leader_demand = [&](double pl, double pf) { return al - bl * pl + c * pf; };
  auto follower_br_demand = [&](double pl) { return 0.5 * (af + c * pl); };

  const EquilibriumResult stat = duopoly_ne(model, caps);
  std::vector<Point> admissible;

  {
    const double pl = (2.0 * al * bf + c * af) / (2.0 * (2.0 * bl * bf - c * c));
    const double pf = (af + c * pl) / (2.0 * bf);
    if (follower_br_demand(pl) <= qf + kBindingTolerance &&
        leader_demand(pl, pf) <= ql + kBindingTolerance) {
      admissible.push_back({pl, pf, CaseLabel::kCase1, false});
    }
  }
  if (stat.binding[l] && !stat.binding[f]) {
    admissible.push_back({stat.prices[l], stat.prices[f], single_binding_case(l), true});
  }
  if (!caps.unlimited(f)) {
    const double pl = (af * c + al * bf - c * qf) / (2.0 * (bl * bf - c * c));
    const double pf = (af - qf + c * pl) / bf;
    if (follower_br_demand(pl) > qf + kBindingTolerance &&
        leader_demand(pl, pf) <= ql + kBindingTolerance) {
      admissible.push_back({pl, pf, single_binding_case(f), false});
    }
  }
  if (stat.binding[l] && stat.binding[f]) {
    admissible.push_back({stat.prices[l], stat.prices[f], CaseLabel::kCase4, true});
  }

  if (admissible.empty()) {
    throw Error(ErrorKind::kInconsistentCase, "no leader-follower case matches the capacities");
  }

  std::optional<StackelbergResult> best;
  double best_payoff = 0.0;
  for (const Point& pt : admissible) {
    PriceVector p = PriceVector::zeros(2);
    p[l] = pt.pl;
    p[f] = pt.pf;
    if (p.any_negative()) continue;
    const EquilibriumResult r = type1_outcome(model, caps, p, pt.label);
    if (!best || r.payoffs[l] > best_payoff) {
      best_payoff = r.payoffs[l];
      best = StackelbergResult{l, r.prices, r.demands, r.payoffs, pt.label, pt.is_static};
    }
  }
  if (!best) throw Error(ErrorKind::kSignViolation, "leader-follower prices are negative");
  return *best;
}

GapReport leadership_gap(const DemandModel& model, const CapacitySpec& caps) {
  GapReport g;
  g.simultaneous = duopoly_ne(model, caps);
  for (std::size_t l = 0; l < 2; ++l) {
    g.led_by[l] = stackelberg_ne(model, caps, l);
    for (std::size_t i = 0; i < 2; ++i) {
      g.price_gap[l][i] = g.led_by[l].prices[i] - g.simultaneous.prices[i];
      g.payoff_gap[l][i] = g.led_by[l].payoffs[i] - g.simultaneous.payoffs[i];
    }
  }
  return g;
}

}  // namespace spectrum
