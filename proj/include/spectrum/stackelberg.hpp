#pragma once

#include <cstddef>
#include <vector>

#include "spectrum/type1_static.hpp"

namespace spectrum {

struct StackelbergResult {
  std::size_t leader = 0;  // 0-based
  PriceVector prices;
  DemandVector demands;
  std::vector<double> payoffs;
  CaseLabel case_label = CaseLabel::kCase1;
  bool coincides_with_static = false;
};

/// Leader-follower duopoly equilibrium by backward induction. The follower
/// answers with the type-I best response; the leader picks the admissible
/// closed-form point with the highest own payoff.
StackelbergResult stackelberg_ne(const DemandModel& model, const CapacitySpec& caps,
                                 std::size_t leader);

struct GapReport {
  EquilibriumResult simultaneous;
  StackelbergResult led_by[2];
  // price_gap[l][i] = price of player i when l leads minus the simultaneous price.
  double price_gap[2][2] = {};
  double payoff_gap[2][2] = {};
};

GapReport leadership_gap(const DemandModel& model, const CapacitySpec& caps);

}  // namespace spectrum
