#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "spectrum/type1_dynamic.hpp"
#include "spectrum/type1_static.hpp"

namespace spectrum {

struct Type2Config {
  double theta = 0.1;
  CapacitySpec caps;
  // B_i / r_i, only needed for the constant part of the delay penalty.
  std::optional<std::vector<double>> load_terms;

  void validate(std::size_t n) const;
};

struct Type2Utility {
  double value = 0.0;
  bool offset_omitted = true;  // -theta log(B_i/r_i) left out
};

/// p_i q_i - theta log[(B_i/r_i) / (q_i^a - q_i)] with q_i = f_i(p).
Type2Utility type2_utility(const DemandModel& model, const Type2Config& cfg, std::size_t i,
                           const PriceVector& p);

/// Price-space first-order residual
///   a_i - 2 b_i p_i + sum_j c_ij p_j + theta b_i / (q_i^a - q_i).
double type2_foc_residual(const DemandModel& model, const Type2Config& cfg, std::size_t i,
                          const PriceVector& p);

/// Smaller root of the player-i stationarity quadratic in demand space,
/// given total demand z. Always below q_i^a.
double h_of_z(const MarketParameters& params, const DemandModel& model, const Type2Config& cfg,
              std::size_t i, double z);

struct FeasibilityFlags {
  bool own_effect_dominates = true;   // beta_i > mu
  bool positive_parameters = true;    // alpha, beta, mu, a, b > 0, c > 0
  bool capacity_covers_theta = true;  // alpha_i q_i^a >= theta
  bool nonnegative_demand = true;     // mu b_i Z q_i^a - alpha_i b_i q_i^a + theta b_i <= 0
  bool all() const {
    return own_effect_dominates && positive_parameters && capacity_covers_theta &&
           nonnegative_demand;
  }
};

struct AggregateDemandSolve {
  double z_star = 0.0;
  double residual = 0.0;
  DemandVector per_player_q;
  FeasibilityFlags flags;
  std::size_t bisection_steps = 0;
};

struct Type2Solution {
  EquilibriumResult result;  // payoffs are type2 utilities without the offset
  AggregateDemandSolve aggregate;
};

/// Duopoly NE by eliminating q2 and bisecting the remaining scalar equation.
EquilibriumResult type2_duopoly_ne(const Market& market, const Type2Config& cfg);

/// N-player NE through the aggregate-demand fixed point Z = sum_i h_i(Z).
Type2Solution type2_oligopoly_ne(const Market& market, const Type2Config& cfg, double tol = 1e-12);

struct QosPlayerDiagnostics {
  std::array<double, 2> roots{};    // [+ root, - root]
  std::array<double, 2> demands{};
  std::array<bool, 2> feasible{};
  std::size_t chosen = 0;
  bool decided_by_utility = false;
};

struct QosStep {
  PriceVector next;
  std::array<QosPlayerDiagnostics, 2> players;
};

QosStep qosbest_step(const DemandModel& model, const Type2Config& cfg, const PriceVector& p);

struct QosRun {
  OrbitRecord orbit;
  std::vector<QosStep> steps;
  // |p2(t+2) - p2*| / |p2(t) - p2*| for pairs whose base distance exceeds 1e-8.
  std::vector<double> contraction_ratios;
  double contraction_bound = 0.0;  // c^2 / (b1 b2)
  bool additive_bound_holds = true;
  std::optional<PriceVector> reference;
};

QosRun qosbest_run(const Market& market, const Type2Config& cfg, const PriceVector& p0, double tol,
                   std::size_t max_iter);

}  // namespace spectrum
