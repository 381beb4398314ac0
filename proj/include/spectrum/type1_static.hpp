#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "spectrum/market.hpp"

namespace spectrum {

// Demand within this distance of capacity counts as capacity-sufficient.
inline constexpr double kBindingTolerance = 1e-9;

enum class CaseLabel { kCase1, kCase2, kCase3, kCase4, kOligopolyGeneral };

std::string_view to_string(CaseLabel label);

struct EquilibriumResult {
  PriceVector prices;
  DemandVector demands;  // min{f_i(p), q_i^a}
  std::vector<double> payoffs;
  std::vector<bool> binding;
  CaseLabel case_label = CaseLabel::kOligopolyGeneral;
  // Set when the duopoly case tests were ambiguous and the search decided.
  bool tie_resolved = false;
};

/// One iteration of the capacity-insufficiency search.
struct SearchState {
  std::size_t iteration = 0;
  std::vector<std::size_t> insufficient_set;  // sorted
  Matrix q_matrix;
  Vector rhs;
  PriceVector prices;
};

struct SearchOutcome {
  EquilibriumResult result;
  std::vector<SearchState> trace;
  std::size_t iterations() const { return trace.empty() ? 0 : trace.size() - 1; }
};

/// Type-I payoff p_i * min{f_i(p), q_i^a}.
double type1_payoff(const DemandModel& model, const CapacitySpec& caps, std::size_t i,
                    const PriceVector& p);

/// Fills demands, payoffs and the binding vector for a given price point.
EquilibriumResult type1_outcome(const DemandModel& model, const CapacitySpec& caps,
                                const PriceVector& p, CaseLabel label);

/// Demand player i would choose facing p_{-i} without a capacity limit:
/// (a_i + sum_j c_ij p_j) / 2.
double best_response_demand(const DemandModel& model, std::size_t i, const PriceVector& p);

EquilibriumResult duopoly_unconstrained_ne(const DemandModel& model);
EquilibriumResult duopoly_ne(const DemandModel& model, const CapacitySpec& caps);
SearchOutcome oligopoly_ne_search(const DemandModel& model, const CapacitySpec& caps);

struct DeviationGrid {
  std::size_t points = 400;
  double upper_factor = 2.0;  // grid spans [0, upper_factor * p_i*]
};

struct Counterexample {
  std::size_t player = 0;
  double deviation_price = 0.0;
  double gain = 0.0;
};

struct VerifyReport {
  bool ok = true;
  std::optional<Counterexample> counterexample;
  explicit operator bool() const { return ok; }
};

/// Unilateral-deviation test. A deviation fails the candidate when it beats
/// the candidate payoff by more than 1e-9 * max(1, |pi_i|).
VerifyReport ne_verify(const DemandModel& model, const CapacitySpec& caps,
                       const EquilibriumResult& candidate, const DeviationGrid& grid = {});

/// One JSON object per line: {"k":..,"M":[..],"p":[..]} with 1-based players.
void write_trace_jsonl(std::ostream& out, const std::vector<SearchState>& trace);

}  // namespace spectrum
