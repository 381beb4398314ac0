#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string_view>
#include <vector>

#include "spectrum/csv.hpp"
#include "spectrum/type1_static.hpp"

namespace spectrum {

inline constexpr double kEscapeDefault = 0.01;
inline constexpr double kOverflowGuard = 1e12;
inline constexpr double kZeroPrice = 1e-12;

struct LearningRates {
  std::array<double, 2> gamma{0.01, 0.01};
  void validate() const;
};

enum class Branch { kInitial, kBestResponse, kCapacityBinding, kGradient };

std::string_view to_string(Branch b);

using BranchPair = std::array<Branch, 2>;

struct OrbitRecord {
  std::vector<PriceVector> trajectory;
  std::vector<BranchPair> rule_taken;  // same length; entry 0 is kInitial
  bool converged = false;
  std::optional<PriceVector> limit;
  // Distance from the limit to the reference equilibrium, when one was checked.
  std::optional<double> limit_error;
  std::size_t escapes = 0;

  std::size_t iterations() const { return trajectory.empty() ? 0 : trajectory.size() - 1; }
};

/// p_i(t+1) = max{(c p_j + a_i)/(2 b_i), (a_i - q_i^a + c p_j)/b_i}, both
/// players updated from slot-t prices.
PriceVector strict_best_step(const DemandModel& model, const CapacitySpec& caps,
                             const PriceVector& p, BranchPair* branches = nullptr);

/// Iterates until the max-norm step is below tol. A converged limit is
/// compared with the insufficiency-search equilibrium (limit_error).
OrbitRecord strict_best_run(const DemandModel& model, const CapacitySpec& caps,
                            const PriceVector& p0, double tol, std::size_t max_iter);

/// Uniform draw on [0, eps) from the top 53 bits of the generator, so the
/// sequence is identical across standard libraries.
double portable_uniform(std::mt19937_64& rng, double eps);

/// One slot of the bounded-rationality rule
///   p_i <- max{(a_i - q_i^a + c p_j)/b_i, p_i + gamma_i p_i (a_i - 2 b_i p_i + c p_j)}.
/// Prices at or below 1e-12 are replaced by a uniform draw on [0, escape).
/// Markets in which both players are capacity-insufficient follow the
/// best-response rule instead.
class StrictBrMap {
 public:
  StrictBrMap(const DemandModel& model, const CapacitySpec& caps, LearningRates rates,
              std::uint64_t seed, double escape = kEscapeDefault);

  struct Step {
    PriceVector next;
    BranchPair branches;
    std::array<bool, 2> escaped{false, false};
    Matrix jacobian;  // of the branch that produced each entry
  };

  Step step(const PriceVector& p);
  bool best_response_mode() const { return best_response_mode_; }

  OrbitRecord run(const PriceVector& p0, std::size_t steps, double tol = 0.0);

 private:
  DemandModel model_;
  CapacitySpec caps_;
  LearningRates rates_;
  double escape_;
  bool best_response_mode_;
  std::mt19937_64 rng_;
};

PriceVector strict_br_step(const DemandModel& model, const CapacitySpec& caps,
                           const LearningRates& rates, const PriceVector& p,
                           std::mt19937_64& rng, double escape = kEscapeDefault);

/// True when the static equilibrium has both players capacity-insufficient.
bool routes_to_best_response(const DemandModel& model, const CapacitySpec& caps);

std::vector<PriceVector> br_fixed_points(const DemandModel& model, const CapacitySpec& caps);

/// Jacobian of the active branch; BoundaryPoint when the two branches of a
/// player agree within 1e-9.
Matrix br_jacobian(const DemandModel& model, const CapacitySpec& caps, const LearningRates& rates,
                   const PriceVector& at);

/// Roots of z^2 - tr z + det = 0.
std::array<std::complex<double>, 2> eigenvalues_2x2(const Matrix& j);

struct StabilityReport {
  std::vector<PriceVector> fixed_points;
  std::vector<Matrix> jacobians;
  std::vector<std::array<std::complex<double>, 2>> eigenvalues;
  std::vector<bool> stable;
};

StabilityReport stability_analysis(const DemandModel& model, const CapacitySpec& caps,
                                   const LearningRates& rates);

/// Columns `t,p1,p2,branch1,branch2`, one row per slot.
Table orbit_table(const OrbitRecord& orbit);
void write_orbit_csv(std::ostream& out, const OrbitRecord& orbit);

}  // namespace spectrum
