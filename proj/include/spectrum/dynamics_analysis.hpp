#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "spectrum/type1_dynamic.hpp"

namespace spectrum {

enum class SweepParameter { kGamma1, kGamma2 };

struct SweepSpec {
  SweepParameter varied = SweepParameter::kGamma1;
  double lo = 0.01;
  double hi = 0.09;
  std::size_t steps = 81;
  std::size_t transient = 1000;
  std::size_t samples = 200;
  PriceVector p0{5.0, 5.0};
  std::uint64_t master_seed = 0;

  void validate() const;
  double value(std::size_t k) const;
  LearningRates rates_at(std::size_t k, const LearningRates& fixed) const;
};

/// Seed of sweep point `index`, a pure function of (master, index).
std::uint64_t point_seed(std::uint64_t master, std::uint64_t index);

struct BifurcationPoint {
  double param = 0.0;
  std::vector<double> p1;
  std::vector<double> p2;
  bool diverged = false;
  std::size_t period = 0;  // 0: no cycle of length <= 64 detected
  double spread = 0.0;     // max - min of the p1 samples
};

struct LyapunovPoint {
  double param = 0.0;
  double lambda_max = 0.0;
  bool diverged = false;
};

using PointCloud = std::vector<std::array<double, 2>>;

struct DynamicsReport {
  std::vector<BifurcationPoint> bifurcation;
  std::vector<LyapunovPoint> lyapunov;
  std::optional<PointCloud> attractor;
};

/// Number of clusters of width < tol among the values, or 0 if more than
/// max_period.
std::size_t detect_period(const std::vector<double>& values, double tol = 1e-6,
                          std::size_t max_period = 64);

DynamicsReport bifurcation_sweep(const DemandModel& model, const CapacitySpec& caps,
                                 const SweepSpec& spec, const LearningRates& fixed_rates);

/// Mean log growth of a renormalized tangent vector over n_iter steps after
/// the transient, using the Jacobian of the branch each step took. Throws
/// Diverged when the orbit overflows.
double lyapunov_max(const DemandModel& model, const CapacitySpec& caps, const LearningRates& rates,
                    const PriceVector& p0, std::size_t n_iter = 50000,
                    std::size_t transient = 1000, std::uint64_t seed = 0);

std::vector<LyapunovPoint> lyapunov_sweep(const DemandModel& model, const CapacitySpec& caps,
                                          const SweepSpec& spec, const LearningRates& fixed_rates,
                                          std::size_t n_iter = 50000);

PointCloud attractor_capture(const DemandModel& model, const CapacitySpec& caps,
                             const LearningRates& rates, const PriceVector& p0,
                             std::size_t n_points, std::size_t transient = 1000,
                             std::uint64_t seed = 0);

/// `param,value_index,p1_sample`
Table bifurcation_table(const std::vector<BifurcationPoint>& points);
/// `param,lambda_max,diverged`
Table lyapunov_table(const std::vector<LyapunovPoint>& points);
/// `p1,p2`
Table attractor_table(const PointCloud& cloud);

}  // namespace spectrum
