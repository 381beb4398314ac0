#include "spectrum/dynamics_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace spectrum {

void SweepSpec::validate() const {
  if (!(lo < hi)) throw Error(ErrorKind::kValidationError, "sweep range needs lo < hi");
  if (steps < 2) throw Error(ErrorKind::kValidationError, "sweep needs at least 2 steps");
  if (samples == 0) throw Error(ErrorKind::kValidationError, "sweep needs samples > 0");
  require_size(2, p0.size(), "initial prices");
}

double SweepSpec::value(std::size_t k) const {
  return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1);
}

LearningRates SweepSpec::rates_at(std::size_t k, const LearningRates& fixed) const {
  LearningRates r = fixed;
  r.gamma[varied == SweepParameter::kGamma1 ? 0 : 1] = value(k);
  return r;
}

std::uint64_t point_seed(std::uint64_t master, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::size_t detect_period(const std::vector<double>& values, double tol, std::size_t max_period) {
  if (values.empty()) return 0;
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  std::size_t clusters = 1;
  double start = v.front();
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] - start >= tol) {
      ++clusters;
      start = v[i];
      if (clusters > max_period) return 0;
    }
  }
  return clusters;
}

DynamicsReport bifurcation_sweep(const DemandModel& model, const CapacitySpec& caps,
                                 const SweepSpec& spec, const LearningRates& fixed_rates) {
  spec.validate();
  DynamicsReport rep;
  rep.bifurcation.reserve(spec.steps);
  for (std::size_t k = 0; k < spec.steps; ++k) {
    BifurcationPoint pt;
    pt.param = spec.value(k);
    try {
      StrictBrMap map(model, caps, spec.rates_at(k, fixed_rates), point_seed(spec.master_seed, k));
      PriceVector p = spec.p0;
      for (std::size_t t = 0; t < spec.transient; ++t) p = map.step(p).next;
      for (std::size_t t = 0; t < spec.samples; ++t) {
        p = map.step(p).next;
        pt.p1.push_back(p[0]);
        pt.p2.push_back(p[1]);
      }
      const auto [mn, mx] = std::minmax_element(pt.p1.begin(), pt.p1.end());
      pt.spread = *mx - *mn;
      pt.period = detect_period(pt.p1);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNonFinite) throw;
      pt.diverged = true;
      pt.p1.clear();
      pt.p2.clear();
    }
    rep.bifurcation.push_back(std::move(pt));
  }
  return rep;
}

double lyapunov_max(const DemandModel& model, const CapacitySpec& caps, const LearningRates& rates,
                    const PriceVector& p0, std::size_t n_iter, std::size_t transient,
                    std::uint64_t seed) {
  if (n_iter == 0) throw Error(ErrorKind::kInvalidArgument, "n_iter must be > 0");
  try {
    StrictBrMap map(model, caps, rates, seed);
    PriceVector p = p0;
    for (std::size_t t = 0; t < transient; ++t) p = map.step(p).next;
    Eigen::Vector2d v(1.0, 0.0);
    double sum = 0.0;
    for (std::size_t t = 0; t < n_iter; ++t) {
      StrictBrMap::Step s = map.step(p);
      const Eigen::Vector2d w = s.jacobian * v;
      const double norm = w.norm();
      p = std::move(s.next);
      if (norm == 0.0) {
        // Tangent fell into the kernel of a rank-deficient step; restart it.
        v = Eigen::Vector2d(1.0, 0.0);
        continue;
      }
      sum += std::log(norm);
      v = w / norm;
    }
    return sum / static_cast<double>(n_iter);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kNonFinite) throw Error(ErrorKind::kDiverged, e.what());
    throw;
  }
}

std::vector<LyapunovPoint> lyapunov_sweep(const DemandModel& model, const CapacitySpec& caps,
                                          const SweepSpec& spec, const LearningRates& fixed_rates,
                                          std::size_t n_iter) {
  spec.validate();
  std::vector<LyapunovPoint> out;
  out.reserve(spec.steps);
  for (std::size_t k = 0; k < spec.steps; ++k) {
    LyapunovPoint pt;
    pt.param = spec.value(k);
    try {
      pt.lambda_max = lyapunov_max(model, caps, spec.rates_at(k, fixed_rates), spec.p0, n_iter,
                                   spec.transient, point_seed(spec.master_seed, k));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDiverged) throw;
      pt.diverged = true;
      pt.lambda_max = std::nan("");
    }
    out.push_back(pt);
  }
  return out;
}

PointCloud attractor_capture(const DemandModel& model, const CapacitySpec& caps,
                             const LearningRates& rates, const PriceVector& p0,
                             std::size_t n_points, std::size_t transient, std::uint64_t seed) {
  try {
    StrictBrMap map(model, caps, rates, seed);
    PriceVector p = p0;
    for (std::size_t t = 0; t < transient; ++t) p = map.step(p).next;
    PointCloud cloud;
    cloud.reserve(n_points);
    for (std::size_t t = 0; t < n_points; ++t) {
      p = map.step(p).next;
      cloud.push_back({p[0], p[1]});
    }
    return cloud;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kNonFinite) throw Error(ErrorKind::kDiverged, e.what());
    throw;
  }
}

Table bifurcation_table(const std::vector<BifurcationPoint>& points) {
  Table t;
  t.columns = {"param", "value_index", "p1_sample"};
  for (std::size_t k = 0; k < points.size(); ++k) {
    for (double v : points[k].p1) t.rows.push_back({points[k].param, static_cast<long long>(k), v});
  }
  return t;
}

Table lyapunov_table(const std::vector<LyapunovPoint>& points) {
  Table t;
  t.columns = {"param", "lambda_max", "diverged"};
  for (const auto& pt : points) {
    t.rows.push_back({pt.param, pt.lambda_max, static_cast<long long>(pt.diverged ? 1 : 0)});
  }
  return t;
}

Table attractor_table(const PointCloud& cloud) {
  Table t;
  t.columns = {"p1", "p2"};
  t.rows.reserve(cloud.size());
  for (const auto& pt : cloud) t.rows.push_back({pt[0], pt[1]});
  return t;
}

}  // namespace spectrum
