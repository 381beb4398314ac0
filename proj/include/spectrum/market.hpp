#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "spectrum/vectors.hpp"

namespace spectrum {

inline constexpr double kUnlimited = std::numeric_limits<double>::infinity();
inline constexpr double kPivotTolerance = 1e-12;

/// Utility-side parameters of the average secondary user: spectral
/// efficiencies alpha, own-effect coefficients beta and the common
/// substitutability mu.
struct MarketParameters {
  std::vector<double> alpha;
  std::vector<double> beta;
  double mu = 0.0;

  std::size_t size() const { return alpha.size(); }

  /// Throws kValidationError on malformed input. With `strict` set, also
  /// requires beta_i > mu > 0 for every player.
  void validate(bool strict) const;
};

/// Linear demand system q_i = a_i - b_i p_i + sum_{j != i} c_ij p_j.
struct DemandModel {
  Vector a;
  Vector b;
  Matrix c;  // symmetric, zero diagonal
  bool nonpositive_intercept = false;

  std::size_t size() const { return static_cast<std::size_t>(a.size()); }
  double cross(std::size_t i, std::size_t j) const {
    return c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  /// Demand model from coefficients. `c` is the common cross slope of a
  /// duopoly or, for n players, the full symmetric matrix.
  static DemandModel from_coefficients(Vector a, Vector b, Matrix c);
  static DemandModel duopoly(double a1, double a2, double b1, double b2, double c);
};

/// Spectrum available for sale. An entry equal to kUnlimited is the
/// "sufficiently large" sentinel and never a large finite number.
struct CapacitySpec {
  std::vector<double> q_avail;

  std::size_t size() const { return q_avail.size(); }
  double operator[](std::size_t i) const { return q_avail[i]; }
  bool unlimited(std::size_t i) const { return q_avail[i] == kUnlimited; }

  static CapacitySpec unlimited_for(std::size_t n);
  /// q_i = W_i - B_i / r_i; requires W_i r_i > B_i.
  static CapacitySpec from_load(const std::vector<double>& total,
                                const std::vector<double>& load,
                                const std::vector<double>& rate);
  void validate(std::size_t n) const;
};

/// Matrix with beta on the diagonal and mu elsewhere.
Matrix build_substitutability_matrix(const MarketParameters& params);

/// True iff every pivot of an LDL^T factorization exceeds `tol`. Throws
/// kNonSymmetric when |m - m^T| exceeds `tol` anywhere.
bool check_positive_definite(const Matrix& m, double tol = kPivotTolerance);

/// Solves m x = rhs for symmetric positive definite m.
Vector spd_solve(const Matrix& m, const Vector& rhs);
Matrix spd_inverse(const Matrix& m);

DemandModel derive_demand_model(const MarketParameters& params);

/// Recovers (alpha, beta, mu) from a demand model. Exists for every valid
/// duopoly; for larger markets the inverse must have constant off-diagonals.
MarketParameters market_parameters_from_demand(const DemandModel& model);

DemandVector demand(const DemandModel& model, const PriceVector& p);
PriceVector inverse_demand(const MarketParameters& params, const DemandVector& q);
double secondary_utility(const MarketParameters& params, const DemandVector& q,
                         const PriceVector& p);
/// d/dq_i = alpha_i - beta_i q_i - mu sum_{j != i} q_j - p_i
Vector secondary_utility_gradient(const MarketParameters& params, const DemandVector& q,
                                  const PriceVector& p);

/// Both descriptions of the same market, kept consistent by construction.
struct Market {
  MarketParameters params;
  DemandModel model;

  static Market from_parameters(MarketParameters params);
  static Market from_demand(DemandModel model);
  std::size_t size() const { return model.size(); }
};

void require_size(std::size_t expected, std::size_t actual, const char* what);

}  // namespace spectrum
