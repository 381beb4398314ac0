#include "spectrum/market.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace spectrum {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorKind::kValidationError, what);
}

}  // namespace

void require_size(std::size_t expected, std::size_t actual, const char* what) {
  if (expected != actual) {
    std::ostringstream os;
    os << what << ": expected length " << expected << ", got " << actual;
    throw Error(ErrorKind::kDimensionMismatch, os.str());
  }
}

void MarketParameters::validate(bool strict) const {
  const std::size_t n = alpha.size();
  if (n < 2) invalid("market needs at least two players");
  if (beta.size() != n) invalid("alpha and beta lengths differ");
  if (!std::isfinite(mu) || mu < 0.0) invalid("mu must be finite and >= 0");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(alpha[i] > 0.0) || !std::isfinite(alpha[i])) invalid("alpha_" + std::to_string(i + 1) + " must be > 0");
    if (!(beta[i] > 0.0) || !std::isfinite(beta[i])) invalid("beta_" + std::to_string(i + 1) + " must be > 0");
    if (strict && !(beta[i] > mu && mu > 0.0)) {
      invalid("concavity condition beta_i > mu > 0 violated at player " + std::to_string(i + 1));
    }
  }
}

DemandModel DemandModel::from_coefficients(Vector a, Vector b, Matrix c) {
  const auto n = a.size();
  if (n < 2) throw Error(ErrorKind::kValidationError, "market needs at least two players");
  if (b.size() != n) throw Error(ErrorKind::kDimensionMismatch, "a and b lengths differ");
  if (c.rows() != n || c.cols() != n) throw Error(ErrorKind::kDimensionMismatch, "c must be n x n");
  if (!a.allFinite() || !b.allFinite() || !c.allFinite()) {
    throw Error(ErrorKind::kNonFinite, "demand coefficients must be finite");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(b[i] > 0.0)) throw Error(ErrorKind::kValidationError, "b_i must be > 0");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      if (c(i, j) != c(j, i)) throw Error(ErrorKind::kNonSymmetric, "c must be symmetric");
      if (c(i, j) < 0.0) throw Error(ErrorKind::kValidationError, "c_ij must be >= 0");
    }
  }
  c.diagonal().setZero();
  DemandModel m{std::move(a), std::move(b), std::move(c), false};
  m.nonpositive_intercept = (m.a.array() <= 0.0).any();
  return m;
}

DemandModel DemandModel::duopoly(double a1, double a2, double b1, double b2, double c) {
  Matrix cm(2, 2);
  cm << 0.0, c, c, 0.0;
  return from_coefficients(Vector{{a1, a2}}, Vector{{b1, b2}}, std::move(cm));
}

CapacitySpec CapacitySpec::unlimited_for(std::size_t n) {
  return CapacitySpec{std::vector<double>(n, kUnlimited)};
}

CapacitySpec CapacitySpec::from_load(const std::vector<double>& total,
                                     const std::vector<double>& load,
                                     const std::vector<double>& rate) {
  require_size(total.size(), load.size(), "traffic load");
  require_size(total.size(), rate.size(), "spectral efficiency");
  CapacitySpec caps;
  for (std::size_t i = 0; i < total.size(); ++i) {
    if (!(total[i] * rate[i] > load[i])) {
      invalid("player " + std::to_string(i + 1) + " has no spectrum to sell (W r <= B)");
    }
    caps.q_avail.push_back(total[i] - load[i] / rate[i]);
  }
  return caps;
}

void CapacitySpec::validate(std::size_t n) const {
  require_size(n, q_avail.size(), "capacities");
  for (double q : q_avail) {
    if (std::isnan(q) || !(q > 0.0)) invalid("capacities must be > 0");
  }
}

Matrix build_substitutability_matrix(const MarketParameters& params) {
  const auto n = idx(params.size());
  Matrix t = Matrix::Constant(n, n, params.mu);
  for (Eigen::Index i = 0; i < n; ++i) t(i, i) = params.beta[static_cast<std::size_t>(i)];
  return t;
}

bool check_positive_definite(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::kDimensionMismatch, "matrix must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw Error(ErrorKind::kNonSymmetric, "matrix asymmetry exceeds tolerance");
  }
  Eigen::LDLT<Matrix> ldlt(m);
  if (ldlt.info() != Eigen::Success) return false;
  return (ldlt.vectorD().array() > tol).all();
}

namespace {

Eigen::LLT<Matrix> factor_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kSingularMatrix, "matrix is not positive definite");
  }
  const Matrix l = llt.matrixL();
  if ((l.diagonal().array().square() <= kPivotTolerance).any()) {
    throw Error(ErrorKind::kSingularMatrix, "pivot below tolerance");
  }
  return llt;
}

}  // namespace

Vector spd_solve(const Matrix& m, const Vector& rhs) {
  if (rhs.size() != m.rows()) throw Error(ErrorKind::kDimensionMismatch, "rhs length");
  return factor_spd(m).solve(rhs);
}

Matrix spd_inverse(const Matrix& m) {
  return factor_spd(m).solve(Matrix::Identity(m.rows(), m.cols()));
}

DemandModel derive_demand_model(const MarketParameters& params) {
  params.validate(false);
  const std::size_t n = params.size();
  const Matrix inv = spd_inverse(build_substitutability_matrix(params));

  DemandModel m;
  m.a = Vector::Zero(idx(n));
  m.b = inv.diagonal();
  m.c = Matrix::Zero(idx(n), idx(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double cij = -0.5 * (inv(idx(i), idx(j)) + inv(idx(j), idx(i)));
      m.c(idx(i), idx(j)) = cij;
      m.c(idx(j), idx(i)) = cij;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!(m.b[idx(i)] > 0.0)) throw Error(ErrorKind::kSignViolation, "derived b_i <= 0");
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double cij = m.cross(i, j);
      // mu == 0 decouples the market exactly; otherwise every c_ij is positive.
      if (params.mu > 0.0 ? !(cij > 0.0) : std::abs(cij) > kPivotTolerance) {
        throw Error(ErrorKind::kSignViolation, "derived c_ij has the wrong sign");
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    double ai = params.alpha[i] * m.b[idx(i)];
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) ai -= m.cross(i, j) * params.alpha[j];
    }
    m.a[idx(i)] = ai;
  }
  m.nonpositive_intercept = (m.a.array() <= 0.0).any();
  return m;
}

MarketParameters market_parameters_from_demand(const DemandModel& model) {
  const auto n = idx(model.size());
  Matrix slopes = -model.c;
  slopes.diagonal() = model.b;
  if (!check_positive_definite(slopes)) {
    throw Error(ErrorKind::kSingularMatrix, "demand slope matrix is not positive definite");
  }
  const Matrix t = spd_inverse(slopes);

  const double mu = t(0, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && std::abs(t(i, j) - mu) > 1e-9 * std::max(1.0, std::abs(mu))) {
        throw Error(ErrorKind::kValidationError,
                    "demand model has no common substitutability parameter");
      }
    }
  }

  MarketParameters params;
  params.mu = mu;
  const Vector alpha = t * model.a;
  for (Eigen::Index i = 0; i < n; ++i) {
    params.alpha.push_back(alpha[i]);
    params.beta.push_back(t(i, i));
  }
  return params;
}

DemandVector demand(const DemandModel& model, const PriceVector& p) {
  require_size(model.size(), p.size(), "price vector");
  Vector q = model.a - model.b.cwiseProduct(p.vec()) + model.c * p.vec();
  return DemandVector(std::move(q));
}

PriceVector inverse_demand(const MarketParameters& params, const DemandVector& q) {
  require_size(params.size(), q.size(), "demand vector");
  const double total = q.vec().sum();
  Vector p(idx(q.size()));
  for (std::size_t i = 0; i < q.size(); ++i) {
    p[idx(i)] = params.alpha[i] - params.beta[i] * q[i] - params.mu * (total - q[i]);
  }
  return PriceVector(std::move(p));
}

double secondary_utility(const MarketParameters& params, const DemandVector& q,
                         const PriceVector& p) {
  require_size(params.size(), q.size(), "demand vector");
  require_size(params.size(), p.size(), "price vector");
  double linear = 0.0;
  double quadratic = 0.0;
  double cross = 0.0;
  double spend = 0.0;
  const double total = q.vec().sum();
  for (std::size_t i = 0; i < q.size(); ++i) {
    linear += params.alpha[i] * q[i];
    quadratic += params.beta[i] * q[i] * q[i];
    cross += q[i] * (total - q[i]);
    spend += p[i] * q[i];
  }
  // cross holds every ordered pair, i.e. twice the sum over i < j.
  return linear - 0.5 * (quadratic + params.mu * cross) - spend;
}

Market Market::from_parameters(MarketParameters params) {
  DemandModel model = derive_demand_model(params);
  return Market{std::move(params), std::move(model)};
}

Market Market::from_demand(DemandModel model) {
  MarketParameters params = market_parameters_from_demand(model);
  return Market{std::move(params), std::move(model)};
}

Vector secondary_utility_gradient(const MarketParameters& params, const DemandVector& q,
                                  const PriceVector& p) {
  require_size(params.size(), p.size(), "price vector");
  return inverse_demand(params, q).vec() - p.vec();
}

}  // namespace spectrum
