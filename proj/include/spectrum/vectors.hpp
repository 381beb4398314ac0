#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <utility>

#include <Eigen/Dense>

#include "spectrum/error.hpp"

namespace spectrum {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A length-n vector whose meaning (price, demand) is part of its type. All
// entries are finite.
template <typename Tag>
class TaggedVector {
 public:
  TaggedVector() = default;
  explicit TaggedVector(Vector values) : values_(std::move(values)) { check(); }
  TaggedVector(std::initializer_list<double> values)
      : values_(static_cast<Eigen::Index>(values.size())) {
    Eigen::Index i = 0;
    for (double v : values) values_[i++] = v;
    check();
  }

  static TaggedVector zeros(std::size_t n) {
    return TaggedVector(Vector::Zero(static_cast<Eigen::Index>(n)));
  }

  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
  double& operator[](std::size_t i) { return values_[static_cast<Eigen::Index>(i)]; }
  const Vector& vec() const { return values_; }

  bool any_negative() const { return (values_.array() < 0.0).any(); }

  friend bool operator==(const TaggedVector& x, const TaggedVector& y) {
    return x.values_ == y.values_;
  }

 private:
  void check() const {
    if (!values_.allFinite()) throw Error(ErrorKind::kNonFinite, "vector has non-finite entries");
  }

  Vector values_;
};

struct PriceTag {};
struct DemandTag {};

using PriceVector = TaggedVector<PriceTag>;
using DemandVector = TaggedVector<DemandTag>;

}  // namespace spectrum
