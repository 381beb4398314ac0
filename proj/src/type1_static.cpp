#include "spectrum/type1_static.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "json.hpp"

namespace spectrum {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void require_positive_prices(const PriceVector& p, const char* where) {
  if (p.any_negative()) {
    throw Error(ErrorKind::kSignViolation,
                std::string(where) + " produced a negative price; market parameters are invalid");
  }
}

struct Candidate {
  CaseLabel label;
  PriceVector prices;
  bool consistent;
};

}  // namespace

std::string_view to_string(CaseLabel label) {
  switch (label) {
    case CaseLabel::kCase1: return "Case1";
    case CaseLabel::kCase2: return "Case2";
    case CaseLabel::kCase3: return "Case3";
    case CaseLabel::kCase4: return "Case4";
    case CaseLabel::kOligopolyGeneral: return "OligopolyGeneral";
  }
  return "Unknown";
}

double best_response_demand(const DemandModel& model, std::size_t i, const PriceVector& p) {
  double s = model.a[idx(i)];
  for (std::size_t j = 0; j < model.size(); ++j) {
    if (j != i) s += model.cross(i, j) * p[j];
  }
  return 0.5 * s;
}

double type1_payoff(const DemandModel& model, const CapacitySpec& caps, std::size_t i,
                    const PriceVector& p) {
  double f = model.a[idx(i)] - model.b[idx(i)] * p[i];
  for (std::size_t j = 0; j < model.size(); ++j) {
    if (j != i) f += model.cross(i, j) * p[j];
  }
  return p[i] * std::min(f, caps[i]);
}

EquilibriumResult type1_outcome(const DemandModel& model, const CapacitySpec& caps,
                                const PriceVector& p, CaseLabel label) {
  const std::size_t n = model.size();
  require_size(n, caps.size(), "capacities");
  const DemandVector raw = demand(model, p);
  Vector q(idx(n));
  EquilibriumResult r;
  r.payoffs.resize(n);
  r.binding.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[idx(i)] = std::min(raw[i], caps[i]);
    r.payoffs[i] = p[i] * q[idx(i)];
    r.binding[i] = best_response_demand(model, i, p) > caps[i] + kBindingTolerance;
  }
  r.prices = p;
  r.demands = DemandVector(std::move(q));
  r.case_label = label;
  return r;
}

EquilibriumResult duopoly_unconstrained_ne(const DemandModel& model) {
  require_size(2, model.size(), "duopoly market");
  const double a1 = model.a[0], a2 = model.a[1];
  const double b1 = model.b[0], b2 = model.b[1];
  const double c = model.cross(0, 1);
  const double d = 4.0 * b1 * b2 - c * c;
  if (!(d > 0.0)) throw Error(ErrorKind::kDegenerateMarket, "4 b1 b2 - c^2 <= 0");
  const PriceVector p{(2.0 * a1 * b2 + a2 * c) / d, (2.0 * a2 * b1 + a1 * c) / d};
  return type1_outcome(model, CapacitySpec::unlimited_for(2), p, CaseLabel::kCase1);
}

EquilibriumResult duopoly_ne(const DemandModel& model, const CapacitySpec& caps) {
  require_size(2, model.size(), "duopoly market");
  caps.validate(2);
  const double a1 = model.a[0], a2 = model.a[1];
  const double b1 = model.b[0], b2 = model.b[1];
  const double c = model.cross(0, 1);
  if (!(b1 * b2 - c * c > 0.0)) throw Error(ErrorKind::kDegenerateMarket, "b1 b2 - c^2 <= 0");

  auto binds = [&](std::size_t i, const PriceVector& p) {
    return best_response_demand(model, i, p) > caps[i] + kBindingTolerance;
  };

  std::vector<Candidate> candidates;

  {
    const double d = 4.0 * b1 * b2 - c * c;
    PriceVector p{(2.0 * a1 * b2 + a2 * c) / d, (2.0 * a2 * b1 + a1 * c) / d};
    const bool ok = !binds(0, p) && !binds(1, p);
    candidates.push_back({CaseLabel::kCase1, p, ok});
  }
  if (!caps.unlimited(0)) {
    const double q1 = caps[0];
    const double d = 2.0 * b1 * b2 - c * c;
    PriceVector p{(2.0 * a1 * b2 + a2 * c - 2.0 * b2 * q1) / d, (a2 * b1 + a1 * c - c * q1) / d};
    const bool ok = binds(0, p) && !binds(1, p);
    candidates.push_back({CaseLabel::kCase2, p, ok});
  }
  if (!caps.unlimited(1)) {
    const double q2 = caps[1];
    const double d = 2.0 * b1 * b2 - c * c;
    PriceVector p{(a1 * b2 + a2 * c - c * q2) / d, (2.0 * a2 * b1 + a1 * c - 2.0 * b1 * q2) / d};
    const bool ok = !binds(0, p) && binds(1, p);
    candidates.push_back({CaseLabel::kCase3, p, ok});
  }
  if (!caps.unlimited(0) && !caps.unlimited(1)) {
    const double q1 = caps[0], q2 = caps[1];
    const double d = b1 * b2 - c * c;
    PriceVector p{(a1 * b2 + a2 * c - b2 * q1 - c * q2) / d,
                  (a2 * b1 + a1 * c - b1 * q2 - c * q1) / d};
    const bool ok = binds(0, p) && binds(1, p);
    candidates.push_back({CaseLabel::kCase4, p, ok});
  }

  const auto consistent = std::count_if(candidates.begin(), candidates.end(),
                                        [](const Candidate& k) { return k.consistent; });
  if (consistent == 1) {
    const auto it = std::find_if(candidates.begin(), candidates.end(),
                                 [](const Candidate& k) { return k.consistent; });
    require_positive_prices(it->prices, "duopoly closed form");
    return type1_outcome(model, caps, it->prices, it->label);
  }

  EquilibriumResult r = oligopoly_ne_search(model, caps).result;
  const bool b0 = r.binding[0], b1n = r.binding[1];
  r.case_label = !b0 && !b1n ? CaseLabel::kCase1
                 : b0 && !b1n ? CaseLabel::kCase2
                 : !b0 && b1n ? CaseLabel::kCase3
                              : CaseLabel::kCase4;
  r.tie_resolved = true;
  return r;
}

SearchOutcome oligopoly_ne_search(const DemandModel& model, const CapacitySpec& caps) {
  const std::size_t n = model.size();
  caps.validate(n);

  std::vector<bool> in_m(n, false);
  SearchOutcome out;

  for (std::size_t k = 0;; ++k) {
    if (k > n) throw Error(ErrorKind::kNoConvergence, "insufficient set still changing after n steps");

    Matrix q = -model.c;
    Vector rhs = model.a;
    for (std::size_t i = 0; i < n; ++i) {
      q(idx(i), idx(i)) = in_m[i] ? model.b[idx(i)] : 2.0 * model.b[idx(i)];
      if (in_m[i]) rhs[idx(i)] -= caps[i];
    }
    Vector sol;
    try {
      sol = spd_solve(q, rhs);
    } catch (const Error& e) {
      throw Error(ErrorKind::kSingularSystem, e.what());
    }
    PriceVector p(sol);
    require_positive_prices(p, "insufficiency search");

    SearchState st;
    st.iteration = k;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_m[i]) st.insufficient_set.push_back(i);
    }
    st.q_matrix = std::move(q);
    st.rhs = std::move(rhs);
    st.prices = p;
    out.trace.push_back(std::move(st));

    bool grew = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_m[i] && best_response_demand(model, i, p) > caps[i] + kBindingTolerance) {
        in_m[i] = true;
        grew = true;
      }
    }
    if (!grew) {
      out.result = type1_outcome(model, caps, p, CaseLabel::kOligopolyGeneral);
      // Members of M price exactly at capacity; report them as binding even
      // if rounding put the best-response demand a hair under the threshold.
      for (std::size_t i = 0; i < n; ++i) out.result.binding[i] = out.result.binding[i] || in_m[i];
      return out;
    }
  }
}

VerifyReport ne_verify(const DemandModel& model, const CapacitySpec& caps,
                       const EquilibriumResult& candidate, const DeviationGrid& grid) {
  const std::size_t n = model.size();
  require_size(n, candidate.prices.size(), "candidate prices");
  if (candidate.prices.any_negative()) {
    throw Error(ErrorKind::kInvalidArgument, "candidate prices must be positive");
  }
  if (grid.points < 2) throw Error(ErrorKind::kInvalidArgument, "deviation grid needs >= 2 points");

  VerifyReport report;
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double base = type1_payoff(model, caps, i, candidate.prices);
    const double slack = 1e-9 * std::max(1.0, std::abs(base));
    const double hi = grid.upper_factor * candidate.prices[i];
    PriceVector dev = candidate.prices;
    for (std::size_t g = 0; g < grid.points; ++g) {
      dev[i] = hi * static_cast<double>(g) / static_cast<double>(grid.points - 1);
      const double gain = type1_payoff(model, caps, i, dev) - base;
      if (gain > slack && gain > worst) {
        worst = gain;
        report.ok = false;
        report.counterexample = Counterexample{i, dev[i], gain};
      }
    }
  }
  return report;
}

void write_trace_jsonl(std::ostream& out, const std::vector<SearchState>& trace) {
  for (const auto& st : trace) {
    nlohmann::json rec;
    rec["k"] = st.iteration;
    std::vector<std::size_t> m;
    for (std::size_t i : st.insufficient_set) m.push_back(i + 1);
    rec["M"] = m;
    std::vector<double> p(st.prices.vec().data(), st.prices.vec().data() + st.prices.size());
    rec["p"] = p;
    out << rec.dump() << '\n';
  }
}

}  // namespace spectrum
