#include "spectrum/scenario.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "spectrum/csv.hpp"
#include "spectrum/stackelberg.hpp"
#include "spectrum/type1_dynamic.hpp"
#include "spectrum/type1_static.hpp"
#include "spectrum/type2_game.hpp"

namespace spectrum {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::pair<GameType, std::string_view>, 6> kGameNames{{
    {GameType::kType1Static, "type1_static"},
    {GameType::kType1Stackelberg, "type1_stackelberg"},
    {GameType::kType1DynamicBest, "type1_dynamic_best"},
    {GameType::kType1DynamicBr, "type1_dynamic_br"},
    {GameType::kType2Static, "type2_static"},
    {GameType::kType2Dynamic, "type2_dynamic"},
}};

constexpr std::array<std::pair<BrAnalysis, std::string_view>, 4> kAnalysisNames{{
    {BrAnalysis::kOrbit, "orbit"},
    {BrAnalysis::kBifurcation, "bifurcation"},
    {BrAnalysis::kLyapunov, "lyapunov"},
    {BrAnalysis::kAttractor, "attractor"},
}};

std::string_view analysis_name(BrAnalysis a) {
  for (const auto& [k, v] : kAnalysisNames) {
    if (k == a) return v;
  }
  return "orbit";
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// ---- YAML reading -----------------------------------------------------------

// Collects field-level problems so the user sees all of them at once.
struct Problems {
  std::vector<std::string> list;
  void add(const std::string& field, const std::string& reason) {
    list.push_back(field + ": " + reason);
  }
  void raise() const {
    if (list.empty()) return;
    std::string msg;
    for (const auto& p : list) {
      if (!msg.empty()) msg += "; ";
      msg += p;
    }
    throw Error(ErrorKind::kValidationError, msg);
  }
};

void check_keys(const YAML::Node& node, const std::string& field,
                std::initializer_list<std::string_view> allowed, Problems& pr) {
  if (!node.IsMap()) {
    pr.add(field.empty() ? "scenario" : field, "expected a mapping");
    return;
  }
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      pr.add(field.empty() ? key : field + "." + key, "unknown field");
    }
  }
}

std::optional<double> read_number(const YAML::Node& node, const std::string& field, Problems& pr) {
  if (!node.IsScalar()) {
    pr.add(field, "expected a number");
    return std::nullopt;
  }
  try {
    return parse_quantity(node.Scalar());
  } catch (const Error& e) {
    pr.add(field, e.what());
    return std::nullopt;
  }
}

template <class Int>
std::optional<Int> read_count(const YAML::Node& node, const std::string& field, Problems& pr) {
  const auto v = read_number(node, field, pr);
  if (!v) return std::nullopt;
  if (!(*v >= 0.0) || std::floor(*v) != *v || *v > 1e18) {
    pr.add(field, "expected a non-negative integer");
    return std::nullopt;
  }
  return static_cast<Int>(*v);
}

std::optional<std::vector<double>> read_list(const YAML::Node& node, const std::string& field,
                                             Problems& pr) {
  if (!node.IsSequence()) {
    pr.add(field, "expected a list of numbers");
    return std::nullopt;
  }
  std::vector<double> out;
  bool ok = true;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const auto v = read_number(node[i], field + "[" + std::to_string(i) + "]", pr);
    if (v) {
      out.push_back(*v);
    } else {
      ok = false;
    }
  }
  if (!ok) return std::nullopt;
  return out;
}

std::optional<std::string> read_string(const YAML::Node& node, const std::string& field,
                                       Problems& pr) {
  if (!node.IsScalar()) {
    pr.add(field, "expected a string");
    return std::nullopt;
  }
  return node.Scalar();
}

std::optional<bool> read_bool(const YAML::Node& node, const std::string& field, Problems& pr) {
  const auto s = read_string(node, field, pr);
  if (!s) return std::nullopt;
  const std::string v = lower(*s);
  if (v == "true" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "no" || v == "off") return false;
  pr.add(field, "expected true or false");
  return std::nullopt;
}

std::optional<LearningRates> read_rates(const YAML::Node& node, const std::string& field,
                                        Problems& pr) {
  const auto v = read_list(node, field, pr);
  if (!v) return std::nullopt;
  if (v->size() != 2) {
    pr.add(field, "expected two learning rates");
    return std::nullopt;
  }
  LearningRates r;
  r.gamma = {(*v)[0], (*v)[1]};
  return r;
}

void read_market(const YAML::Node& node, ScenarioConfig& cfg, Problems& pr) {
  check_keys(node, "market", {"demand", "utility"}, pr);
  if (!node.IsMap()) return;
  if (const auto d = node["demand"]) {
    check_keys(d, "market.demand", {"a", "b", "c"}, pr);
    if (d.IsMap()) {
      DemandCoefficients dc;
      const auto a = d["a"] ? read_list(d["a"], "market.demand.a", pr) : std::nullopt;
      const auto b = d["b"] ? read_list(d["b"], "market.demand.b", pr) : std::nullopt;
      if (!d["a"]) pr.add("market.demand.a", "missing");
      if (!d["b"]) pr.add("market.demand.b", "missing");
      if (a) dc.a = *a;
      if (b) dc.b = *b;
      const auto n = static_cast<Eigen::Index>(dc.a.size());
      if (!d["c"]) {
        pr.add("market.demand.c", "missing");
      } else if (d["c"].IsScalar()) {
        if (const auto c = read_number(d["c"], "market.demand.c", pr)) {
          dc.c = Matrix::Constant(n, n, *c);
          dc.c.diagonal().setZero();
        }
      } else if (d["c"].IsSequence()) {
        dc.c = Matrix::Zero(n, n);
        if (static_cast<Eigen::Index>(d["c"].size()) != n) {
          pr.add("market.demand.c", "matrix must have one row per player");
        } else {
          for (Eigen::Index i = 0; i < n; ++i) {
            const std::string f = "market.demand.c[" + std::to_string(i) + "]";
            const auto row = read_list(d["c"][static_cast<std::size_t>(i)], f, pr);
            if (!row) continue;
            if (static_cast<Eigen::Index>(row->size()) != n) {
              pr.add(f, "row must have one entry per player");
              continue;
            }
            for (Eigen::Index j = 0; j < n; ++j) dc.c(i, j) = (*row)[static_cast<std::size_t>(j)];
          }
        }
      } else {
        pr.add("market.demand.c", "expected a number or a matrix");
      }
      cfg.demand = std::move(dc);
    }
  }
  if (const auto u = node["utility"]) {
    check_keys(u, "market.utility", {"alpha", "beta", "mu"}, pr);
    if (u.IsMap()) {
      MarketParameters mp;
      if (!u["alpha"]) pr.add("market.utility.alpha", "missing");
      if (!u["beta"]) pr.add("market.utility.beta", "missing");
      if (!u["mu"]) pr.add("market.utility.mu", "missing");
      if (u["alpha"]) {
        if (auto v = read_list(u["alpha"], "market.utility.alpha", pr)) mp.alpha = *v;
      }
      if (u["beta"]) {
        if (auto v = read_list(u["beta"], "market.utility.beta", pr)) mp.beta = *v;
      }
      if (u["mu"]) {
        if (auto v = read_number(u["mu"], "market.utility.mu", pr)) mp.mu = *v;
      }
      cfg.utility = std::move(mp);
    }
  }
}

void read_sweep_axis(const YAML::Node& node, const std::string& field, ScenarioConfig& cfg,
                     Problems& pr) {
  check_keys(node, field, {"parameter", "from", "to", "steps", "scale"}, pr);
  if (!node.IsMap()) return;
  SweepAxis ax;
  for (const char* key : {"parameter", "from", "to", "steps"}) {
    if (!node[key]) pr.add(field + "." + key, "missing");
  }
  if (node["parameter"]) {
    if (auto s = read_string(node["parameter"], field + ".parameter", pr)) ax.parameter = *s;
  }
  if (node["from"]) {
    if (auto v = read_number(node["from"], field + ".from", pr)) ax.from = *v;
  }
  if (node["to"]) {
    if (auto v = read_number(node["to"], field + ".to", pr)) ax.to = *v;
  }
  if (node["steps"]) {
    if (auto v = read_count<std::size_t>(node["steps"], field + ".steps", pr)) ax.steps = *v;
  }
  if (node["scale"]) {
    if (auto s = read_string(node["scale"], field + ".scale", pr)) {
      if (*s == "log") {
        ax.log_scale = true;
      } else if (*s != "linear") {
        pr.add(field + ".scale", "expected linear or log");
      }
    }
  }
  cfg.sweep.push_back(std::move(ax));
}

void read_sweep(const YAML::Node& node, ScenarioConfig& cfg, Problems& pr) {
  if (node.IsMap() && node["axes"]) {
    check_keys(node, "sweep", {"axes"}, pr);
    if (!node["axes"].IsSequence()) {
      pr.add("sweep.axes", "expected a list of axes");
      return;
    }
    for (std::size_t i = 0; i < node["axes"].size(); ++i) {
      read_sweep_axis(node["axes"][i], "sweep.axes[" + std::to_string(i) + "]", cfg, pr);
    }
    return;
  }
  read_sweep_axis(node, "sweep", cfg, pr);
}

void read_dynamics(const YAML::Node& node, ScenarioConfig& cfg, Problems& pr) {
  check_keys(node, "dynamics",
             {"gamma", "p0", "tol", "max_iter", "seed", "transient", "samples", "lyapunov_iter",
              "attractor_points", "escape", "analysis", "runs"},
             pr);
  if (!node.IsMap()) return;
  DynamicsConfig& d = cfg.dynamics;
  if (node["gamma"]) {
    if (auto r = read_rates(node["gamma"], "dynamics.gamma", pr)) d.rates = *r;
  }
  if (node["p0"]) {
    if (auto v = read_list(node["p0"], "dynamics.p0", pr)) d.p0 = *v;
  }
  if (node["tol"]) {
    if (auto v = read_number(node["tol"], "dynamics.tol", pr)) d.tol = *v;
  }
  if (node["escape"]) {
    if (auto v = read_number(node["escape"], "dynamics.escape", pr)) d.escape = *v;
  }
  const std::pair<const char*, std::size_t*> counts[] = {
      {"max_iter", &d.max_iter},           {"transient", &d.transient},
      {"samples", &d.samples},             {"lyapunov_iter", &d.lyapunov_iter},
      {"attractor_points", &d.attractor_points},
  };
  for (const auto& [key, target] : counts) {
    if (!node[key]) continue;
    if (auto v = read_count<std::size_t>(node[key], std::string("dynamics.") + key, pr)) {
      *target = *v;
    }
  }
  if (node["seed"]) {
    if (auto v = read_count<std::uint64_t>(node["seed"], "dynamics.seed", pr)) d.seed = *v;
  }
  if (node["analysis"]) {
    if (auto s = read_string(node["analysis"], "dynamics.analysis", pr)) {
      bool found = false;
      for (const auto& [k, v] : kAnalysisNames) {
        if (v == *s) {
          d.analysis = k;
          found = true;
        }
      }
      if (!found) pr.add("dynamics.analysis", "expected orbit, bifurcation, lyapunov or attractor");
    }
  }
  if (const auto runs = node["runs"]) {
    if (!runs.IsSequence()) {
      pr.add("dynamics.runs", "expected a list");
      return;
    }
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const std::string f = "dynamics.runs[" + std::to_string(i) + "]";
      check_keys(runs[i], f, {"capacities", "gamma"}, pr);
      if (!runs[i].IsMap()) continue;
      RunOverride ro;
      if (runs[i]["capacities"]) {
        if (auto v = read_list(runs[i]["capacities"], f + ".capacities", pr)) {
          ro.caps = CapacitySpec{*v};
        }
      }
      if (runs[i]["gamma"]) ro.rates = read_rates(runs[i]["gamma"], f + ".gamma", pr);
      d.runs.push_back(std::move(ro));
    }
  }
}

// ---- serialization helpers ----------------------------------------------------

json number_json(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

json list_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number_json(x));
  return out;
}

json rates_json(const LearningRates& r) { return json::array({r.gamma[0], r.gamma[1]}); }

std::string hex(const unsigned char* data, unsigned len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 0xF]);
  }
  return out;
}

// ---- running ---------------------------------------------------------------------

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

struct PointSetting {
  CapacitySpec caps;
  std::optional<double> theta;
  LearningRates rates;
  std::vector<double> axis_values;
};

std::vector<PointSetting> sweep_points(const ScenarioConfig& cfg) {
  PointSetting base{cfg.caps, cfg.theta, cfg.dynamics.rates, {}};
  std::vector<PointSetting> pts{base};
  for (const SweepAxis& ax : cfg.sweep) {
    std::vector<PointSetting> next;
    next.reserve(pts.size() * ax.steps);
    for (const auto& p : pts) {
      for (std::size_t k = 0; k < ax.steps; ++k) {
        PointSetting q = p;
        const double v = ax.value(k);
        q.axis_values.push_back(v);
        if (ax.parameter == "theta") {
          q.theta = v;
        } else if (ax.parameter == "gamma1") {
          q.rates.gamma[0] = v;
        } else if (ax.parameter == "gamma2") {
          q.rates.gamma[1] = v;
        } else {
          // q{i}a
          const auto i = std::stoul(ax.parameter.substr(1, ax.parameter.size() - 2)) - 1;
          q.caps.q_avail[i] = v;
        }
        next.push_back(std::move(q));
      }
    }
    pts = std::move(next);
  }
  return pts;
}

std::vector<std::string> axis_columns(const ScenarioConfig& cfg) {
  std::vector<std::string> cols;
  for (const auto& ax : cfg.sweep) cols.push_back(ax.parameter);
  return cols;
}

void add_indexed(std::vector<std::string>& cols, const char* prefix, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) cols.push_back(prefix + std::to_string(i + 1));
}

std::string status_of(const Error& e) { return std::string(to_string(e.kind())); }

struct Runner {
  const ScenarioConfig& cfg;
  fs::path out_dir;
  std::string comment;
  ExperimentManifest manifest;

  std::string file_name(const std::string& stem) const {
    return stem + (cfg.format == "jsonl" ? ".jsonl" : ".csv");
  }

  void emit(const std::string& stem, const Table& t) {
    const std::string name = file_name(stem);
    const fs::path path = out_dir / name;
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
      if (cfg.format == "jsonl") {
        write_table_jsonl(out, t, comment);
      } else {
        write_table_csv(out, t, comment);
      }
      if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
    }
    manifest.files.push_back({name, sha256_file(path), t.rows.size()});
  }

  // Multi-run dynamics use one file per run only when there is more than one.
  std::string run_stem(const char* stem, std::size_t k, std::size_t runs) const {
    return runs == 1 ? std::string(stem) : std::string(stem) + "_" + std::to_string(k + 1);
  }

  std::vector<PointSetting> runs() const {
    std::vector<PointSetting> out;
    if (cfg.dynamics.runs.empty()) {
      out.push_back({cfg.caps, cfg.theta, cfg.dynamics.rates, {}});
      return out;
    }
    for (const auto& ro : cfg.dynamics.runs) {
      out.push_back({ro.caps.value_or(cfg.caps), cfg.theta, ro.rates.value_or(cfg.dynamics.rates),
                     {}});
    }
    return out;
  }

  PriceVector p0() const {
    PriceVector p = PriceVector::zeros(cfg.dynamics.p0.size());
    for (std::size_t i = 0; i < cfg.dynamics.p0.size(); ++i) p[i] = cfg.dynamics.p0[i];
    return p;
  }

  void type1_static() {
    const DemandModel model = cfg.demand_model();
    const std::size_t n = model.size();
    Table t;
    t.columns = axis_columns(cfg);
    add_indexed(t.columns, "p", n);
    add_indexed(t.columns, "q", n);
    add_indexed(t.columns, "rev", n);
    t.columns.push_back("case");
    t.columns.push_back("status");
    std::vector<SearchState> trace;
    for (const auto& pt : sweep_points(cfg)) {
      std::vector<Cell> row(pt.axis_values.begin(), pt.axis_values.end());
      try {
        EquilibriumResult r;
        if (n == 2) {
          r = duopoly_ne(model, pt.caps);
        } else {
          SearchOutcome s = oligopoly_ne_search(model, pt.caps);
          r = std::move(s.result);
          if (cfg.sweep.empty()) trace = std::move(s.trace);
        }
        for (std::size_t i = 0; i < n; ++i) row.emplace_back(r.prices[i]);
        for (std::size_t i = 0; i < n; ++i) row.emplace_back(r.demands[i]);
        for (std::size_t i = 0; i < n; ++i) row.emplace_back(r.payoffs[i]);
        row.emplace_back(std::string(to_string(r.case_label)));
        row.emplace_back(std::string("ok"));
      } catch (const Error& e) {
        for (std::size_t i = 0; i < 3 * n; ++i) row.emplace_back(nan());
        row.emplace_back(std::string());
        row.emplace_back(status_of(e));
        ++manifest.failed_points;
      }
      t.rows.push_back(std::move(row));
    }
    emit(cfg.sweep.empty() ? "equilibrium" : "sweep", t);
    if (!trace.empty()) {
      const fs::path path = out_dir / "search_trace.jsonl";
      {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
        write_trace_jsonl(out, trace);
      }
      manifest.files.push_back({"search_trace.jsonl", sha256_file(path), trace.size()});
    }
  }

  void type1_stackelberg() {
    const DemandModel model = cfg.demand_model();
    Table t;
    t.columns = axis_columns(cfg);
    for (const char* c : {"mode", "p1", "p2", "q1", "q2", "rev1", "rev2", "case", "status"}) {
      t.columns.push_back(c);
    }
    for (const auto& pt : sweep_points(cfg)) {
      auto row_for = [&](const std::string& mode, const std::function<void(std::vector<Cell>&)>& fill) {
        std::vector<Cell> row(pt.axis_values.begin(), pt.axis_values.end());
        row.emplace_back(mode);
        try {
          fill(row);
          row.emplace_back(std::string("ok"));
        } catch (const Error& e) {
          row.resize(pt.axis_values.size() + 1);
          for (int i = 0; i < 6; ++i) row.emplace_back(nan());
          row.emplace_back(std::string());
          row.emplace_back(status_of(e));
          ++manifest.failed_points;
        }
        t.rows.push_back(std::move(row));
      };
      row_for("simultaneous", [&](std::vector<Cell>& row) {
        const EquilibriumResult r = duopoly_ne(model, pt.caps);
        for (double v : {r.prices[0], r.prices[1], r.demands[0], r.demands[1], r.payoffs[0],
                         r.payoffs[1]}) {
          row.emplace_back(v);
        }
        row.emplace_back(std::string(to_string(r.case_label)));
      });
      for (std::size_t leader = 0; leader < 2; ++leader) {
        row_for("leader" + std::to_string(leader + 1), [&](std::vector<Cell>& row) {
          const StackelbergResult r = stackelberg_ne(model, pt.caps, leader);
          for (double v : {r.prices[0], r.prices[1], r.demands[0], r.demands[1], r.payoffs[0],
                           r.payoffs[1]}) {
            row.emplace_back(v);
          }
          row.emplace_back(std::string(to_string(r.case_label)));
        });
      }
    }
    emit(cfg.sweep.empty() ? "equilibrium" : "sweep", t);
  }

  void type2_static() {
    const Market market = cfg.market();
    const std::size_t n = market.size();
    Table t;
    t.columns = axis_columns(cfg);
    add_indexed(t.columns, "p", n);
    add_indexed(t.columns, "q", n);
    add_indexed(t.columns, "u", n);
    t.columns.push_back("z_star");
    t.columns.push_back("status");
    for (const auto& pt : sweep_points(cfg)) {
      std::vector<Cell> row(pt.axis_values.begin(), pt.axis_values.end());
      try {
        Type2Config tc;
        tc.theta = *pt.theta;
        tc.caps = pt.caps;
        const Type2Solution s = type2_oligopoly_ne(market, tc);
        for (std::size_t i = 0; i < n; ++i) row.emplace_back(s.result.prices[i]);
        for (std::size_t i = 0; i < n; ++i) row.emplace_back(s.result.demands[i]);
        for (std::size_t i = 0; i < n; ++i) row.emplace_back(s.result.payoffs[i]);
        row.emplace_back(s.aggregate.z_star);
        row.emplace_back(std::string("ok"));
      } catch (const Error& e) {
        for (std::size_t i = 0; i < 3 * n + 1; ++i) row.emplace_back(nan());
        row.emplace_back(status_of(e));
        ++manifest.failed_points;
      }
      t.rows.push_back(std::move(row));
    }
    emit(cfg.sweep.empty() ? "equilibrium" : "sweep", t);
  }

  void type1_dynamic_best() {
    const DemandModel model = cfg.demand_model();
    const auto rs = runs();
    Table summary;
    summary.columns = {"run", "q1a", "q2a", "converged", "iterations", "p1", "p2", "limit_error",
                       "status"};
    for (std::size_t k = 0; k < rs.size(); ++k) {
      std::vector<Cell> row{static_cast<long long>(k + 1), rs[k].caps[0], rs[k].caps[1]};
      try {
        const OrbitRecord o =
            strict_best_run(model, rs[k].caps, p0(), cfg.dynamics.tol, cfg.dynamics.max_iter);
        emit(run_stem("orbit", k, rs.size()), orbit_table(o));
        const PriceVector& last = o.trajectory.back();
        row.emplace_back(static_cast<long long>(o.converged));
        row.emplace_back(static_cast<long long>(o.iterations()));
        row.emplace_back(last[0]);
        row.emplace_back(last[1]);
        row.emplace_back(o.limit_error.value_or(nan()));
        row.emplace_back(std::string("ok"));
      } catch (const Error& e) {
        row.emplace_back(0LL);
        row.emplace_back(0LL);
        for (int i = 0; i < 3; ++i) row.emplace_back(nan());
        row.emplace_back(status_of(e));
        ++manifest.failed_points;
      }
      summary.rows.push_back(std::move(row));
    }
    emit("summary", summary);
  }

  void type2_dynamic() {
    const Market market = cfg.market();
    const auto rs = runs();
    Table summary;
    summary.columns = {"run",         "q1a",        "q2a",
                       "converged",   "iterations", "p1",
                       "p2",          "foc1",       "foc2",
                       "max_ratio",   "ratio_bound", "additive_bound_holds",
                       "status"};
    for (std::size_t k = 0; k < rs.size(); ++k) {
      std::vector<Cell> row{static_cast<long long>(k + 1), rs[k].caps[0], rs[k].caps[1]};
      try {
        Type2Config tc;
        tc.theta = *rs[k].theta;
        tc.caps = rs[k].caps;
        const QosRun q = qosbest_run(market, tc, p0(), cfg.dynamics.tol, cfg.dynamics.max_iter);
        emit(run_stem("orbit", k, rs.size()), orbit_table(q.orbit));
        const PriceVector& last = q.orbit.trajectory.back();
        double max_ratio = 0.0;
        for (double r : q.contraction_ratios) max_ratio = std::max(max_ratio, r);
        row.emplace_back(static_cast<long long>(q.orbit.converged));
        row.emplace_back(static_cast<long long>(q.orbit.iterations()));
        row.emplace_back(last[0]);
        row.emplace_back(last[1]);
        row.emplace_back(type2_foc_residual(market.model, tc, 0, last));
        row.emplace_back(type2_foc_residual(market.model, tc, 1, last));
        row.emplace_back(max_ratio);
        row.emplace_back(q.contraction_bound);
        row.emplace_back(static_cast<long long>(q.additive_bound_holds));
        row.emplace_back(std::string("ok"));
      } catch (const Error& e) {
        row.emplace_back(0LL);
        row.emplace_back(0LL);
        for (int i = 0; i < 6; ++i) row.emplace_back(nan());
        row.emplace_back(0LL);
        row.emplace_back(status_of(e));
        ++manifest.failed_points;
      }
      summary.rows.push_back(std::move(row));
    }
    emit("summary", summary);
  }

  SweepSpec br_sweep_spec() const {
    const SweepAxis& ax = cfg.sweep.front();
    SweepSpec s;
    s.varied = ax.parameter == "gamma1" ? SweepParameter::kGamma1 : SweepParameter::kGamma2;
    s.lo = ax.from;
    s.hi = ax.to;
    s.steps = ax.steps;
    s.transient = cfg.dynamics.transient;
    s.samples = cfg.dynamics.samples;
    s.p0 = p0();
    s.master_seed = cfg.dynamics.seed;
    return s;
  }

  void type1_dynamic_br() {
    const DemandModel model = cfg.demand_model();
    const DynamicsConfig& d = cfg.dynamics;
    switch (d.analysis) {
      case BrAnalysis::kBifurcation: {
        const DynamicsReport rep = bifurcation_sweep(model, cfg.caps, br_sweep_spec(), d.rates);
        emit("bifurcation", bifurcation_table(rep.bifurcation));
        Table periods;
        periods.columns = {"param", "period", "spread", "diverged"};
        for (const auto& pt : rep.bifurcation) {
          periods.rows.push_back({pt.param, static_cast<long long>(pt.period), pt.spread,
                                  static_cast<long long>(pt.diverged)});
          if (pt.diverged) ++manifest.failed_points;
        }
        emit("periods", periods);
        return;
      }
      case BrAnalysis::kLyapunov: {
        const auto pts = lyapunov_sweep(model, cfg.caps, br_sweep_spec(), d.rates, d.lyapunov_iter);
        for (const auto& pt : pts) manifest.failed_points += pt.diverged ? 1 : 0;
        emit("lyapunov", lyapunov_table(pts));
        return;
      }
      case BrAnalysis::kAttractor: {
        const auto rs = runs();
        for (std::size_t k = 0; k < rs.size(); ++k) {
          const PointCloud cloud =
              attractor_capture(model, rs[k].caps, rs[k].rates, p0(), d.attractor_points,
                                d.transient, point_seed(d.seed, k));
          emit(run_stem("attractor", k, rs.size()), attractor_table(cloud));
        }
        return;
      }
      case BrAnalysis::kOrbit:
        break;
    }
    const auto rs = runs();
    Table summary;
    summary.columns = {"run",  "q1a",   "q2a",   "gamma1",  "gamma2", "mode",
                       "iterations", "escapes", "p1", "p2", "status"};
    Table stability;
    stability.columns = {"run", "point", "p1", "p2", "abs_lambda1", "abs_lambda2", "stable",
                         "status"};
    for (std::size_t k = 0; k < rs.size(); ++k) {
      std::vector<Cell> row{static_cast<long long>(k + 1), rs[k].caps[0], rs[k].caps[1],
                            rs[k].rates.gamma[0], rs[k].rates.gamma[1]};
      try {
        StrictBrMap map(model, rs[k].caps, rs[k].rates, point_seed(d.seed, k), d.escape);
        const OrbitRecord o = map.run(p0(), d.max_iter, d.tol);
        emit(run_stem("orbit", k, rs.size()), orbit_table(o));
        const PriceVector& last = o.trajectory.back();
        row.emplace_back(std::string(map.best_response_mode() ? "best_response" : "gradient"));
        row.emplace_back(static_cast<long long>(o.iterations()));
        row.emplace_back(static_cast<long long>(o.escapes));
        row.emplace_back(last[0]);
        row.emplace_back(last[1]);
        row.emplace_back(std::string("ok"));
      } catch (const Error& e) {
        row.emplace_back(std::string());
        row.emplace_back(0LL);
        row.emplace_back(0LL);
        row.emplace_back(nan());
        row.emplace_back(nan());
        row.emplace_back(status_of(e));
        ++manifest.failed_points;
      }
      summary.rows.push_back(std::move(row));

      const auto fps = br_fixed_points(model, rs[k].caps);
      for (std::size_t f = 0; f < fps.size(); ++f) {
        std::vector<Cell> srow{static_cast<long long>(k + 1), static_cast<long long>(f + 1),
                               fps[f][0], fps[f][1]};
        try {
          const auto ev = eigenvalues_2x2(br_jacobian(model, rs[k].caps, rs[k].rates, fps[f]));
          const double l1 = std::abs(ev[0]);
          const double l2 = std::abs(ev[1]);
          srow.emplace_back(l1);
          srow.emplace_back(l2);
          srow.emplace_back(static_cast<long long>(std::max(l1, l2) < 1.0 - 1e-12));
          srow.emplace_back(std::string("ok"));
        } catch (const Error& e) {
          srow.emplace_back(nan());
          srow.emplace_back(nan());
          srow.emplace_back(0LL);
          srow.emplace_back(status_of(e));
        }
        stability.rows.push_back(std::move(srow));
      }
    }
    emit("summary", summary);
    emit("stability", stability);
  }
};

}  // namespace

std::string_view to_string(GameType g) {
  for (const auto& [k, v] : kGameNames) {
    if (k == g) return v;
  }
  return "unknown";
}

std::optional<GameType> parse_game_type(std::string_view s) {
  for (const auto& [k, v] : kGameNames) {
    if (v == s) return k;
  }
  return std::nullopt;
}

bool is_dynamic(GameType g) {
  return g == GameType::kType1DynamicBest || g == GameType::kType1DynamicBr ||
         g == GameType::kType2Dynamic;
}

double parse_quantity(std::string_view text) {
  std::string_view s = trim(text);
  if (s.empty()) throw Error(ErrorKind::kParseError, "empty number");
  const std::string low = lower(s);
  if (low == "inf" || low == "+inf" || low == ".inf" || low == "infinity" || low == "unlimited") {
    return kUnlimited;
  }
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc()) throw Error(ErrorKind::kParseError, "not a number: '" + std::string(text) + "'");
  const std::string unit = lower(trim(std::string_view(ptr, static_cast<std::size_t>(s.data() + s.size() - ptr))));
  static const std::set<std::string> kUnits{"",       "mhz",    "dollar/mhz", "$/mhz",
                                            "dollar", "$",      "s",          "seconds"};
  if (!kUnits.count(unit)) {
    throw Error(ErrorKind::kParseError, "unrecognized unit '" + unit + "' in '" + std::string(text) + "'");
  }
  return v;
}

double SweepAxis::value(std::size_t k) const {
  if (steps < 2 || k == 0) return from;
  if (k + 1 >= steps) return to;
  const double f = static_cast<double>(k) / static_cast<double>(steps - 1);
  if (log_scale) return std::exp(std::log(from) + (std::log(to) - std::log(from)) * f);
  return from + (to - from) * f;
}

std::size_t ScenarioConfig::players() const {
  if (demand) return demand->a.size();
  if (utility) return utility->size();
  return 0;
}

DemandModel ScenarioConfig::demand_model() const {
  if (demand) {
    Vector a = Eigen::Map<const Vector>(demand->a.data(), static_cast<Eigen::Index>(demand->a.size()));
    Vector b = Eigen::Map<const Vector>(demand->b.data(), static_cast<Eigen::Index>(demand->b.size()));
    return DemandModel::from_coefficients(std::move(a), std::move(b), demand->c);
  }
  if (utility) return derive_demand_model(*utility);
  throw Error(ErrorKind::kValidationError, "market: no market specification");
}

Market ScenarioConfig::market() const {
  if (utility) return Market::from_parameters(*utility);
  return Market::from_demand(demand_model());
}

json ScenarioConfig::to_json() const {
  json j;
  j["name"] = name;
  j["description"] = description;
  if (demand) {
    json c = json::array();
    for (Eigen::Index i = 0; i < demand->c.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < demand->c.cols(); ++k) row.push_back(demand->c(i, k));
      c.push_back(std::move(row));
    }
    j["market"]["demand"] = {{"a", list_json(demand->a)}, {"b", list_json(demand->b)}, {"c", c}};
  }
  if (utility) {
    j["market"]["utility"] = {
        {"alpha", list_json(utility->alpha)}, {"beta", list_json(utility->beta)}, {"mu", utility->mu}};
  }
  j["strict_validity"] = strict_validity;
  j["capacities"] = list_json(caps.q_avail);
  j["game"] = std::string(to_string(game));
  json axes = json::array();
  for (const auto& ax : sweep) {
    axes.push_back({{"parameter", ax.parameter},
                    {"from", number_json(ax.from)},
                    {"to", number_json(ax.to)},
                    {"steps", ax.steps},
                    {"scale", ax.log_scale ? "log" : "linear"}});
  }
  j["sweep"] = axes;
  if (theta) j["type2"]["theta"] = *theta;
  if (is_dynamic(game)) {
    const DynamicsConfig& d = dynamics;
    json runs = json::array();
    for (const auto& r : d.runs) {
      json rj = json::object();
      if (r.caps) rj["capacities"] = list_json(r.caps->q_avail);
      if (r.rates) rj["gamma"] = rates_json(*r.rates);
      runs.push_back(std::move(rj));
    }
    j["dynamics"] = {{"gamma", rates_json(d.rates)},
                     {"p0", list_json(d.p0)},
                     {"tol", d.tol},
                     {"max_iter", d.max_iter},
                     {"seed", d.seed},
                     {"transient", d.transient},
                     {"samples", d.samples},
                     {"lyapunov_iter", d.lyapunov_iter},
                     {"attractor_points", d.attractor_points},
                     {"escape", d.escape},
                     {"analysis", std::string(analysis_name(d.analysis))},
                     {"runs", runs}};
  }
  j["output"]["format"] = format;
  j["time_budget_s"] = time_budget_s;
  return j;
}

std::string ScenarioConfig::hash() const { return sha256_hex(to_json().dump()); }

void validate_scenario(const ScenarioConfig& cfg) {
  Problems pr;
  if (cfg.name.empty() ||
      !std::all_of(cfg.name.begin(), cfg.name.end(), [](unsigned char ch) {
        return std::isalnum(ch) || ch == '_' || ch == '-';
      })) {
    pr.add("name", "must be a non-empty identifier of letters, digits, '_' or '-'");
  }
  if (cfg.demand.has_value() == cfg.utility.has_value()) {
    pr.add("market", "exactly one of 'demand' or 'utility' must be given");
    pr.raise();
  }
  const std::size_t n = cfg.players();
  bool market_ok = true;
  try {
    if (cfg.utility) {
      cfg.utility->validate(cfg.strict_validity);
      (void)derive_demand_model(*cfg.utility);
    } else {
      if (cfg.demand->b.size() != n) pr.add("market.demand.b", "length differs from a");
      const DemandModel m = cfg.demand_model();
      if (cfg.strict_validity) market_parameters_from_demand(m).validate(true);
    }
  } catch (const Error& e) {
    market_ok = false;
    pr.add(cfg.utility ? "market.utility" : "market.demand", e.what());
  }

  if (cfg.caps.size() != n) {
    pr.add("capacities", "expected " + std::to_string(n) + " entries");
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (!(cfg.caps[i] > 0.0)) pr.add("capacities[" + std::to_string(i) + "]", "must be > 0");
    }
  }

  const bool two_player = cfg.game == GameType::kType1Stackelberg || is_dynamic(cfg.game);
  if (two_player && n != 2) pr.add("game", std::string(to_string(cfg.game)) + " needs exactly two players");
  const bool type2 = cfg.game == GameType::kType2Static || cfg.game == GameType::kType2Dynamic;
  if (type2) {
    if (!cfg.theta) {
      pr.add("type2.theta", "missing");
    } else if (!(*cfg.theta > 0.0) || !std::isfinite(*cfg.theta)) {
      pr.add("type2.theta", "must be > 0");
    }
    for (std::size_t i = 0; i < cfg.caps.size(); ++i) {
      if (!std::isfinite(cfg.caps[i])) {
        pr.add("capacities[" + std::to_string(i) + "]", "QoS-penalty games need finite capacities");
      }
    }
    if (market_ok && cfg.demand && n > 2) {
      try {
        (void)cfg.market();
      } catch (const Error& e) {
        pr.add("market.demand", std::string("no utility form: ") + e.what());
      }
    }
  } else if (cfg.theta) {
    pr.add("type2.theta", "only used by type2 games");
  }

  const bool br_sweep = cfg.game == GameType::kType1DynamicBr &&
                        (cfg.dynamics.analysis == BrAnalysis::kBifurcation ||
                         cfg.dynamics.analysis == BrAnalysis::kLyapunov);
  if (br_sweep && cfg.sweep.size() != 1) {
    pr.add("sweep", "bifurcation and Lyapunov analyses need exactly one gamma axis");
  }
  if (is_dynamic(cfg.game) && !br_sweep && !cfg.sweep.empty()) {
    pr.add("sweep", "not supported for this game; use dynamics.runs");
  }
  std::set<std::string> seen;
  for (std::size_t k = 0; k < cfg.sweep.size(); ++k) {
    const SweepAxis& ax = cfg.sweep[k];
    const std::string f = cfg.sweep.size() == 1 ? "sweep" : "sweep.axes[" + std::to_string(k) + "]";
    bool known = false;
    if (ax.parameter == "gamma1" || ax.parameter == "gamma2") {
      known = br_sweep;
    } else if (ax.parameter == "theta") {
      known = cfg.game == GameType::kType2Static;
    } else if (ax.parameter.size() >= 3 && ax.parameter.front() == 'q' && ax.parameter.back() == 'a' &&
               !br_sweep && !is_dynamic(cfg.game)) {
      const std::string idx = ax.parameter.substr(1, ax.parameter.size() - 2);
      if (!idx.empty() && std::all_of(idx.begin(), idx.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
        const auto i = std::stoul(idx);
        known = i >= 1 && i <= n;
      }
    }
    if (!known) pr.add(f + ".parameter", "'" + ax.parameter + "' cannot be swept in this scenario");
    if (!seen.insert(ax.parameter).second) pr.add(f + ".parameter", "swept twice");
    if (ax.steps < 2) pr.add(f + ".steps", "must be >= 2");
    if (!std::isfinite(ax.from) || !std::isfinite(ax.to)) pr.add(f, "range must be finite");
    if (!(ax.from > 0.0) || !(ax.to > 0.0)) pr.add(f, "range must be > 0");
    if (br_sweep && !(ax.from < ax.to)) pr.add(f, "gamma range needs from < to");
  }

  if (is_dynamic(cfg.game)) {
    const DynamicsConfig& d = cfg.dynamics;
    try {
      d.rates.validate();
    } catch (const Error& e) {
      pr.add("dynamics.gamma", e.what());
    }
    if (d.p0.size() != 2) {
      pr.add("dynamics.p0", "expected two prices");
    } else if (!(d.p0[0] >= 0.0) || !(d.p0[1] >= 0.0) || !std::isfinite(d.p0[0]) ||
               !std::isfinite(d.p0[1])) {
      pr.add("dynamics.p0", "prices must be finite and >= 0");
    }
    const bool needs_tol = cfg.game != GameType::kType1DynamicBr;
    if (needs_tol ? !(d.tol > 0.0) : !(d.tol >= 0.0)) pr.add("dynamics.tol", needs_tol ? "must be > 0" : "must be >= 0");
    if (d.max_iter == 0) pr.add("dynamics.max_iter", "must be > 0");
    if (d.samples == 0) pr.add("dynamics.samples", "must be > 0");
    if (d.lyapunov_iter == 0) pr.add("dynamics.lyapunov_iter", "must be > 0");
    if (d.attractor_points == 0) pr.add("dynamics.attractor_points", "must be > 0");
    if (!(d.escape >= 0.0) || !std::isfinite(d.escape)) pr.add("dynamics.escape", "must be >= 0");
    if (d.analysis != BrAnalysis::kOrbit && cfg.game != GameType::kType1DynamicBr) {
      pr.add("dynamics.analysis", "only type1_dynamic_br supports this analysis");
    }
    for (std::size_t k = 0; k < d.runs.size(); ++k) {
      const std::string f = "dynamics.runs[" + std::to_string(k) + "]";
      if (d.runs[k].caps) {
        if (d.runs[k].caps->size() != 2) pr.add(f + ".capacities", "expected 2 entries");
        for (double q : d.runs[k].caps->q_avail) {
          if (!(q > 0.0)) pr.add(f + ".capacities", "must be > 0");
          if (type2 && !std::isfinite(q)) pr.add(f + ".capacities", "QoS-penalty games need finite capacities");
        }
      }
      if (d.runs[k].rates) {
        try {
          d.runs[k].rates->validate();
        } catch (const Error& e) {
          pr.add(f + ".gamma", e.what());
        }
      }
    }
  }
  if (cfg.format != "csv" && cfg.format != "jsonl") pr.add("output.format", "expected csv or jsonl");
  if (!(cfg.time_budget_s > 0.0)) pr.add("time_budget_s", "must be > 0");
  pr.raise();
}

ScenarioConfig parse_scenario(std::string_view yaml_text, std::string_view fallback_name) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::kParseError, e.what());
  }
  if (!root.IsMap()) throw Error(ErrorKind::kParseError, "scenario must be a mapping");

  Problems pr;
  ScenarioConfig cfg;
  check_keys(root, "",
             {"name", "description", "market", "strict_validity", "capacities", "game", "sweep",
              "dynamics", "type2", "output", "time_budget_s"},
             pr);
  cfg.name = std::string(fallback_name);
  if (root["name"]) {
    if (auto s = read_string(root["name"], "name", pr)) cfg.name = *s;
  }
  if (root["description"]) {
    if (auto s = read_string(root["description"], "description", pr)) cfg.description = *s;
  }
  if (root["market"]) {
    read_market(root["market"], cfg, pr);
  } else {
    pr.add("market", "missing");
  }
  if (root["strict_validity"]) {
    if (auto b = read_bool(root["strict_validity"], "strict_validity", pr)) cfg.strict_validity = *b;
  }
  if (root["capacities"]) {
    if (auto v = read_list(root["capacities"], "capacities", pr)) cfg.caps.q_avail = *v;
  } else {
    cfg.caps = CapacitySpec::unlimited_for(cfg.players());
  }
  if (root["game"]) {
    if (auto s = read_string(root["game"], "game", pr)) {
      if (auto g = parse_game_type(*s)) {
        cfg.game = *g;
      } else {
        pr.add("game", "unknown game type '" + *s + "'");
      }
    }
  } else {
    pr.add("game", "missing");
  }
  if (root["sweep"]) read_sweep(root["sweep"], cfg, pr);
  if (root["dynamics"]) read_dynamics(root["dynamics"], cfg, pr);
  if (const auto t2 = root["type2"]) {
    check_keys(t2, "type2", {"theta"}, pr);
    if (t2.IsMap() && t2["theta"]) cfg.theta = read_number(t2["theta"], "type2.theta", pr);
  }
  if (const auto out = root["output"]) {
    check_keys(out, "output", {"format"}, pr);
    if (out.IsMap() && out["format"]) {
      if (auto s = read_string(out["format"], "output.format", pr)) cfg.format = *s;
    }
  }
  if (root["time_budget_s"]) {
    if (auto v = read_number(root["time_budget_s"], "time_budget_s", pr)) cfg.time_budget_s = *v;
  }
  pr.raise();
  validate_scenario(cfg);
  return cfg;
}

ScenarioConfig load_scenario(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read scenario " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.stem().string());
}

json ExperimentManifest::to_json() const {
  json files_j = json::array();
  for (const auto& f : files) files_j.push_back({{"name", f.name}, {"sha256", f.sha256}, {"rows", f.rows}});
  return {{"scenario", scenario},
          {"scenario_hash", scenario_hash},
          {"version", version},
          {"files", files_j},
          {"timings_s", timings_s},
          {"failed_points", failed_points},
          {"time_budget_s", time_budget_s},
          {"within_budget", within_budget}};
}

ExperimentManifest ExperimentManifest::from_json(const json& j) {
  try {
    ExperimentManifest m;
    m.scenario = j.at("scenario").get<std::string>();
    m.scenario_hash = j.at("scenario_hash").get<std::string>();
    m.version = j.at("version").get<std::string>();
    for (const auto& f : j.at("files")) {
      m.files.push_back({f.at("name").get<std::string>(), f.at("sha256").get<std::string>(),
                         f.at("rows").get<std::size_t>()});
    }
    m.timings_s = j.value("timings_s", std::map<std::string, double>{});
    m.failed_points = j.value("failed_points", std::size_t{0});
    m.time_budget_s = j.value("time_budget_s", 0.0);
    m.within_budget = j.value("within_budget", true);
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParseError, std::string("malformed manifest: ") + e.what());
  }
}

ExperimentManifest run_scenario(const ScenarioConfig& cfg, const fs::path& out_dir) {
  validate_scenario(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + out_dir.string() + ": " + ec.message());

  Runner r{cfg, out_dir, "scenario " + cfg.hash(), {}};
  r.manifest.scenario = cfg.name;
  r.manifest.scenario_hash = cfg.hash();
  r.manifest.version = std::string(kArtifactVersion);
  r.manifest.time_budget_s = cfg.time_budget_s;

  switch (cfg.game) {
    case GameType::kType1Static: r.type1_static(); break;
    case GameType::kType1Stackelberg: r.type1_stackelberg(); break;
    case GameType::kType1DynamicBest: r.type1_dynamic_best(); break;
    case GameType::kType1DynamicBr: r.type1_dynamic_br(); break;
    case GameType::kType2Static: r.type2_static(); break;
    case GameType::kType2Dynamic: r.type2_dynamic(); break;
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.manifest.timings_s["total"] = wall;
  r.manifest.within_budget = wall <= cfg.time_budget_s;

  const fs::path mpath = out_dir / "manifest.json";
  std::ofstream out(mpath, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + mpath.string());
  out << r.manifest.to_json().dump(2) << '\n';
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + mpath.string());
  return r.manifest;
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kIo, "SHA-256 digest failed");
  }
  return hex(md, len);
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

bool GoldenTolerance::accepts(const std::string& column, double got, double want) const {
  if (std::isnan(got) || std::isnan(want)) return std::isnan(got) && std::isnan(want);
  if (std::isinf(got) || std::isinf(want)) return got == want;
  const double d = std::abs(got - want);
  if (const auto it = per_column.find(column); it != per_column.end()) return d <= it->second;
  return d <= abs + rel * std::abs(want);
}

GoldenReport verify_golden(const ExperimentManifest& manifest, const fs::path& output_dir,
                           const fs::path& golden_dir, const GoldenTolerance& tol) {
  const fs::path gm_path = golden_dir / "manifest.json";
  if (!fs::exists(gm_path)) throw Error(ErrorKind::kMissingGolden, "no golden manifest at " + gm_path.string());
  json gj;
  {
    std::ifstream in(gm_path, std::ios::binary);
    try {
      gj = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParseError, "golden manifest " + gm_path.string() + ": " + e.what());
    }
  }
  const ExperimentManifest golden = ExperimentManifest::from_json(gj);

  GoldenReport rep;
  auto problem = [&rep](std::string p) {
    rep.ok = false;
    rep.problems.push_back(std::move(p));
  };
  if (golden.scenario_hash != manifest.scenario_hash) {
    problem("scenario hash differs from the golden run (" + golden.scenario_hash + ")");
  }
  for (const auto& f : manifest.files) {
    const bool listed = std::any_of(golden.files.begin(), golden.files.end(),
                                    [&](const OutputFile& g) { return g.name == f.name; });
    if (!listed) problem(f.name + ": not in the golden set");
  }
  for (const auto& g : golden.files) {
    const fs::path gpath = golden_dir / g.name;
    if (!fs::exists(gpath)) throw Error(ErrorKind::kMissingGolden, "missing golden file " + gpath.string());
    const auto it = std::find_if(manifest.files.begin(), manifest.files.end(),
                                 [&](const OutputFile& f) { return f.name == g.name; });
    if (it == manifest.files.end() || !fs::exists(output_dir / g.name)) {
      problem(g.name + ": not produced");
      continue;
    }
    if (sha256_file(output_dir / g.name) != g.sha256 || sha256_file(gpath) != g.sha256) rep.checksums_match = false;

    const Table got = read_table(output_dir / g.name);
    const Table want = read_table(gpath);
    if (got.columns != want.columns) {
      problem(g.name + ": columns differ");
      continue;
    }
    if (got.rows.size() != want.rows.size()) {
      problem(g.name + ": " + std::to_string(got.rows.size()) + " rows, golden has " +
              std::to_string(want.rows.size()));
      continue;
    }
    for (std::size_t c = 0; c < got.columns.size(); ++c) {
      ColumnDeviation dev{g.name, got.columns[c], 0.0, true};
      for (std::size_t r = 0; r < got.rows.size(); ++r) {
        const Cell& a = got.rows[r][c];
        const Cell& b = want.rows[r][c];
        const auto num = [](const Cell& x) -> std::optional<double> {
          if (const auto* d = std::get_if<double>(&x)) return *d;
          if (const auto* i = std::get_if<long long>(&x)) return static_cast<double>(*i);
          return std::nullopt;
        };
        const auto na = num(a);
        const auto nb = num(b);
        if (na && nb) {
          if (std::isfinite(*na) && std::isfinite(*nb)) {
            dev.max_abs = std::max(dev.max_abs, std::abs(*na - *nb));
          }
          if (!tol.accepts(got.columns[c], *na, *nb)) dev.ok = false;
        } else if (a != b) {
          dev.ok = false;
        }
      }
      if (!dev.ok) rep.ok = false;
      rep.columns.push_back(std::move(dev));
    }
  }
  return rep;
}

}  // namespace spectrum
