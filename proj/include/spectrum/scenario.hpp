#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "spectrum/dynamics_analysis.hpp"
#include "spectrum/market.hpp"

namespace spectrum {

inline constexpr std::string_view kArtifactVersion = "1.0.0";

enum class GameType {
  kType1Static,
  kType1Stackelberg,
  kType1DynamicBest,
  kType1DynamicBr,
  kType2Static,
  kType2Dynamic,
};

std::string_view to_string(GameType g);
std::optional<GameType> parse_game_type(std::string_view s);
bool is_dynamic(GameType g);

/// "12", "12 MHz", "0.5 dollar/MHz", "inf". Throws ParseError.
double parse_quantity(std::string_view text);

struct DemandCoefficients {
  std::vector<double> a;
  std::vector<double> b;
  Matrix c;
};

struct SweepAxis {
  std::string parameter;  // q1a..qNa, theta, gamma1, gamma2
  double from = 0.0;
  double to = 0.0;
  std::size_t steps = 2;
  bool log_scale = false;

  double value(std::size_t k) const;
};

struct RunOverride {
  std::optional<CapacitySpec> caps;
  std::optional<LearningRates> rates;
};

enum class BrAnalysis { kOrbit, kBifurcation, kLyapunov, kAttractor };

struct DynamicsConfig {
  LearningRates rates;
  std::vector<double> p0{5.0, 5.0};
  double tol = 1e-6;
  std::size_t max_iter = 200;
  std::uint64_t seed = 1;
  std::size_t transient = 1000;
  std::size_t samples = 200;
  std::size_t lyapunov_iter = 50000;
  std::size_t attractor_points = 10000;
  double escape = kEscapeDefault;
  BrAnalysis analysis = BrAnalysis::kOrbit;
  std::vector<RunOverride> runs;  // empty: one run with the scenario capacities
};

struct ScenarioConfig {
  std::string name;
  std::string description;
  std::optional<MarketParameters> utility;
  std::optional<DemandCoefficients> demand;
  bool strict_validity = false;
  CapacitySpec caps;
  GameType game = GameType::kType1Static;
  std::vector<SweepAxis> sweep;  // several axes form a grid, first axis outermost
  DynamicsConfig dynamics;
  std::optional<double> theta;
  std::string format = "csv";  // csv | jsonl
  double time_budget_s = 60.0;

  std::size_t players() const;
  DemandModel demand_model() const;
  /// Utility-side description; derived from the demand form when needed.
  Market market() const;

  nlohmann::json to_json() const;
  /// SHA-256 of the canonical JSON form.
  std::string hash() const;
};

/// Field-level checks; throws ValidationError naming the field.
void validate_scenario(const ScenarioConfig& cfg);

ScenarioConfig parse_scenario(std::string_view yaml_text, std::string_view fallback_name = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

struct OutputFile {
  std::string name;
  std::string sha256;
  std::size_t rows = 0;
};

struct ExperimentManifest {
  std::string scenario;
  std::string scenario_hash;
  std::string version;
  std::vector<OutputFile> files;
  std::map<std::string, double> timings_s;
  std::size_t failed_points = 0;
  double time_budget_s = 0.0;
  bool within_budget = true;

  nlohmann::json to_json() const;
  static ExperimentManifest from_json(const nlohmann::json& j);
};

/// Runs the scenario, writes its files and manifest.json into out_dir.
ExperimentManifest run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

struct GoldenTolerance {
  double abs = 1e-9;
  double rel = 1e-9;
  std::map<std::string, double> per_column;  // absolute, overrides both defaults

  bool accepts(const std::string& column, double got, double want) const;
};

struct ColumnDeviation {
  std::string file;
  std::string column;
  double max_abs = 0.0;
  bool ok = true;
};

struct GoldenReport {
  bool ok = true;
  bool checksums_match = true;
  std::vector<ColumnDeviation> columns;
  std::vector<std::string> problems;
};

/// Compares the files listed in `manifest` (found in output_dir) with the
/// golden copies in golden_dir. Throws MissingGolden if a golden file or
/// the golden manifest is absent.
GoldenReport verify_golden(const ExperimentManifest& manifest,
                           const std::filesystem::path& output_dir,
                           const std::filesystem::path& golden_dir,
                           const GoldenTolerance& tol = {});

}  // namespace spectrum
