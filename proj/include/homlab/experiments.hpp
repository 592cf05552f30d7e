#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "homlab/cell_problems.hpp"

namespace homlab {

/// Exit codes of the command line tool.
enum ExitCode : int { kExitOk = 0, kExitAuditFailed = 1, kExitSchema = 2, kExitCapacity = 3 };

/// Schema violation; line is 1-based, 0 when unknown.
struct SchemaError : ConfigError {
  SchemaError(const std::string& what, int line) : ConfigError(what), line(line) {}
  int line;
};

enum class ExperimentKind {
  estimate,
  isotropy_corollary,
  anisotropic_gap,
  subadditivity_audit,
  stationarity_audit,
  triangle_audit
};

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct AuditSettings {
  bool bc_monotone = true;           // top_bottom <= full on paired records
  std::optional<double> expect;      // every normalized value equals this
  double expect_tolerance = 1e-9;
  bool variance_decrease = false;    // variance(t_min) > variance(t_max)
  double shift_tolerance_se = 2.0;   // |shifted - centered| <= k pooled SE
  double tolerance = 0.05;           // isotropy: relative full/top_bottom gap
  double full_min = 2.1;             // anisotropic gap
  double topbottom_max = 2.05;
  int boxes = 50;                    // subadditivity
  int max_side = 8;
  int pairs = 100;                   // stationarity
  int max_shift = 64;
  std::vector<std::string> families; // stationarity: families to sweep
  std::uint64_t rng_seed = 1;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::estimate;
  std::string name;
  FieldConfig field;
  int d = 2;
  std::vector<UnitDirection> directions;
  std::vector<int> t_schedule;
  std::optional<Vec> x0;
  std::vector<std::pair<int, int>> label_pairs;
  std::vector<std::uint64_t> seeds;
  std::vector<BcMode> bcs;
  int stencil_radius = 1;
  int collar_width = 0;
  SolverKind solver = SolverKind::mincut;
  int max_sweeps = 20;
  bool metric_override = false;
  AuditSettings audit;
  std::string output;

  nlohmann::json effective;  // normalized config, the input of the hash
};

/// Parse and validate a schema-1 config. Throws SchemaError carrying the
/// line of the offending key (or the parser's line for malformed JSON).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Replace the seed list by a comma separated list ("1,2,3").
void apply_seed_override(ExperimentConfig& cfg, const std::string& list);

std::string sha256_hex(const std::string& data);

struct RunOptions {
  int workers = 0;  // 0: hardware concurrency
  std::optional<std::filesystem::path> out;
  bool quiet = false;
};

/// Execute the experiment and write records, report and manifest. Returns an
/// ExitCode. Messages go to log.
int run_experiment(const std::filesystem::path& config_path, const RunOptions& options, std::ostream& log);

/// Render SVG figures from a results directory.
int plot_results(const std::filesystem::path& dir, std::ostream& log);

/// Re-run the jobs of a manifest and compare integer minima and CSV bytes
/// (wall_ms excluded).
int replay_manifest(const std::filesystem::path& manifest, int workers, std::ostream& log);

/// CSV text with the wall_ms column removed.
std::string strip_wall_ms(const std::string& csv);

}  // namespace homlab
