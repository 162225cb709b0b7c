#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bikebot/io.hpp"
#include "bikebot/planner.hpp"
#include "bikebot/sim.hpp"

namespace bikebot::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kOk = 0, kConfigError = 2, kSolverFailure = 3, kBlowUp = 4 };

/// Grids in degrees.
struct SweepSettings {
  double phi0_min = 0.0, phi0_max = 180.0, phi0_step = 1.0;
  double delta_min = -50.0, delta_max = 50.0, delta_step = 1.0;
  double phi_b_min = -10.0, phi_b_max = 10.0, phi_b_step = 1.0;
};

struct CapabilitySettings {
  double delta_range_deg = 50.0;
  bool full_joint_search = false;
};

struct MissionSettings {
  std::vector<Pose> poses;
  MissionTiming timing;
  std::vector<Vec> initial_guesses;
};

struct SimSettings {
  sim::SimConfig config;
  int trials = 1;
  double hold_s = 20.0;  ///< used when no mission is given
};

struct CompareDpSettings {
  RobotModel model;
  std::vector<int> samples{50, 100, 200};
  Vec q_start;
  Vec q_end;
  double duration = 2.0;
  int cells_per_step = 6;
  int degree = 7;
};

/// Fully validated configuration. Parsing touches every section, so a bad
/// field fails before any computation.
struct Scenario {
  RobotModel model;
  MotionLimits limits;
  PlannerWeights weights;
  PlannerOptions planner;
  SweepSettings sweep;
  CapabilitySettings capability;
  std::optional<MissionSettings> mission;
  SimSettings sim;
  sim::ControlSetup gains;
  std::vector<sim::Disturbance> disturbances;
  CompareDpSettings compare_dp;
  std::uint64_t seed = 0;
};

Scenario parse_scenario(const io::json& j);

struct Context {
  Scenario scenario;
  std::string config_hash;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool quantized_imu = false;
  std::filesystem::path out_dir = ".";
};

/// Builds the context from a config file (empty path = all defaults) and the
/// command-line overrides. Throws ConfigError.
Context make_context(const std::string& config_path, const std::string& out_dir,
                     std::optional<std::uint64_t> seed, int jobs, bool quantized_imu);

/// `# key=value` lines shared by every CSV output.
void write_csv_meta(std::ostream& os, const Context& ctx, const std::string& command);
io::json meta_json(const Context& ctx, const std::string& command);

// Each command writes its files under ctx.out_dir, prints a short summary
// with units to `out`, and returns an exit code. Errors propagate as
// exceptions; run() maps them to exit codes.
int cmd_steer_sweep(const Context& ctx, std::ostream& out);
int cmd_capability(const Context& ctx, std::ostream& out);
int cmd_plan(const Context& ctx, std::ostream& out);
int cmd_simulate(const Context& ctx, std::ostream& out);
int cmd_compare_dp(const Context& ctx, std::ostream& out);

/// Plan JSON (control points in degrees) and per-sample constraint CSV.
io::json plan_to_json(const RobotModel& model, const PlanResult& plan);
void write_plan_samples_csv(std::ostream& os, const RobotModel& model, const PlanResult& plan,
                            const PlannerWeights& weights, const MotionLimits& limits, int samples);

struct CompareRow {
  int samples = 0;
  double bezier_cost = 0.0;
  double bezier_time = 0.0;
  double bezier_audit = 0.0;
  double dp_cost = 0.0;
  double dp_time = 0.0;
  std::size_t dp_states = 0;
  [[nodiscard]] double ratio() const { return bezier_time > 0 ? dp_time / bezier_time : 0.0; }
};
/// Toy-model rows with default weights and limits for that model.
std::vector<CompareRow> compare_dp(const CompareDpSettings& s, const PlannerOptions& planner);

/// Full command-line entry point.
int run(int argc, char** argv);

}  // namespace bikebot::cli
