#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "grafem/solver.hpp"

namespace grafem {

/// Axis-aligned box selector over rest positions.
struct NodeSelector {
  Vec3 lo = Vec3::Constant(-1e300);
  Vec3 hi = Vec3::Constant(1e300);
  std::vector<int> resolve(const TetMesh& mesh) const;
};

struct MeshSpec {
  enum class Kind { files, box, cylinder, notched_bar };
  Kind kind = Kind::box;
  std::string node_path, ele_path;         // files
  Vec3 size = Vec3(1, 1, 1);               // box / notched_bar
  Vec3 origin = Vec3::Zero();
  std::array<int, 3> cells = {4, 4, 4};
  double radius = 0.5, length = 1.0;       // cylinder
  int axial_cells = 8, cross_cells = 4;
  double notch_depth = 0.0, notch_half_angle_deg = 22.5;

  TetMesh build() const;
};

struct BcSpec {
  std::string name;
  NodeSelector select;
  BoundaryCondition::Kind kind = BoundaryCondition::Kind::translate;
  Schedule3 translation;
  Vec3 axis_point = Vec3::Zero(), axis_dir = Vec3::UnitX();
  Schedule3 angle;
};

struct ProbeSpec {
  NodeSelector select;
  Vec3 axis = Vec3::Zero();  // zero: log the mean-displacement magnitude
};

struct ScenarioConfig {
  std::string name = "scenario";
  enum class Mode { quasi_static, dynamic } mode = Mode::dynamic;
  MeshSpec mesh;
  MaterialParams material;
  SolverConfig solver;
  double duration = 0.0;   // dynamic: seconds
  int load_steps = 20;     // quasi-static: schedule increments over [0, 1]
  int frame_every = 0;     // 0: no frames
  std::string out_dir;
  std::vector<BcSpec> boundary;
  std::vector<Collider> colliders;
  std::optional<ProbeSpec> probe;
  std::string load_source = "colliders";  // or a boundary-condition name
  unsigned seed = 0;                       // reserved; the engine is deterministic
};

/// Strict parse: unknown or missing keys collect into one FormatError that
/// lists every problem found.
ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario_file(const std::string& path);
std::string scenario_to_text(const ScenarioConfig& config);

std::vector<std::string> builtin_scenario_names();
ScenarioConfig builtin_scenario(const std::string& name);

struct MetricsRow {
  long step = 0;
  double time = 0.0;
  double strain_energy = 0.0;
  double kinetic_energy = 0.0;
  int broken_edges = 0;
  double load = 0.0;
  double probe_displacement = 0.0;
};

struct RunResult {
  std::unique_ptr<Simulation> sim;
  std::vector<MetricsRow> metrics;
  bool pattern_constant = true;
  std::uint64_t pattern_hash = 0;
  int frames_written = 0;
};

struct RunOptions {
  std::string out_dir_override;
  int frame_every_override = -1;
  bool quiet = true;
};

std::string format_metrics_csv(const std::vector<MetricsRow>& rows);

RunResult run_scenario(const ScenarioConfig& config, const RunOptions& opts = {});

}  // namespace grafem
