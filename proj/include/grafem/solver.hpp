#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "grafem/collision.hpp"
#include "grafem/fracture.hpp"
#include "grafem/viz.hpp"

namespace grafem {

struct SolverConfig {
  double dt = 1e-3;  // s
  // residual-norm tolerance; non-positive means derive the default
  // 1e-6 * sigma_thres * mean face area at setup
  double newton_tol = 0.0;
  int newton_max_iters = 40;
  double cg_tol = 1e-8;
  int cg_max_iters = 4000;
  double ls_backtrack = 0.5;
  double ls_sufficient_decrease = 1e-4;
  int ls_max_halvings = 40;
  Vec3 gravity = Vec3::Zero();
  bool dynamic_full_newton = false;
  int collision_substeps = 1;

  void validate() const;
};

/// Prescribed motion of a node set: rigid translation along a keyframed
/// vector, or rotation about a fixed axis by a keyframed angle.
struct BoundaryCondition {
  enum class Kind { translate, rotate };
  Kind kind = Kind::translate;
  std::string name;
  std::vector<int> nodes;

  Schedule3 translation;       // translate: u(t), same for every node
  Vec3 axis_point = Vec3::Zero();
  Vec3 axis_dir = Vec3::UnitX();
  Schedule3 angle;             // rotate: x component holds the angle (rad)

  Vec3 displacement_at(const TetMesh& mesh, int node, double t) const;
};

struct StepStats {
  int newton_iterations = 0;
  int cg_iterations = 0;
  int newly_broken = 0;
  double residual = 0.0;
  double load = 0.0;  // collider contact force magnitude this step
};

/// One simulation: owns the state, the fixed-pattern system, the nonlocal
/// screening table and the render mesh, and advances per the outer loop:
/// edge-stress screening, damage, render splits, collisions, solve, update.
class Simulation {
 public:
  Simulation(TetMesh mesh, MaterialParams material, SolverConfig config,
             std::vector<BoundaryCondition> bcs, std::vector<Collider> colliders);

  /// Screen stresses, break edges, split the render mesh and refresh chi.
  /// Returns the newly broken edge ids.
  std::vector<int> damage_pass();

  /// One semi-implicit (or full-Newton) backward Euler step, including the
  /// damage pass and collision response per the outer-loop ordering.
  StepStats dynamic_step();

  /// Newton solve of the zero-inertia equilibrium at pseudo-time t_load
  /// (boundary schedules evaluated there), then a damage pass on the
  /// converged state. Halves the load increment on non-convergence.
  StepStats quasi_static_step(double t_load);

  const TetMesh& mesh() const { return mesh_; }
  const SimState& state() const { return state_; }
  SimState& state() { return state_; }
  const MaterialParams& material() const { return material_; }
  const SolverConfig& config() const { return config_; }
  VizMesh& viz() { return viz_; }
  const VizMesh& viz() const { return viz_; }
  const VecX& mass() const { return mass_; }
  const std::vector<Collider>& colliders() const { return colliders_; }

  std::uint64_t pattern_hash() const { return system_.structure_hash(); }
  int dof_count() const { return mesh_.num_dofs(); }
  double last_collider_load() const { return last_collider_load_; }
  double reaction_load(const std::vector<int>& nodes, const Vec3& axis) const;
  double newton_tolerance() const { return newton_tol_; }

  /// Fraction of mesh edges currently broken.
  double broken_fraction() const;

 private:
  void apply_boundary_displacements(double t);
  std::vector<int> fixed_dofs() const;
  std::vector<Vec6> per_tet_cauchy() const;
  double solve_linear(VecX& dx, VecX& rhs, const std::vector<int>& fixed,
                      const VecX& fixed_values, int* cg_iters);

  TetMesh mesh_;
  MaterialParams material_;
  SolverConfig config_;
  std::vector<BoundaryCondition> bcs_;
  std::vector<Collider> colliders_;

  SimState state_;
  FixedPatternSparse system_;
  VecX mass_;
  NonlocalTable nonlocal_;
  VizMesh viz_;
  double newton_tol_ = 0.0;
  double last_collider_load_ = 0.0;
  double quasi_static_time_ = 0.0;  // last converged load pseudo-time
};

}  // namespace grafem
