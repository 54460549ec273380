#pragma once

#include <vector>

#include "grafem/fem.hpp"

namespace grafem {

/// Piecewise-linear vector schedule; clamps outside the keyframe range.
struct Schedule3 {
  std::vector<double> times;
  std::vector<Vec3> values;

  Vec3 eval(double t) const;
  Vec3 rate(double t) const;  // slope of the active segment
  bool empty() const { return times.empty(); }
  static Schedule3 constant(const Vec3& v);
};

struct Collider {
  enum class Kind { sphere, halfspace };
  Kind kind = Kind::sphere;

  Schedule3 center;      // sphere center schedule
  double radius = 0.0;   // sphere
  Vec3 point = Vec3::Zero();   // halfspace: point on the plane
  Vec3 normal = Vec3::UnitZ();  // halfspace: outward unit normal

  double stiffness = 1e6;   // N/m penalty
  double restitution = 0.0;
  double friction = 0.0;

  void validate() const;
};

struct CollisionResult {
  VecX force;                      // 3n external force contributions
  std::vector<double> per_collider_force;  // |sum of force vectors| per collider
  int contact_count = 0;
  int deep_penetrations = 0;       // depth > radius / 2 (sphere) warnings
  double max_depth = 0.0;
};

/// Discrete per-vertex collision test and response: penalty force on the
/// penetration depth, a velocity-level impulse (as force m*dv/dt) removing
/// (1 + restitution) times the inward normal velocity, and Coulomb-clamped
/// tangential damping. Applied to all vertices, fractured or not.
CollisionResult detect_and_respond(const TetMesh& mesh, const SimState& state,
                                   const VecX& mass, const std::vector<Collider>& colliders,
                                   double t, double dt);

}  // namespace grafem
