#include "grafem/collision.hpp"

#include <algorithm>
#include <cmath>

namespace grafem {

Vec3 Schedule3::eval(double t) const {
  if (times.empty()) return Vec3::Zero();
  if (t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const size_t hi = static_cast<size_t>(it - times.begin());
  const size_t lo = hi - 1;
  const double span = times[hi] - times[lo];
  const double w = span > 0.0 ? (t - times[lo]) / span : 0.0;
  return (1.0 - w) * values[lo] + w * values[hi];
}

Vec3 Schedule3::rate(double t) const {
  if (times.size() < 2) return Vec3::Zero();
  if (t < times.front() || t > times.back()) return Vec3::Zero();
  auto it = std::upper_bound(times.begin(), times.end(), t);
  size_t hi = static_cast<size_t>(it - times.begin());
  if (hi == 0) hi = 1;
  if (hi >= times.size()) hi = times.size() - 1;
  const size_t lo = hi - 1;
  const double span = times[hi] - times[lo];
  return span > 0.0 ? Vec3(((values[hi] - values[lo]) / span)) : Vec3::Zero();
}

Schedule3 Schedule3::constant(const Vec3& v) {
  Schedule3 s;
  s.times = {0.0};
  s.values = {v};
  return s;
}

void Collider::validate() const {
  if (kind == Kind::sphere && !(radius > 0.0)) throw FormatError("sphere radius must be positive");
  if (kind == Kind::halfspace && std::abs(normal.norm() - 1.0) > 1e-9)
    throw FormatError("halfspace normal must be unit length");
  if (!(stiffness > 0.0)) throw FormatError("collider stiffness must be positive");
  if (restitution < 0.0 || restitution > 1.0)
    throw FormatError("restitution must be in [0, 1]");
  if (friction < 0.0) throw FormatError("friction must be non-negative");
}

CollisionResult detect_and_respond(const TetMesh& mesh, const SimState& state,
                                   const VecX& mass, const std::vector<Collider>& colliders,
                                   double t, double dt) {
  CollisionResult out;
  const int n = mesh.num_nodes();
  out.force = VecX::Zero(3 * n);
  out.per_collider_force.assign(colliders.size(), 0.0);

  for (size_t c = 0; c < colliders.size(); ++c) {
    const Collider& col = colliders[c];
    Vec3 col_center = Vec3::Zero(), col_velocity = Vec3::Zero();
    if (col.kind == Collider::Kind::sphere) {
      col_center = col.center.eval(t);
      col_velocity = col.center.rate(t);
    }
    Vec3 sum = Vec3::Zero();
    for (int i = 0; i < n; ++i) {
      const Vec3 x = state.position(mesh, i);
      double depth;
      Vec3 normal;
      if (col.kind == Collider::Kind::sphere) {
        const Vec3 rel = x - col_center;
        const double dist = rel.norm();
        depth = col.radius - dist;
        if (depth <= 0.0) continue;
        normal = dist > 1e-12 ? Vec3(rel / dist) : Vec3::UnitZ();
        if (depth > 0.5 * col.radius) out.deep_penetrations++;
      } else {
        depth = -(x - col.point).dot(col.normal);
        if (depth <= 0.0) continue;
        normal = col.normal;
      }
      out.contact_count++;
      out.max_depth = std::max(out.max_depth, depth);

      Vec3 f = col.stiffness * depth * normal;

      const Vec3 vrel = state.velocities[i] - col_velocity;
      const double vn = vrel.dot(normal);
      double impulse_mag = 0.0;
      const double m = mass[3 * i];
      if (vn < 0.0) {
        // remove the inward normal velocity, scaled for restitution
        impulse_mag = -(1.0 + col.restitution) * vn * m / dt;
        f += impulse_mag * normal;
      }
      if (col.friction > 0.0) {
        const Vec3 vt = vrel - vn * normal;
        const double vt_norm = vt.norm();
        if (vt_norm > 1e-12) {
          const double normal_mag = col.stiffness * depth + impulse_mag;
          const double cap = col.friction * normal_mag;
          const double want = m * vt_norm / dt;  // enough to stop the slide
          f -= std::min(cap, want) * (vt / vt_norm);
        }
      }
      out.force.segment<3>(3 * i) += f;
      sum += f;
    }
    out.per_collider_force[c] = sum.norm();
  }
  return out;
}

}  // namespace grafem
