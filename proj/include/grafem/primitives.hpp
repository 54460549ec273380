#pragma once

#include <array>

#include "grafem/mesh.hpp"

namespace grafem {

/// Structured box of cells[0] x cells[1] x cells[2] cubes, each split into
/// six tetrahedra around the main diagonal (face-compatible across cells).
/// Spans [origin, origin + size].
TetMesh make_box_mesh(const Vec3& size, const std::array<int, 3>& cells,
                      const Vec3& origin = Vec3::Zero());

/// Solid cylinder with its axis along x, centered at the origin, meshed by
/// mapping a structured square cross-section grid onto the disk.
TetMesh make_cylinder_mesh(double radius, double length, int axial_cells, int cross_cells);

/// Box bar with a V-shaped groove cut across the +y face at mid-length
/// (material removal of every cell whose center lies inside the wedge).
/// depth and half_angle_deg describe the groove; the groove runs along z.
TetMesh make_notched_bar_mesh(const Vec3& size, const std::array<int, 3>& cells,
                              double notch_depth, double notch_half_angle_deg,
                              const Vec3& origin = Vec3::Zero());

}  // namespace grafem
