#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "grafem/material.hpp"
#include "grafem/mesh.hpp"
#include "grafem/sparse.hpp"

namespace grafem {

/// Mutable simulation state. Edge damage is binary and irreversible;
/// element_chi is the per-element surviving-energy fraction in [0, 1].
struct SimState {
  std::vector<Vec3> displacements;
  std::vector<Vec3> velocities;
  std::vector<std::uint8_t> edge_damage;  // 0 intact, 1 broken
  std::vector<double> element_chi;
  double time = 0.0;

  static SimState rest(const TetMesh& mesh);

  Vec3 position(const TetMesh& mesh, int node) const {
    return mesh.rest_positions[node] + displacements[node];
  }
  int broken_edge_count() const;
};

/// F = (current edge-vector matrix) * rest_shape_inverse; constant per
/// element for linear tets.
Mat3 deformation_gradient(const TetMesh& mesh, const SimState& state, int tet);

using NodalForces = std::array<Vec3, 4>;

/// Damage-scaled internal elastic forces on the element's four nodes
/// (chi_e * V_e applied). They sum to zero.
NodalForces element_internal_force(const TetMesh& mesh, const SimState& state,
                                   const MaterialParams& params, int tet);

/// One magnitude per element edge such that the force on node i is the sum
/// over incident edges of coeff * (unit vector from i toward the other
/// endpoint). Computed for the undamaged element (chi = 1).
struct EdgeForceDecomposition {
  std::array<double, 6> coeff{};
  bool ok = false;  // false when the least-squares system is rank deficient
  double residual = 0.0;
};
EdgeForceDecomposition edge_decomposed_forces(const TetMesh& mesh, const SimState& state,
                                              const MaterialParams& params, int tet);

/// Global internal elastic force vector (3n), chi-scaled, fixed-order scatter.
VecX assemble_forces(const TetMesh& mesh, const SimState& state, const MaterialParams& params);

/// The 12x12 damage-scaled tangent block of one element. Symmetrized exactly.
Eigen::Matrix<double, 12, 12> element_stiffness(const TetMesh& mesh, const SimState& state,
                                                const MaterialParams& params, int tet);

/// Structural pattern of the global system (3x3 blocks per node pair that
/// shares an element). Finalized; values zero.
FixedPatternSparse make_system_pattern(const TetMesh& mesh);

/// Scatter chi-scaled element tangents into the fixed pattern.
void assemble_stiffness(const TetMesh& mesh, const SimState& state,
                        const MaterialParams& params, FixedPatternSparse& K);

/// Diagonal lumped mass per dof (3n); node mass = sum of rho * V_e / 4.
VecX lumped_mass(const TetMesh& mesh, const MaterialParams& params);

/// Rayleigh damping force (alpha M + beta K) * v.
VecX damping_apply(const VecX& mass, const FixedPatternSparse& K, const MaterialParams& params,
                   const VecX& v);

/// Total degraded strain energy  sum_e chi_e V_e Psi_e.
double total_strain_energy(const TetMesh& mesh, const SimState& state,
                           const MaterialParams& params);

double kinetic_energy(const VecX& mass, const SimState& state);

}  // namespace grafem
