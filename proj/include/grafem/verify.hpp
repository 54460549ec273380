#pragma once

#include <array>

#include "grafem/fem.hpp"

namespace grafem {

/// Per-edge squared stretch ratios and rest unit directions of one element.
struct StretchRecord {
  std::array<double, 6> lambda_sq{};
  std::array<Vec3, 6> rest_dir{};
};

/// Measure stretches of an element under a homogeneous deformation F applied
/// to the canonical unit right tet (or any supplied mesh element).
StretchRecord stretches_from_deformation(const Mat3& F);
StretchRecord stretches_from_state(const TetMesh& mesh, const SimState& state, int tet);

struct ReconstructResult {
  Mat3 C = Mat3::Identity();
  bool rank_deficient = false;
  double residual = 0.0;
};

/// Least-squares recovery of the right Cauchy-Green tensor from edge
/// stretches: each edge contributes lambda^2 = q^T C q; the six-dimensional
/// symmetric-basis system is solved with a pseudo-inverse.
ReconstructResult reconstruct_C(const StretchRecord& stretches);

/// Energy density evaluated purely from edge lengths: reconstruct C, then
/// evaluate the model from the tensor invariants.
double energy_from_edges(const StretchRecord& stretches, const MaterialParams& params);

/// Anisotropic invariants a.C.b and a.C^T C.b for supplied fiber directions.
std::pair<double, double> anisotropic_invariants(const Mat3& C, const Vec3& a, const Vec3& b);

/// Max relative error between assemble_forces and central differences of the
/// total degraded strain energy (chi held fixed).
double fd_check_forces(const TetMesh& mesh, const SimState& state, const MaterialParams& params,
                       double h);

/// Max relative error between the assembled-stiffness action K*d and central
/// differences of assemble_forces along d, over a few probe directions.
double fd_check_stiffness(const TetMesh& mesh, const SimState& state,
                          const MaterialParams& params, double h);

/// Fits the best additive per-edge energy on axis-aligned stretch data for a
/// unit tet, then compares it with the element energy on a shear state. A
/// discrepancy beyond 1% demonstrates that the element energy is not a sum of
/// independent edge energies.
struct MassSpringWitness {
  double fem_energy = 0.0;
  double fitted_energy = 0.0;
  double abs_discrepancy = 0.0;
  double rel_discrepancy = 0.0;
  bool witnessed = false;
};
MassSpringWitness mass_spring_witness(const MaterialParams& params, double shear = 0.3);

}  // namespace grafem
