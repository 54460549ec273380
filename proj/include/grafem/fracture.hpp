#pragma once

#include <array>
#include <utility>
#include <vector>

#include "grafem/fem.hpp"

namespace grafem {

/// Row of the edge-direction transform for a unit vector d = (cx, cy, cz):
/// (cx^2, cy^2, cz^2, cx*cy, cx*cz, cy*cz). Dotted with a packed stress
/// six-vector it gives the normal stress along d.
Vec6 stress_transform_row(const Vec3& unit_dir);

/// 6x6 transform from Cartesian stress six-vectors to normal stresses along
/// the element's six current (deformed) edge directions, rows in the fixed
/// local edge order. Returns false when a current edge has zero length; the
/// element must then be treated as fully damaged.
bool build_T(const TetMesh& mesh, const SimState& state, int tet, Mat6& T);

/// sigma_f = T * sigma_c.
Vec6 edge_normal_stresses(const Mat6& T, const Vec6& sigma_c);

/// Precomputed rest-centroid neighborhoods with normalized hat-kernel
/// weights w(r) = max(0, 1 - r / r_d); r_d = 0 degenerates to self-only.
struct NonlocalTable {
  std::vector<std::vector<std::pair<int, double>>> neighbors;  // per tet: (tet, weight)
};
NonlocalTable build_nonlocal_table(const TetMesh& mesh, double r_d);

/// Per-tet transform + screening data for one damage pass.
struct EdgeStressReport {
  std::vector<Vec6> tet_edge_stress;   // sigma_f per tet (local, unmasked)
  std::vector<double> edge_screening;  // per edge: max over incident tets of
                                       // the kernel-averaged normal stress
  std::vector<char> tet_degenerate;    // current-geometry degenerate elements
};

/// Kernel-average the per-tet Cartesian stresses over rest neighborhoods,
/// transform each average by the owning tet's T, and reduce to per-edge
/// screening values by maximum over incident tets. Also reports each tet's
/// own (local) edge stresses for the chi update.
EdgeStressReport nonlocal_screen(const TetMesh& mesh, const SimState& state,
                                 const std::vector<Vec6>& per_tet_sigma_c,
                                 const NonlocalTable& table);

/// Break every intact edge whose screening stress reaches the threshold
/// (signed comparison: tension only). Returns the newly broken edges in
/// ascending order; already-broken edges are never reported again.
std::vector<int> update_damage(SimState& state, const std::vector<double>& screening,
                               const MaterialParams& params);

/// Connected components of one element's 4-node graph over intact edges.
/// Returns per-local-node component labels (smallest member index) and the
/// component count.
std::pair<std::array<int, 4>, int> fragment_components(const TetMesh& mesh,
                                                       const SimState& state, int tet);

/// Surviving-stress fraction per element: sum of |sigma_f| over intact edges
/// divided by the sum over all six. Zero when the element's intact-edge graph
/// is disconnected; (intact count)/6 when the denominator underflows.
std::vector<double> compute_chi(const TetMesh& mesh, const SimState& state,
                                const std::vector<Vec6>& per_tet_sigma_f,
                                const MaterialParams& params);

}  // namespace grafem
