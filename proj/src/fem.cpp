#include "grafem/fem.hpp"

#include <cmath>

namespace grafem {

SimState SimState::rest(const TetMesh& mesh) {
  SimState s;
  s.displacements.assign(mesh.num_nodes(), Vec3::Zero());
  s.velocities.assign(mesh.num_nodes(), Vec3::Zero());
  s.edge_damage.assign(mesh.num_edges(), 0);
  s.element_chi.assign(mesh.num_tets(), 1.0);
  return s;
}

int SimState::broken_edge_count() const {
  int n = 0;
  for (auto z : edge_damage) n += z;
  return n;
}

Mat3 deformation_gradient(const TetMesh& mesh, const SimState& state, int tet) {
  // F = I + (displacement edge matrix) * Binv; exactly I at rest
  const auto& t = mesh.tets[tet];
  const Vec3& u0 = state.displacements[t[0]];
  Mat3 du;
  du.col(0) = state.displacements[t[1]] - u0;
  du.col(1) = state.displacements[t[2]] - u0;
  du.col(2) = state.displacements[t[3]] - u0;
  return Mat3::Identity() + du * mesh.rest_shape_inverse[tet];
}

namespace {

// Energy gradient w.r.t. the current edge-vector matrix columns:
// G = chi * V * P(F) * Binv^T. Forces: f_j = -G.col(j-1), f_0 = +sum cols.
NodalForces forces_from_gradient(const Mat3& g) {
  NodalForces f;
  f[1] = -g.col(0);
  f[2] = -g.col(1);
  f[3] = -g.col(2);
  f[0] = g.col(0) + g.col(1) + g.col(2);
  return f;
}

}  // namespace

NodalForces element_internal_force(const TetMesh& mesh, const SimState& state,
                                   const MaterialParams& params, int tet) {
  const double scale = state.element_chi[tet] * mesh.rest_volumes[tet];
  if (scale == 0.0) return {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  const Mat3 F = deformation_gradient(mesh, state, tet);
  const Mat3 g = scale * pk1(F, params) * mesh.rest_shape_inverse[tet].transpose();
  return forces_from_gradient(g);
}

EdgeForceDecomposition edge_decomposed_forces(const TetMesh& mesh, const SimState& state,
                                              const MaterialParams& params, int tet) {
  EdgeForceDecomposition out;
  const auto& t = mesh.tets[tet];

  const Mat3 F = deformation_gradient(mesh, state, tet);
  const Mat3 g = mesh.rest_volumes[tet] * pk1(F, params) *
                 mesh.rest_shape_inverse[tet].transpose();
  const NodalForces f = forces_from_gradient(g);

  // current unit edge directions; degenerate edges invalidate the split
  std::array<Vec3, 6> dir;
  for (int k = 0; k < 6; ++k) {
    const auto& le = TetMesh::local_edges[k];
    const Vec3 d = state.position(mesh, t[le[1]]) - state.position(mesh, t[le[0]]);
    const double len = d.norm();
    if (len < 1e-14) return out;
    dir[k] = d / len;
  }

  // 12 equations (4 nodes x 3), 6 shared magnitudes; f_i = sum_k c_k * s_ik * dir_k
  // with s_ik = +1 when the edge leaves node i, -1 when it enters.
  MatX a = MatX::Zero(12, 6);
  VecX b(12);
  for (int i = 0; i < 4; ++i) b.segment<3>(3 * i) = f[i];
  for (int k = 0; k < 6; ++k) {
    const auto& le = TetMesh::local_edges[k];
    a.block<3, 1>(3 * le[0], k) = dir[k];
    a.block<3, 1>(3 * le[1], k) = -dir[k];
  }
  bool deficient = false;
  const MatX ainv = pinv_small(a, &deficient);
  const VecX c = ainv * b;
  out.residual = (a * c - b).norm();
  for (int k = 0; k < 6; ++k) out.coeff[k] = c[k];
  out.ok = !deficient;
  return out;
}

VecX assemble_forces(const TetMesh& mesh, const SimState& state, const MaterialParams& params) {
  const int nt = mesh.num_tets();
  std::vector<NodalForces> per_tet(nt);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int e = 0; e < nt; ++e) per_tet[e] = element_internal_force(mesh, state, params, e);

  VecX f = VecX::Zero(mesh.num_dofs());
  for (int e = 0; e < nt; ++e)
    for (int i = 0; i < 4; ++i) f.segment<3>(3 * mesh.tets[e][i]) += per_tet[e][i];
  return f;
}

Eigen::Matrix<double, 12, 12> element_stiffness(const TetMesh& mesh, const SimState& state,
                                                const MaterialParams& params, int tet) {
  Eigen::Matrix<double, 12, 12> k = Eigen::Matrix<double, 12, 12>::Zero();
  const double scale = state.element_chi[tet] * mesh.rest_volumes[tet];
  if (scale == 0.0) return k;
  const Mat3 F = deformation_gradient(mesh, state, tet);
  const Mat3& binv = mesh.rest_shape_inverse[tet];

  // column c = d(-force)/d(u of node c, axis ax): stiffness is the energy Hessian
  for (int c = 0; c < 4; ++c) {
    for (int ax = 0; ax < 3; ++ax) {
      Mat3 dds = Mat3::Zero();
      if (c == 0) {
        dds(ax, 0) = -1.0;
        dds(ax, 1) = -1.0;
        dds(ax, 2) = -1.0;
      } else {
        dds(ax, c - 1) = 1.0;
      }
      const Mat3 dF = dds * binv;
      const Mat3 dg = scale * pk1_differential(F, dF, params) * binv.transpose();
      const NodalForces df = forces_from_gradient(dg);
      for (int i = 0; i < 4; ++i) k.block<3, 1>(3 * i, 3 * c + ax) = -df[i];
    }
  }
  // symmetric by theory; clean roundoff exactly
  k = 0.5 * (k + k.transpose()).eval();
  return k;
}

FixedPatternSparse make_system_pattern(const TetMesh& mesh) {
  FixedPatternSparse K(mesh.num_dofs());
  for (const auto& t : mesh.tets)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) K.reserve_entry(3 * t[i] + a, 3 * t[j] + b);
  K.finalize();
  return K;
}

void assemble_stiffness(const TetMesh& mesh, const SimState& state,
                        const MaterialParams& params, FixedPatternSparse& K) {
  const int nt = mesh.num_tets();
  std::vector<Eigen::Matrix<double, 12, 12>> blocks(nt);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int e = 0; e < nt; ++e) blocks[e] = element_stiffness(mesh, state, params, e);

  K.set_zero();
  for (int e = 0; e < nt; ++e) {
    const auto& t = mesh.tets[e];
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            K.add(3 * t[i] + a, 3 * t[j] + b, blocks[e](3 * i + a, 3 * j + b));
  }
}

VecX lumped_mass(const TetMesh& mesh, const MaterialParams& params) {
  VecX m = VecX::Zero(mesh.num_dofs());
  for (int e = 0; e < mesh.num_tets(); ++e) {
    const double quarter = params.density * mesh.rest_volumes[e] / 4.0;
    for (int i = 0; i < 4; ++i)
      m.segment<3>(3 * mesh.tets[e][i]) += Vec3::Constant(quarter);
  }
  return m;
}

VecX damping_apply(const VecX& mass, const FixedPatternSparse& K, const MaterialParams& params,
                   const VecX& v) {
  VecX out = VecX::Zero(v.size());
  if (params.damp_mass_coeff != 0.0)
    out += params.damp_mass_coeff * mass.cwiseProduct(v);
  if (params.damp_stiff_coeff != 0.0) out += params.damp_stiff_coeff * K.multiply(v);
  return out;
}

double total_strain_energy(const TetMesh& mesh, const SimState& state,
                           const MaterialParams& params) {
  double total = 0.0;
  for (int e = 0; e < mesh.num_tets(); ++e) {
    const double scale = state.element_chi[e] * mesh.rest_volumes[e];
    if (scale == 0.0) continue;
    total += scale * energy_density(deformation_gradient(mesh, state, e), params);
  }
  return total;
}

double kinetic_energy(const VecX& mass, const SimState& state) {
  double total = 0.0;
  for (size_t i = 0; i < state.velocities.size(); ++i)
    total += 0.5 * mass[3 * i] * state.velocities[i].squaredNorm();
  return total;
}

}  // namespace grafem
