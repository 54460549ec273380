#include "grafem/verify.hpp"

#include <cmath>

#include "grafem/sparse.hpp"

namespace grafem {

namespace {

const std::array<Vec3, 4> kUnitTet = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0),
                                      Vec3(0, 0, 1)};

// symmetric 3x3 <-> 6-vector with sqrt(2)-scaled off-diagonals, so that the
// Frobenius inner product is the plain dot product of the packed vectors
Vec6 pack_sym(const Mat3& s) {
  const double r2 = std::sqrt(2.0);
  Vec6 v;
  v << s(0, 0), s(1, 1), s(2, 2), r2 * s(0, 1), r2 * s(0, 2), r2 * s(1, 2);
  return v;
}

Mat3 unpack_sym(const Vec6& v) {
  const double r2 = std::sqrt(2.0);
  Mat3 s;
  s << v[0], v[3] / r2, v[4] / r2, v[3] / r2, v[1], v[5] / r2, v[4] / r2, v[5] / r2, v[2];
  return s;
}

double energy_from_invariants(double ic, double iic, double iiic, const MaterialParams& p) {
  if (p.energy_model == EnergyModel::stvk)
    return 0.125 * p.lambda * (ic - 3.0) * (ic - 3.0) + 0.25 * p.mu * (iic - 2.0 * ic + 3.0);
  const double j = std::sqrt(std::max(iiic, 0.0));
  const double a = 1.0 + p.mu / p.lambda - p.mu / (4.0 * p.lambda);
  return 0.5 * p.mu * (ic - 3.0) + 0.5 * p.lambda * (j - a) * (j - a) -
         0.5 * p.mu * std::log(ic + 1.0);
}

}  // namespace

StretchRecord stretches_from_deformation(const Mat3& F) {
  StretchRecord rec;
  for (int k = 0; k < 6; ++k) {
    const auto& le = TetMesh::local_edges[k];
    const Vec3 rest = kUnitTet[le[1]] - kUnitTet[le[0]];
    const double rest_len = rest.norm();
    rec.rest_dir[k] = rest / rest_len;
    rec.lambda_sq[k] = (F * rest).squaredNorm() / (rest_len * rest_len);
  }
  return rec;
}

StretchRecord stretches_from_state(const TetMesh& mesh, const SimState& state, int tet) {
  StretchRecord rec;
  const auto& t = mesh.tets[tet];
  for (int k = 0; k < 6; ++k) {
    const auto& le = TetMesh::local_edges[k];
    const Vec3 rest = mesh.rest_positions[t[le[1]]] - mesh.rest_positions[t[le[0]]];
    const Vec3 cur = state.position(mesh, t[le[1]]) - state.position(mesh, t[le[0]]);
    const double rest_len2 = rest.squaredNorm();
    rec.rest_dir[k] = rest / std::sqrt(rest_len2);
    rec.lambda_sq[k] = cur.squaredNorm() / rest_len2;
  }
  return rec;
}

ReconstructResult reconstruct_C(const StretchRecord& stretches) {
  ReconstructResult out;
  MatX a(6, 6);
  VecX b(6);
  for (int k = 0; k < 6; ++k) {
    const Vec3& q = stretches.rest_dir[k];
    a.row(k) = pack_sym(q * q.transpose()).transpose();
    b[k] = stretches.lambda_sq[k];
  }
  bool deficient = false;
  const MatX ainv = pinv_small(a, &deficient);
  const VecX c = ainv * b;
  out.rank_deficient = deficient;
  out.residual = (a * c - b).norm();
  out.C = unpack_sym(c);
  return out;
}

double energy_from_edges(const StretchRecord& stretches, const MaterialParams& params) {
  const Mat3 C = reconstruct_C(stretches).C;
  const double ic = C.trace();
  const double iic = C.cwiseProduct(C).sum();
  const double iiic = C.determinant();
  return energy_from_invariants(ic, iic, iiic, params);
}

std::pair<double, double> anisotropic_invariants(const Mat3& C, const Vec3& a, const Vec3& b) {
  return {a.dot(C * b), a.dot(C.transpose() * C * b)};
}

double fd_check_forces(const TetMesh& mesh, const SimState& state, const MaterialParams& params,
                       double h) {
  const VecX f = assemble_forces(mesh, state, params);
  const double scale = std::max(f.cwiseAbs().maxCoeff(), 1e-30);
  double worst = 0.0;
  SimState probe = state;
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    for (int ax = 0; ax < 3; ++ax) {
      probe.displacements[n][ax] = state.displacements[n][ax] + h;
      const double ep = total_strain_energy(mesh, probe, params);
      probe.displacements[n][ax] = state.displacements[n][ax] - h;
      const double em = total_strain_energy(mesh, probe, params);
      probe.displacements[n][ax] = state.displacements[n][ax];
      const double fd = -(ep - em) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - f[3 * n + ax]) / scale);
    }
  }
  return worst;
}

double fd_check_stiffness(const TetMesh& mesh, const SimState& state,
                          const MaterialParams& params, double h) {
  FixedPatternSparse K = make_system_pattern(mesh);
  assemble_stiffness(mesh, state, params, K);
  double worst = 0.0;
  SimState probe = state;
  // a few deterministic probe directions
  for (int seed = 0; seed < 4; ++seed) {
    VecX d(mesh.num_dofs());
    for (int i = 0; i < d.size(); ++i)
      d[i] = std::sin(0.7 * (i + 1) * (seed + 1)) + 0.3 * std::cos(1.3 * i + seed);
    d /= d.norm();
    for (int n = 0; n < mesh.num_nodes(); ++n)
      probe.displacements[n] = state.displacements[n] + h * Vec3(d.segment<3>(3 * n));
    const VecX fp = assemble_forces(mesh, probe, params);
    for (int n = 0; n < mesh.num_nodes(); ++n)
      probe.displacements[n] = state.displacements[n] - h * Vec3(d.segment<3>(3 * n));
    const VecX fm = assemble_forces(mesh, probe, params);
    const VecX fd = -(fp - fm) / (2.0 * h);  // K = -d f / d u
    const VecX kd = K.multiply(d);
    const double scale = std::max(kd.cwiseAbs().maxCoeff(), 1e-30);
    worst = std::max(worst, (fd - kd).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

MassSpringWitness mass_spring_witness(const MaterialParams& params, double shear) {
  MassSpringWitness out;

  // additive model: per edge, psi_k(l2) = a_k (l2 - 1) + b_k (l2 - 1)^2
  // fitted on axis-aligned stretch sweeps of the unit tet
  const int samples = 21;
  std::vector<Mat3> deformations;
  for (int axis = 0; axis < 3; ++axis) {
    for (int s = 0; s < samples; ++s) {
      const double stretch = 0.7 + 0.6 * static_cast<double>(s) / (samples - 1);
      Mat3 F = Mat3::Identity();
      F(axis, axis) = stretch;
      deformations.push_back(F);
    }
  }
  MatX A(deformations.size(), 12);
  VecX b(deformations.size());
  for (size_t r = 0; r < deformations.size(); ++r) {
    const auto rec = stretches_from_deformation(deformations[r]);
    for (int k = 0; k < 6; ++k) {
      const double x = rec.lambda_sq[k] - 1.0;
      A(r, k) = x;
      A(r, 6 + k) = x * x;
    }
    b[r] = energy_density(deformations[r], params);
  }
  const VecX coeff = pinv_small(A) * b;

  const Mat3 F = Mat3::Identity() + shear * Vec3::UnitX() * Vec3::UnitY().transpose();
  const auto rec = stretches_from_deformation(F);
  double fitted = 0.0;
  for (int k = 0; k < 6; ++k) {
    const double x = rec.lambda_sq[k] - 1.0;
    fitted += coeff[k] * x + coeff[6 + k] * x * x;
  }
  out.fem_energy = energy_density(F, params);
  out.fitted_energy = fitted;
  out.abs_discrepancy = std::abs(fitted - out.fem_energy);
  const double floor = 1e-9 * std::max(params.mu, params.lambda);
  out.rel_discrepancy =
      out.abs_discrepancy / std::max(std::abs(out.fem_energy), floor);
  out.witnessed = out.abs_discrepancy > floor && out.rel_discrepancy > 0.01;
  return out;
}

}  // namespace grafem
