#include <random>

#include "doctest.h"
#include "grafem/fem.hpp"
#include "grafem/primitives.hpp"
#include "grafem/verify.hpp"

using namespace grafem;

namespace {

MaterialParams stvk_soft() {
  auto p = MaterialParams::from_youngs(1e6, 0.3, 1000.0, 1e5, 0.0, EnergyModel::stvk);
  return p;
}

TetMesh unit_tet() {
  return make_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)}, {{0, 1, 2, 3}});
}

TetMesh regular_tet() {
  // equilateral tet with unit edge length
  return make_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, std::sqrt(3.0) / 2.0, 0),
                    Vec3(0.5, std::sqrt(3.0) / 6.0, std::sqrt(6.0) / 3.0)},
                   {{0, 1, 2, 3}});
}

SimState jittered_state(const TetMesh& mesh, double amp, unsigned seed) {
  SimState s = SimState::rest(mesh);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  for (auto& d : s.displacements) d = Vec3(u(rng), u(rng), u(rng));
  return s;
}

}  // namespace

TEST_CASE("deformation gradient: rest and rigid translation give exactly I") {
  const TetMesh mesh = unit_tet();
  SimState s = SimState::rest(mesh);
  CHECK(deformation_gradient(mesh, s, 0) == Mat3::Identity());
  for (auto& d : s.displacements) d = Vec3(0.13, -2.4, 0.777);
  CHECK(deformation_gradient(mesh, s, 0) == Mat3::Identity());
}

TEST_CASE("affine displacement reproduces the affine map on every element") {
  const TetMesh mesh = make_box_mesh(Vec3(1, 1, 1), {2, 2, 2});
  Mat3 a;
  a << 1.1, 0.2, -0.05, 0.0, 0.93, 0.1, 0.04, -0.02, 1.02;
  SimState s = SimState::rest(mesh);
  for (int n = 0; n < mesh.num_nodes(); ++n)
    s.displacements[n] = (a - Mat3::Identity()) * mesh.rest_positions[n];
  for (int e = 0; e < mesh.num_tets(); ++e)
    CHECK((deformation_gradient(mesh, s, e) - a).norm() < 1e-12);
}

TEST_CASE("element forces: zero at rest, zero when chi is zero, sum to zero") {
  const TetMesh mesh = unit_tet();
  const auto p = stvk_soft();
  SimState s = SimState::rest(mesh);
  auto f = element_internal_force(mesh, s, p, 0);
  for (const auto& fi : f) CHECK(fi.norm() == 0.0);

  s = jittered_state(mesh, 0.1, 5);
  f = element_internal_force(mesh, s, p, 0);
  const Vec3 total = f[0] + f[1] + f[2] + f[3];
  CHECK(total.norm() < 1e-9 * (f[0].norm() + f[1].norm() + f[2].norm() + f[3].norm()));

  s.element_chi[0] = 0.0;
  f = element_internal_force(mesh, s, p, 0);
  for (const auto& fi : f) CHECK(fi.norm() == 0.0);
}

TEST_CASE("element forces match finite differences of the element energy") {
  const TetMesh mesh = unit_tet();
  const auto p = stvk_soft();
  SimState s = jittered_state(mesh, 0.08, 7);
  s.element_chi[0] = 0.6;  // partial damage scaling included
  const auto f = element_internal_force(mesh, s, p, 0);
  const double h = 1e-7;
  double scale = 0.0;
  for (const auto& fi : f) scale = std::max(scale, fi.cwiseAbs().maxCoeff());
  for (int n = 0; n < 4; ++n) {
    for (int ax = 0; ax < 3; ++ax) {
      SimState probe = s;
      probe.displacements[n][ax] += h;
      const double ep = s.element_chi[0] * mesh.rest_volumes[0] *
                        energy_density(deformation_gradient(mesh, probe, 0), p);
      probe.displacements[n][ax] = s.displacements[n][ax] - h;
      const double em = s.element_chi[0] * mesh.rest_volumes[0] *
                        energy_density(deformation_gradient(mesh, probe, 0), p);
      const double fd = -(ep - em) / (2.0 * h);
      CHECK(std::abs(fd - f[n][ax]) / scale < 1e-4);
    }
  }
}

TEST_CASE("edge force decomposition: zeros at rest, equal on a uniformly expanded regular tet") {
  const TetMesh mesh = regular_tet();
  const auto p = stvk_soft();
  SimState s = SimState::rest(mesh);
  auto dec = edge_decomposed_forces(mesh, s, p, 0);
  CHECK(dec.ok);
  for (double c : dec.coeff) CHECK(std::abs(c) < 1e-12);

  // uniform expansion: all six coefficients equal by symmetry
  for (int n = 0; n < 4; ++n) s.displacements[n] = 0.2 * mesh.rest_positions[n];
  dec = edge_decomposed_forces(mesh, s, p, 0);
  CHECK(dec.ok);
  CHECK(dec.residual < 1e-8);
  for (int k = 1; k < 6; ++k)
    CHECK(dec.coeff[k] == doctest::Approx(dec.coeff[0]).epsilon(1e-8));
}

TEST_CASE("edge force decomposition reconstructs forces on random states") {
  const TetMesh mesh = unit_tet();
  const auto p = stvk_soft();
  for (unsigned seed : {11u, 12u, 13u}) {
    const SimState s = jittered_state(mesh, 0.15, seed);
    const auto dec = edge_decomposed_forces(mesh, s, p, 0);
    REQUIRE(dec.ok);
    const auto f = element_internal_force(mesh, s, p, 0);
    for (int i = 0; i < 4; ++i) {
      Vec3 rebuilt = Vec3::Zero();
      for (int k = 0; k < 6; ++k) {
        const auto& le = TetMesh::local_edges[k];
        int sign = 0;
        if (le[0] == i) sign = 1;
        if (le[1] == i) sign = -1;
        if (!sign) continue;
        const Vec3 d = (s.position(mesh, mesh.tets[0][le[1]]) -
                        s.position(mesh, mesh.tets[0][le[0]]))
                           .normalized();
        rebuilt += sign * dec.coeff[k] * d;
      }
      CHECK((rebuilt - f[i]).norm() < 1e-8);
    }
  }
}

TEST_CASE("degenerate current element flags the decomposition") {
  const TetMesh mesh = unit_tet();
  const auto p = stvk_soft();
  SimState s = SimState::rest(mesh);
  // collapse node 3 onto node 0: edge 03 has zero current length
  s.displacements[3] = Vec3(0, 0, -1);
  const auto dec = edge_decomposed_forces(mesh, s, p, 0);
  CHECK(!dec.ok);
}

TEST_CASE("assembled forces: zero at rest, local support, FD match") {
  const TetMesh mesh = make_box_mesh(Vec3(0.2, 0.1, 0.1), {4, 2, 2});
  const auto p = stvk_soft();
  SimState s = SimState::rest(mesh);
  CHECK(assemble_forces(mesh, s, p).norm() == 0.0);

  // single displaced node: forces only on nodes sharing an element with it
  const int moved = mesh.num_nodes() / 2;
  s.displacements[moved] = Vec3(0.002, -0.001, 0.0015);
  const VecX f = assemble_forces(mesh, s, p);
  std::vector<char> adjacent(mesh.num_nodes(), 0);
  for (const auto& t : mesh.tets) {
    const bool has = t[0] == moved || t[1] == moved || t[2] == moved || t[3] == moved;
    if (has)
      for (int v : t) adjacent[v] = 1;
  }
  for (int n = 0; n < mesh.num_nodes(); ++n)
    if (!adjacent[n]) CHECK(f.segment<3>(3 * n).norm() == 0.0);

  const SimState random_state = jittered_state(mesh, 0.002, 17);
  CHECK(fd_check_forces(mesh, random_state, p, 1e-6) < 1e-4);
}

TEST_CASE("global internal forces sum to zero") {
  const TetMesh mesh = make_box_mesh(Vec3(0.2, 0.1, 0.1), {3, 2, 2});
  const auto p = stvk_soft();
  const SimState s = jittered_state(mesh, 0.004, 23);
  const VecX f = assemble_forces(mesh, s, p);
  Vec3 total = Vec3::Zero();
  for (int n = 0; n < mesh.num_nodes(); ++n) total += Vec3(f.segment<3>(3 * n));
  CHECK(total.norm() <= 1e-9 * std::max(1.0, f.norm()));
}

TEST_CASE("stiffness: zero with chi = 0, symmetric, matches small-strain analytic form") {
  const TetMesh mesh = unit_tet();
  const auto p = stvk_soft();
  SimState s = SimState::rest(mesh);

  FixedPatternSparse k = make_system_pattern(mesh);
  s.element_chi[0] = 0.0;
  assemble_stiffness(mesh, s, p, k);
  double maxval = 0.0;
  for (double v : k.values()) maxval = std::max(maxval, std::abs(v));
  CHECK(maxval == 0.0);

  s.element_chi[0] = 1.0;
  assemble_stiffness(mesh, s, p, k);
  CHECK(k.asymmetry() < 1e-8);

  // independent small-strain element stiffness at rest:
  // K = V B^T C B with the standard linear-elastic 6x6 modulus
  const double mu = p.mu, la = p.lambda;
  Eigen::Matrix<double, 6, 6> c = Eigen::Matrix<double, 6, 6>::Zero();
  c(0, 0) = c(1, 1) = c(2, 2) = la + 2.0 * mu;
  c(0, 1) = c(0, 2) = c(1, 0) = c(1, 2) = c(2, 0) = c(2, 1) = la;
  c(3, 3) = c(4, 4) = c(5, 5) = mu;
  const Mat3& binv = mesh.rest_shape_inverse[0];
  Eigen::Matrix<double, 3, 4> grad;  // shape-function gradients
  grad.col(0) = -binv.transpose() * Vec3(1, 1, 1);
  for (int j = 0; j < 3; ++j) grad.col(j + 1) = binv.transpose().col(j);
  Eigen::Matrix<double, 6, 12> b = Eigen::Matrix<double, 6, 12>::Zero();
  for (int n = 0; n < 4; ++n) {
    const Vec3 g = grad.col(n);
    b(0, 3 * n + 0) = g.x();
    b(1, 3 * n + 1) = g.y();
    b(2, 3 * n + 2) = g.z();
    b(3, 3 * n + 0) = g.y();
    b(3, 3 * n + 1) = g.x();
    b(4, 3 * n + 1) = g.z();
    b(4, 3 * n + 2) = g.y();
    b(5, 3 * n + 0) = g.z();
    b(5, 3 * n + 2) = g.x();
  }
  const MatX analytic = mesh.rest_volumes[0] * b.transpose() * c * b;
  MatX assembled(12, 12);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) assembled(i, j) = k.get(i, j);
  CHECK((assembled - analytic).norm() / analytic.norm() < 1e-10);
}

TEST_CASE("stiffness action matches FD directional derivative of forces") {
  const TetMesh mesh = make_box_mesh(Vec3(0.2, 0.1, 0.1), {3, 2, 2});
  const auto p = stvk_soft();
  const SimState s = jittered_state(mesh, 0.003, 29);
  CHECK(fd_check_stiffness(mesh, s, p, 1e-6) < 1e-3);
}

TEST_CASE("lumped mass: node shares and totals") {
  const TetMesh mesh = unit_tet();
  auto p = stvk_soft();
  p.density = 1000.0;
  const VecX m = lumped_mass(mesh, p);
  for (int n = 0; n < 4; ++n)
    CHECK(m[3 * n] == doctest::Approx(1000.0 / 6.0 / 4.0).epsilon(1e-12));

  const TetMesh box = make_box_mesh(Vec3(0.2, 0.1, 0.1), {2, 2, 2});
  const VecX mb = lumped_mass(box, p);
  double total = 0.0;
  for (int n = 0; n < box.num_nodes(); ++n) total += mb[3 * n];
  CHECK(total == doctest::Approx(p.density * box.total_volume()).epsilon(1e-12));

  p.density = 2000.0;
  const VecX m2 = lumped_mass(mesh, p);
  CHECK((m2 - 2.0 * m).norm() == 0.0);
}

TEST_CASE("rayleigh damping combines mass and stiffness terms") {
  const TetMesh mesh = unit_tet();
  auto p = stvk_soft();
  const SimState s = jittered_state(mesh, 0.05, 31);
  FixedPatternSparse k = make_system_pattern(mesh);
  assemble_stiffness(mesh, s, p, k);
  const VecX m = lumped_mass(mesh, p);
  VecX v(mesh.num_dofs());
  for (int i = 0; i < v.size(); ++i) v[i] = std::sin(i + 1.0);

  p.damp_mass_coeff = 0.0;
  p.damp_stiff_coeff = 0.0;
  CHECK(damping_apply(m, k, p, v).norm() == 0.0);
  CHECK(damping_apply(m, k, p, VecX::Zero(v.size())).norm() == 0.0);

  p.damp_mass_coeff = 2.5;
  const VecX d = damping_apply(m, k, p, v);
  CHECK((d - 2.5 * m.cwiseProduct(v)).norm() == 0.0);

  p.damp_stiff_coeff = 0.1;
  const VecX d2 = damping_apply(m, k, p, v);
  CHECK((d2 - (2.5 * m.cwiseProduct(v) + 0.1 * k.multiply(v))).norm() < 1e-12 * d2.norm());
}

TEST_CASE("sparsity pattern is unchanged by damage updates") {
  const TetMesh mesh = make_box_mesh(Vec3(0.1, 0.1, 0.1), {2, 2, 2});
  const auto p = stvk_soft();
  SimState s = jittered_state(mesh, 0.004, 37);
  FixedPatternSparse k = make_system_pattern(mesh);
  assemble_stiffness(mesh, s, p, k);
  const auto h0 = k.structure_hash();

  // break edges and degrade elements, reassemble: identical structure
  for (size_t e = 0; e < s.edge_damage.size(); e += 3) s.edge_damage[e] = 1;
  for (auto& chi : s.element_chi) chi = 0.4;
  s.element_chi[0] = 0.0;
  assemble_stiffness(mesh, s, p, k);
  CHECK(k.structure_hash() == h0);

  // breaking zero edges leaves assembled forces bitwise unchanged
  SimState clean = jittered_state(mesh, 0.004, 37);
  const VecX f1 = assemble_forces(mesh, clean, p);
  const std::vector<double> screening(mesh.num_edges(), 0.0);
  const VecX f2 = assemble_forces(mesh, clean, p);
  CHECK(f1 == f2);
}
