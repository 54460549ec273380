#include <cmath>

#include "doctest.h"
#include "grafem/primitives.hpp"
#include "grafem/solver.hpp"

using namespace grafem;

namespace {

MaterialParams soft_stvk(double sigma_thres = 1e9) {
  return MaterialParams::from_youngs(1e6, 0.3, 1000.0, sigma_thres, 0.0, EnergyModel::stvk);
}

BoundaryCondition slab(const TetMesh& mesh, const std::string& name, double x_lo, double x_hi) {
  BoundaryCondition bc;
  bc.name = name;
  bc.kind = BoundaryCondition::Kind::translate;
  bc.translation = Schedule3::constant(Vec3::Zero());
  for (int n = 0; n < mesh.num_nodes(); ++n)
    if (mesh.rest_positions[n].x() >= x_lo && mesh.rest_positions[n].x() <= x_hi)
      bc.nodes.push_back(n);
  return bc;
}

}  // namespace

TEST_CASE("quasi-static: zero prescribed displacement converges immediately") {
  const TetMesh mesh = make_box_mesh(Vec3(0.2, 0.1, 0.1), {4, 2, 2});
  SolverConfig config;
  Simulation sim(mesh, soft_stvk(), config, {slab(mesh, "left", -1.0, 1e-9)}, {});
  const auto before = sim.state().displacements;
  const auto stats = sim.quasi_static_step(1.0);
  CHECK(stats.newton_iterations == 0);
  CHECK(sim.state().displacements == before);
}

TEST_CASE("quasi-static small stretch matches the linear-elastic profile") {
  const double strain = 1e-3;
  const double length = 0.2;
  const TetMesh mesh = make_box_mesh(Vec3(length, 0.1, 0.1), {8, 4, 4});

  BoundaryCondition left = slab(mesh, "left", -1.0, 1e-9);
  left.translation.times = {0.0, 1.0};
  left.translation.values = {Vec3::Zero(), Vec3(-0.5 * strain * length, 0, 0)};
  BoundaryCondition right = slab(mesh, "right", length - 1e-9, 1.0);
  right.translation.times = {0.0, 1.0};
  right.translation.values = {Vec3::Zero(), Vec3(0.5 * strain * length, 0, 0)};

  SolverConfig config;
  config.cg_tol = 1e-10;
  Simulation sim(mesh, soft_stvk(), config, {left, right}, {});
  const auto stats = sim.quasi_static_step(1.0);
  CHECK(stats.residual <= sim.newton_tolerance());
  CHECK(sim.state().broken_edge_count() == 0);

  // mean axial stretch over the middle third approaches the nominal strain
  double mean_fxx = 0.0;
  int counted = 0;
  for (int e = 0; e < mesh.num_tets(); ++e) {
    const double cx = mesh.rest_centroids[e].x();
    if (cx < length / 3.0 || cx > 2.0 * length / 3.0) continue;
    mean_fxx += deformation_gradient(mesh, sim.state(), e)(0, 0);
    ++counted;
  }
  mean_fxx /= counted;
  CHECK(std::abs(mean_fxx - (1.0 + strain)) < 0.05 * strain);
}

TEST_CASE("quasi-static pull beyond threshold breaks edges and still converges") {
  const TetMesh mesh = make_box_mesh(Vec3(0.2, 0.1, 0.1), {6, 3, 3});
  auto params = soft_stvk(/*sigma_thres=*/3e3);  // breaks well below the full pull

  BoundaryCondition left = slab(mesh, "left", -1.0, 1e-9);
  left.translation.times = {0.0, 1.0};
  left.translation.values = {Vec3::Zero(), Vec3(-0.002, 0, 0)};
  BoundaryCondition right = slab(mesh, "right", 0.2 - 1e-9, 1.0);
  right.translation.times = {0.0, 1.0};
  right.translation.values = {Vec3::Zero(), Vec3(0.002, 0, 0)};

  SolverConfig config;
  Simulation sim(mesh, params, config, {left, right}, {});
  StepStats last;
  for (int s = 1; s <= 10; ++s) last = sim.quasi_static_step(s / 10.0);
  CHECK(sim.state().broken_edge_count() > 0);
  CHECK(last.residual <= sim.newton_tolerance());
}

TEST_CASE("dynamic: rest state with no forcing stays at rest") {
  const TetMesh mesh = make_box_mesh(Vec3(0.1, 0.1, 0.1), {2, 2, 2});
  SolverConfig config;
  config.dt = 1e-3;
  Simulation sim(mesh, soft_stvk(), config, {}, {});
  sim.dynamic_step();
  sim.dynamic_step();
  for (const auto& u : sim.state().displacements) CHECK(u.norm() == 0.0);
  for (const auto& v : sim.state().velocities) CHECK(v.norm() == 0.0);
}

TEST_CASE("dynamic free fall: velocity is n dt g for every node") {
  const TetMesh mesh = make_box_mesh(Vec3(0.1, 0.1, 0.1), {2, 2, 2});
  SolverConfig config;
  config.dt = 1e-4;
  config.gravity = Vec3(0.3, -9.81, 0.2);
  config.cg_tol = 1e-13;
  config.cg_max_iters = 20000;
  const int steps = 25;
  Simulation sim(mesh, soft_stvk(), config, {}, {});
  for (int s = 0; s < steps; ++s) sim.dynamic_step();
  const Vec3 expect = steps * config.dt * config.gravity;
  for (const auto& v : sim.state().velocities)
    CHECK((v - expect).norm() <= 1e-12 * expect.norm());
}

TEST_CASE("fully broken element: exclusive nodes move ballistically") {
  // two tets; tet 1 owns the exclusive node 4
  const TetMesh mesh =
      make_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 1)},
                {{0, 1, 2, 3}, {1, 2, 3, 4}});
  SolverConfig config;
  config.dt = 1e-4;
  config.gravity = Vec3(0, -9.81, 0);
  config.cg_tol = 1e-13;
  config.cg_max_iters = 20000;
  Simulation sim(mesh, soft_stvk(), config, {slab(mesh, "anchor", -1.0, 1e-9)}, {});

  // break all edges of tet 1 by hand; chi drops to zero
  for (int k = 0; k < 6; ++k) sim.state().edge_damage[mesh.tet_edges[1][k]] = 1;
  sim.state().element_chi[1] = 0.0;

  const int steps = 20;
  for (int s = 0; s < steps; ++s) sim.dynamic_step();
  const Vec3 expect = steps * config.dt * config.gravity;
  CHECK((sim.state().velocities[4] - expect).norm() <= 1e-9 * expect.norm());
  // and its position integrated the velocity history: sum k dt^2 g
  const Vec3 expect_u = 0.5 * steps * (steps + 1) * config.dt * config.dt * config.gravity;
  CHECK((sim.state().displacements[4] - expect_u).norm() <= 1e-9 * expect_u.norm());
}

TEST_CASE("prescribed nodes follow their schedules to machine precision") {
  const TetMesh mesh = make_box_mesh(Vec3(0.2, 0.1, 0.1), {4, 2, 2});
  BoundaryCondition mover = slab(mesh, "mover", -1.0, 1e-9);
  mover.translation.times = {0.0, 1.0};
  mover.translation.values = {Vec3::Zero(), Vec3(0.01, 0.02, -0.005)};

  SolverConfig config;
  config.dt = 1e-3;
  Simulation sim(mesh, soft_stvk(), config, {mover}, {});
  for (int s = 0; s < 10; ++s) sim.dynamic_step();
  const double t = sim.state().time;
  for (int n : mover.nodes) {
    const Vec3 want = mover.displacement_at(mesh, n, t);
    CHECK((sim.state().displacements[n] - want).norm() == 0.0);
  }
}

TEST_CASE("rotation boundary condition moves nodes on circles") {
  const TetMesh mesh = make_box_mesh(Vec3(0.2, 0.1, 0.1), {2, 1, 1});
  BoundaryCondition bc;
  bc.kind = BoundaryCondition::Kind::rotate;
  bc.axis_point = Vec3(0, 0.05, 0.05);
  bc.axis_dir = Vec3::UnitX();
  bc.angle.times = {0.0, 1.0};
  bc.angle.values = {Vec3::Zero(), Vec3(M_PI / 2.0, 0, 0)};
  const int node = 3;
  const Vec3 rest = mesh.rest_positions[node];
  const Vec3 u = bc.displacement_at(mesh, node, 1.0);
  // same distance from the axis, quarter turn
  const Vec3 rel0 = rest - bc.axis_point;
  const Vec3 rel1 = rest + u - bc.axis_point;
  CHECK(rel1.norm() == doctest::Approx(rel0.norm()).epsilon(1e-12));
  CHECK(std::abs(rel0.dot(rel1) - rel0.x() * rel1.x()) < 1e-12);  // perpendicular in the yz-plane
}

TEST_CASE("backward euler: energy decays without growing on an oscillating bar") {
  const TetMesh mesh = make_box_mesh(Vec3(0.1, 0.05, 0.05), {4, 2, 2});
  auto params = soft_stvk();
  SolverConfig config;
  config.dt = 2e-5;
  config.cg_tol = 1e-12;
  Simulation sim(mesh, params, config, {slab(mesh, "clamp", -1.0, 1e-9)}, {});

  // small initial axial stretch, zero velocity
  for (int n = 0; n < mesh.num_nodes(); ++n)
    sim.state().displacements[n].x() += 1e-4 * mesh.rest_positions[n].x();
  for (const auto& bc : std::vector<std::string>{})
    (void)bc;

  const VecX mass = lumped_mass(mesh, params);
  double e0 = total_strain_energy(mesh, sim.state(), params) +
              kinetic_energy(mass, sim.state());
  double prev = e0;
  for (int s = 0; s < 100; ++s) {
    sim.dynamic_step();
    const double e = total_strain_energy(mesh, sim.state(), params) +
                     kinetic_energy(mass, sim.state());
    CHECK(e <= prev * (1.0 + 1e-9));  // never grows
    prev = e;
  }
  CHECK(prev >= 0.98 * e0);  // dissipation bounded at this dt
  CHECK(prev <= e0);
}

TEST_CASE("pattern hash and dof count stay constant through damage") {
  const TetMesh mesh = make_box_mesh(Vec3(0.2, 0.1, 0.1), {4, 2, 2});
  auto params = soft_stvk(/*sigma_thres=*/2e3);
  BoundaryCondition left = slab(mesh, "left", -1.0, 1e-9);
  left.translation.times = {0.0, 1.0};
  left.translation.values = {Vec3::Zero(), Vec3(-0.002, 0, 0)};
  BoundaryCondition right = slab(mesh, "right", 0.2 - 1e-9, 1.0);
  right.translation.times = {0.0, 1.0};
  right.translation.values = {Vec3::Zero(), Vec3(0.002, 0, 0)};
  SolverConfig config;
  Simulation sim(mesh, params, config, {left, right}, {});

  const auto h0 = sim.pattern_hash();
  const int dofs0 = sim.dof_count();
  for (int s = 1; s <= 8; ++s) {
    sim.quasi_static_step(s / 8.0);
    CHECK(sim.pattern_hash() == h0);
    CHECK(sim.dof_count() == dofs0);
  }
  CHECK(sim.state().broken_edge_count() > 0);
}

TEST_CASE("chi never increases over a damaging run") {
  const TetMesh mesh = make_box_mesh(Vec3(0.2, 0.1, 0.1), {4, 2, 2});
  auto params = soft_stvk(/*sigma_thres=*/2e3);
  BoundaryCondition left = slab(mesh, "left", -1.0, 1e-9);
  left.translation.times = {0.0, 1.0};
  left.translation.values = {Vec3::Zero(), Vec3(-0.002, 0, 0)};
  BoundaryCondition right = slab(mesh, "right", 0.2 - 1e-9, 1.0);
  right.translation.times = {0.0, 1.0};
  right.translation.values = {Vec3::Zero(), Vec3(0.002, 0, 0)};
  SolverConfig config;
  Simulation sim(mesh, params, config, {left, right}, {});

  std::vector<double> prev = sim.state().element_chi;
  for (int s = 1; s <= 8; ++s) {
    sim.quasi_static_step(s / 8.0);
    for (int e = 0; e < mesh.num_tets(); ++e) {
      CHECK(sim.state().element_chi[e] <= prev[e] + 1e-15);
      CHECK(sim.state().element_chi[e] >= 0.0);
      CHECK(sim.state().element_chi[e] <= 1.0);
    }
    prev = sim.state().element_chi;
  }
}

TEST_CASE("boundary conditions sharing a node are rejected") {
  const TetMesh mesh = make_box_mesh(Vec3(0.1, 0.1, 0.1), {1, 1, 1});
  auto a = slab(mesh, "a", -1.0, 1.0);  // everything
  auto b = slab(mesh, "b", -1.0, 1.0);
  SolverConfig config;
  CHECK_THROWS_AS(Simulation(mesh, soft_stvk(), config, {a, b}, {}), FormatError);
}
