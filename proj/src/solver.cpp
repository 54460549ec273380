#include "grafem/solver.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace grafem {

void SolverConfig::validate() const {
  if (!(dt > 0.0)) throw FormatError("dt must be positive");
  if (!(cg_tol > 0.0)) throw FormatError("cg_tol must be positive");
  if (newton_max_iters <= 0 || cg_max_iters <= 0)
    throw FormatError("iteration limits must be positive");
  if (!(ls_backtrack > 0.0 && ls_backtrack < 1.0))
    throw FormatError("line-search backtrack factor must be in (0, 1)");
  if (!(ls_sufficient_decrease > 0.0 && ls_sufficient_decrease < 1.0))
    throw FormatError("line-search sufficient-decrease constant must be in (0, 1)");
  if (collision_substeps < 1) throw FormatError("collision_substeps must be >= 1");
}

Vec3 BoundaryCondition::displacement_at(const TetMesh& mesh, int node, double t) const {
  if (kind == Kind::translate) return translation.eval(t);
  const double theta = angle.eval(t).x();
  const Vec3 axis = axis_dir.normalized();
  const Eigen::AngleAxisd rot(theta, axis);
  const Vec3 rel = mesh.rest_positions[node] - axis_point;
  return rot * rel + axis_point - mesh.rest_positions[node];
}

Simulation::Simulation(TetMesh mesh, MaterialParams material, SolverConfig config,
                       std::vector<BoundaryCondition> bcs, std::vector<Collider> colliders)
    : mesh_(std::move(mesh)),
      material_(material),
      config_(config),
      bcs_(std::move(bcs)),
      colliders_(std::move(colliders)),
      state_(SimState::rest(mesh_)),
      system_(make_system_pattern(mesh_)),
      mass_(lumped_mass(mesh_, material_)),
      nonlocal_(build_nonlocal_table(mesh_, material_.r_d)),
      viz_(mesh_) {
  material_.validate();
  config_.validate();
  for (const auto& c : colliders_) c.validate();
  std::set<int> seen;
  for (const auto& bc : bcs_) {
    if (bc.nodes.empty())
      throw FormatError("boundary condition '" + bc.name + "' selects no nodes");
    for (int n : bc.nodes) {
      if (n < 0 || n >= mesh_.num_nodes())
        throw FormatError("boundary condition '" + bc.name + "' references node out of range");
      if (!seen.insert(n).second)
        throw FormatError("node " + std::to_string(n) + " appears in two boundary conditions");
    }
  }
  newton_tol_ = config_.newton_tol > 0.0
                    ? config_.newton_tol
                    : 1e-6 * material_.sigma_thres * mesh_.mean_face_area();
}

std::vector<int> Simulation::fixed_dofs() const {
  std::vector<int> dofs;
  for (const auto& bc : bcs_)
    for (int n : bc.nodes) {
      dofs.push_back(3 * n);
      dofs.push_back(3 * n + 1);
      dofs.push_back(3 * n + 2);
    }
  std::sort(dofs.begin(), dofs.end());
  return dofs;
}

void Simulation::apply_boundary_displacements(double t) {
  for (const auto& bc : bcs_)
    for (int n : bc.nodes) state_.displacements[n] = bc.displacement_at(mesh_, n, t);
}

std::vector<Vec6> Simulation::per_tet_cauchy() const {
  const int nt = mesh_.num_tets();
  std::vector<Vec6> sigma(nt);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int e = 0; e < nt; ++e)
    sigma[e] = cartesian_stress_sixvector(deformation_gradient(mesh_, state_, e), material_).c;
  return sigma;
}

std::vector<int> Simulation::damage_pass() {
  const auto sigma_c = per_tet_cauchy();
  const auto report = nonlocal_screen(mesh_, state_, sigma_c, nonlocal_);
  const auto newly = update_damage(state_, report.edge_screening, material_);
  if (!newly.empty()) viz_.apply_splits(newly, state_);

  const auto chi = compute_chi(mesh_, state_, report.tet_edge_stress, material_);
  for (int e = 0; e < mesh_.num_tets(); ++e) {
    double value = report.tet_degenerate[e] ? 0.0 : chi[e];
    // damage is irreversible; never let the surviving fraction grow back
    state_.element_chi[e] = std::min(state_.element_chi[e], value);
  }
  return newly;
}

double Simulation::solve_linear(VecX& dx, VecX& rhs, const std::vector<int>& fixed,
                                const VecX& fixed_values, int* cg_iters) {
  system_.project_dirichlet(fixed, fixed_values, rhs);
  for (int d : fixed) dx[d] = fixed_values[d];

  CgResult cg = cg_solve(system_, rhs, dx, config_.cg_tol, config_.cg_max_iters);
  if (cg_iters) *cg_iters += cg.iterations;
  if (cg.converged) return cg.relative_residual;

  // retry harder, then regularize the diagonal until the solve goes through
  cg = cg_solve(system_, rhs, dx, config_.cg_tol, 4 * config_.cg_max_iters);
  if (cg_iters) *cg_iters += cg.iterations;
  if (cg.converged) return cg.relative_residual;

  VecX free_diag = system_.diagonal().cwiseAbs();
  for (int d : fixed) free_diag[d] = 0.0;
  double shift = 1e-8;
  for (int attempt = 0; attempt < 8; ++attempt) {
    system_.shift_diagonal(free_diag, shift);
    dx.setZero();
    for (int d : fixed) dx[d] = fixed_values[d];
    cg = cg_solve(system_, rhs, dx, config_.cg_tol, config_.cg_max_iters);
    if (cg_iters) *cg_iters += cg.iterations;
    if (cg.converged) return cg.relative_residual;
    shift *= 10.0;
  }
  std::ostringstream msg;
  msg << "linear solve failed: relative residual " << cg.relative_residual << " after "
      << cg.iterations << " iterations"
      << (cg.negative_curvature ? " (negative curvature)" : "");
  throw SolveError(msg.str());
}

StepStats Simulation::quasi_static_step(double t_load) {
  StepStats stats;
  const auto fixed = fixed_dofs();
  const VecX zero_fixed = VecX::Zero(mesh_.num_dofs());

  auto newton_solve = [&]() -> bool {
    for (int it = 0; it <= config_.newton_max_iters; ++it) {
      VecX f_int = assemble_forces(mesh_, state_, material_);
      VecX residual = f_int;
      for (int d : fixed) residual[d] = 0.0;
      stats.residual = residual.norm();
      stats.newton_iterations = it;
      if (stats.residual <= newton_tol_) return true;
      if (it == config_.newton_max_iters) return false;

      assemble_stiffness(mesh_, state_, material_, system_);
      VecX rhs = residual;
      VecX dx = VecX::Zero(mesh_.num_dofs());
      solve_linear(dx, rhs, fixed, zero_fixed, &stats.cg_iterations);

      // line search on the degraded strain energy
      const double e0 = total_strain_energy(mesh_, state_, material_);
      double slope = -residual.dot(dx);  // dE along dx
      if (slope >= 0.0) {
        dx = residual;  // steepest descent fallback
        slope = -residual.squaredNorm();
      }
      const std::vector<Vec3> saved = state_.displacements;
      double step = 1.0;
      bool accepted = false;
      for (int h = 0; h <= config_.ls_max_halvings; ++h) {
        for (int n = 0; n < mesh_.num_nodes(); ++n)
          state_.displacements[n] = saved[n] + step * Vec3(dx.segment<3>(3 * n));
        const double e1 = total_strain_energy(mesh_, state_, material_);
        if (e1 <= e0 + config_.ls_sufficient_decrease * step * slope) {
          accepted = true;
          break;
        }
        step *= config_.ls_backtrack;
      }
      if (!accepted) state_.displacements = saved;
    }
    return false;
  };

  double current = quasi_static_time_;
  double increment = t_load - current;
  if (increment <= 0.0) {
    apply_boundary_displacements(t_load);
    if (!newton_solve()) throw SolveError("equilibrium solve failed at fixed load");
  } else {
    int halvings = 0;
    SimState backup = state_;
    while (current < t_load - 1e-15) {
      const double target = std::min(t_load, current + increment);
      apply_boundary_displacements(target);
      if (newton_solve()) {
        current = target;
        backup = state_;
      } else {
        state_ = backup;
        ++halvings;
        if (halvings > 10) {
          std::ostringstream msg;
          msg << "quasi-static step failed: Newton did not reach " << newton_tol_
              << " (residual " << stats.residual << ") after 10 load halvings at load time "
              << target;
          throw SolveError(msg.str());
        }
        increment *= 0.5;
      }
    }
  }
  quasi_static_time_ = t_load;
  state_.time = t_load;

  const auto newly = damage_pass();
  stats.newly_broken = static_cast<int>(newly.size());
  return stats;
}

StepStats Simulation::dynamic_step() {
  StepStats stats;
  const double t = state_.time;
  const double dt = config_.dt;
  const int ndof = mesh_.num_dofs();

  const auto newly = damage_pass();
  stats.newly_broken = static_cast<int>(newly.size());

  // external forces: gravity plus collision response (averaged over substeps)
  VecX f_ext = VecX::Zero(ndof);
  for (int n = 0; n < mesh_.num_nodes(); ++n)
    f_ext.segment<3>(3 * n) = mass_[3 * n] * config_.gravity;
  last_collider_load_ = 0.0;
  if (!colliders_.empty()) {
    const int sub = config_.collision_substeps;
    SimState probe = state_;
    VecX collision = VecX::Zero(ndof);
    for (int s = 0; s < sub; ++s) {
      const double tau = dt * static_cast<double>(s) / static_cast<double>(sub);
      if (s > 0)
        for (int n = 0; n < mesh_.num_nodes(); ++n)
          probe.displacements[n] = state_.displacements[n] + tau * state_.velocities[n];
      const auto hit = detect_and_respond(mesh_, probe, mass_, colliders_, t + tau, dt);
      collision += hit.force / static_cast<double>(sub);
      double load = 0.0;
      for (double f : hit.per_collider_force) load += f;
      last_collider_load_ = std::max(last_collider_load_, load);
    }
    f_ext += collision;
  }
  stats.load = last_collider_load_;

  VecX v(ndof);
  for (int n = 0; n < mesh_.num_nodes(); ++n) v.segment<3>(3 * n) = state_.velocities[n];

  const auto fixed = fixed_dofs();
  VecX fixed_dv = VecX::Zero(ndof);
  for (const auto& bc : bcs_)
    for (int n : bc.nodes) {
      const Vec3 v_target =
          (bc.displacement_at(mesh_, n, t + dt) - bc.displacement_at(mesh_, n, t)) / dt;
      fixed_dv.segment<3>(3 * n) = v_target - state_.velocities[n];
    }

  const double alpha = material_.damp_mass_coeff;
  const double beta = material_.damp_stiff_coeff;
  const int max_outer = config_.dynamic_full_newton ? config_.newton_max_iters : 1;

  // one Newton iteration on the backward-Euler residual
  //   M dv - dt (f_ext + f(u + dt v+) - B v+) = 0
  // from the initial guess v+ = v; assemble_forces returns the elastic force
  // acting on the nodes (so it enters with a plus sign)
  const std::vector<Vec3> u_start = state_.displacements;
  VecX dv_total = VecX::Zero(ndof);
  for (int outer = 0; outer < max_outer; ++outer) {
    VecX f_int = assemble_forces(mesh_, state_, material_);
    assemble_stiffness(mesh_, state_, material_, system_);
    const VecX kv = system_.multiply(v);

    VecX rhs = dt * (f_ext + f_int);
    if (alpha != 0.0) rhs -= dt * alpha * mass_.cwiseProduct(v);
    rhs -= (dt * beta + (outer == 0 ? dt * dt : 0.0)) * kv;
    if (outer > 0) rhs -= mass_.cwiseProduct(dv_total);

    // A = (1 + dt alpha) M + (dt beta + dt^2) K
    auto& vals = system_.values();
    const double kscale = dt * beta + dt * dt;
    for (auto& x : vals) x *= kscale;
    const VecX mdiag = (1.0 + dt * alpha) * mass_;
    system_.shift_diagonal(mdiag, 1.0);

    VecX fixed_rhs = VecX::Zero(ndof);
    for (int d : fixed) fixed_rhs[d] = outer == 0 ? fixed_dv[d] : 0.0;
    VecX dv = VecX::Zero(ndof);
    VecX rhs_work = rhs;
    solve_linear(dv, rhs_work, fixed, fixed_rhs, &stats.cg_iterations);
    dv_total += dv;
    v += dv;

    if (!config_.dynamic_full_newton) break;
    // evaluate forces at the trial state and iterate on the true residual
    for (int n = 0; n < mesh_.num_nodes(); ++n) {
      state_.velocities[n] = v.segment<3>(3 * n);
      state_.displacements[n] = u_start[n] + dt * state_.velocities[n];
    }
    VecX f_new = assemble_forces(mesh_, state_, material_);
    assemble_stiffness(mesh_, state_, material_, system_);
    VecX res = mass_.cwiseProduct(dv_total) - dt * (f_ext + f_new);
    if (alpha != 0.0) res += dt * alpha * mass_.cwiseProduct(v);
    if (beta != 0.0) res += dt * beta * system_.multiply(v);
    for (int d : fixed) res[d] = 0.0;
    stats.newton_iterations = outer + 1;
    if (res.norm() <= std::max(newton_tol_, 1e-12 * mass_.sum())) break;
  }

  if (!config_.dynamic_full_newton) {
    for (int n = 0; n < mesh_.num_nodes(); ++n) {
      state_.velocities[n] = v.segment<3>(3 * n);
      state_.displacements[n] += dt * state_.velocities[n];
    }
  }

  // pin scheduled nodes exactly
  for (const auto& bc : bcs_)
    for (int n : bc.nodes) {
      state_.displacements[n] = bc.displacement_at(mesh_, n, t + dt);
      state_.velocities[n] =
          (bc.displacement_at(mesh_, n, t + dt) - bc.displacement_at(mesh_, n, t)) / dt;
    }

  state_.time = t + dt;
  stats.residual = 0.0;
  return stats;
}

double Simulation::reaction_load(const std::vector<int>& nodes, const Vec3& axis) const {
  const VecX f_int = assemble_forces(mesh_, state_, material_);
  Vec3 total = Vec3::Zero();
  for (int n : nodes) total += Vec3(f_int.segment<3>(3 * n));
  return -total.dot(axis);
}

double Simulation::broken_fraction() const {
  return mesh_.num_edges() ? static_cast<double>(state_.broken_edge_count()) /
                                 static_cast<double>(mesh_.num_edges())
                           : 0.0;
}

}  // namespace grafem
