#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "grafem/primitives.hpp"
#include "grafem/scenario.hpp"
#include "grafem/verify.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace grafem;

void set_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("GRAFEM_THREADS")) threads = std::atoi(env);
  }
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

int run_verify(bool quiet) {
  int failures = 0;
  auto check = [&](const std::string& name, bool pass, const std::string& detail = "") {
    if (!pass) ++failures;
    if (!quiet || !pass)
      std::cout << (pass ? "[PASS] " : "[FAIL] ") << name
                << (detail.empty() ? "" : "  (" + detail + ")") << "\n";
  };

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto random_deformation = [&]() {
    Mat3 F;
    do {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) F(i, j) = (i == j ? 1.0 : 0.0) + 0.4 * unit(rng);
    } while (F.determinant() < 0.2);
    return F;
  };

  MaterialParams stvk = MaterialParams::from_youngs(1e6, 0.3, 1000.0, 1e5, 0.0,
                                                    EnergyModel::stvk);
  MaterialParams neo = MaterialParams::from_youngs(1e6, 0.3, 1000.0, 1e5, 0.0,
                                                   EnergyModel::stable_neo_hookean);

  // edge-length energy reconstruction
  {
    double worst_e = 0.0, worst_c = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      const Mat3 F = random_deformation();
      const auto rec = stretches_from_deformation(F);
      const auto rc = reconstruct_C(rec);
      const Mat3 C = F.transpose() * F;
      worst_c = std::max(worst_c, (rc.C - C).norm() / C.norm());
      const MaterialParams& p = trial % 2 ? stvk : neo;
      const double direct = energy_density(F, p);
      const double via_edges = energy_from_edges(rec, p);
      worst_e = std::max(worst_e,
                         std::abs(via_edges - direct) / std::max(1e-12, std::abs(direct)));
    }
    check("edge-length energy matches the deformation-gradient path (1000 trials)",
          worst_e < 1e-8, "max rel err " + std::to_string(worst_e));
    check("Cauchy-Green recovery from edge stretches", worst_c < 1e-10,
          "max rel err " + std::to_string(worst_c));
  }

  // force and stiffness consistency against finite differences
  {
    TetMesh mesh = make_box_mesh(Vec3(0.2, 0.1, 0.1), {4, 2, 2});
    SimState state = SimState::rest(mesh);
    std::mt19937_64 rng2(11);
    std::uniform_real_distribution<double> jitter(-0.004, 0.004);
    for (auto& u : state.displacements) u = Vec3(jitter(rng2), jitter(rng2), jitter(rng2));
    for (const auto& p : {stvk, neo}) {
      const double fe = fd_check_forces(mesh, state, p, 1e-6);
      const double ke = fd_check_stiffness(mesh, state, p, 1e-6);
      check("forces match finite differences (" + to_string(p.energy_model) + ")", fe < 1e-4,
            "max rel err " + std::to_string(fe));
      check("stiffness action matches finite differences (" + to_string(p.energy_model) + ")",
            ke < 1e-3, "max rel err " + std::to_string(ke));
    }
    // partially damaged
    state.edge_damage[3] = state.edge_damage[10] = 1;
    for (size_t e = 0; e < state.element_chi.size(); ++e) state.element_chi[e] = 0.85;
    const double fe = fd_check_forces(mesh, state, stvk, 1e-6);
    check("forces match finite differences with partial damage", fe < 1e-4,
          "max rel err " + std::to_string(fe));
  }

  // edge force decomposition reconstructs the nodal forces
  {
    TetMesh mesh = make_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)},
                             {{0, 1, 2, 3}});
    SimState state = SimState::rest(mesh);
    std::mt19937_64 rng3(13);
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    for (auto& u : state.displacements) u = Vec3(jitter(rng3), jitter(rng3), jitter(rng3));
    const auto dec = edge_decomposed_forces(mesh, state, stvk, 0);
    const auto forces = element_internal_force(mesh, state, stvk, 0);
    double worst = 0.0;
    for (int i = 0; i < 4; ++i) {
      Vec3 rebuilt = Vec3::Zero();
      for (int k = 0; k < 6; ++k) {
        const auto& le = TetMesh::local_edges[k];
        int sign = 0;
        if (le[0] == i) sign = 1;
        if (le[1] == i) sign = -1;
        if (!sign) continue;
        const Vec3 d = (state.position(mesh, mesh.tets[0][le[1]]) -
                        state.position(mesh, mesh.tets[0][le[0]]))
                           .normalized();
        rebuilt += sign * dec.coeff[k] * d;
      }
      worst = std::max(worst, (rebuilt - forces[i]).norm());
    }
    check("edge-decomposed forces rebuild the nodal forces", dec.ok && worst < 1e-8,
          "max abs err " + std::to_string(worst));
  }

  // element energy is not an additive per-edge energy
  {
    const auto witness = mass_spring_witness(stvk, 0.3);
    check("per-edge additive energy fails on shear (cross-coupling witness)", witness.witnessed,
          "rel discrepancy " + std::to_string(witness.rel_discrepancy));
  }

  // pseudo-inverse sanity
  {
    std::mt19937_64 rng4(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      MatX m(4 + trial % 3, 3 + trial % 4);
      for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) m(i, j) = u(rng4);
      const MatX p = pinv_small(m);
      worst = std::max(worst, (m * p * m - m).norm());
      worst = std::max(worst, (p * m * p - p).norm());
    }
    check("pseudo-inverse satisfies the Penrose identities", worst < 1e-9,
          "max residual " + std::to_string(worst));
  }

  std::cout << (failures == 0 ? "verification suite passed\n"
                              : "verification suite FAILED\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grafem: remeshing-free graph-based tetrahedral fracture simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  int threads = 0;
  bool quiet = false;
  app.add_option("--threads", threads, "worker thread count (default: GRAFEM_THREADS or all)");
  app.add_flag("--quiet", quiet, "suppress progress output");

  std::string config_path, out_dir, scenario_name, out_file, node_path, ele_path;
  int frame_every = -1;

  auto* run = app.add_subcommand("run", "execute a scenario config and write outputs");
  run->add_option("config", config_path, "scenario config file (JSON)")->required();
  run->add_option("--out", out_dir, "output directory (overrides config)");
  run->add_option("--frames", frame_every, "write an OBJ frame every N steps");

  auto* scen = app.add_subcommand("scenario", "emit a builtin scenario config");
  scen->add_option("name", scenario_name,
                   "builtin name (use 'list' to enumerate)")
      ->required();
  scen->add_option("--out", out_file, "write to file instead of stdout");

  auto* verify = app.add_subcommand("verify", "run the oracle verification suite");
  (void)verify;

  auto* info = app.add_subcommand("info", "print statistics for a TetGen mesh");
  info->add_option("node", node_path, ".node file")->required();
  info->add_option("ele", ele_path, ".ele file")->required();

  CLI11_PARSE(app, argc, argv);
  set_threads(threads);

  try {
    if (run->parsed()) {
      const auto cfg = grafem::load_scenario_file(config_path);
      grafem::RunOptions opts;
      opts.out_dir_override = out_dir;
      opts.frame_every_override = frame_every;
      opts.quiet = quiet;
      const auto result = grafem::run_scenario(cfg, opts);
      if (!quiet) {
        std::cout << "completed " << result.metrics.back().step << " steps, broken edges "
                  << result.metrics.back().broken_edges << ", pattern "
                  << (result.pattern_constant ? "constant" : "CHANGED") << "\n";
      }
      return result.pattern_constant ? 0 : 2;
    }
    if (scen->parsed()) {
      if (scenario_name == "list") {
        for (const auto& n : grafem::builtin_scenario_names()) std::cout << n << "\n";
        return 0;
      }
      const std::string text = grafem::scenario_to_text(grafem::builtin_scenario(scenario_name));
      if (out_file.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(out_file);
        out << text;
        if (!out) throw grafem::FormatError("cannot write '" + out_file + "'");
      }
      return 0;
    }
    if (verify->parsed()) {
      return run_verify(quiet);
    }
    if (info->parsed()) {
      const auto mesh = grafem::load_tetgen_files(node_path, ele_path);
      const auto faces = grafem::boundary_faces(mesh);
      std::cout << "nodes: " << mesh.num_nodes() << "\n"
                << "tets: " << mesh.num_tets() << "\n"
                << "edges: " << mesh.num_edges() << "\n"
                << "boundary faces: " << faces.size() << "\n"
                << "total volume: " << mesh.total_volume() << " m^3\n"
                << "mean face area: " << mesh.mean_face_area() << " m^2\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
