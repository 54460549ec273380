#include "grafem/scenario.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "grafem/primitives.hpp"
#include "json.hpp"

namespace grafem {

using json = nlohmann::ordered_json;

std::vector<int> NodeSelector::resolve(const TetMesh& mesh) const {
  std::vector<int> nodes;
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    const Vec3& p = mesh.rest_positions[n];
    if (p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y() &&
        p.z() >= lo.z() && p.z() <= hi.z())
      nodes.push_back(n);
  }
  return nodes;
}

TetMesh MeshSpec::build() const {
  switch (kind) {
    case Kind::files:
      return load_tetgen_files(node_path, ele_path);
    case Kind::box:
      return make_box_mesh(size, cells, origin);
    case Kind::cylinder:
      return make_cylinder_mesh(radius, length, axial_cells, cross_cells);
    case Kind::notched_bar:
      return make_notched_bar_mesh(size, cells, notch_depth, notch_half_angle_deg, origin);
  }
  throw FormatError("unhandled mesh kind");
}

namespace {

// ---------------------------------------------------------------------------
// strict JSON reading with full error collection
// ---------------------------------------------------------------------------

struct Ctx {
  std::vector<std::string>& errors;

  void err(const std::string& path, const std::string& what) {
    errors.push_back(path + ": " + what);
  }
};

class Obj {
 public:
  Obj(Ctx& ctx, const json& j, std::string path) : ctx_(ctx), j_(j), path_(std::move(path)) {
    if (!j_.is_object()) ctx_.err(path_, "expected an object");
  }
  ~Obj() {
    if (!j_.is_object()) return;
    for (const auto& [key, value] : j_.items())
      if (!known_.count(key)) ctx_.err(path_ + "." + key, "unknown key");
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return j_.is_object() && j_.contains(key);
  }
  const json* get(const std::string& key) {
    known_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return nullptr;
    return &j_.at(key);
  }
  const json* require(const std::string& key) {
    const json* v = get(key);
    if (!v) ctx_.err(path_ + "." + key, "missing required key");
    return v;
  }
  double number(const std::string& key, double fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number()) {
      ctx_.err(path_ + "." + key, "expected a number");
      return fallback;
    }
    return v->get<double>();
  }
  double require_number(const std::string& key) {
    const json* v = require(key);
    if (!v) return 0.0;
    if (!v->is_number()) {
      ctx_.err(path_ + "." + key, "expected a number");
      return 0.0;
    }
    return v->get<double>();
  }
  long integer(const std::string& key, long fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) {
      ctx_.err(path_ + "." + key, "expected an integer");
      return fallback;
    }
    return v->get<long>();
  }
  bool boolean(const std::string& key, bool fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_boolean()) {
      ctx_.err(path_ + "." + key, "expected a boolean");
      return fallback;
    }
    return v->get<bool>();
  }
  std::string text(const std::string& key, const std::string& fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_string()) {
      ctx_.err(path_ + "." + key, "expected a string");
      return fallback;
    }
    return v->get<std::string>();
  }
  std::string require_text(const std::string& key) {
    const json* v = require(key);
    if (!v || !v->is_string()) {
      if (v) ctx_.err(path_ + "." + key, "expected a string");
      return "";
    }
    return v->get<std::string>();
  }
  Vec3 vec3(const std::string& key, const Vec3& fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    return parse_vec3(*v, path_ + "." + key, fallback);
  }
  Vec3 parse_vec3(const json& v, const std::string& path, const Vec3& fallback) {
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
        !v[2].is_number()) {
      ctx_.err(path, "expected an array of 3 numbers");
      return fallback;
    }
    return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
  }

  Ctx& ctx() { return ctx_; }
  const std::string& path() const { return path_; }

 private:
  Ctx& ctx_;
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

Schedule3 parse_keyframes(Ctx& ctx, const json& j, const std::string& path, bool scalar) {
  Schedule3 s;
  if (!j.is_array() || j.empty()) {
    ctx.err(path, "expected a non-empty array of keyframes");
    return s;
  }
  for (size_t i = 0; i < j.size(); ++i) {
    const std::string kpath = path + "[" + std::to_string(i) + "]";
    Obj o(ctx, j[i], kpath);
    const double t = o.require_number("t");
    Vec3 v = Vec3::Zero();
    if (scalar) {
      v.x() = o.require_number("angle");
    } else {
      const json* val = o.require("value");
      if (val) v = o.parse_vec3(*val, kpath + ".value", Vec3::Zero());
    }
    if (!s.times.empty() && t < s.times.back()) ctx.err(kpath, "keyframe times must not decrease");
    s.times.push_back(t);
    s.values.push_back(v);
  }
  return s;
}

NodeSelector parse_selector(Ctx& ctx, const json& j, const std::string& path) {
  NodeSelector sel;
  Obj o(ctx, j, path);
  const json* box = o.require("box");
  if (box) {
    if (!box->is_array() || box->size() != 2) {
      ctx.err(path + ".box", "expected [[lo],[hi]]");
    } else {
      sel.lo = o.parse_vec3((*box)[0], path + ".box[0]", sel.lo);
      sel.hi = o.parse_vec3((*box)[1], path + ".box[1]", sel.hi);
      for (int a = 0; a < 3; ++a)
        if (sel.lo[a] > sel.hi[a]) ctx.err(path + ".box", "lo exceeds hi; selects nothing");
    }
  }
  return sel;
}

json emit_vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json emit_keyframes(const Schedule3& s, bool scalar) {
  json arr = json::array();
  for (size_t i = 0; i < s.times.size(); ++i) {
    json k;
    k["t"] = s.times[i];
    if (scalar)
      k["angle"] = s.values[i].x();
    else
      k["value"] = emit_vec3(s.values[i]);
    arr.push_back(k);
  }
  return arr;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }

  std::vector<std::string> errors;
  Ctx ctx{errors};
  ScenarioConfig cfg;
  {
    Obj root(ctx, j, "config");
    cfg.name = root.text("name", "scenario");
    const std::string mode = root.require_text("mode");
    if (mode == "quasi_static")
      cfg.mode = ScenarioConfig::Mode::quasi_static;
    else if (mode == "dynamic")
      cfg.mode = ScenarioConfig::Mode::dynamic;
    else if (!mode.empty())
      ctx.err("config.mode", "must be 'quasi_static' or 'dynamic'");
    cfg.seed = static_cast<unsigned>(root.integer("seed", 0));

    if (const json* jm = root.require("mesh")) {
      Obj m(ctx, *jm, "config.mesh");
      const std::string prim = m.require_text("primitive");
      if (prim == "files") {
        cfg.mesh.kind = MeshSpec::Kind::files;
        cfg.mesh.node_path = m.require_text("node");
        cfg.mesh.ele_path = m.require_text("ele");
      } else if (prim == "box" || prim == "notched_bar") {
        cfg.mesh.kind = prim == "box" ? MeshSpec::Kind::box : MeshSpec::Kind::notched_bar;
        cfg.mesh.size = m.vec3("size", cfg.mesh.size);
        cfg.mesh.origin = m.vec3("origin", cfg.mesh.origin);
        if (const json* c = m.require("cells")) {
          if (!c->is_array() || c->size() != 3)
            ctx.err("config.mesh.cells", "expected an array of 3 integers");
          else
            for (int a = 0; a < 3; ++a) cfg.mesh.cells[a] = (*c)[a].get<int>();
        }
        if (prim == "notched_bar") {
          cfg.mesh.notch_depth = m.require_number("notch_depth");
          cfg.mesh.notch_half_angle_deg = m.number("notch_half_angle_deg", 22.5);
        }
      } else if (prim == "cylinder") {
        cfg.mesh.kind = MeshSpec::Kind::cylinder;
        cfg.mesh.radius = m.require_number("radius");
        cfg.mesh.length = m.require_number("length");
        cfg.mesh.axial_cells = static_cast<int>(m.integer("axial_cells", 8));
        cfg.mesh.cross_cells = static_cast<int>(m.integer("cross_cells", 4));
      } else if (!prim.empty()) {
        ctx.err("config.mesh.primitive", "must be one of files, box, cylinder, notched_bar");
      }
    }

    if (const json* jm = root.require("material")) {
      Obj m(ctx, *jm, "config.material");
      cfg.material.youngs = m.require_number("youngs");
      cfg.material.poisson = m.require_number("poisson");
      cfg.material.density = m.require_number("density");
      cfg.material.sigma_thres = m.require_number("sigma_thres");
      cfg.material.r_d = m.number("r_d", 0.0);
      cfg.material.damp_mass_coeff = m.number("damping_mass", 0.0);
      cfg.material.damp_stiff_coeff = m.number("damping_stiffness", 0.0);
      const std::string model = m.text("energy_model", "stable_neo_hookean");
      try {
        cfg.material.energy_model = energy_model_from_string(model);
      } catch (const FormatError& e) {
        ctx.err("config.material.energy_model", e.what());
      }
      cfg.material.derive_lame();
      try {
        cfg.material.validate();
      } catch (const FormatError& e) {
        ctx.err("config.material", e.what());
      }
    }

    if (const json* js = root.get("solver")) {
      Obj s(ctx, *js, "config.solver");
      cfg.solver.dt = s.number("dt", cfg.solver.dt);
      cfg.solver.newton_tol = s.number("newton_tol", cfg.solver.newton_tol);
      cfg.solver.newton_max_iters =
          static_cast<int>(s.integer("newton_max_iters", cfg.solver.newton_max_iters));
      cfg.solver.cg_tol = s.number("cg_tol", cfg.solver.cg_tol);
      cfg.solver.cg_max_iters = static_cast<int>(s.integer("cg_max_iters", cfg.solver.cg_max_iters));
      if (const json* ls = s.get("line_search")) {
        Obj l(ctx, *ls, "config.solver.line_search");
        cfg.solver.ls_backtrack = l.number("backtrack", cfg.solver.ls_backtrack);
        cfg.solver.ls_sufficient_decrease =
            l.number("sufficient_decrease", cfg.solver.ls_sufficient_decrease);
        cfg.solver.ls_max_halvings =
            static_cast<int>(l.integer("max_halvings", cfg.solver.ls_max_halvings));
      }
      cfg.solver.gravity = s.vec3("gravity", cfg.solver.gravity);
      cfg.solver.dynamic_full_newton = s.boolean("full_newton", cfg.solver.dynamic_full_newton);
      cfg.solver.collision_substeps =
          static_cast<int>(s.integer("collision_substeps", cfg.solver.collision_substeps));
      try {
        cfg.solver.validate();
      } catch (const FormatError& e) {
        ctx.err("config.solver", e.what());
      }
    }

    if (const json* jr = root.require("run")) {
      Obj r(ctx, *jr, "config.run");
      cfg.duration = r.number("duration", 0.0);
      cfg.load_steps = static_cast<int>(r.integer("load_steps", cfg.load_steps));
      cfg.frame_every = static_cast<int>(r.integer("frame_every", 0));
      cfg.out_dir = r.text("out", "");
      if (cfg.mode == ScenarioConfig::Mode::dynamic && !(cfg.duration >= 0.0))
        ctx.err("config.run.duration", "must be non-negative");
      if (cfg.mode == ScenarioConfig::Mode::quasi_static && cfg.load_steps < 1)
        ctx.err("config.run.load_steps", "must be at least 1");
      if (cfg.frame_every < 0) ctx.err("config.run.frame_every", "must be non-negative");
    }

    if (const json* jb = root.get("boundary")) {
      if (!jb->is_array()) {
        ctx.err("config.boundary", "expected an array");
      } else {
        for (size_t i = 0; i < jb->size(); ++i) {
          const std::string path = "config.boundary[" + std::to_string(i) + "]";
          Obj b(ctx, (*jb)[i], path);
          BcSpec spec;
          spec.name = b.require_text("name");
          if (const json* sel = b.require("select"))
            spec.select = parse_selector(ctx, *sel, path + ".select");
          if (const json* mo = b.require("motion")) {
            Obj m(ctx, *mo, path + ".motion");
            const std::string kind = m.require_text("kind");
            if (kind == "translate") {
              spec.kind = BoundaryCondition::Kind::translate;
              if (const json* kf = m.require("keyframes"))
                spec.translation = parse_keyframes(ctx, *kf, path + ".motion.keyframes", false);
            } else if (kind == "rotate") {
              spec.kind = BoundaryCondition::Kind::rotate;
              spec.axis_point = m.vec3("axis_point", Vec3::Zero());
              spec.axis_dir = m.vec3("axis_dir", Vec3::UnitX());
              if (spec.axis_dir.norm() < 1e-12)
                ctx.err(path + ".motion.axis_dir", "must be nonzero");
              if (const json* kf = m.require("keyframes"))
                spec.angle = parse_keyframes(ctx, *kf, path + ".motion.keyframes", true);
            } else {
              ctx.err(path + ".motion.kind", "must be 'translate' or 'rotate'");
            }
          }
          cfg.boundary.push_back(std::move(spec));
        }
      }
    }

    if (const json* jc = root.get("colliders")) {
      if (!jc->is_array()) {
        ctx.err("config.colliders", "expected an array");
      } else {
        for (size_t i = 0; i < jc->size(); ++i) {
          const std::string path = "config.colliders[" + std::to_string(i) + "]";
          Obj c(ctx, (*jc)[i], path);
          Collider col;
          const std::string kind = c.require_text("kind");
          if (kind == "sphere") {
            col.kind = Collider::Kind::sphere;
            col.radius = c.require_number("radius");
            if (const json* kf = c.require("center"))
              col.center = parse_keyframes(ctx, *kf, path + ".center", false);
          } else if (kind == "halfspace") {
            col.kind = Collider::Kind::halfspace;
            col.point = c.vec3("point", Vec3::Zero());
            col.normal = c.vec3("normal", Vec3::UnitY());
            const double n = col.normal.norm();
            if (n < 1e-12)
              ctx.err(path + ".normal", "must be nonzero");
            else
              col.normal /= n;
          } else {
            ctx.err(path + ".kind", "must be 'sphere' or 'halfspace'");
          }
          col.stiffness = c.require_number("stiffness");
          col.restitution = c.number("restitution", 0.0);
          col.friction = c.number("friction", 0.0);
          try {
            col.validate();
          } catch (const FormatError& e) {
            ctx.err(path, e.what());
          }
          cfg.colliders.push_back(col);
        }
      }
    }

    if (const json* jp = root.get("probe")) {
      const std::string path = "config.probe";
      Obj p(ctx, *jp, path);
      ProbeSpec probe;
      if (const json* sel = p.require("select"))
        probe.select = parse_selector(ctx, *sel, path + ".select");
      probe.axis = p.vec3("axis", Vec3::Zero());
      cfg.probe = probe;
    }

    cfg.load_source = root.text("load_source", "colliders");
    if (cfg.load_source != "colliders") {
      bool found = false;
      for (const auto& b : cfg.boundary) found = found || b.name == cfg.load_source;
      if (!found)
        ctx.err("config.load_source", "names no boundary condition ('" + cfg.load_source + "')");
    }
  }

  if (!errors.empty()) {
    std::string joined = "invalid scenario config:";
    for (const auto& e : errors) joined += "\n  - " + e;
    throw FormatError(joined);
  }
  return cfg;
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_text(const ScenarioConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["mode"] = cfg.mode == ScenarioConfig::Mode::quasi_static ? "quasi_static" : "dynamic";
  j["seed"] = cfg.seed;

  json m;
  switch (cfg.mesh.kind) {
    case MeshSpec::Kind::files:
      m["primitive"] = "files";
      m["node"] = cfg.mesh.node_path;
      m["ele"] = cfg.mesh.ele_path;
      break;
    case MeshSpec::Kind::box:
    case MeshSpec::Kind::notched_bar:
      m["primitive"] = cfg.mesh.kind == MeshSpec::Kind::box ? "box" : "notched_bar";
      m["size"] = emit_vec3(cfg.mesh.size);
      m["origin"] = emit_vec3(cfg.mesh.origin);
      m["cells"] = json::array({cfg.mesh.cells[0], cfg.mesh.cells[1], cfg.mesh.cells[2]});
      if (cfg.mesh.kind == MeshSpec::Kind::notched_bar) {
        m["notch_depth"] = cfg.mesh.notch_depth;
        m["notch_half_angle_deg"] = cfg.mesh.notch_half_angle_deg;
      }
      break;
    case MeshSpec::Kind::cylinder:
      m["primitive"] = "cylinder";
      m["radius"] = cfg.mesh.radius;
      m["length"] = cfg.mesh.length;
      m["axial_cells"] = cfg.mesh.axial_cells;
      m["cross_cells"] = cfg.mesh.cross_cells;
      break;
  }
  j["mesh"] = m;

  json mat;
  mat["youngs"] = cfg.material.youngs;
  mat["poisson"] = cfg.material.poisson;
  mat["density"] = cfg.material.density;
  mat["sigma_thres"] = cfg.material.sigma_thres;
  mat["r_d"] = cfg.material.r_d;
  mat["damping_mass"] = cfg.material.damp_mass_coeff;
  mat["damping_stiffness"] = cfg.material.damp_stiff_coeff;
  mat["energy_model"] = to_string(cfg.material.energy_model);
  j["material"] = mat;

  json s;
  s["dt"] = cfg.solver.dt;
  s["newton_tol"] = cfg.solver.newton_tol;
  s["newton_max_iters"] = cfg.solver.newton_max_iters;
  s["cg_tol"] = cfg.solver.cg_tol;
  s["cg_max_iters"] = cfg.solver.cg_max_iters;
  s["line_search"] = {{"backtrack", cfg.solver.ls_backtrack},
                      {"sufficient_decrease", cfg.solver.ls_sufficient_decrease},
                      {"max_halvings", cfg.solver.ls_max_halvings}};
  s["gravity"] = emit_vec3(cfg.solver.gravity);
  s["full_newton"] = cfg.solver.dynamic_full_newton;
  s["collision_substeps"] = cfg.solver.collision_substeps;
  j["solver"] = s;

  json r;
  r["duration"] = cfg.duration;
  r["load_steps"] = cfg.load_steps;
  r["frame_every"] = cfg.frame_every;
  r["out"] = cfg.out_dir;
  j["run"] = r;

  json bcs = json::array();
  for (const auto& b : cfg.boundary) {
    json jb;
    jb["name"] = b.name;
    jb["select"] = {{"box", json::array({emit_vec3(b.select.lo), emit_vec3(b.select.hi)})}};
    json motion;
    if (b.kind == BoundaryCondition::Kind::translate) {
      motion["kind"] = "translate";
      motion["keyframes"] = emit_keyframes(b.translation, false);
    } else {
      motion["kind"] = "rotate";
      motion["axis_point"] = emit_vec3(b.axis_point);
      motion["axis_dir"] = emit_vec3(b.axis_dir);
      motion["keyframes"] = emit_keyframes(b.angle, true);
    }
    jb["motion"] = motion;
    bcs.push_back(jb);
  }
  j["boundary"] = bcs;

  json cols = json::array();
  for (const auto& c : cfg.colliders) {
    json jc;
    if (c.kind == Collider::Kind::sphere) {
      jc["kind"] = "sphere";
      jc["radius"] = c.radius;
      jc["center"] = emit_keyframes(c.center, false);
    } else {
      jc["kind"] = "halfspace";
      jc["point"] = emit_vec3(c.point);
      jc["normal"] = emit_vec3(c.normal);
    }
    jc["stiffness"] = c.stiffness;
    jc["restitution"] = c.restitution;
    jc["friction"] = c.friction;
    cols.push_back(jc);
  }
  j["colliders"] = cols;

  if (cfg.probe) {
    j["probe"] = {{"select", {{"box", json::array({emit_vec3(cfg.probe->select.lo),
                                                   emit_vec3(cfg.probe->select.hi)})}}},
                  {"axis", emit_vec3(cfg.probe->axis)}};
  }
  j["load_source"] = cfg.load_source;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// run loop
// ---------------------------------------------------------------------------

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "step,time,strain_energy,kinetic_energy,broken_edges,load,probe_displacement\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%d,%.17g,%.17g\n", r.step, r.time,
                  r.strain_energy, r.kinetic_energy, r.broken_edges, r.load,
                  r.probe_displacement);
    out += buf;
  }
  return out;
}

RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
  namespace fs = std::filesystem;

  TetMesh mesh = cfg.mesh.build();

  std::vector<BoundaryCondition> bcs;
  std::vector<int> load_nodes;
  for (const auto& spec : cfg.boundary) {
    BoundaryCondition bc;
    bc.kind = spec.kind;
    bc.name = spec.name;
    bc.nodes = spec.select.resolve(mesh);
    if (bc.nodes.empty())
      throw FormatError("boundary condition '" + spec.name + "' selects no nodes");
    bc.translation = spec.translation;
    bc.axis_point = spec.axis_point;
    bc.axis_dir = spec.axis_dir;
    bc.angle = spec.angle;
    if (spec.name == cfg.load_source) load_nodes = bc.nodes;
    bcs.push_back(std::move(bc));
  }

  std::vector<int> probe_nodes;
  Vec3 probe_axis = Vec3::Zero();
  if (cfg.probe) {
    probe_nodes = cfg.probe->select.resolve(mesh);
    if (probe_nodes.empty()) throw FormatError("probe selects no nodes");
    probe_axis = cfg.probe->axis;
  }

  RunResult result;
  result.sim = std::make_unique<Simulation>(std::move(mesh), cfg.material, cfg.solver,
                                            std::move(bcs), cfg.colliders);
  Simulation& sim = *result.sim;

  const std::string out_dir = !opts.out_dir_override.empty() ? opts.out_dir_override : cfg.out_dir;
  const int frame_every =
      opts.frame_every_override >= 0 ? opts.frame_every_override : cfg.frame_every;
  const bool writing = !out_dir.empty();
  std::ofstream damage_log;
  if (writing) {
    fs::create_directories(out_dir);
    std::ofstream marker(out_dir + "/INCOMPLETE");
    marker << "run in progress\n";
    std::ofstream manifest(out_dir + "/manifest.txt");
    manifest << "scenario: " << cfg.name << "\n"
             << "build: grafem " << GRAFEM_VERSION << "\n"
             << "mesh: nodes=" << sim.mesh().num_nodes() << " tets=" << sim.mesh().num_tets()
             << " edges=" << sim.mesh().num_edges() << " volume=" << sim.mesh().total_volume()
             << "\n"
             << "config:\n"
             << scenario_to_text(cfg);
    damage_log.open(out_dir + "/damage.log");
  }

  result.pattern_hash = sim.pattern_hash();
  const int initial_dofs = sim.dof_count();

  const Vec3 load_axis = probe_axis.norm() > 0.0 ? Vec3(probe_axis.normalized()) : Vec3::UnitX();
  auto probe_displacement = [&]() -> double {
    if (probe_nodes.empty()) return 0.0;
    Vec3 mean = Vec3::Zero();
    for (int n : probe_nodes) mean += sim.state().displacements[n];
    mean /= static_cast<double>(probe_nodes.size());
    return probe_axis.norm() > 0.0 ? mean.dot(probe_axis.normalized()) : mean.norm();
  };

  auto make_row = [&](long step, double time, double load) {
    MetricsRow row;
    row.step = step;
    row.time = time;
    row.strain_energy = total_strain_energy(sim.mesh(), sim.state(), sim.material());
    row.kinetic_energy = kinetic_energy(sim.mass(), sim.state());
    row.broken_edges = sim.state().broken_edge_count();
    row.load = load;
    row.probe_displacement = probe_displacement();
    return row;
  };

  auto write_frame = [&](long step) {
    if (!writing || frame_every <= 0) return;
    char name[64];
    std::snprintf(name, sizeof(name), "/frame_%06ld.obj", step);
    sim.viz().export_frame(out_dir + name, sim.state());
    result.frames_written++;
  };

  auto log_damage = [&](long step, int newly) {
    if (!damage_log.is_open()) return;
    double chi_min = 1.0, chi_sum = 0.0;
    for (double c : sim.state().element_chi) {
      chi_min = std::min(chi_min, c);
      chi_sum += c;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "step=%ld newly_broken=%d cumulative=%d chi_min=%.6g chi_mean=%.6g\n",
                  step, newly, sim.state().broken_edge_count(), chi_min,
                  chi_sum / sim.mesh().num_tets());
    damage_log << buf;
  };

  result.metrics.push_back(make_row(0, 0.0, 0.0));
  write_frame(0);

  long nsteps = 0;
  if (cfg.mode == ScenarioConfig::Mode::quasi_static) {
    nsteps = cfg.load_steps;
  } else {
    nsteps = std::llround(cfg.duration / cfg.solver.dt);
  }

  for (long s = 1; s <= nsteps; ++s) {
    StepStats stats;
    double time;
    if (cfg.mode == ScenarioConfig::Mode::quasi_static) {
      time = static_cast<double>(s) / static_cast<double>(cfg.load_steps);
      stats = sim.quasi_static_step(time);
    } else {
      stats = sim.dynamic_step();
      time = sim.state().time;
    }

    double load;
    if (cfg.load_source == "colliders")
      load = stats.load;
    else
      load = sim.reaction_load(load_nodes, load_axis);

    result.metrics.push_back(make_row(s, time, load));
    log_damage(s, stats.newly_broken);
    if (frame_every > 0 && s % frame_every == 0) write_frame(s);

    if (sim.pattern_hash() != result.pattern_hash || sim.dof_count() != initial_dofs)
      result.pattern_constant = false;
    if (!opts.quiet && (s % 50 == 0 || s == nsteps)) {
      std::fprintf(stderr, "[%s] step %ld/%ld broken=%d\n", cfg.name.c_str(), s, nsteps,
                   sim.state().broken_edge_count());
    }
  }

  if (writing) {
    std::ofstream csv(out_dir + "/metrics.csv", std::ios::binary);
    csv << format_metrics_csv(result.metrics);
    csv.close();
    if (frame_every > 0 && nsteps % frame_every != 0) write_frame(nsteps);
    std::ofstream manifest(out_dir + "/manifest.txt", std::ios::app);
    manifest << "status: complete\n";
    fs::remove(out_dir + "/INCOMPLETE");
  }
  return result;
}

// ---------------------------------------------------------------------------
// builtin scenarios
// ---------------------------------------------------------------------------

namespace {

BcSpec slab_bc(const std::string& name, const Vec3& lo, const Vec3& hi) {
  BcSpec b;
  b.name = name;
  b.select.lo = lo;
  b.select.hi = hi;
  b.kind = BoundaryCondition::Kind::translate;
  b.translation = Schedule3::constant(Vec3::Zero());
  return b;
}

ScenarioConfig pull_block(const std::string& name, double r_d) {
  ScenarioConfig cfg;
  cfg.name = name;
  cfg.mode = ScenarioConfig::Mode::quasi_static;
  cfg.mesh.kind = MeshSpec::Kind::box;
  cfg.mesh.size = Vec3(0.2, 0.1, 0.1);
  cfg.mesh.origin = Vec3::Zero();
  cfg.mesh.cells = {10, 5, 5};
  cfg.material = MaterialParams::from_youngs(1e7, 0.3, 1000.0, 2.2e5, r_d,
                                             EnergyModel::stable_neo_hookean);
  cfg.solver.cg_tol = 1e-9;
  cfg.load_steps = 30;

  const double eps = 1e-6;
  const double pull = 0.008;  // per end, 8% total nominal strain
  BcSpec left = slab_bc("left", Vec3(-1, -1, -1), Vec3(eps, 1, 1));
  left.translation.times = {0.0, 1.0};
  left.translation.values = {Vec3::Zero(), Vec3(-pull, 0, 0)};
  BcSpec right = slab_bc("right", Vec3(0.2 - eps, -1, -1), Vec3(1, 1, 1));
  right.translation.times = {0.0, 1.0};
  right.translation.values = {Vec3::Zero(), Vec3(pull, 0, 0)};
  cfg.boundary = {left, right};

  ProbeSpec probe;
  probe.select = right.select;
  probe.axis = Vec3::UnitX();
  cfg.probe = probe;
  cfg.load_source = "right";
  return cfg;
}

ScenarioConfig twist_block() {
  ScenarioConfig cfg = pull_block("twist_block", 0.01);
  cfg.name = "twist_block";
  for (auto& b : cfg.boundary) {
    b.kind = BoundaryCondition::Kind::rotate;
    b.axis_point = Vec3(0.1, 0.05, 0.05);
    b.axis_dir = Vec3::UnitX();
    const double sign = b.name == "left" ? -1.0 : 1.0;
    b.angle.times = {0.0, 1.0};
    b.angle.values = {Vec3::Zero(), Vec3(sign * 0.5, 0, 0)};
  }
  return cfg;
}

ScenarioConfig charpy(const std::string& name, double sigma_thres) {
  ScenarioConfig cfg;
  cfg.name = name;
  cfg.mode = ScenarioConfig::Mode::dynamic;
  cfg.mesh.kind = MeshSpec::Kind::notched_bar;
  cfg.mesh.size = Vec3(0.055, 0.010, 0.010);
  cfg.mesh.origin = Vec3::Zero();
  cfg.mesh.cells = {24, 5, 5};
  cfg.mesh.notch_depth = 0.002;
  cfg.mesh.notch_half_angle_deg = 22.5;
  cfg.material = MaterialParams::from_youngs(2e8, 0.3, 1500.0, sigma_thres, 0.0015,
                                             EnergyModel::stvk);
  cfg.material.damp_mass_coeff = 10.0;
  cfg.material.damp_stiff_coeff = 2e-7;
  cfg.solver.dt = 1e-6;
  cfg.duration = 1.0e-3;
  cfg.frame_every = 100;

  const double eps = 1e-6;
  cfg.boundary = {slab_bc("left_support", Vec3(-1, -1, -1), Vec3(0.002 + eps, 1, 1)),
                  slab_bc("right_support", Vec3(0.053 - eps, -1, -1), Vec3(1, 1, 1))};

  Collider striker;
  striker.kind = Collider::Kind::sphere;
  striker.radius = 0.008;
  striker.stiffness = 4e5;
  striker.restitution = 0.0;
  striker.friction = 0.1;
  const Vec3 start(0.0275, -0.0081, 0.005);
  const double speed = 18.0;  // m/s toward +y
  striker.center.times = {0.0, 0.002};
  striker.center.values = {start, start + Vec3(0, speed * 0.002, 0)};
  cfg.colliders = {striker};

  ProbeSpec probe;  // mid-span band on the impact side
  probe.select.lo = Vec3(0.0255, -1, -1);
  probe.select.hi = Vec3(0.0295, 0.004, 1);
  probe.axis = Vec3::UnitY();
  cfg.probe = probe;
  cfg.load_source = "colliders";
  return cfg;
}

ScenarioConfig izod(const std::string& name, double sigma_thres) {
  ScenarioConfig cfg = charpy(name, sigma_thres);
  cfg.name = name;
  // cantilever: clamp one end only, strike near the free end
  cfg.boundary = {slab_bc("clamp", Vec3(-1, -1, -1), Vec3(0.006, 1, 1))};
  Collider& striker = cfg.colliders[0];
  const Vec3 start(0.048, -0.0081, 0.005);
  striker.center.values = {start, start + Vec3(0, 18.0 * 0.002, 0)};
  cfg.probe->select.lo = Vec3(0.046, -1, -1);
  cfg.probe->select.hi = Vec3(0.055, 0.004, 1);
  return cfg;
}

ScenarioConfig brazilian() {
  ScenarioConfig cfg;
  cfg.name = "brazilian";
  cfg.mode = ScenarioConfig::Mode::dynamic;
  cfg.mesh.kind = MeshSpec::Kind::cylinder;
  cfg.mesh.radius = 0.05;
  cfg.mesh.length = 0.255;
  cfg.mesh.axial_cells = 10;
  cfg.mesh.cross_cells = 7;
  cfg.material =
      MaterialParams::from_youngs(3e8, 0.2, 2300.0, 2.5e6, 0.012, EnergyModel::stvk);
  cfg.material.damp_mass_coeff = 20.0;
  cfg.material.damp_stiff_coeff = 2e-7;
  cfg.solver.dt = 2e-6;
  cfg.duration = 8e-3;
  cfg.frame_every = 500;

  Collider floor;
  floor.kind = Collider::Kind::halfspace;
  floor.point = Vec3(0, -0.05, 0);
  floor.normal = Vec3::UnitY();
  floor.stiffness = 2e7;
  floor.restitution = 0.0;
  floor.friction = 0.4;

  Collider platen;  // large slow sphere approximates a flat descending platen
  platen.kind = Collider::Kind::sphere;
  platen.radius = 0.5;
  platen.stiffness = 2e7;
  platen.restitution = 0.0;
  platen.friction = 0.4;
  const Vec3 start(0, 0.05 + 0.5, 0);
  const double speed = 0.6;  // m/s downward
  platen.center.times = {0.0, 0.02};
  platen.center.values = {start, start - Vec3(0, speed * 0.02, 0)};
  cfg.colliders = {floor, platen};

  ProbeSpec probe;  // top line of the cylinder
  probe.select.lo = Vec3(-1, 0.044, -0.012);
  probe.select.hi = Vec3(1, 1, 0.012);
  probe.axis = -Vec3::UnitY();
  cfg.probe = probe;
  cfg.load_source = "colliders";
  return cfg;
}

ScenarioConfig sphere_impact() {
  ScenarioConfig cfg;
  cfg.name = "sphere_impact";
  cfg.mode = ScenarioConfig::Mode::dynamic;
  cfg.mesh.kind = MeshSpec::Kind::box;
  cfg.mesh.size = Vec3(0.1, 0.1, 0.1);
  cfg.mesh.origin = Vec3(-0.05, 0.0, -0.05);
  cfg.mesh.cells = {5, 5, 5};
  cfg.material = MaterialParams::from_youngs(5e7, 0.3, 1200.0, 1.2e6, 0.0, EnergyModel::stvk);
  cfg.material.damp_mass_coeff = 5.0;
  cfg.material.damp_stiff_coeff = 1e-6;
  cfg.solver.dt = 1e-5;
  cfg.solver.gravity = Vec3(0, -9.81, 0);
  cfg.duration = 6e-3;
  cfg.frame_every = 100;

  Collider floor;
  floor.kind = Collider::Kind::halfspace;
  floor.point = Vec3(0, 0, 0);
  floor.normal = Vec3::UnitY();
  floor.stiffness = 5e6;
  floor.restitution = 0.0;
  floor.friction = 0.3;

  Collider ball;
  ball.kind = Collider::Kind::sphere;
  ball.radius = 0.02;
  ball.stiffness = 2e6;
  ball.restitution = 0.1;
  ball.friction = 0.2;
  const Vec3 start(0, 0.125, 0);
  const double speed = 25.0;
  ball.center.times = {0.0, 0.01};
  ball.center.values = {start, start - Vec3(0, speed * 0.01, 0)};
  cfg.colliders = {floor, ball};

  ProbeSpec probe;
  probe.select.lo = Vec3(-0.015, 0.09, -0.015);
  probe.select.hi = Vec3(0.015, 1.0, 0.015);
  probe.axis = -Vec3::UnitY();
  cfg.probe = probe;
  cfg.load_source = "colliders";
  return cfg;
}

}  // namespace

std::vector<std::string> builtin_scenario_names() {
  return {"pull_block_stone", "pull_block_wood", "pull_block_cheese", "twist_block",
          "charpy_low",       "charpy_high",     "izod_low",          "izod_high",
          "brazilian",        "sphere_impact"};
}

ScenarioConfig builtin_scenario(const std::string& name) {
  // kernel support scaled to the block width (0.1 m)
  if (name == "pull_block_stone") return pull_block(name, 0.0);
  if (name == "pull_block_wood") return pull_block(name, 0.1 * 0.1);
  if (name == "pull_block_cheese") return pull_block(name, 0.5 * 0.1);
  if (name == "twist_block") return twist_block();
  if (name == "charpy_low") return charpy(name, 2.5e6);
  if (name == "charpy_high") return charpy(name, 2.5e7);
  if (name == "izod_low") return izod(name, 2.5e6);
  if (name == "izod_high") return izod(name, 2.5e7);
  if (name == "brazilian") return brazilian();
  if (name == "sphere_impact") return sphere_impact();
  throw FormatError("unknown builtin scenario '" + name + "'");
}

}  // namespace grafem
