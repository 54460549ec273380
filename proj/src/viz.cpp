#include "grafem/viz.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

namespace grafem {

namespace {

std::array<int, 3> sorted3(int a, int b, int c) {
  std::array<int, 3> t = {a, b, c};
  std::sort(t.begin(), t.end());
  return t;
}

}  // namespace

VizMesh::VizMesh(const TetMesh& mesh) : mesh_(&mesh) {
  std::map<std::array<int, 3>, int> index;
  static constexpr int face_local[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
  tet_faces_.resize(mesh.num_tets());
  std::map<std::array<int, 2>, int> edge_index;
  for (int e = 0; e < mesh.num_edges(); ++e) edge_index[mesh.edges[e]] = e;

  std::map<std::array<int, 3>, int> face_count;
  std::map<std::array<int, 3>, std::array<int, 3>> face_oriented;
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto& tet = mesh.tets[t];
    for (int fi = 0; fi < 4; ++fi) {
      std::array<int, 3> tri = {tet[face_local[fi][0]], tet[face_local[fi][1]],
                                tet[face_local[fi][2]]};
      const auto key = sorted3(tri[0], tri[1], tri[2]);
      auto it = index.find(key);
      if (it == index.end()) {
        const int id = static_cast<int>(face_nodes_.size());
        index.emplace(key, id);
        face_nodes_.push_back(key);
        face_edges_.push_back({edge_index.at({key[0], key[1]}), edge_index.at({key[0], key[2]}),
                               edge_index.at({key[1], key[2]})});
        it = index.find(key);
      }
      tet_faces_[t][fi] = it->second;
      face_count[key] += 1;
      // orient outward: normal away from the opposite vertex
      const Vec3& a = mesh.rest_positions[tri[0]];
      const Vec3& b = mesh.rest_positions[tri[1]];
      const Vec3& c = mesh.rest_positions[tri[2]];
      const Vec3& opp = mesh.rest_positions[tet[fi]];
      if ((b - a).cross(c - a).dot(opp - a) > 0.0) std::swap(tri[1], tri[2]);
      face_oriented[key] = tri;
    }
  }
  boundary_face_.assign(face_nodes_.size(), -1);
  for (size_t f = 0; f < face_nodes_.size(); ++f) {
    if (face_count.at(face_nodes_[f]) == 1) {
      boundary_face_[f] = static_cast<int>(boundary_tris_.size());
      boundary_tris_.push_back(face_oriented.at(face_nodes_[f]));
      boundary_tri_face_.push_back(static_cast<int>(f));
    }
  }
  edge_faces_.resize(mesh.num_edges());
  for (size_t f = 0; f < face_nodes_.size(); ++f)
    for (int k = 0; k < 3; ++k) edge_faces_[face_edges_[f][k]].push_back(static_cast<int>(f));
}

int VizMesh::group_rep(EntityKind kind, int entity, int node, const SimState& state) const {
  const auto members = group_members(kind, entity, node, state);
  return *std::min_element(members.begin(), members.end());
}

std::vector<int> VizMesh::group_members(EntityKind kind, int entity, int node,
                                        const SimState& state) const {
  const TetMesh& m = *mesh_;
  std::vector<int> nodes;
  std::vector<std::array<int, 2>> local_edges;  // (node, node) global, with edge id
  std::vector<int> edge_ids;
  switch (kind) {
    case EntityKind::edge: {
      nodes = {m.edges[entity][0], m.edges[entity][1]};
      local_edges.push_back({nodes[0], nodes[1]});
      edge_ids.push_back(entity);
      break;
    }
    case EntityKind::face: {
      const auto& fn = face_nodes_[entity];
      nodes = {fn[0], fn[1], fn[2]};
      const auto& fe = face_edges_[entity];
      local_edges.push_back({fn[0], fn[1]});
      local_edges.push_back({fn[0], fn[2]});
      local_edges.push_back({fn[1], fn[2]});
      edge_ids = {fe[0], fe[1], fe[2]};
      break;
    }
    case EntityKind::tet: {
      const auto& t = m.tets[entity];
      nodes = {t[0], t[1], t[2], t[3]};
      for (int k = 0; k < 6; ++k) {
        const auto& le = TetMesh::local_edges[k];
        local_edges.push_back({t[le[0]], t[le[1]]});
        edge_ids.push_back(m.tet_edges[entity][k]);
      }
      break;
    }
  }
  // union-find over <= 4 nodes
  std::vector<int> label(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) label[i] = static_cast<int>(i);
  auto local_of = [&nodes](int g) {
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i] == g) return static_cast<int>(i);
    return -1;
  };
  auto root = [&label](int i) {
    while (label[i] != i) i = label[i];
    return i;
  };
  for (size_t k = 0; k < local_edges.size(); ++k) {
    if (state.edge_damage[edge_ids[k]]) continue;
    const int a = root(local_of(local_edges[k][0]));
    const int b = root(local_of(local_edges[k][1]));
    if (a != b) label[std::max(a, b)] = std::min(a, b);
  }
  const int target = root(local_of(node));
  std::vector<int> members;
  for (size_t i = 0; i < nodes.size(); ++i)
    if (root(static_cast<int>(i)) == target) members.push_back(nodes[i]);
  return members;
}

Vec3 VizMesh::entity_rest_position(EntityKind kind, int entity) const {
  const TetMesh& m = *mesh_;
  switch (kind) {
    case EntityKind::edge:
      return 0.5 * (m.rest_positions[m.edges[entity][0]] + m.rest_positions[m.edges[entity][1]]);
    case EntityKind::face: {
      const auto& f = face_nodes_[entity];
      return (m.rest_positions[f[0]] + m.rest_positions[f[1]] + m.rest_positions[f[2]]) / 3.0;
    }
    case EntityKind::tet:
      return m.rest_centroids[entity];
  }
  return Vec3::Zero();
}

int VizMesh::ensure_child(EntityKind kind, int entity, int rep, const SimState& state) {
  const std::array<int, 3> key = {static_cast<int>(kind), entity, rep};
  auto it = child_index_.find(key);
  if (it != child_index_.end()) return it->second;
  Child c;
  c.kind = kind;
  c.entity = entity;
  c.rep = rep;
  c.rest_pos = entity_rest_position(kind, entity);
  c.parents_at_creation = group_members(kind, entity, rep, state);
  const int id = static_cast<int>(children_.size());
  children_.push_back(std::move(c));
  child_index_.emplace(key, id);
  return id;
}

void VizMesh::ensure_entity_children(EntityKind kind, int entity, const SimState& state) {
  std::vector<int> nodes;
  switch (kind) {
    case EntityKind::edge:
      nodes = {mesh_->edges[entity][0], mesh_->edges[entity][1]};
      break;
    case EntityKind::face:
      nodes = {face_nodes_[entity][0], face_nodes_[entity][1], face_nodes_[entity][2]};
      break;
    case EntityKind::tet: {
      const auto& t = mesh_->tets[entity];
      nodes = {t[0], t[1], t[2], t[3]};
      break;
    }
  }
  std::set<int> reps;
  for (int n : nodes) reps.insert(group_rep(kind, entity, n, state));
  for (int r : reps) ensure_child(kind, entity, r, state);
}

void VizMesh::apply_splits(const std::vector<int>& newly_broken_edges, const SimState& state) {
  for (int e : newly_broken_edges) {
    if (e < 0 || e >= mesh_->num_edges()) throw GeometryError("unknown edge id in split request");
    ensure_entity_children(EntityKind::edge, e, state);
    for (int f : edge_faces_[e]) {
      ensure_entity_children(EntityKind::face, f, state);
      // midpoints of every edge of a split face are referenced by its quads
      for (int k = 0; k < 3; ++k)
        ensure_entity_children(EntityKind::edge, face_edges_[f][k], state);
    }
    for (int t : mesh_->edge_tets[e]) ensure_entity_children(EntityKind::tet, t, state);
  }
}

Vec3 VizMesh::child_position(int child, const SimState& state) const {
  const Child& c = children_[child];
  const auto members = group_members(c.kind, c.entity, c.rep, state);
  Vec3 mean = Vec3::Zero();
  for (int p : members) mean += state.displacements[p];
  return c.rest_pos + mean / static_cast<double>(members.size());
}

Vec3 VizMesh::entity_position(EntityKind kind, int entity, int side_node,
                              const SimState& state) const {
  const auto members = group_members(kind, entity, side_node, state);
  Vec3 mean = Vec3::Zero();
  for (int p : members) mean += state.displacements[p];
  return entity_rest_position(kind, entity) + mean / static_cast<double>(members.size());
}

int VizMesh::child_handle(EntityKind kind, int entity, int side_node,
                          const SimState& state) const {
  const int rep = group_rep(kind, entity, side_node, state);
  const std::array<int, 3> key = {static_cast<int>(kind), entity, rep};
  const auto it = child_index_.find(key);
  if (it == child_index_.end()) throw GeometryError("missing split vertex; splits not applied");
  return mesh_->num_nodes() + it->second;
}

VizMesh::Surface VizMesh::build_surface(const SimState& state) const {
  const TetMesh& m = *mesh_;
  std::vector<std::array<long, 3>> tris;  // handles: node id, or num_nodes + child

  // exterior surface: original triangle when untouched, corner quads when split
  for (size_t bi = 0; bi < boundary_tris_.size(); ++bi) {
    const auto& tri = boundary_tris_[bi];
    const int f = boundary_tri_face_[bi];
    const auto& fe = face_edges_[f];
    const bool split = state.edge_damage[fe[0]] || state.edge_damage[fe[1]] ||
                       state.edge_damage[fe[2]];
    if (!split) {
      tris.push_back({tri[0], tri[1], tri[2]});
      continue;
    }
    auto edge_between = [&m, f, this](int a, int b) {
      const std::array<int, 2> key = {std::min(a, b), std::max(a, b)};
      for (int k = 0; k < 3; ++k) {
        const int e = face_edges_[f][k];
        if (m.edges[e] == key) return e;
      }
      throw GeometryError("face edge lookup failed");
    };
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3], c = tri[(k + 2) % 3];
      const long ha = a;
      const long hab = child_handle(EntityKind::edge, edge_between(a, b), a, state);
      const long hf = child_handle(EntityKind::face, f, a, state);
      const long hca = child_handle(EntityKind::edge, edge_between(c, a), a, state);
      tris.push_back({ha, hab, hf});
      tris.push_back({ha, hf, hca});
    }
  }

  // fracture surfaces: the dual quad of every broken edge in every incident tet
  for (int e = 0; e < m.num_edges(); ++e) {
    if (!state.edge_damage[e]) continue;
    const int na = m.edges[e][0], nb = m.edges[e][1];
    for (int t : m.edge_tets[e]) {
      // the two faces of t containing the edge, ascending
      std::array<int, 2> fpair{-1, -1};
      int found = 0;
      for (int fi = 0; fi < 4; ++fi) {
        const int f = tet_faces_[t][fi];
        const auto& fn = face_nodes_[f];
        const bool has_a = fn[0] == na || fn[1] == na || fn[2] == na;
        const bool has_b = fn[0] == nb || fn[1] == nb || fn[2] == nb;
        if (has_a && has_b) fpair[found++] = f;
      }
      std::sort(fpair.begin(), fpair.end());
      for (int side = 0; side < 2; ++side) {
        const int s = side == 0 ? na : nb;
        const int o = side == 0 ? nb : na;
        const long hm = child_handle(EntityKind::edge, e, s, state);
        const long hf1 = child_handle(EntityKind::face, fpair[0], s, state);
        const long ht = child_handle(EntityKind::tet, t, s, state);
        const long hf2 = child_handle(EntityKind::face, fpair[1], s, state);
        // orient the quad normal away from the owning side (rest geometry)
        const Vec3 pm = entity_rest_position(EntityKind::edge, e);
        const Vec3 p1 = entity_rest_position(EntityKind::face, fpair[0]);
        const Vec3 pt = entity_rest_position(EntityKind::tet, t);
        const Vec3 p2 = entity_rest_position(EntityKind::face, fpair[1]);
        const Vec3 outward = m.rest_positions[o] - m.rest_positions[s];
        const bool flip = (p1 - pm).cross(pt - pm).dot(outward) < 0.0;
        if (!flip) {
          tris.push_back({hm, hf1, ht});
          tris.push_back({hm, ht, hf2});
        } else {
          tris.push_back({hm, ht, hf1});
          tris.push_back({hm, hf2, ht});
        }
      }
    }
  }

  // compact to referenced vertices: originals in node order, then children
  Surface surf;
  std::vector<long> used;
  for (const auto& t : tris) used.insert(used.end(), {t[0], t[1], t[2]});
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  std::map<long, int> remap;
  for (long h : used) {
    remap[h] = static_cast<int>(surf.vertices.size());
    if (h < m.num_nodes()) {
      surf.vertices.push_back(state.position(m, static_cast<int>(h)));
      surf.original_vertex_count++;
    } else {
      surf.vertices.push_back(child_position(static_cast<int>(h - m.num_nodes()), state));
    }
  }
  surf.triangles.reserve(tris.size());
  for (const auto& t : tris)
    surf.triangles.push_back({remap.at(t[0]), remap.at(t[1]), remap.at(t[2])});
  return surf;
}

void VizMesh::export_frame(const std::string& path, const SimState& state) const {
  const Surface surf = build_surface(state);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  char buf[128];
  for (const auto& v : surf.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& f : surf.triangles)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw FormatError("short write to '" + path + "'");
}

std::array<double, 4> VizMesh::fragment_volumes(int tet, const SimState& state) const {
  const TetMesh& m = *mesh_;
  const auto& t = m.tets[tet];
  std::array<double, 4> vol = {0.0, 0.0, 0.0, 0.0};

  auto tri_vol = [](const Vec3& a, const Vec3& b, const Vec3& c) {
    return a.dot(b.cross(c)) / 6.0;
  };

  static constexpr int face_local[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
  for (int corner = 0; corner < 4; ++corner) {
    const int g = t[corner];
    const Vec3 pg = state.position(m, g);
    double v = 0.0;

    // three boundary quads, one per incident face of the tet
    for (int fi = 0; fi < 4; ++fi) {
      if (fi == corner) continue;  // face opposite the corner
      // outward-oriented triple of this face
      std::array<int, 3> tri = {t[face_local[fi][0]], t[face_local[fi][1]], t[face_local[fi][2]]};
      {
        const Vec3& a = m.rest_positions[tri[0]];
        const Vec3& b = m.rest_positions[tri[1]];
        const Vec3& c = m.rest_positions[tri[2]];
        const Vec3& opp = m.rest_positions[t[fi]];
        if ((b - a).cross(c - a).dot(opp - a) > 0.0) std::swap(tri[1], tri[2]);
      }
      // rotate so the corner comes first
      while (tri[0] != g) std::rotate(tri.begin(), tri.begin() + 1, tri.end());
      const int f = tet_faces_[tet][fi];
      auto edge_between = [&m, this, f](int a, int b) {
        const std::array<int, 2> key = {std::min(a, b), std::max(a, b)};
        for (int k = 0; k < 3; ++k)
          if (m.edges[face_edges_[f][k]] == key) return face_edges_[f][k];
        throw GeometryError("face edge lookup failed");
      };
      const Vec3 mab = entity_position(EntityKind::edge, edge_between(tri[0], tri[1]), g, state);
      const Vec3 cf = entity_position(EntityKind::face, f, g, state);
      const Vec3 mca = entity_position(EntityKind::edge, edge_between(tri[2], tri[0]), g, state);
      v += tri_vol(pg, mab, cf);
      v += tri_vol(pg, cf, mca);
    }

    // three dual quads, one per incident edge
    for (int k = 0; k < 6; ++k) {
      const auto& le = TetMesh::local_edges[k];
      int other;
      if (t[le[0]] == g)
        other = t[le[1]];
      else if (t[le[1]] == g)
        other = t[le[0]];
      else
        continue;
      const int e = m.tet_edges[tet][k];
      std::array<int, 2> fpair{-1, -1};
      int found = 0;
      for (int fi = 0; fi < 4; ++fi) {
        const int f = tet_faces_[tet][fi];
        const auto& fn = face_nodes_[f];
        const bool has_g = fn[0] == g || fn[1] == g || fn[2] == g;
        const bool has_o = fn[0] == other || fn[1] == other || fn[2] == other;
        if (has_g && has_o) fpair[found++] = f;
      }
      std::sort(fpair.begin(), fpair.end());
      const Vec3 pm = entity_position(EntityKind::edge, e, g, state);
      const Vec3 p1 = entity_position(EntityKind::face, fpair[0], g, state);
      const Vec3 pt = entity_position(EntityKind::tet, tet, g, state);
      const Vec3 p2 = entity_position(EntityKind::face, fpair[1], g, state);
      // orientation away from the corner (rest geometry), diagonal pm-pt
      const Vec3 rm = entity_rest_position(EntityKind::edge, e);
      const Vec3 r1 = entity_rest_position(EntityKind::face, fpair[0]);
      const Vec3 rt = entity_rest_position(EntityKind::tet, tet);
      const Vec3 outward = m.rest_positions[other] - m.rest_positions[g];
      const bool flip = (r1 - rm).cross(rt - rm).dot(outward) < 0.0;
      if (!flip) {
        v += tri_vol(pm, p1, pt);
        v += tri_vol(pm, pt, p2);
      } else {
        v += tri_vol(pm, pt, p1);
        v += tri_vol(pm, p2, pt);
      }
    }
    vol[corner] = v;
  }
  return vol;
}

}  // namespace grafem
