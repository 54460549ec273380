#include "grafem/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace grafem {

double TetMesh::total_volume() const {
  double v = 0.0;
  for (double ve : rest_volumes) v += ve;
  return v;
}

double TetMesh::mean_face_area() const {
  double sum = 0.0;
  long count = 0;
  static constexpr int face_local[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
  for (const auto& t : tets) {
    for (const auto& f : face_local) {
      const Vec3& a = rest_positions[t[f[0]]];
      const Vec3& b = rest_positions[t[f[1]]];
      const Vec3& c = rest_positions[t[f[2]]];
      sum += 0.5 * (b - a).cross(c - a).norm();
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

void induce_edge_graph(TetMesh& mesh) {
  if (mesh.tets.empty()) throw GeometryError("mesh has no tetrahedra");
  const int n = mesh.num_nodes();
  for (size_t e = 0; e < mesh.tets.size(); ++e) {
    const auto& t = mesh.tets[e];
    for (int i = 0; i < 4; ++i) {
      if (t[i] < 0 || t[i] >= n)
        throw GeometryError("tet " + std::to_string(e) + " references node " +
                            std::to_string(t[i]) + " out of range");
      for (int j = i + 1; j < 4; ++j)
        if (t[i] == t[j])
          throw GeometryError("tet " + std::to_string(e) + " repeats node " +
                              std::to_string(t[i]));
    }
  }

  std::set<std::array<int, 2>> unique;
  for (const auto& t : mesh.tets)
    for (const auto& le : TetMesh::local_edges)
      unique.insert({std::min(t[le[0]], t[le[1]]), std::max(t[le[0]], t[le[1]])});

  mesh.edges.assign(unique.begin(), unique.end());
  std::map<std::array<int, 2>, int> index;
  for (int i = 0; i < mesh.num_edges(); ++i) index[mesh.edges[i]] = i;

  mesh.tet_edges.resize(mesh.tets.size());
  mesh.edge_tets.assign(mesh.edges.size(), {});
  for (size_t e = 0; e < mesh.tets.size(); ++e) {
    const auto& t = mesh.tets[e];
    for (int k = 0; k < 6; ++k) {
      const auto& le = TetMesh::local_edges[k];
      const int id = index.at({std::min(t[le[0]], t[le[1]]), std::max(t[le[0]], t[le[1]])});
      mesh.tet_edges[e][k] = id;
      mesh.edge_tets[id].push_back(static_cast<int>(e));
    }
  }
}

void rest_quantities(TetMesh& mesh) {
  const size_t nt = mesh.tets.size();
  mesh.rest_volumes.resize(nt);
  mesh.rest_shape_inverse.resize(nt);
  mesh.rest_centroids.resize(nt);
  for (size_t e = 0; e < nt; ++e) {
    const auto& t = mesh.tets[e];
    const Vec3& p0 = mesh.rest_positions[t[0]];
    Mat3 dm;
    dm.col(0) = mesh.rest_positions[t[1]] - p0;
    dm.col(1) = mesh.rest_positions[t[2]] - p0;
    dm.col(2) = mesh.rest_positions[t[3]] - p0;
    const double det = dm.determinant();
    if (!(det > 0.0))
      throw GeometryError("tet " + std::to_string(e) +
                          " is degenerate or inverted (det = " + std::to_string(det) + ")");
    mesh.rest_volumes[e] = det / 6.0;
    mesh.rest_shape_inverse[e] = dm.inverse();
    mesh.rest_centroids[e] =
        0.25 * (p0 + mesh.rest_positions[t[1]] + mesh.rest_positions[t[2]] +
                mesh.rest_positions[t[3]]);
  }
  mesh.rest_edge_lengths.resize(mesh.edges.size());
  for (size_t i = 0; i < mesh.edges.size(); ++i) {
    const auto& ed = mesh.edges[i];
    mesh.rest_edge_lengths[i] =
        (mesh.rest_positions[ed[1]] - mesh.rest_positions[ed[0]]).norm();
  }
}

TetMesh make_mesh(std::vector<Vec3> nodes, std::vector<std::array<int, 4>> tets) {
  TetMesh mesh;
  mesh.rest_positions = std::move(nodes);
  mesh.tets = std::move(tets);
  induce_edge_graph(mesh);
  rest_quantities(mesh);
  return mesh;
}

namespace {

// Strips '#' comments and returns whitespace-token lines with their 1-based
// line numbers.
std::vector<std::pair<int, std::vector<std::string>>> tokenize(const std::string& text) {
  std::vector<std::pair<int, std::vector<std::string>>> lines;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (!tokens.empty()) lines.emplace_back(number, std::move(tokens));
  }
  return lines;
}

long parse_long(const std::string& tok, int line) {
  try {
    size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line) + ": expected integer, got '" + tok + "'");
  }
}

double parse_double(const std::string& tok, int line) {
  try {
    size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line) + ": expected number, got '" + tok + "'");
  }
}

}  // namespace

TetMesh load_tetgen(const std::string& node_text, const std::string& ele_text) {
  const auto nlines = tokenize(node_text);
  if (nlines.empty()) throw FormatError(".node: file is empty");
  const auto& [hline, htok] = nlines.front();
  if (htok.size() < 2) throw FormatError("line " + std::to_string(hline) + ": .node header needs '<count> <dim> [attrs] [markers]'");
  const long npoints = parse_long(htok[0], hline);
  const long dim = parse_long(htok[1], hline);
  if (dim != 3) throw FormatError("line " + std::to_string(hline) + ": only 3-dimensional .node files are supported");
  if (npoints <= 0) throw FormatError("line " + std::to_string(hline) + ": point count must be positive");
  if (static_cast<long>(nlines.size()) - 1 < npoints)
    throw FormatError(".node: expected " + std::to_string(npoints) + " point lines, found " +
                      std::to_string(nlines.size() - 1));

  long base = -1;  // 0- or 1-based, detected from the first point record
  std::vector<Vec3> points(npoints);
  for (long i = 0; i < npoints; ++i) {
    const auto& [line, tok] = nlines[i + 1];
    if (tok.size() < 4)
      throw FormatError("line " + std::to_string(line) + ": point record needs '<index> x y z'");
    const long idx = parse_long(tok[0], line);
    if (base < 0) base = (idx == 0) ? 0 : 1;
    const long at = idx - base;
    if (at < 0 || at >= npoints)
      throw FormatError("line " + std::to_string(line) + ": point index " + std::to_string(idx) +
                        " out of range");
    points[at] = Vec3(parse_double(tok[1], line), parse_double(tok[2], line),
                      parse_double(tok[3], line));
  }

  const auto elines = tokenize(ele_text);
  if (elines.empty()) throw FormatError(".ele: file is empty");
  const auto& [ehline, ehtok] = elines.front();
  if (ehtok.size() < 2) throw FormatError("line " + std::to_string(ehline) + ": .ele header needs '<count> <nodes-per-tet> [attrs]'");
  const long ntets = parse_long(ehtok[0], ehline);
  const long per = parse_long(ehtok[1], ehline);
  if (per != 4) throw FormatError("line " + std::to_string(ehline) + ": only 4-node tetrahedra are supported");
  if (ntets <= 0) throw FormatError("line " + std::to_string(ehline) + ": element count must be positive");
  if (static_cast<long>(elines.size()) - 1 < ntets)
    throw FormatError(".ele: expected " + std::to_string(ntets) + " element lines, found " +
                      std::to_string(elines.size() - 1));

  long ebase = -1;
  std::vector<std::array<int, 4>> tets(ntets);
  for (long i = 0; i < ntets; ++i) {
    const auto& [line, tok] = elines[i + 1];
    if (tok.size() < 5)
      throw FormatError("line " + std::to_string(line) + ": element record needs '<index> n1 n2 n3 n4'");
    const long idx = parse_long(tok[0], line);
    if (ebase < 0) ebase = (idx == 0) ? 0 : 1;
    const long at = idx - ebase;
    if (at < 0 || at >= ntets)
      throw FormatError("line " + std::to_string(line) + ": element index " + std::to_string(idx) +
                        " out of range");
    for (int k = 0; k < 4; ++k) {
      const long node = parse_long(tok[1 + k], line) - base;
      if (node < 0 || node >= npoints)
        throw FormatError("line " + std::to_string(line) + ": node index " +
                          std::to_string(node + base) + " out of range (have " +
                          std::to_string(npoints) + " points)");
      tets[at][k] = static_cast<int>(node);
    }
  }

  return make_mesh(std::move(points), std::move(tets));
}

TetMesh load_tetgen_files(const std::string& node_path, const std::string& ele_path) {
  auto slurp = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  return load_tetgen(slurp(node_path), slurp(ele_path));
}

std::vector<std::array<int, 3>> boundary_faces(const TetMesh& mesh) {
  // key: sorted triple; value: (oriented triple, count)
  std::map<std::array<int, 3>, std::pair<std::array<int, 3>, int>> faces;
  static constexpr int face_local[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
  for (size_t e = 0; e < mesh.tets.size(); ++e) {
    const auto& t = mesh.tets[e];
    for (int fi = 0; fi < 4; ++fi) {
      std::array<int, 3> tri = {t[face_local[fi][0]], t[face_local[fi][1]], t[face_local[fi][2]]};
      // orient outward: normal away from the opposite vertex
      const Vec3& a = mesh.rest_positions[tri[0]];
      const Vec3& b = mesh.rest_positions[tri[1]];
      const Vec3& c = mesh.rest_positions[tri[2]];
      const Vec3& opp = mesh.rest_positions[t[fi]];
      if ((b - a).cross(c - a).dot(opp - a) > 0.0) std::swap(tri[1], tri[2]);
      std::array<int, 3> key = tri;
      std::sort(key.begin(), key.end());
      auto [it, inserted] = faces.try_emplace(key, std::make_pair(tri, 0));
      it->second.second += 1;
    }
  }
  std::vector<std::array<int, 3>> result;
  for (const auto& [key, val] : faces)
    if (val.second == 1) result.push_back(val.first);
  return result;
}

}  // namespace grafem
