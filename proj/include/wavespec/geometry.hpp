#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace wavespec::geometry {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Subset of the vertex set, stored densely. Small graphs only.
struct VertexSet {
  std::vector<uint8_t> mask;

  VertexSet() = default;
  explicit VertexSet(int n) : mask(n, 0) {}

  int size() const { return static_cast<int>(mask.size()); }
  bool contains(int v) const { return mask[v] != 0; }
  void insert(int v) { mask[v] = 1; }
  int count() const {
    int c = 0;
    for (auto b : mask) c += b;
    return c;
  }
  bool empty() const { return count() == 0; }

  VertexSet complement() const {
    VertexSet r(size());
    for (int i = 0; i < size(); ++i) r.mask[i] = mask[i] ? 0 : 1;
    return r;
  }
  VertexSet intersect(const VertexSet& o) const {
    VertexSet r(size());
    for (int i = 0; i < size(); ++i) r.mask[i] = (mask[i] && o.mask[i]) ? 1 : 0;
    return r;
  }
  VertexSet unite(const VertexSet& o) const {
    VertexSet r(size());
    for (int i = 0; i < size(); ++i) r.mask[i] = (mask[i] || o.mask[i]) ? 1 : 0;
    return r;
  }
  bool subset_of(const VertexSet& o) const {
    for (int i = 0; i < size(); ++i)
      if (mask[i] && !o.mask[i]) return false;
    return true;
  }
  bool operator==(const VertexSet& o) const { return mask == o.mask; }
  bool operator<(const VertexSet& o) const { return mask < o.mask; }

  std::vector<int> vertices() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (mask[i]) out.push_back(i);
    return out;
  }
};

/// Weighted-graph model manifold with a marked boundary.
struct DiscreteManifold {
  int n = 0;
  std::vector<int> boundary;                        // sorted vertex ids
  std::vector<std::tuple<int, int, double>> edges;  // (i, j, length)
  Vec weight;           // per-vertex volume (half-sum of incident edge lengths)
  Vec boundary_weight;  // boundary measure share, aligned with `boundary`
  Mat dist;             // all-pairs geodesic distances
  std::vector<std::vector<int>> adj;
  std::vector<std::array<double, 2>> coords;  // reporting only, may be empty
  std::string kind;

  bool is_boundary(int v) const {
    return std::binary_search(boundary.begin(), boundary.end(), v);
  }
  std::vector<int> interior() const {
    std::vector<int> out;
    for (int v = 0; v < n; ++v)
      if (!is_boundary(v)) out.push_back(v);
    return out;
  }
  VertexSet boundary_set() const {
    VertexSet s(n);
    for (int b : boundary) s.insert(b);
    return s;
  }
  double diameter() const { return dist.size() ? dist.maxCoeff() : 0.0; }

  /// Sorted distinct attained distance values, 0 first.
  std::vector<double> attained_distances() const {
    std::set<double> vals;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) vals.insert(dist(i, j));
    return {vals.begin(), vals.end()};
  }
};

enum class ModelKind { interval, metric_graph, polar_disk, grid_domain };

struct ModelParams {
  double length = 1.0;              // interval
  double h = 0.1;                   // interval / metric_graph grid step
  std::vector<double> legs;         // metric_graph (star) leg lengths
  int rings = 4, sectors = 8;       // polar_disk
  double radius = 1.0;              // polar_disk
  int nx = 0, ny = 0;               // grid_domain
  std::vector<std::string> mask;    // grid_domain rows, '#' = present (optional)
};

namespace detail {

inline void finalize(DiscreteManifold& m) {
  m.adj.assign(m.n, {});
  m.weight = Vec::Zero(m.n);
  for (auto& [i, j, len] : m.edges) {
    if (len <= 0) throw std::invalid_argument("build_model: nonpositive edge length");
    m.adj[i].push_back(j);
    m.adj[j].push_back(i);
    m.weight(i) += 0.5 * len;
    m.weight(j) += 0.5 * len;
  }
  for (auto& a : m.adj) std::sort(a.begin(), a.end());
  // Floyd-Warshall; desk-scale graphs only.
  const double inf = std::numeric_limits<double>::infinity();
  m.dist = Mat::Constant(m.n, m.n, inf);
  for (int v = 0; v < m.n; ++v) m.dist(v, v) = 0;
  for (auto& [i, j, len] : m.edges) {
    m.dist(i, j) = std::min(m.dist(i, j), len);
    m.dist(j, i) = m.dist(i, j);
  }
  for (int k = 0; k < m.n; ++k)
    for (int i = 0; i < m.n; ++i)
      for (int j = 0; j < m.n; ++j)
        if (m.dist(i, k) + m.dist(k, j) < m.dist(i, j))
          m.dist(i, j) = m.dist(i, k) + m.dist(k, j);
  if (!m.dist.allFinite()) throw std::invalid_argument("build_model: graph disconnected");
  std::sort(m.boundary.begin(), m.boundary.end());
  if (m.boundary.empty()) throw std::invalid_argument("build_model: empty boundary");
}

}  // namespace detail

inline DiscreteManifold build_model(ModelKind kind, const ModelParams& p) {
  DiscreteManifold m;
  switch (kind) {
    case ModelKind::interval: {
      if (p.length <= 0 || p.h <= 0) throw std::invalid_argument("interval: bad params");
      int segs = static_cast<int>(std::llround(p.length / p.h));
      if (segs < 2 || std::abs(segs * p.h - p.length) > 1e-9 * p.length)
        throw std::invalid_argument("interval: h must divide length, >= 2 segments");
      m.n = segs + 1;
      m.kind = "interval";
      for (int i = 0; i < segs; ++i) m.edges.emplace_back(i, i + 1, p.h);
      m.boundary = {0, segs};
      m.boundary_weight = Vec::Ones(2);
      for (int i = 0; i <= segs; ++i) m.coords.push_back({i * p.h, 0.0});
      break;
    }
    case ModelKind::metric_graph: {
      if (p.legs.size() < 2 || p.h <= 0) throw std::invalid_argument("metric_graph: bad params");
      m.kind = "metric_graph";
      m.n = 1;  // vertex 0 = star center
      m.coords.push_back({0.0, 0.0});
      int tip_count = 0;
      for (size_t l = 0; l < p.legs.size(); ++l) {
        int segs = static_cast<int>(std::llround(p.legs[l] / p.h));
        if (segs < 1 || std::abs(segs * p.h - p.legs[l]) > 1e-9 * p.legs[l])
          throw std::invalid_argument("metric_graph: h must divide each leg");
        int prev = 0;
        double ang = 2 * M_PI * static_cast<double>(l) / static_cast<double>(p.legs.size());
        for (int s = 1; s <= segs; ++s) {
          int v = m.n++;
          m.coords.push_back({s * p.h * std::cos(ang), s * p.h * std::sin(ang)});
          m.edges.emplace_back(prev, v, p.h);
          prev = v;
        }
        m.boundary.push_back(prev);  // degree-1 tip
        ++tip_count;
      }
      m.boundary_weight = Vec::Ones(tip_count);
      break;
    }
    case ModelKind::polar_disk: {
      if (p.rings < 2 || p.sectors < 3 || p.radius <= 0)
        throw std::invalid_argument("polar_disk: bad params");
      m.kind = "polar_disk";
      m.n = p.rings * p.sectors;
      const double dr = p.radius / p.rings;
      auto id = [&](int ring, int sec) { return ring * p.sectors + ((sec % p.sectors + p.sectors) % p.sectors); };
      for (int r = 0; r < p.rings; ++r) {
        double rad = dr * (r + 1);
        double arc = rad * 2 * M_PI / p.sectors;
        for (int s = 0; s < p.sectors; ++s) {
          double ang = 2 * M_PI * s / p.sectors;
          m.coords.push_back({rad * std::cos(ang), rad * std::sin(ang)});
          m.edges.emplace_back(id(r, s), id(r, s + 1), arc);
          if (r + 1 < p.rings) m.edges.emplace_back(id(r, s), id(r + 1, s), dr);
        }
      }
      for (int s = 0; s < p.sectors; ++s) m.boundary.push_back(id(p.rings - 1, s));
      m.boundary_weight = Vec::Constant(p.sectors, p.radius * 2 * M_PI / p.sectors);
      break;
    }
    case ModelKind::grid_domain: {
      if (p.nx < 3 || p.ny < 3 || p.h <= 0) throw std::invalid_argument("grid_domain: bad params");
      m.kind = "grid_domain";
      std::vector<std::vector<int>> idx(p.ny, std::vector<int>(p.nx, -1));
      auto present = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= p.nx || y >= p.ny) return false;
        if (p.mask.empty()) return true;
        if (y >= static_cast<int>(p.mask.size()) || x >= static_cast<int>(p.mask[y].size()))
          return false;
        return p.mask[y][x] == '#';
      };
      for (int y = 0; y < p.ny; ++y)
        for (int x = 0; x < p.nx; ++x)
          if (present(x, y)) {
            idx[y][x] = m.n++;
            m.coords.push_back({x * p.h, y * p.h});
          }
      if (m.n == 0) throw std::invalid_argument("grid_domain: empty mask");
      std::vector<double> bw;
      for (int y = 0; y < p.ny; ++y)
        for (int x = 0; x < p.nx; ++x) {
          if (idx[y][x] < 0) continue;
          if (present(x + 1, y)) m.edges.emplace_back(idx[y][x], idx[y][x + 1], p.h);
          if (present(x, y + 1)) m.edges.emplace_back(idx[y][x], idx[y + 1][x], p.h);
          int deg = present(x + 1, y) + present(x - 1, y) + present(x, y + 1) + present(x, y - 1);
          if (deg < 4) {  // mask rim
            m.boundary.push_back(idx[y][x]);
            bw.push_back(p.h);
          }
        }
      m.boundary_weight = Eigen::Map<Vec>(bw.data(), static_cast<Eigen::Index>(bw.size()));
      break;
    }
  }
  detail::finalize(m);
  // sanity: every boundary vertex keeps at least one interior neighbor
  for (int b : m.boundary) {
    bool ok = false;
    for (int u : m.adj[b]) ok = ok || !m.is_boundary(u);
    if (!ok) throw std::invalid_argument("build_model: boundary vertex with no interior neighbor");
  }
  return m;
}

inline Mat geodesic_distances(const DiscreteManifold& m) { return m.dist; }

inline double dist_to_set(const DiscreteManifold& m, const VertexSet& a, int v) {
  double d = std::numeric_limits<double>::infinity();
  for (int u = 0; u < m.n; ++u)
    if (a.contains(u)) d = std::min(d, m.dist(v, u));
  return d;
}

/// Strict metric neighborhood {x : dist(x,A) < r}; r = 0 returns A itself.
inline VertexSet neighborhood(const DiscreteManifold& m, const VertexSet& a, double r) {
  if (r < 0) throw std::invalid_argument("neighborhood: negative radius");
  if (r == 0) return a;
  VertexSet out(m.n);
  if (a.empty()) return out;
  for (int v = 0; v < m.n; ++v)
    if (dist_to_set(m, a, v) < r) out.insert(v);
  return out;
}

/// Vertices of A whose full 1-ring lies in A (discrete interior).
inline VertexSet interior_points(const DiscreteManifold& m, const VertexSet& a) {
  VertexSet out(m.n);
  for (int v = 0; v < m.n; ++v) {
    if (!a.contains(v)) continue;
    bool inner = true;
    for (int u : m.adj[v]) inner = inner && a.contains(u);
    if (inner) out.insert(v);
  }
  return out;
}

struct Caps {
  int max_sets = 4096;
  int max_depth = 6;
};

struct SetFamily {
  std::vector<VertexSet> sets;
  std::vector<std::string> provenance;
  std::vector<VertexSet> atoms;
  bool truncated = false;
  bool stabilized = false;

  bool push(const VertexSet& s, const std::string& tag) {
    for (auto& t : sets)
      if (t == s) return false;
    sets.push_back(s);
    provenance.push_back(tag);
    return true;
  }
  bool contains(const VertexSet& s) const {
    for (auto& t : sets)
      if (t == s) return true;
    return false;
  }
};

/// Membership-pattern partition: the atoms of the algebra the family generates.
inline std::vector<VertexSet> atom_partition(int n, const std::vector<VertexSet>& fam) {
  std::map<std::vector<uint8_t>, VertexSet> groups;
  for (int v = 0; v < n; ++v) {
    std::vector<uint8_t> sig;
    sig.reserve(fam.size());
    for (auto& s : fam) sig.push_back(s.contains(v) ? 1 : 0);
    auto it = groups.find(sig);
    if (it == groups.end()) it = groups.emplace(sig, VertexSet(n)).first;
    it->second.insert(v);
  }
  std::vector<VertexSet> out;
  for (auto& [sig, s] : groups) out.push_back(s);
  std::sort(out.begin(), out.end());
  return out;
}

/// Closure under complement and pairwise intersection, capped.
inline SetFamily set_algebra_closure(const DiscreteManifold& m, const SetFamily& fam, Caps caps) {
  SetFamily out = fam;
  out.atoms.clear();
  VertexSet omega(m.n);
  for (int v = 0; v < m.n; ++v) omega.insert(v);
  out.push(omega, "full");
  bool changed = true;
  int depth = 0;
  while (changed && depth++ < caps.max_depth * 8) {
    changed = false;
    size_t cur = out.sets.size();
    for (size_t i = 0; i < cur; ++i) {
      if (out.push(out.sets[i].complement(), "complement")) changed = true;
      for (size_t j = 0; j < i; ++j)
        if (out.push(out.sets[i].intersect(out.sets[j]), "intersection")) changed = true;
      if (static_cast<int>(out.sets.size()) > caps.max_sets) {
        out.truncated = true;
        out.stabilized = false;
        return out;
      }
    }
  }
  out.stabilized = !changed;
  out.atoms = atom_partition(m.n, out.sets);
  return out;
}

/// One sigma step: algebra closure -> interiors (dropping empties) ->
/// neighborhoods over the radius grid.
inline SetFamily sigma_step(const DiscreteManifold& m, const SetFamily& fam,
                            const std::vector<double>& tgrid, Caps caps) {
  SetFamily alg = set_algebra_closure(m, fam, caps);
  SetFamily out;
  out.truncated = alg.truncated;
  for (auto& s : alg.sets) {
    VertexSet flat = interior_points(m, s);
    if (flat.empty()) continue;
    for (double t : tgrid) {
      out.push(neighborhood(m, flat, t), "sigma");
      if (static_cast<int>(out.sets.size()) > caps.max_sets) {
        out.truncated = true;
        return out;
      }
    }
  }
  return out;
}

enum class BoundaryFamily {
  whole,   // seed with neighborhoods of the whole boundary
  split    // seed with neighborhoods of each boundary vertex separately
};

/// Default radius grid: attained distances plus a value past the diameter, so
/// every strict neighborhood (including the full set) is realized.
inline std::vector<double> default_radius_grid(const DiscreteManifold& m) {
  std::vector<double> g = m.attained_distances();
  double gap = m.diameter();
  for (size_t i = 1; i < g.size(); ++i) gap = std::min(gap, g[i] - g[i - 1]);
  g.push_back(m.diameter() + std::max(gap, 1e-12));
  return g;
}

/// Procedure-1 driver. The family is kept in a compact form: algebra content
/// is carried by its atom partition (every algebra member is a union of
/// atoms, and neighborhoods distribute over unions), so the fixpoint is
/// decidable without materializing the full Boolean algebra.
inline SetFamily procedure1(const DiscreteManifold& m, const std::vector<double>& tgrid,
                            Caps caps = {}, BoundaryFamily mode = BoundaryFamily::whole) {
  SetFamily fam;
  auto seed = [&](const VertexSet& base, const std::string& tag) {
    for (double t : tgrid) {
      VertexSet nb = neighborhood(m, base, t);
      if (!nb.empty()) fam.push(nb, tag);
    }
  };
  if (mode == BoundaryFamily::whole) {
    seed(m.boundary_set(), "collar");
  } else {
    for (int b : m.boundary) {
      VertexSet s(m.n);
      s.insert(b);
      seed(s, "collar@" + std::to_string(b));
    }
  }
  fam.atoms = atom_partition(m.n, fam.sets);

  for (int depth = 0; depth < caps.max_depth; ++depth) {
    std::vector<VertexSet> carriers = fam.atoms;
    for (auto& s : fam.sets) {
      carriers.push_back(s);
      carriers.push_back(s.complement());
    }
    size_t before = fam.sets.size();
    for (auto& c : carriers) {
      VertexSet flat = interior_points(m, c);
      if (flat.empty()) continue;
      for (double t : tgrid) {
        VertexSet nb = neighborhood(m, flat, t);
        if (!nb.empty()) fam.push(nb, "sigma" + std::to_string(depth + 1));
        if (static_cast<int>(fam.sets.size()) > caps.max_sets) {
          fam.truncated = true;
          fam.stabilized = false;
          fam.atoms = atom_partition(m.n, fam.sets);
          return fam;
        }
      }
    }
    auto atoms = atom_partition(m.n, fam.sets);
    bool grown = fam.sets.size() != before || atoms != fam.atoms;
    fam.atoms = std::move(atoms);
    if (!grown) {
      fam.stabilized = true;
      break;
    }
  }
  return fam;
}

enum class Tristate { no, yes, indeterminate };

/// Net check: every vertex is isolated by the family's atom partition.
inline Tristate is_net(const DiscreteManifold& m, const SetFamily& fam) {
  if (fam.truncated) return Tristate::indeterminate;
  auto atoms = fam.atoms.empty() ? atom_partition(m.n, fam.sets) : fam.atoms;
  for (auto& a : atoms)
    if (a.count() != 1) return Tristate::no;
  return Tristate::yes;
}

inline Tristate is_simple(const DiscreteManifold& m, Caps caps = {},
                          BoundaryFamily mode = BoundaryFamily::whole) {
  SetFamily fam = procedure1(m, default_radius_grid(m), caps, mode);
  if (!fam.stabilized) return Tristate::indeterminate;
  return is_net(m, fam);
}

/// Point separation by the family (the Stone-theorem step at graph scale;
/// vertex sets are closed, so the closure is the set itself).
inline bool separation_check(const DiscreteManifold& m, const SetFamily& fam) {
  for (int x = 0; x < m.n; ++x)
    for (int y = x + 1; y < m.n; ++y) {
      bool sep = false;
      for (auto& s : fam.sets)
        if (s.contains(x) != s.contains(y)) {
          sep = true;
          break;
        }
      if (!sep) return false;
    }
  return true;
}

}  // namespace wavespec::geometry
