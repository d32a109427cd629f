#pragma once

#include "wavespec/dynamics.hpp"
#include "wavespec/geometry.hpp"
#include "wavespec/numlin.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavespec::spectrum {

using geometry::DiscreteManifold;
using geometry::VertexSet;
using numlin::Mat;
using numlin::ProjectionFamily;
using numlin::Subspace;
using numlin::SymOp;
using numlin::Vec;

/// Extension of subspaces in time. The geometric backend fattens the support
/// set metrically; the dynamical backend spans wave states driven from the
/// subspace. Coordinates live on a carrier: a vertex list for the geometric
/// backend (possibly a strict subset, e.g. interior only), the propagator's
/// state space for the dynamical one.
struct SpaceExtension {
  enum class Backend { geometric, dynamical };
  Backend backend = Backend::geometric;

  const DiscreteManifold* m = nullptr;
  std::vector<int> carrier;  // manifold vertex per coordinate
  double eps_mass = 1e-6;

  dynamics::WaveSystem ws;
  double dt = 0;

  double tol = numlin::kEpsRank;
  Vec weight;

  int dim() const { return static_cast<int>(weight.size()); }
};

inline SpaceExtension geometric_extension(const DiscreteManifold& m,
                                          std::vector<int> carrier = {},
                                          double eps_mass = 1e-6) {
  SpaceExtension e;
  e.backend = SpaceExtension::Backend::geometric;
  e.m = &m;
  if (carrier.empty())
    for (int v = 0; v < m.n; ++v) carrier.push_back(v);
  e.carrier = std::move(carrier);
  e.eps_mass = eps_mass;
  e.weight = Vec(e.carrier.size());
  for (size_t i = 0; i < e.carrier.size(); ++i) e.weight(i) = m.weight(e.carrier[i]);
  return e;
}

inline SpaceExtension dynamical_extension(dynamics::WaveSystem ws, double dt,
                                          double tol = numlin::kEpsRank) {
  SpaceExtension e;
  e.backend = SpaceExtension::Backend::dynamical;
  e.ws = std::move(ws);
  e.dt = dt;
  e.tol = tol;
  e.weight = e.ws.prop.weight;
  return e;
}

/// Indicator subspace of a vertex set, restricted to the carrier.
inline Subspace indicator_subspace(const SpaceExtension& e, const VertexSet& s) {
  std::vector<int> hit;
  for (size_t i = 0; i < e.carrier.size(); ++i)
    if (s.contains(e.carrier[i])) hit.push_back(static_cast<int>(i));
  Subspace out;
  out.weight = e.weight;
  out.tol = e.tol;
  out.frame = Mat::Zero(e.dim(), static_cast<int>(hit.size()));
  for (size_t j = 0; j < hit.size(); ++j)
    out.frame(hit[j], static_cast<int>(j)) = 1.0 / std::sqrt(e.weight(hit[j]));
  return out;
}

/// Support of a frame on the carrier, with the relative mass left outside.
struct SupportInfo {
  VertexSet set;
  double leak = 0;
};

inline SupportInfo support_of(const SpaceExtension& e, const Subspace& a) {
  if (e.backend != SpaceExtension::Backend::geometric)
    throw std::logic_error("support_of: geometric backend only");
  SupportInfo info;
  info.set = VertexSet(e.m->n);
  if (a.rank() == 0) return info;
  Vec mass(e.dim());
  for (int i = 0; i < e.dim(); ++i) mass(i) = e.weight(i) * a.frame.row(i).squaredNorm();
  const double mmax = mass.maxCoeff();
  double out_mass = 0;
  for (int i = 0; i < e.dim(); ++i) {
    if (mmax > 0 && std::sqrt(mass(i) / mmax) >= e.eps_mass)
      info.set.insert(e.carrier[i]);
    else
      out_mass += mass(i);
  }
  info.leak = std::sqrt(out_mass / a.rank());
  return info;
}

/// E^t A. Geometric: indicator of the metric neighborhood of the support.
/// Dynamical: span of wave states driven by pulse controls valued in A,
/// joined with A itself (the seed lies in the closure of the reachables).
inline Subspace extend(const SpaceExtension& e, const Subspace& a, double t) {
  if (t < 0) throw std::invalid_argument("extend: negative time");
  if (t == 0 || a.rank() == 0) return a;
  if (e.backend == SpaceExtension::Backend::geometric) {
    SupportInfo s = support_of(e, a);
    return indicator_subspace(e, geometry::neighborhood(*e.m, s.set, t));
  }
  const int msteps = std::max(3, static_cast<int>(std::llround(t / e.dt)));
  const double d = t / msteps;
  std::vector<double> grid(msteps + 1);
  for (int i = 0; i <= msteps; ++i) grid[i] = i * d;
  std::vector<Vec> cols;
  for (int j = 0; j < a.rank(); ++j) cols.push_back(a.frame.col(j));
  for (int j = 0; j < a.rank(); ++j)
    for (int c = 2; c <= msteps - 1; ++c) {
      dynamics::ControlSignal h;
      h.tgrid = grid;
      h.values.assign(msteps + 1, Vec::Zero(e.dim()));
      h.values[c] = a.frame.col(j);
      cols.push_back(dynamics::solve_forced(e.ws.prop, h, t));
    }
  return numlin::orthonormalize(cols, e.weight, e.tol);
}

/// Monotone chain of extensions over the given breakpoints. The geometric
/// stages are the closed metric balls of the support, so the resulting
/// eikonal is exactly multiplication by the distance function when the
/// breakpoints are the attained distances. Dynamical stages accumulate.
inline ProjectionFamily chain_for(const SpaceExtension& e, const Subspace& a,
                                  const std::vector<double>& tgrid) {
  if (tgrid.empty()) throw std::invalid_argument("chain_for: empty grid");
  ProjectionFamily fam;
  if (e.backend == SpaceExtension::Backend::geometric) {
    SupportInfo s = support_of(e, a);
    for (double t : tgrid) {
      VertexSet ball(e.m->n);
      for (int v = 0; v < e.m->n; ++v)
        if (geometry::dist_to_set(*e.m, s.set, v) <= t) ball.insert(v);
      fam.breakpoints.push_back(t);
      fam.stages.push_back(indicator_subspace(e, ball));
    }
  } else {
    Subspace acc = a;
    for (double t : tgrid) {
      Subspace ext = extend(e, a, t);
      acc = numlin::join_space(acc, ext, e.tol);
      fam.breakpoints.push_back(t);
      fam.stages.push_back(acc);
    }
  }
  return fam;
}

/// Sorted attained distance values from the support of a, over the carrier.
inline std::vector<double> attained_radii(const SpaceExtension& e, const Subspace& a) {
  SupportInfo s = support_of(e, a);
  std::set<double> vals;
  for (int i = 0; i < e.dim(); ++i) vals.insert(geometry::dist_to_set(*e.m, s.set, e.carrier[i]));
  return {vals.begin(), vals.end()};
}

struct Eikonal {
  ProjectionFamily family;
  SymOp op;
  bool is_boundary_eikonal = false;
  int maximal = -1;  // -1 undecided
  double alpha = 0;  // regularization, 0 = none
  std::string provenance;
  VertexSet atom;  // producing set when known (geometric runs)
};

/// Stieltjes sum over the chain; with alpha set the weights t/(1+alpha t)
/// replace t.
inline Eikonal eikonal_from_chain(const ProjectionFamily& chain,
                                  std::optional<double> regularize_alpha = std::nullopt,
                                  double angle_tol = 1e-8) {
  chain.validate(angle_tol);
  if (chain.stages.empty()) throw std::invalid_argument("eikonal_from_chain: empty chain");
  Eikonal eik;
  eik.family = chain;
  eik.alpha = regularize_alpha.value_or(0.0);
  const Vec& w = chain.stages[0].weight;
  const int n = chain.stages[0].dim();
  Mat op = Mat::Zero(n, n);
  Mat prev = Mat::Zero(n, n);
  for (size_t k = 0; k < chain.stages.size(); ++k) {
    double t = chain.breakpoints[k];
    double f = regularize_alpha ? t / (1.0 + *regularize_alpha * t) : t;
    Mat p = chain.stages[k].projection();
    op += f * (p - prev);
    prev = p;
  }
  eik.op = SymOp(op, w);
  return eik;
}

/// Chain of boundary-reachable subspaces and its eikonal; geometrically this
/// is multiplication by the distance to the boundary.
inline ProjectionFamily boundary_chain(const SpaceExtension& e, const std::vector<double>& tgrid) {
  if (e.backend == SpaceExtension::Backend::geometric) {
    ProjectionFamily fam;
    VertexSet gamma = e.m->boundary_set();
    for (double t : tgrid) {
      VertexSet ball(e.m->n);
      for (int v = 0; v < e.m->n; ++v)
        if (geometry::dist_to_set(*e.m, gamma, v) <= t) ball.insert(v);
      fam.breakpoints.push_back(t);
      fam.stages.push_back(indicator_subspace(e, ball));
    }
    return fam;
  }
  ProjectionFamily fam;
  dynamics::ControlDictionary dict;
  Subspace acc = numlin::zero_space(e.weight);
  for (double t : tgrid) {
    if (t <= 0) {
      fam.breakpoints.push_back(t);
      fam.stages.push_back(acc);
      continue;
    }
    const int msteps = std::max(4, static_cast<int>(std::llround(t / e.dt)));
    dynamics::ControlDictionary d =
        dynamics::boundary_dictionary(e.ws, t / msteps, t);
    Subspace reach = dynamics::reachable(e.ws, t, d, dynamics::Source::boundary, e.tol);
    acc = numlin::join_space(acc, reach, e.tol);
    fam.breakpoints.push_back(t);
    fam.stages.push_back(acc);
  }
  return fam;
}

inline Eikonal boundary_eikonal(const SpaceExtension& e, const std::vector<double>& tgrid,
                                std::optional<double> alpha = std::nullopt,
                                double angle_tol = 1e-8) {
  Eikonal eik = eikonal_from_chain(boundary_chain(e, tgrid), alpha, angle_tol);
  eik.is_boundary_eikonal = true;
  eik.provenance = "boundary";
  return eik;
}

/// Family of subspaces closed (up to caps) under the lattice algebra and the
/// extension. Atoms are the orthogonal blocks jointly refining all members.
struct SubspaceFamily {
  std::vector<Subspace> members;
  std::vector<std::string> provenance;
  std::vector<Subspace> atoms;
  bool stabilized = false;
  bool truncated = false;
  double block_leak = 0;  // rank lost in non-commuting refinements, 0 = clean
};

namespace detail {

inline bool same_subspace(const Subspace& a, const Subspace& b, double angle_tol) {
  if (a.rank() != b.rank()) return false;
  if (a.rank() == 0) return true;
  return numlin::containment_angle(a, b) <= angle_tol &&
         numlin::containment_angle(b, a) <= angle_tol;
}

inline bool push_member(SubspaceFamily& fam, const Subspace& s, const std::string& tag,
                        double angle_tol) {
  if (s.rank() == 0) return false;
  for (auto& t : fam.members)
    if (same_subspace(t, s, angle_tol)) return false;
  fam.members.push_back(s);
  fam.provenance.push_back(tag);
  return true;
}

inline void refine_blocks(std::vector<Subspace>& blocks, const Subspace& v, double tol,
                          double& leak) {
  std::vector<Subspace> out;
  for (auto& b : blocks) {
    Subspace inside = numlin::meet_space(b, v, tol);
    if (inside.rank() == 0 || inside.rank() == b.rank()) {
      out.push_back(b);
      continue;
    }
    Subspace vperp = numlin::complement_space(v, tol);
    Subspace rest = numlin::meet_space(b, vperp, tol);
    if (inside.rank() + rest.rank() != b.rank()) {
      leak += std::abs(b.rank() - inside.rank() - rest.rank());
      out.push_back(b);
      continue;
    }
    out.push_back(inside);
    out.push_back(rest);
  }
  blocks = std::move(out);
}

}  // namespace detail

/// Subspace-level fixpoint over algebra generation and extension, seeded by
/// the boundary-reachable chain. The algebra content is carried by the atom
/// blocks: every algebra member is a join of atoms, and the extension
/// distributes over joins, so extending atoms, members and complements is
/// enough to detect the fixpoint without materializing the whole lattice.
inline SubspaceFamily procedure1_hat(const SpaceExtension& e,
                                     const std::vector<Subspace>& seed,
                                     const std::vector<double>& tgrid,
                                     geometry::Caps caps = {},
                                     double angle_tol = 1e-6) {
  SubspaceFamily fam;
  for (size_t i = 0; i < seed.size(); ++i)
    detail::push_member(fam, seed[i], "seed" + std::to_string(i), angle_tol);
  if (fam.members.empty()) throw std::invalid_argument("procedure1_hat: empty seed");

  auto rebuild_atoms = [&]() {
    std::vector<Subspace> blocks = {numlin::full_space(e.weight)};
    for (auto& v : fam.members) detail::refine_blocks(blocks, v, e.tol, fam.block_leak);
    fam.atoms = blocks;
  };
  rebuild_atoms();

  auto flat = [&](const Subspace& a) -> Subspace {
    if (e.backend == SpaceExtension::Backend::geometric) {
      SupportInfo s = support_of(e, a);
      return indicator_subspace(e, geometry::interior_points(*e.m, s.set));
    }
    return a;
  };

  for (int depth = 0; depth < caps.max_depth; ++depth) {
    std::vector<Subspace> carriers = fam.atoms;
    for (auto& v : fam.members) {
      carriers.push_back(v);
      carriers.push_back(numlin::complement_space(v, e.tol));
    }
    size_t before = fam.members.size();
    std::vector<Subspace> prev_atoms = fam.atoms;
    for (auto& c : carriers) {
      Subspace base = flat(c);
      if (base.rank() == 0) continue;
      for (double t : tgrid) {
        Subspace ext = extend(e, base, t);
        detail::push_member(fam, ext, "sigma" + std::to_string(depth + 1), angle_tol);
        if (static_cast<int>(fam.members.size()) > caps.max_sets) {
          fam.truncated = true;
          rebuild_atoms();
          return fam;
        }
      }
    }
    rebuild_atoms();
    bool grown = fam.members.size() != before || fam.atoms.size() != prev_atoms.size();
    if (!grown) {
      for (size_t i = 0; i < fam.atoms.size() && !grown; ++i)
        grown = !detail::same_subspace(fam.atoms[i], prev_atoms[i], angle_tol);
    }
    if (!grown) {
      fam.stabilized = true;
      break;
    }
  }
  return fam;
}

/// Collar seeds for the procedure: extensions of the boundary (whole or per
/// boundary vertex) over the radius grid.
inline std::vector<Subspace> boundary_seed(const SpaceExtension& e,
                                           const std::vector<double>& tgrid,
                                           geometry::BoundaryFamily mode) {
  std::vector<Subspace> out;
  if (e.backend == SpaceExtension::Backend::geometric) {
    std::vector<VertexSet> bases;
    if (mode == geometry::BoundaryFamily::whole) {
      bases.push_back(e.m->boundary_set());
    } else {
      for (int b : e.m->boundary) {
        VertexSet s(e.m->n);
        s.insert(b);
        bases.push_back(s);
      }
    }
    for (auto& base : bases)
      for (double t : tgrid) {
        Subspace s = indicator_subspace(e, geometry::neighborhood(*e.m, base, t));
        if (s.rank() > 0) out.push_back(s);
      }
    return out;
  }
  const int nb = static_cast<int>(e.ws.cont.cols());
  for (double t : tgrid) {
    if (t <= 0) continue;
    const int msteps = std::max(4, static_cast<int>(std::llround(t / e.dt)));
    if (mode == geometry::BoundaryFamily::whole) {
      dynamics::ControlDictionary d = dynamics::boundary_dictionary(e.ws, t / msteps, t);
      Subspace r = dynamics::reachable(e.ws, t, d, dynamics::Source::boundary, e.tol);
      if (r.rank() > 0) out.push_back(r);
    } else {
      for (int b = 0; b < nb; ++b) {
        Mat chan = Mat::Zero(nb, 1);
        chan(b, 0) = 1.0;
        dynamics::ControlDictionary d = dynamics::pulse_dictionary(1, chan, t / msteps, t);
        Subspace r = dynamics::reachable(e.ws, t, d, dynamics::Source::boundary, e.tol);
        if (r.rank() > 0) out.push_back(r);
      }
    }
  }
  return out;
}

struct WaveSpectrum {
  std::vector<Eikonal> points;
  Mat metric;
  std::vector<bool> boundary_mask;
};

/// Keeps the eikonals not strictly dominated by any comparable one (the
/// finite replacement of the maximality search), dedups equal points, fills
/// the operator-norm metric and marks the points dominating the boundary
/// eikonal.
inline WaveSpectrum maximal_eikonals(const std::vector<Eikonal>& eiks, double tol,
                                     const Eikonal* tau_bdry = nullptr) {
  if (eiks.empty()) throw std::invalid_argument("maximal_eikonals: empty input");
  const size_t n = eiks.size();
  std::vector<bool> keep(n, true);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n && keep[i]; ++j) {
      if (i == j) continue;
      numlin::PsdOrder ord = numlin::psd_order(eiks[i].op, eiks[j].op, tol);
      if (ord == numlin::PsdOrder::a_below) keep[i] = false;
      if (ord == numlin::PsdOrder::equal && j < i) keep[i] = false;  // dedup
    }
  WaveSpectrum ws;
  for (size_t i = 0; i < n; ++i)
    if (keep[i]) {
      Eikonal e = eiks[i];
      e.maximal = 1;
      ws.points.push_back(std::move(e));
    }
  if (ws.points.empty()) throw std::runtime_error("maximal_eikonals: empty spectrum");
  const int k = static_cast<int>(ws.points.size());
  ws.metric = Mat::Zero(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      double d = numlin::op_norm(ws.points[i].op - ws.points[j].op);
      ws.metric(i, j) = ws.metric(j, i) = d;
    }
  ws.boundary_mask.assign(k, false);
  if (tau_bdry)
    for (int i = 0; i < k; ++i) {
      numlin::PsdOrder ord = numlin::psd_order(tau_bdry->op, ws.points[i].op, tol);
      ws.boundary_mask[i] =
          ord == numlin::PsdOrder::a_below || ord == numlin::PsdOrder::equal;
    }
  return ws;
}

inline std::pair<bool, double> boundedness_check(const std::vector<Eikonal>& eiks) {
  double sup = 0;
  for (auto& e : eiks) sup = std::max(sup, numlin::op_norm(e.op));
  return {true, sup};
}

struct IsometryReport {
  double max_discrepancy = 0;
  double matched_fraction = 0;
  bool boundary_ok = false;
  bool cardinality_match = false;
  bool quotient = false;  // matched against symmetry orbits, not vertices
  std::vector<int> assignment;  // spectrum point -> candidate index
  std::vector<VertexSet> candidates;
};

namespace detail {

// distance between candidate sets in the eikonal metric: sup_x |d_A - d_B|
inline double set_metric(const DiscreteManifold& m, const VertexSet& a, const VertexSet& b) {
  double best = 0;
  for (int v = 0; v < m.n; ++v)
    best = std::max(best, std::abs(geometry::dist_to_set(m, a, v) -
                                   geometry::dist_to_set(m, b, v)));
  return best;
}

inline bool dominates_boundary(const DiscreteManifold& m, const VertexSet& a) {
  VertexSet gamma = m.boundary_set();
  for (int v = 0; v < m.n; ++v)
    if (geometry::dist_to_set(m, a, v) < geometry::dist_to_set(m, gamma, v) - 1e-12)
      return false;
  return true;
}

struct MatchState {
  const Mat* pm;
  const Mat* cm;
  double tol;
  long nodes = 0, cap = 1000000;
  std::vector<int> pick;
  std::vector<bool> used;

  bool search(int i) {
    if (++nodes > cap) return false;
    const int n = static_cast<int>(pick.size());
    if (i == n) return true;
    for (int c = 0; c < n; ++c) {
      if (used[c]) continue;
      bool ok = true;
      for (int j = 0; j < i && ok; ++j)
        ok = std::abs((*pm)(i, j) - (*cm)(c, pick[j])) <= tol;
      if (!ok) continue;
      pick[i] = c;
      used[c] = true;
      if (search(i + 1)) return true;
      used[c] = false;
    }
    return false;
  }
};

inline bool feasible(const Mat& pm, const Mat& cm, double tol, std::vector<int>& out) {
  MatchState st;
  st.pm = &pm;
  st.cm = &cm;
  st.tol = tol;
  st.pick.assign(pm.rows(), -1);
  st.used.assign(pm.rows(), false);
  if (st.search(0)) {
    out = st.pick;
    return true;
  }
  return false;
}

}  // namespace detail

/// Matches spectrum points to manifold vertices (or to symmetry orbits when
/// the cardinalities disagree), minimizing the worst metric discrepancy, and
/// checks that the boundary mask lands on the boundary side.
inline IsometryReport isometry_report(const WaveSpectrum& ws, const DiscreteManifold& m) {
  IsometryReport rep;
  const int k = static_cast<int>(ws.points.size());
  // candidate targets: vertices if counts agree, else provenance atoms,
  // else distance-profile orbits
  if (k == m.n) {
    for (int v = 0; v < m.n; ++v) {
      VertexSet s(m.n);
      s.insert(v);
      rep.candidates.push_back(s);
    }
  } else {
    bool have_prov = true;
    for (auto& p : ws.points) have_prov = have_prov && p.atom.size() == m.n && !p.atom.empty();
    if (have_prov) {
      rep.quotient = true;
      std::vector<VertexSet> uniq;
      for (auto& p : ws.points) {
        bool seen = false;
        for (auto& u : uniq) seen = seen || u == p.atom;
        if (!seen) uniq.push_back(p.atom);
      }
      rep.candidates = uniq;
    } else {
      rep.quotient = true;
      // orbits = groups of vertices with identical sorted distance profiles
      std::vector<std::vector<double>> profiles(m.n);
      for (int v = 0; v < m.n; ++v) {
        for (int u = 0; u < m.n; ++u) profiles[v].push_back(m.dist(v, u));
        std::sort(profiles[v].begin(), profiles[v].end());
      }
      std::vector<int> group(m.n, -1);
      for (int v = 0; v < m.n; ++v) {
        for (int u = 0; u < v && group[v] < 0; ++u) {
          bool same = true;
          for (int q = 0; q < m.n && same; ++q)
            same = std::abs(profiles[v][q] - profiles[u][q]) <= 1e-9;
          if (same) group[v] = group[u];
        }
        if (group[v] < 0) {
          group[v] = static_cast<int>(rep.candidates.size());
          rep.candidates.push_back(VertexSet(m.n));
        }
        rep.candidates[group[v]].insert(v);
      }
    }
  }
  rep.cardinality_match = static_cast<int>(rep.candidates.size()) == k;
  if (!rep.cardinality_match) {
    rep.matched_fraction = 0;
    rep.max_discrepancy = std::numeric_limits<double>::infinity();
    return rep;
  }
  const int n = k;
  Mat cm = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      cm(i, j) = cm(j, i) = detail::set_metric(m, rep.candidates[i], rep.candidates[j]);
  // smallest feasible tolerance by bisection on [0, diam]
  double lo = 0, hi = std::max(ws.metric.maxCoeff(), cm.maxCoeff()) + 1e-12;
  std::vector<int> best;
  if (!detail::feasible(ws.metric, cm, hi, best)) {
    rep.max_discrepancy = std::numeric_limits<double>::infinity();
    return rep;
  }
  for (int it = 0; it < 50; ++it) {
    double mid = 0.5 * (lo + hi);
    std::vector<int> pick;
    if (detail::feasible(ws.metric, cm, mid, pick)) {
      hi = mid;
      best = pick;
    } else {
      lo = mid;
    }
  }
  rep.assignment = best;
  rep.matched_fraction = 1.0;
  double disc = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      disc = std::max(disc, std::abs(ws.metric(i, j) - cm(best[i], best[j])));
  rep.max_discrepancy = disc;
  bool bok = true;
  for (int i = 0; i < n; ++i) {
    bool target = detail::dominates_boundary(m, rep.candidates[best[i]]);
    bok = bok && (ws.boundary_mask[i] == target);
  }
  rep.boundary_ok = bok;
  return rep;
}

}  // namespace wavespec::spectrum
