#pragma once

#include "wavespec/green.hpp"
#include "wavespec/spectrum.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace wavespec::model {

using green::GreenSystem;
using numlin::Mat;
using numlin::Subspace;
using numlin::Vec;
using spectrum::SpaceExtension;
using spectrum::WaveSpectrum;

/// Per-point masses of the measure generated by g on the spectrum.
struct SpectralMeasure {
  std::vector<double> mass;
  double total = 0;
};

struct CyclicReport {
  bool full = false;        // algebra orbit of g spans the whole space
  bool orbit_full = false;  // spans one direction per spectrum point
  int rank = 0;
};

namespace detail {

inline std::vector<std::vector<int>> atom_coords(const SpaceExtension& e,
                                                 const WaveSpectrum& ws) {
  std::vector<std::vector<int>> out(ws.points.size());
  for (size_t p = 0; p < ws.points.size(); ++p) {
    if (ws.points[p].atom.size() != static_cast<int>(e.m->n))
      throw std::invalid_argument("model: spectrum points lack set provenance");
    for (size_t i = 0; i < e.carrier.size(); ++i)
      if (ws.points[p].atom.contains(e.carrier[i])) out[p].push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace detail

/// Rank of {P_atom g} against the ambient dimension and the point count.
inline CyclicReport cyclic_check(const SpaceExtension& e, const WaveSpectrum& ws, const Vec& g) {
  if (g.size() != e.dim()) throw std::invalid_argument("cyclic_check: dimension mismatch");
  auto atoms = detail::atom_coords(e, ws);
  Mat cols = Mat::Zero(e.dim(), static_cast<int>(atoms.size()));
  for (size_t p = 0; p < atoms.size(); ++p)
    for (int i : atoms[p]) cols(i, static_cast<int>(p)) = g(i);
  Subspace span = numlin::orthonormalize(cols, e.weight);
  CyclicReport rep;
  rep.rank = span.rank();
  rep.orbit_full = rep.rank == static_cast<int>(atoms.size());
  rep.full = rep.rank == e.dim();
  return rep;
}

inline SpectralMeasure measure(const SpaceExtension& e, const WaveSpectrum& ws, const Vec& g) {
  CyclicReport cr = cyclic_check(e, ws, g);
  if (!cr.orbit_full) throw std::invalid_argument("measure: g is not cyclic");
  auto atoms = detail::atom_coords(e, ws);
  SpectralMeasure mu;
  for (auto& a : atoms) {
    double m = 0;
    for (int i : a) m += e.weight(i) * g(i) * g(i);
    mu.mass.push_back(m);
    mu.total += m;
  }
  return mu;
}

/// Value of the image at each spectrum point: the small-ball ratio, which on
/// a finite spectrum stabilizes to (P_atom y, g)/(P_atom g, g).
inline Vec image(const SpaceExtension& e, const WaveSpectrum& ws, const Vec& g, const Vec& y) {
  auto atoms = detail::atom_coords(e, ws);
  Vec out(static_cast<int>(atoms.size()));
  for (size_t p = 0; p < atoms.size(); ++p) {
    double num = 0, den = 0;
    for (int i : atoms[p]) {
      num += e.weight(i) * y(i) * g(i);
      den += e.weight(i) * g(i) * g(i);
    }
    if (den == 0) throw std::invalid_argument("image: zero mass point");
    out(static_cast<int>(p)) = num / den;
  }
  return out;
}

struct ModelReport {
  Mat op;                    // gauge transform of the Dirichlet operator
  double off_stencil = 0;    // relative matrix mass outside the adjacency pattern
  double spectra_residual = 0;  // eigenvalue drift under the gauge
  bool quotient = false;
};

/// I L0 I^* realized in coordinates; on a singleton spectrum this is the
/// gauge transform diag(g)^{-1} L diag(g), local by the conjugation pattern.
inline ModelReport model_operator(const GreenSystem& gs, const WaveSpectrum& ws, const Vec& g) {
  if (g.size() != gs.ni()) throw std::invalid_argument("model_operator: g must live on the interior");
  for (int i = 0; i < g.size(); ++i)
    if (g(i) == 0) throw std::invalid_argument("model_operator: g vanishes at a vertex");
  ModelReport rep;
  rep.quotient = static_cast<int>(ws.points.size()) != gs.ni();
  Mat d = Mat(g.asDiagonal());
  Mat dinv = Mat(g.cwiseInverse().asDiagonal());
  rep.op = dinv * gs.L.entries * d;
  // adjacency stencil among interior vertices
  double off2 = 0, all2 = 0;
  for (int i = 0; i < gs.ni(); ++i)
    for (int j = 0; j < gs.ni(); ++j) {
      double v = rep.op(i, j);
      all2 += v * v;
      if (i == j) continue;
      int vi = gs.interior[i], vj = gs.interior[j];
      bool adjacent = std::binary_search(gs.m.adj[vi].begin(), gs.m.adj[vi].end(), vj);
      if (!adjacent) off2 += v * v;
    }
  rep.off_stencil = all2 > 0 ? std::sqrt(off2 / all2) : 0;
  Eigen::EigenSolver<Mat> es(rep.op);
  Vec ev = es.eigenvalues().real();
  std::sort(ev.data(), ev.data() + ev.size());
  double drift = 0;
  for (int k = 0; k < ev.size(); ++k)
    drift = std::max(drift, std::abs(ev(k) - gs.eig.values(k)));
  rep.spectra_residual = drift / gs.eig.values(gs.eig.values.size() - 1);
  return rep;
}

}  // namespace wavespec::model
