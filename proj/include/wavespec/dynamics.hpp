#pragma once

#include "wavespec/green.hpp"
#include "wavespec/numlin.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavespec::dynamics {

using green::GreenSystem;
using green::SpectralData;
using numlin::Mat;
using numlin::Subspace;
using numlin::SymOp;
using numlin::Vec;

/// Eigenmode picture of the evolution: weight-orthonormal modes with their
/// frequencies squared. Works the same for the graph Dirichlet operator and
/// for its diagonal copy living on spectral coordinates.
struct Propagator {
  Vec weight;
  Vec lambda;
  Mat modes;  // columns weight-orthonormal

  int dim() const { return static_cast<int>(weight.size()); }

  /// Operator matrix reassembled from the modes.
  Mat op_matrix() const {
    return modes * lambda.asDiagonal() * modes.transpose() * Mat(weight.asDiagonal());
  }
  Vec coeffs(const Vec& y) const {
    return modes.transpose() * Mat(weight.asDiagonal()) * y;
  }
};

inline Propagator propagator_of(const GreenSystem& gs) {
  return {gs.w_int, gs.eig.values, gs.eig.vectors};
}

/// Evolution plus the boundary continuation channel; covers both the graph
/// picture (continuation = harmonic extension) and the spectral-coordinate
/// picture built from inverse data.
struct WaveSystem {
  Propagator prop;
  Mat cont;  // boundary -> state
  Vec w_bdry;
};

inline WaveSystem wave_system(const GreenSystem& gs) {
  return {propagator_of(gs), gs.pi, gs.w_bdry};
}

enum class Interp { linear, constant };

/// Time signal on an increasing grid starting at 0. Controls driving the
/// evolution carry two leading zero samples (supported away from t=0).
struct ControlSignal {
  std::vector<double> tgrid;
  std::vector<Vec> values;
  Interp interp = Interp::linear;

  int steps() const { return static_cast<int>(tgrid.size()); }
  int value_dim() const { return values.empty() ? 0 : static_cast<int>(values[0].size()); }

  void validate() const {
    if (tgrid.size() != values.size() || tgrid.empty())
      throw std::invalid_argument("ControlSignal: grid/value size mismatch");
    if (tgrid[0] != 0.0) throw std::invalid_argument("ControlSignal: grid must start at 0");
    for (size_t i = 1; i < tgrid.size(); ++i)
      if (!(tgrid[i] > tgrid[i - 1]))
        throw std::invalid_argument("ControlSignal: grid not increasing");
  }
  double dt() const {
    if (tgrid.size() < 2) throw std::invalid_argument("ControlSignal: grid too short");
    double d = tgrid[1] - tgrid[0];
    for (size_t i = 1; i < tgrid.size(); ++i)
      if (std::abs(tgrid[i] - tgrid[0] - static_cast<double>(i) * d) > 1e-12)
        throw std::invalid_argument("ControlSignal: grid not uniform");
    return d;
  }
  int index_of(double t) const {
    for (size_t i = 0; i < tgrid.size(); ++i)
      if (std::abs(tgrid[i] - t) <= 1e-12) return static_cast<int>(i);
    throw std::invalid_argument("ControlSignal: time off grid");
  }
};

/// Right shift by k grid steps (zeros enter from the left).
inline ControlSignal delay(const ControlSignal& s, int k) {
  if (k < 0) throw std::invalid_argument("delay: negative shift");
  ControlSignal out = s;
  Vec z = Vec::Zero(s.value_dim());
  for (int i = s.steps() - 1; i >= 0; --i) out.values[i] = (i - k >= 0) ? s.values[i - k] : z;
  return out;
}

/// Second divided differences on a uniform grid; one-sided at the ends.
inline ControlSignal second_differences(const ControlSignal& s) {
  if (s.steps() < 3) throw std::invalid_argument("second_differences: need >= 3 samples");
  const double d = s.dt();
  ControlSignal out = s;
  const int m = s.steps();
  for (int i = 1; i + 1 < m; ++i)
    out.values[i] = (s.values[i - 1] - 2 * s.values[i] + s.values[i + 1]) / (d * d);
  out.values[0] = (s.values[0] - 2 * s.values[1] + s.values[2]) / (d * d);
  out.values[m - 1] = (s.values[m - 3] - 2 * s.values[m - 2] + s.values[m - 1]) / (d * d);
  return out;
}

struct State {
  Vec pos;
  Vec vel;
};

namespace detail {

// int_a^b sin(omega (t-s)) ds and the moment against (s-a); omega -> 0 limits
// handled by series so zero modes (not present here) would still work.
inline void sin_segment(double omega, double t, double a, double b, double& i0, double& i1) {
  const double ca = std::cos(omega * (t - a)), cb = std::cos(omega * (t - b));
  const double sa = std::sin(omega * (t - a)), sb = std::sin(omega * (t - b));
  i0 = (cb - ca) / omega;
  i1 = (b - a) * cb / omega + (sb - sa) / (omega * omega);
}

inline void cos_segment(double omega, double t, double a, double b, double& j0, double& j1) {
  const double ca = std::cos(omega * (t - a)), cb = std::cos(omega * (t - b));
  const double sa = std::sin(omega * (t - a)), sb = std::sin(omega * (t - b));
  j0 = (sa - sb) / omega;
  j1 = -(b - a) * sb / omega - (cb - ca) / (omega * omega);
}

}  // namespace detail

/// Duhamel integral per eigenmode, segment by segment, exact for the
/// signal's interpolation class. Returns position and velocity.
inline State solve_forced_state(const Propagator& p, const ControlSignal& h, double t) {
  h.validate();
  if (h.value_dim() != p.dim()) throw std::invalid_argument("solve_forced: value dim mismatch");
  const int idx = h.index_of(t);
  const int n = p.dim();
  Mat c(n, h.steps());
  for (int i = 0; i < h.steps(); ++i) c.col(i) = p.coeffs(h.values[i]);
  Vec vpos = Vec::Zero(n), vvel = Vec::Zero(n);
  for (int k = 0; k < n; ++k) {
    const double omega = std::sqrt(p.lambda(k));
    double acc = 0, accv = 0;
    for (int i = 0; i + 1 <= idx; ++i) {
      const double a = h.tgrid[i], b = h.tgrid[i + 1];
      const double ha = c(k, i), hb = c(k, i + 1);
      double i0, i1, j0, j1;
      detail::sin_segment(omega, t, a, b, i0, i1);
      detail::cos_segment(omega, t, a, b, j0, j1);
      if (h.interp == Interp::linear) {
        const double slope = (hb - ha) / (b - a);
        acc += ha * i0 + slope * i1;
        accv += ha * j0 + slope * j1;
      } else {
        acc += ha * i0;
        accv += ha * j0;
      }
    }
    vpos(k) = acc / omega;
    vvel(k) = accv;
  }
  return {p.modes * vpos, p.modes * vvel};
}

inline Vec solve_forced(const Propagator& p, const ControlSignal& h, double t) {
  return solve_forced_state(p, h, t).pos;
}

inline double energy(const Propagator& p, const State& s) {
  Vec cp = p.coeffs(s.pos), cv = p.coeffs(s.vel);
  return 0.5 * (cv.squaredNorm() + (p.lambda.array() * cp.array().square()).sum());
}

/// Boundary-driven state: continuation of the data minus the wave correction
/// driven by its second time differences.
inline Vec solve_boundary(const WaveSystem& ws, const ControlSignal& f, double t) {
  f.validate();
  if (f.steps() < 3) throw std::invalid_argument("solve_boundary: grid too coarse");
  if (f.value_dim() != ws.cont.cols()) throw std::invalid_argument("solve_boundary: boundary dim mismatch");
  ControlSignal h = f;
  for (int i = 0; i < f.steps(); ++i) h.values[i] = ws.cont * f.values[i];
  ControlSignal hdd = second_differences(h);
  return h.values[h.index_of(t)] - solve_forced(ws.prop, hdd, t);
}

enum class Source { D_valued, boundary };

/// Generating family of delayed pulses; each entry remembers which channel
/// and which grid slot produced it.
struct ControlDictionary {
  std::vector<ControlSignal> signals;
  std::vector<int> source;  // channel index (boundary vertex / frame column)
  std::vector<int> center;  // pulse peak slot
  int channels = 0;

  int size() const { return static_cast<int>(signals.size()); }
};

/// One triangular pulse per channel per admissible delay slot. Channel j
/// emits the j-th coordinate (boundary picture) or the j-th column of a
/// given frame (state picture).
inline ControlDictionary pulse_dictionary(int channels, const Mat& channel_vectors, double dt,
                                          double T) {
  if (channels <= 0 || dt <= 0 || T <= 2 * dt)
    throw std::invalid_argument("pulse_dictionary: bad params");
  const int m = static_cast<int>(std::llround(T / dt));
  if (std::abs(m * dt - T) > 1e-9 * T) throw std::invalid_argument("pulse_dictionary: dt must divide T");
  ControlDictionary dict;
  dict.channels = channels;
  std::vector<double> grid(m + 1);
  for (int i = 0; i <= m; ++i) grid[i] = i * dt;
  for (int j = 0; j < channels; ++j) {
    Vec dir = channel_vectors.col(j);
    for (int c = 2; c <= m - 1; ++c) {
      ControlSignal s;
      s.tgrid = grid;
      s.values.assign(m + 1, Vec::Zero(dir.size()));
      s.values[c] = dir;
      // triangular: linear interpolation of a single nonzero sample
      dict.signals.push_back(std::move(s));
      dict.source.push_back(j);
      dict.center.push_back(c);
    }
  }
  return dict;
}

inline ControlDictionary boundary_dictionary(const WaveSystem& ws, double dt, double T) {
  const int nb = static_cast<int>(ws.cont.cols());
  return pulse_dictionary(nb, Mat::Identity(nb, nb), dt, T);
}

/// Reachable span at time t. D_valued runs the forced evolution of
/// continuation-valued pulses through the second-difference formula;
/// boundary runs the boundary problem itself. Both share one code path.
inline Subspace reachable(const WaveSystem& ws, double t, const ControlDictionary& dict,
                          Source src, double tol = numlin::kEpsRank) {
  if (dict.size() == 0) throw std::invalid_argument("reachable: empty dictionary");
  Mat cols(ws.prop.dim(), dict.size());
  for (int j = 0; j < dict.size(); ++j) {
    if (src == Source::boundary) {
      cols.col(j) = solve_boundary(ws, dict.signals[j], t);
    } else {
      ControlSignal h = dict.signals[j];
      for (int i = 0; i < h.steps(); ++i) h.values[i] = ws.cont * dict.signals[j].values[i];
      ControlSignal hdd = second_differences(h);
      cols.col(j) = h.values[h.index_of(t)] - solve_forced(ws.prop, hdd, t);
    }
  }
  return numlin::orthonormalize(cols, ws.prop.weight, tol);
}

/// Input -> state map over the dictionary, its Gram matrix, and the polar
/// parts. Control coordinates are Euclidean.
struct ControlOperator {
  Mat W;     // dim x m, columns = final states
  Mat gram;  // m x m, (W^*W)
  Mat modW;  // m x m, (W^*W)^{1/2}
  Mat U;     // dim x m, isometry on Ran modW
  int rank = 0;
};

inline ControlOperator control_operator(const WaveSystem& ws, double T,
                                        const ControlDictionary& dict,
                                        double tol = numlin::kEpsRank) {
  if (dict.size() == 0) throw std::invalid_argument("control_operator: empty dictionary");
  ControlOperator co;
  co.W = Mat(ws.prop.dim(), dict.size());
  for (int j = 0; j < dict.size(); ++j)
    co.W.col(j) = solve_boundary(ws, dict.signals[j], T);
  co.gram = co.W.transpose() * Mat(ws.prop.weight.asDiagonal()) * co.W;
  co.gram = 0.5 * (co.gram + co.gram.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(co.gram);
  Vec ev = es.eigenvalues().cwiseMax(0.0);
  Vec root = ev.cwiseSqrt();
  co.modW = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  const double smax = root.size() ? root(root.size() - 1) : 0.0;
  Vec inv = Vec::Zero(root.size());
  co.rank = 0;
  for (int i = 0; i < root.size(); ++i)
    if (smax > 0 && root(i) > tol * smax) {
      inv(i) = 1.0 / root(i);
      ++co.rank;
    }
  Mat modW_pinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  co.U = co.W * modW_pinv;
  return co;
}

inline Mat connecting(const ControlOperator& co) { return co.gram; }

/// Response record: flux of the boundary-driven field at every grid time.
inline ControlSignal response(const GreenSystem& gs, const ControlSignal& f) {
  WaveSystem ws = wave_system(gs);
  ControlSignal out = f;
  for (int i = 0; i < f.steps(); ++i) {
    green::FullField u{solve_boundary(ws, f, f.tgrid[i]), f.values[i]};
    out.values[i] = gs.gamma1(u);
  }
  return out;
}

/// Generator recovered from the modulus of the control operator: pairs
/// (|W|c, |W|(-c'')) with c'' formed from neighboring pulses of the same
/// channel, fitted as one linear map and compared against the true action
/// conjugated through the isometry.
struct GeneratorReport {
  numlin::FittedMap fitted;     // on control coordinates
  double equivalence_residual;  // vs U^* A U on the fitted domain
  Vec fitted_eigs;              // eigenvalues of the fitted map on its domain
  int pairs_used = 0;
};

inline GeneratorReport reconstruct_generator(const WaveSystem& ws, double T,
                                             const ControlDictionary& dict,
                                             double tol = numlin::kEpsRank) {
  ControlOperator co = control_operator(ws, T, dict, tol);
  if (co.rank == 0) throw std::invalid_argument("reconstruct_generator: zero rank; enrich the dictionary");
  const int m = dict.size();
  // locate (channel, center) -> dictionary index
  std::vector<std::vector<int>> slot(dict.channels);
  int max_center = 0;
  for (int j = 0; j < m; ++j) max_center = std::max(max_center, dict.center[j]);
  for (auto& s : slot) s.assign(max_center + 2, -1);
  for (int j = 0; j < m; ++j) slot[dict.source[j]][dict.center[j]] = j;
  const double d = dict.signals[0].dt();
  std::vector<std::pair<Vec, Vec>> pairs;
  for (int j = 0; j < m; ++j) {
    const int b = dict.source[j], c = dict.center[j];
    if (c - 1 < 2 || slot[b][c - 1] < 0 || slot[b][c + 1] < 0) continue;
    Vec cj = Vec::Zero(m);
    cj(j) = 1.0;
    Vec cdd = Vec::Zero(m);
    cdd(slot[b][c - 1]) += 1.0 / (d * d);
    cdd(j) += -2.0 / (d * d);
    cdd(slot[b][c + 1]) += 1.0 / (d * d);
    pairs.emplace_back(co.modW * cj, co.modW * (-cdd));
  }
  if (pairs.empty()) throw std::invalid_argument("reconstruct_generator: no interior pulses; enrich the dictionary");
  GeneratorReport rep;
  rep.pairs_used = static_cast<int>(pairs.size());
  Vec ones = Vec::Ones(m);
  rep.fitted = numlin::fit_linear_map(pairs, ones, tol);
  // true action seen from the control side
  Mat a = ws.prop.op_matrix();
  Mat ustar = co.U.transpose() * Mat(ws.prop.weight.asDiagonal());
  Mat oracle = ustar * a * co.U;
  Mat p = rep.fitted.domain.projection();
  Mat diff = p * (rep.fitted.op - oracle) * p;
  Mat base = p * rep.fitted.op * p;
  double nb = numlin::op_norm(base, ones, ones);
  rep.equivalence_residual = nb > 0 ? numlin::op_norm(diff, ones, ones) / nb : 0.0;
  // spectrum of the fitted map restricted to its domain
  const Subspace& dom = rep.fitted.domain;
  if (dom.rank() > 0) {
    Mat small = dom.frame.transpose() * rep.fitted.op * dom.frame;
    small = 0.5 * (small + small.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(small);
    rep.fitted_eigs = es.eigenvalues();
  }
  return rep;
}

inline double psi_eps(double lambda, double eps) {
  const double r = std::sqrt(lambda);
  return (2 * std::cos(r * eps) - std::cos(2 * r * eps) - 1) / (eps * eps * lambda);
}

/// Staircase-control approximation of an instantaneous state: drives with
/// +/- 1/eps^2 bursts just before the readout time and reports the observed
/// errors next to the closed-form bound they must obey.
struct Lemma2Report {
  std::vector<double> residuals;
  std::vector<double> bounds;  // ||y|| * max_k |1 - psi_eps(lambda_k)|
};

inline Lemma2Report lemma2_probe(const Propagator& p, const Vec& y, double r,
                                 const std::vector<double>& eps_list) {
  if (!(r > 0)) throw std::invalid_argument("lemma2_probe: r must be positive");
  Lemma2Report rep;
  const double ny = std::sqrt((p.weight.array() * y.array().square()).sum());
  for (double eps : eps_list) {
    if (!(r - 2 * eps > 0)) throw std::invalid_argument("lemma2_probe: eps too large");
    ControlSignal h;
    h.interp = Interp::constant;
    h.tgrid = {0.0, r - 2 * eps, r - eps, r};
    const double amp = 1.0 / (eps * eps);
    h.values = {Vec::Zero(y.size()), Vec(amp * y), Vec(-amp * y), Vec::Zero(y.size())};
    Vec v = solve_forced(p, h, r);
    rep.residuals.push_back(std::sqrt((p.weight.array() * (y - v).array().square()).sum()));
    double worst = 0;
    for (int k = 0; k < p.lambda.size(); ++k)
      worst = std::max(worst, std::abs(1.0 - psi_eps(p.lambda(k), eps)));
    rep.bounds.push_back(ny * worst);
  }
  return rep;
}

/// Diagonal copy of the operator on spectral coordinates, with the image of
/// the harmonic subspace, rebuilt from eigenvalues and boundary fluxes.
struct TildePair {
  SymOp Ltilde;
  Subspace Dtilde;
  Subspace dom;   // Ltilde^{-1} of the complement of Dtilde
  Mat cont;       // boundary -> spectral coordinates, columns before orthonormalization
  bool degenerate = false;
};

inline TildePair reconstruct_from_spectral(const SpectralData& sd, int K) {
  const int total = static_cast<int>(sd.lambda.size());
  if (K < 1 || K > total) throw std::invalid_argument("reconstruct_from_spectral: bad K");
  const int nb = static_cast<int>(sd.boundary_weight.size());
  TildePair tp;
  Vec lam(K);
  for (int k = 0; k < K; ++k) lam(k) = sd.lambda[k];
  Vec ones = Vec::Ones(K);
  tp.Ltilde = SymOp::diagonal(lam, ones);
  tp.cont = Mat(K, nb);
  for (int b = 0; b < nb; ++b)
    for (int k = 0; k < K; ++k)
      tp.cont(k, b) = -(1.0 / lam(k)) * sd.boundary_weight(b) * sd.beta[k](b);
  tp.Dtilde = numlin::orthonormalize(tp.cont, ones);
  tp.degenerate = tp.Dtilde.rank() < nb;
  Subspace perp = numlin::complement_space(tp.Dtilde);
  Mat img(K, perp.rank());
  for (int j = 0; j < perp.rank(); ++j) img.col(j) = perp.frame.col(j).array() / lam.array();
  tp.dom = numlin::orthonormalize(img, ones);
  return tp;
}

inline WaveSystem wave_system(const TildePair& tp, const Vec& w_bdry) {
  Propagator p;
  const int k = tp.Ltilde.dim;
  p.weight = Vec::Ones(k);
  p.lambda = tp.Ltilde.entries.diagonal();
  p.modes = Mat::Identity(k, k);
  return {p, tp.cont, w_bdry};
}

}  // namespace wavespec::dynamics
