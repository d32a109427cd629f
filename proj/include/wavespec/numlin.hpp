#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wavespec::numlin {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Default relative singular-value threshold for all rank decisions.
inline constexpr double kEpsRank = 1e-8;

inline double wdot(const Vec& w, const Vec& a, const Vec& b) {
  return (w.array() * a.array() * b.array()).sum();
}

inline double wnorm(const Vec& w, const Vec& a) {
  return std::sqrt(std::max(0.0, wdot(w, a, a)));
}

inline Vec sqrt_weights(const Vec& w) { return w.array().sqrt().matrix(); }

/// Dense self-adjoint operator on a weighted space: (y,z) = sum_i w_i y_i z_i.
/// Self-adjointness means W*A = A^T*W, i.e. D A D^{-1} is symmetric with
/// D = diag(sqrt(w)).
struct SymOp {
  int dim = 0;
  Mat entries;
  Vec weight;

  SymOp() = default;
  SymOp(Mat m, Vec w) : dim(static_cast<int>(w.size())), entries(std::move(m)), weight(std::move(w)) {
    if (entries.rows() != dim || entries.cols() != dim)
      throw std::invalid_argument("SymOp: entries/weight size mismatch");
  }

  static SymOp diagonal(const Vec& d, const Vec& w) {
    return SymOp(Mat(d.asDiagonal()), w);
  }
  static SymOp zero(const Vec& w) {
    return SymOp(Mat::Zero(w.size(), w.size()), w);
  }

  SymOp operator-(const SymOp& o) const { return SymOp(entries - o.entries, weight); }
  SymOp operator+(const SymOp& o) const { return SymOp(entries + o.entries, weight); }

  Vec apply(const Vec& y) const { return entries * y; }
};

/// Eigendecomposition of a SymOp: ascending eigenvalues, W-orthonormal columns.
struct EigPairs {
  Vec values;
  Mat vectors;
};

inline EigPairs eigh(const SymOp& a) {
  const Vec d = sqrt_weights(a.weight);
  Mat b = d.asDiagonal() * a.entries * d.cwiseInverse().asDiagonal();
  b = 0.5 * (b + b.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(b);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigh failed");
  EigPairs out;
  out.values = es.eigenvalues();
  out.vectors = d.cwiseInverse().asDiagonal() * es.eigenvectors();
  return out;
}

/// Subspace of a weighted coordinate space, held as a W-orthonormal frame.
struct Subspace {
  Mat frame;   // dim x rank, frame^T W frame = I
  Vec weight;
  double tol = kEpsRank;

  int dim() const { return static_cast<int>(weight.size()); }
  int rank() const { return static_cast<int>(frame.cols()); }

  /// Projection onto the subspace as a matrix acting on coordinates.
  Mat projection() const {
    return frame * frame.transpose() * Mat(weight.asDiagonal());
  }
  SymOp projection_op() const { return SymOp(projection(), weight); }
};

/// Span of the given vectors with singular values below tol * s_max discarded.
/// All-zero input yields a rank-0 subspace.
inline Subspace orthonormalize(const Mat& vectors, const Vec& weight, double tol = kEpsRank) {
  if (tol <= 0) throw std::invalid_argument("orthonormalize: tol must be positive");
  if (vectors.rows() != weight.size())
    throw std::invalid_argument("orthonormalize: dimension mismatch");
  Subspace s;
  s.weight = weight;
  s.tol = tol;
  if (vectors.cols() == 0) {
    s.frame = Mat::Zero(weight.size(), 0);
    return s;
  }
  const Vec d = sqrt_weights(weight);
  Mat b = d.asDiagonal() * vectors;
  Eigen::BDCSVD<Mat> svd(b, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (smax > 0 && sv(i) > tol * smax) ++r;
  s.frame = d.cwiseInverse().asDiagonal() * svd.matrixU().leftCols(r);
  return s;
}

inline Subspace orthonormalize(const std::vector<Vec>& vectors, const Vec& weight,
                               double tol = kEpsRank) {
  if (vectors.empty()) throw std::invalid_argument("orthonormalize: empty input");
  Mat m(weight.size(), static_cast<Eigen::Index>(vectors.size()));
  for (size_t j = 0; j < vectors.size(); ++j) {
    if (vectors[j].size() != weight.size())
      throw std::invalid_argument("orthonormalize: dimension mismatch");
    m.col(static_cast<Eigen::Index>(j)) = vectors[j];
  }
  return orthonormalize(m, weight, tol);
}

inline Subspace full_space(const Vec& weight) {
  Subspace s;
  s.weight = weight;
  s.frame = Mat(sqrt_weights(weight).cwiseInverse().asDiagonal());
  return s;
}

inline Subspace zero_space(const Vec& weight) {
  Subspace s;
  s.weight = weight;
  s.frame = Mat::Zero(weight.size(), 0);
  return s;
}

/// Principal angles between two subspaces, sorted nonincreasing, in [0, pi/2].
/// Cosines are the singular values of frame_a^T W frame_b.
inline std::vector<double> principal_angles(const Subspace& a, const Subspace& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("principal_angles: ambient mismatch");
  if (a.rank() == 0 || b.rank() == 0) return {};
  Mat c = a.frame.transpose() * a.weight.asDiagonal() * b.frame;
  Eigen::BDCSVD<Mat> svd(c);
  std::vector<double> angles;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    double cv = std::clamp(svd.singularValues()(i), 0.0, 1.0);
    angles.push_back(std::acos(cv));
  }
  std::sort(angles.begin(), angles.end(), std::greater<>());
  return angles;
}

/// Largest angle from a into b; 0 when a is trivial, pi/2 when rank a > rank b.
inline double containment_angle(const Subspace& a, const Subspace& b) {
  if (a.rank() == 0) return 0.0;
  if (a.rank() > b.rank()) return M_PI / 2;
  Mat c = a.frame.transpose() * a.weight.asDiagonal() * b.frame;
  Eigen::BDCSVD<Mat> svd(c);
  const auto& sv = svd.singularValues();
  double smin = sv(std::min<int>(a.rank(), static_cast<int>(sv.size())) - 1);
  return std::acos(std::clamp(smin, 0.0, 1.0));
}

enum class LatticeKind { meet, join, complement };

inline Subspace complement_space(const Subspace& a, double tol = kEpsRank) {
  Mat m = Mat::Identity(a.dim(), a.dim()) - a.projection();
  Subspace c = orthonormalize(m, a.weight, tol);
  return c;
}

inline Subspace join_space(const Subspace& a, const Subspace& b, double tol = kEpsRank) {
  Mat m(a.dim(), a.rank() + b.rank());
  m << a.frame, b.frame;
  return orthonormalize(m, a.weight, tol);
}

/// Meet via double complement; the rank is pinned to the number of principal
/// angles below the angle threshold acos(1-tol) so near-parallel directions
/// count once.
inline Subspace meet_space(const Subspace& a, const Subspace& b, double tol = kEpsRank) {
  Subspace raw = complement_space(join_space(complement_space(a, tol), complement_space(b, tol), tol), tol);
  auto angles = principal_angles(a, b);
  const double angle_tol = std::acos(std::clamp(1.0 - tol, 0.0, 1.0));
  int want = 0;
  for (double th : angles)
    if (th <= angle_tol + 1e-15) ++want;
  if (raw.rank() > want) {
    Subspace cut = raw;
    cut.frame = raw.frame.leftCols(want).eval();
    return cut;
  }
  return raw;
}

inline Subspace lattice_ops(const Subspace& a, const Subspace& b, LatticeKind kind,
                            double tol = kEpsRank) {
  if (a.dim() != b.dim()) throw std::invalid_argument("lattice_ops: ambient mismatch");
  switch (kind) {
    case LatticeKind::join: return join_space(a, b, tol);
    case LatticeKind::meet: return meet_space(a, b, tol);
    case LatticeKind::complement: return complement_space(a, tol);
  }
  throw std::logic_error("lattice_ops: bad kind");
}

enum class PsdOrder { equal, a_below, a_above, incomparable };

inline double op_norm(const SymOp& a) {
  if (a.dim == 0) return 0.0;
  EigPairs e = eigh(a);
  return std::max(std::abs(e.values(0)), std::abs(e.values(e.values.size() - 1)));
}

/// Norm of a general map between weighted spaces (largest singular value of
/// D_out A D_in^{-1}).
inline double op_norm(const Mat& a, const Vec& w_out, const Vec& w_in) {
  Mat b = sqrt_weights(w_out).asDiagonal() * a * sqrt_weights(w_in).cwiseInverse().asDiagonal();
  Eigen::BDCSVD<Mat> svd(b);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

inline PsdOrder psd_order(const SymOp& a, const SymOp& b, double tol) {
  if (a.dim != b.dim) throw std::invalid_argument("psd_order: dimension mismatch");
  SymOp diff = b - a;
  if (op_norm(diff) <= tol) return PsdOrder::equal;
  EigPairs e = eigh(diff);
  const double lo = e.values(0), hi = e.values(e.values.size() - 1);
  if (lo >= -tol && hi > tol) return PsdOrder::a_below;
  if (hi <= tol && lo < -tol) return PsdOrder::a_above;
  return PsdOrder::incomparable;
}

/// Least-squares operator on the span of the inputs, plus relative residual.
struct FittedMap {
  Mat op;           // dim x dim, zero off the input span
  double residual;  // ||op*U - V||_W / ||V||_W (Frobenius, weighted)
  Subspace domain;  // span of the inputs
};

inline FittedMap fit_linear_map(const Mat& inputs, const Mat& outputs, const Vec& weight,
                                double tol = kEpsRank) {
  if (inputs.cols() == 0) throw std::invalid_argument("fit_linear_map: no pairs");
  if (inputs.cols() != outputs.cols() || inputs.rows() != outputs.rows())
    throw std::invalid_argument("fit_linear_map: pair shape mismatch");
  const Vec d = sqrt_weights(weight);
  Mat u = d.asDiagonal() * inputs;
  Mat v = d.asDiagonal() * outputs;
  Eigen::BDCSVD<Mat> svd(u, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  Vec inv = Vec::Zero(sv.size());
  for (int i = 0; i < sv.size(); ++i)
    if (smax > 0 && sv(i) > tol * smax) inv(i) = 1.0 / sv(i);
  Mat pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  Mat op_hat = v * pinv;
  FittedMap out;
  out.op = d.cwiseInverse().asDiagonal() * op_hat * d.asDiagonal();
  out.domain = orthonormalize(inputs, weight, tol);
  Mat res = d.asDiagonal() * (out.op * inputs - outputs);
  double vn = v.norm();
  out.residual = vn > 0 ? res.norm() / vn : res.norm();
  return out;
}

inline FittedMap fit_linear_map(const std::vector<std::pair<Vec, Vec>>& pairs, const Vec& weight,
                                double tol = kEpsRank) {
  if (pairs.empty()) throw std::invalid_argument("fit_linear_map: no pairs");
  Mat u(weight.size(), static_cast<Eigen::Index>(pairs.size()));
  Mat v(weight.size(), static_cast<Eigen::Index>(pairs.size()));
  for (size_t j = 0; j < pairs.size(); ++j) {
    u.col(static_cast<Eigen::Index>(j)) = pairs[j].first;
    v.col(static_cast<Eigen::Index>(j)) = pairs[j].second;
  }
  return fit_linear_map(u, v, weight, tol);
}

/// Monotone chain of subspaces indexed by strictly increasing times.
struct ProjectionFamily {
  std::vector<double> breakpoints;
  std::vector<Subspace> stages;

  void validate(double angle_tol = 1e-8) const {
    if (breakpoints.size() != stages.size())
      throw std::invalid_argument("ProjectionFamily: size mismatch");
    for (size_t k = 1; k < breakpoints.size(); ++k) {
      if (!(breakpoints[k] > breakpoints[k - 1]))
        throw std::invalid_argument("ProjectionFamily: breakpoints not increasing");
      if (containment_angle(stages[k - 1], stages[k]) > angle_tol)
        throw std::invalid_argument("ProjectionFamily: stages not monotone");
    }
  }
  bool complete() const {
    return !stages.empty() && stages.back().rank() == stages.back().dim();
  }
};

}  // namespace wavespec::numlin
