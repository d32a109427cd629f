#pragma once

#include "wavespec/geometry.hpp"
#include "wavespec/numlin.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace wavespec::green {

using numlin::Mat;
using numlin::SymOp;
using numlin::Subspace;
using numlin::Vec;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// State with an attached boundary trace.
struct FullField {
  Vec interior;
  Vec trace;
};

struct SpectralData {
  std::vector<double> lambda;      // ascending
  std::vector<Vec> beta;           // boundary vectors, aligned with lambda
  Vec boundary_weight;
};

/// Discrete realization of the collection {H, G; A, Gamma0, Gamma1}. The
/// stiffness matrix uses edge conductance 1/length; the state inner products
/// use the vertex volume weights, the boundary one its measure shares.
struct GreenSystem {
  geometry::DiscreteManifold m;
  std::vector<int> interior;  // vertex ids, ascending
  std::vector<int> bdry;      // vertex ids, ascending
  Mat K_II, K_IB, K_BI, K_BB;
  Vec w_int, w_bdry;
  SymOp L;                    // Dirichlet operator on the interior
  numlin::EigPairs eig;       // of L, cached
  double kappa = 0;           // = lambda_1
  int sign_flux = 1;          // orientation of Gamma1, fixed at assembly
  int sign_pi = -1;           // Pi = sign_pi * (Gamma1 L^{-1})^*, fixed at assembly
  Mat pi;                     // harmonic continuation, |I| x |B|
  Subspace harmonic;          // D = Ran Pi

  int ni() const { return static_cast<int>(interior.size()); }
  int nb() const { return static_cast<int>(bdry.size()); }

  Vec gamma0(const FullField& u) const { return u.trace; }

  Vec gamma1(const FullField& u) const {
    return sign_flux * w_bdry.cwiseInverse().asDiagonal() *
           (K_BI * u.interior + K_BB * u.trace);
  }

  /// A acts as the weighted Laplacian read at interior vertices.
  Vec apply_A(const FullField& u) const {
    return w_int.cwiseInverse().asDiagonal() * (K_II * u.interior + K_IB * u.trace);
  }

  FullField zero_trace(const Vec& y) const { return {y, Vec::Zero(nb())}; }

  Vec solve_L(const Vec& y) const {  // L^{-1} y
    return K_II.ldlt().solve(Vec(w_int.asDiagonal() * y));
  }

  double energy(const Vec& v, const Vec& v_t) const {
    return 0.5 * (numlin::wdot(w_int, v_t, v_t) + numlin::wdot(w_int, L.apply(v), v));
  }
};

inline GreenSystem assemble(const geometry::DiscreteManifold& m) {
  GreenSystem gs;
  gs.m = m;
  gs.bdry = m.boundary;
  gs.interior = m.interior();
  const int ni = gs.ni(), nb = gs.nb();
  if (ni == 0) throw std::invalid_argument("assemble: no interior vertices");

  std::vector<int> pos(m.n, -1), side(m.n, 0);  // side: 0 interior, 1 boundary
  for (int i = 0; i < ni; ++i) pos[gs.interior[i]] = i;
  for (int b = 0; b < nb; ++b) pos[gs.bdry[b]] = b, side[gs.bdry[b]] = 1;

  Mat K = Mat::Zero(m.n, m.n);
  for (auto& [i, j, len] : m.edges) {
    double c = 1.0 / len;
    K(i, i) += c;
    K(j, j) += c;
    K(i, j) -= c;
    K(j, i) -= c;
  }
  gs.K_II = Mat::Zero(ni, ni);
  gs.K_IB = Mat::Zero(ni, nb);
  gs.K_BI = Mat::Zero(nb, ni);
  gs.K_BB = Mat::Zero(nb, nb);
  for (int a = 0; a < m.n; ++a)
    for (int b = 0; b < m.n; ++b) {
      if (K(a, b) == 0) continue;
      if (!side[a] && !side[b]) gs.K_II(pos[a], pos[b]) = K(a, b);
      else if (!side[a] && side[b]) gs.K_IB(pos[a], pos[b]) = K(a, b);
      else if (side[a] && !side[b]) gs.K_BI(pos[a], pos[b]) = K(a, b);
      else gs.K_BB(pos[a], pos[b]) = K(a, b);
    }

  gs.w_int = Vec(ni);
  for (int i = 0; i < ni; ++i) gs.w_int(i) = m.weight(gs.interior[i]);
  gs.w_bdry = m.boundary_weight;

  // interior connectivity: K_II must be irreducible enough to be definite;
  // positive definiteness is the actual check
  gs.L = SymOp(gs.w_int.cwiseInverse().asDiagonal() * gs.K_II, gs.w_int);
  gs.eig = numlin::eigh(gs.L);
  gs.kappa = gs.eig.values(0);
  if (!(gs.kappa > 0)) throw std::invalid_argument("assemble: Dirichlet operator not positive definite");

  gs.pi = -gs.K_II.ldlt().solve(gs.K_IB);
  gs.harmonic = numlin::orthonormalize(gs.pi, gs.w_int);
  return gs;
}

/// Solves the Dirichlet problem with trace phi; constants and, on the path
/// graph, affine data come out exactly.
inline Vec harmonic_extension(const GreenSystem& gs, const Vec& phi) {
  if (phi.size() != gs.nb()) throw std::invalid_argument("harmonic_extension: trace size");
  return gs.pi * phi;
}

/// Relative gap between Pi and sign_pi * (Gamma1 L^{-1})^* in the weighted
/// operator norm. The recorded sign is the minimizing one.
inline double pi_adjoint_residual(const GreenSystem& gs) {
  // Gamma1 L^{-1} as a matrix on interior data
  Mat t = gs.sign_flux * gs.w_bdry.cwiseInverse().asDiagonal() * gs.K_BI *
          gs.K_II.ldlt().solve(Mat(gs.w_int.asDiagonal()));
  // weighted adjoint G -> H
  Mat t_star = gs.w_int.cwiseInverse().asDiagonal() * t.transpose() * gs.w_bdry.asDiagonal();
  double denom = numlin::op_norm(gs.pi, gs.w_int, gs.w_bdry);
  return numlin::op_norm(Mat(gs.pi - gs.sign_pi * t_star), gs.w_int, gs.w_bdry) / denom;
}

/// Membership test for the harmonic class: trace-determined and annihilated
/// by A.
inline bool characterize_A(const GreenSystem& gs, const FullField& u, double tol) {
  double nu = std::sqrt(numlin::wdot(gs.w_int, u.interior, u.interior) +
                        numlin::wdot(gs.w_bdry, u.trace, u.trace));
  if (nu == 0) return true;
  Vec ext = harmonic_extension(gs, u.trace);
  double d1 = numlin::wnorm(gs.w_int, Vec(ext - u.interior));
  double d2 = numlin::wnorm(gs.w_int, gs.apply_A(u));
  return d1 <= tol * nu && d2 <= tol * nu * numlin::op_norm(gs.L);
}

/// L^{-1} applied to the orthogonal complement of the harmonic subspace.
inline Subspace dom_L0(const GreenSystem& gs) {
  Subspace perp = numlin::complement_space(gs.harmonic);
  Mat img(gs.ni(), perp.rank());
  for (int j = 0; j < perp.rank(); ++j) img.col(j) = gs.solve_L(perp.frame.col(j));
  return numlin::orthonormalize(img, gs.w_int);
}

inline SpectralData spectral_data(const GreenSystem& gs) {
  SpectralData sd;
  sd.boundary_weight = gs.w_bdry;
  for (int k = 0; k < gs.ni(); ++k) {
    sd.lambda.push_back(gs.eig.values(k));
    FullField f = gs.zero_trace(gs.eig.vectors.col(k));
    sd.beta.push_back(gs.gamma1(f));
  }
  return sd;
}

/// Solves the Helmholtz problem off the spectrum and reads the flux of the
/// full field; the z = 0 case reduces to the harmonic continuation.
inline CVec weyl(const GreenSystem& gs, std::complex<double> z, const Vec& phi) {
  for (int k = 0; k < gs.eig.values.size(); ++k)
    if (std::abs(z - std::complex<double>(gs.eig.values(k))) < 1e-8)
      throw std::invalid_argument("weyl: z near pole");
  CMat a = gs.K_II.cast<std::complex<double>>() -
           z * CMat(gs.w_int.cast<std::complex<double>>().asDiagonal());
  CVec u = a.partialPivLu().solve(CVec(-gs.K_IB.cast<std::complex<double>>() * phi.cast<std::complex<double>>()));
  return static_cast<double>(gs.sign_flux) * gs.w_bdry.cast<std::complex<double>>().cwiseInverse().asDiagonal() *
         (gs.K_BI.cast<std::complex<double>>() * u +
          gs.K_BB.cast<std::complex<double>>() * phi.cast<std::complex<double>>());
}

}  // namespace wavespec::green
