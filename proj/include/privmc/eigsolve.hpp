#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Core>

#include "privmc/rng.hpp"

namespace privmc {

struct EigPair {
  Eigen::VectorXd v;        // unit length, sign-normalized
  double lambda_hat = 0.0;  // sqrt(max(0, v^T W v)) for the returned v
  bool converged = true;
};

namespace detail {

// Canonical sign: first coordinate with magnitude > 1e-12 is positive.
inline void fix_sign(Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

// Unit start vector drawn from the stream; redrawn in the (measure-zero)
// event of a zero draw.
inline Eigen::VectorXd random_unit_start(Eigen::Index n, const RngStream& stream) {
  auto eng = stream.engine();
  Eigen::VectorXd v(n);
  std::span<double> span(v.data(), static_cast<std::size_t>(n));
  double norm = 0.0;
  do {
    gaussian_fill(span, 1.0, eng);
    norm = v.norm();
  } while (norm == 0.0);
  v /= norm;
  return v;
}

}  // namespace detail

// Top eigenpair of a symmetric W by power iteration from a seeded random
// start. W can be indefinite (it is usually covariance plus noise), so the
// iteration runs on W + cI with c = ||W||_inf, which is positive definite by
// Gershgorin; that steers the iterate to the algebraically largest
// eigenvalue rather than the largest in magnitude. Stops when successive
// Rayleigh quotients v^T W v agree to tol (scaled by 1 + |quotient|) AND the
// residual ||W v - q v|| meets the same bound: the Rayleigh test alone can
// stop with a residual near sqrt(tol), and downstream consumers want an
// actual eigenvector. Hitting max_iter clears converged and returns the last
// iterate. lambda_hat = sqrt(max(0, quotient)): the eigenvalues of a
// noiseless gram matrix are squared singular values, so the clamp only ever
// removes noise artifacts. Degenerate spectra (W = aI) leave the start
// direction untouched, which is the documented behavior.
inline EigPair top_eig_exact(const Eigen::MatrixXd& W, double tol, int max_iter,
                             const RngStream& stream) {
  if (W.rows() != W.cols()) throw std::invalid_argument("top_eig_exact: W not square");
  if (!(tol > 0.0) || max_iter < 1)
    throw std::invalid_argument("top_eig_exact: bad tol/max_iter");
  const Eigen::Index n = W.rows();
  const double shift = W.cwiseAbs().rowwise().sum().maxCoeff();

  Eigen::VectorXd v = detail::random_unit_start(n, stream);
  Eigen::VectorXd Wv = W * v;
  double quotient = v.dot(Wv);
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd next = Wv + shift * v;
    const double norm = next.norm();
    if (norm == 0.0) {  // only possible when W + cI annihilates v exactly
      converged = true;
      break;
    }
    v = next / norm;
    Wv = W * v;
    const double q = v.dot(Wv);
    const double bound = tol * (1.0 + std::abs(q));
    const bool done =
        std::abs(q - quotient) <= bound && (Wv - q * v).norm() <= bound;
    quotient = q;
    if (done) {
      converged = true;
      break;
    }
  }
  detail::fix_sign(v);
  return EigPair{std::move(v), std::sqrt(std::max(0.0, quotient)), converged};
}

struct SubspaceBasis {
  Eigen::MatrixXd V;  // n x r, orthonormal columns, sign-normalized
  bool converged = true;
};

// Top-r invariant subspace by block power iteration with modified
// Gram-Schmidt re-orthonormalization, same Gershgorin shift as above.
// Convergence needs two things, mirroring the scalar solver: the chordal
// distance between successive subspaces, sqrt(r - ||Q_old^T Q_new||_F^2)
// (rotation-invariant), and the block residual ||W V - V (V^T W V)||_F
// within tol * (1 + ||V^T W V||_F). The step test alone can stop an order
// of magnitude short of tol when the trailing spectral gap is small.
inline SubspaceBasis top_r_subspace(const Eigen::MatrixXd& W, Eigen::Index r,
                                    const RngStream& stream, double tol = 1e-9,
                                    int max_sweeps = 1000) {
  const Eigen::Index n = W.rows();
  if (W.rows() != W.cols()) throw std::invalid_argument("top_r_subspace: W not square");
  if (r < 1 || r > n) throw std::invalid_argument("top_r_subspace: need 1 <= r <= n");
  const double shift = W.cwiseAbs().rowwise().sum().maxCoeff();

  auto eng = stream.engine();
  Eigen::MatrixXd Q(n, r);
  std::span<double> span(Q.data(), static_cast<std::size_t>(n * r));
  gaussian_fill(span, 1.0, eng);

  auto orthonormalize = [&](Eigen::MatrixXd& B) {
    for (Eigen::Index j = 0; j < r; ++j) {
      for (Eigen::Index i = 0; i < j; ++i)
        B.col(j) -= B.col(i).dot(B.col(j)) * B.col(i);
      const double norm = B.col(j).norm();
      if (norm < 1e-300)
        throw std::runtime_error("top_r_subspace: block lost rank");
      B.col(j) /= norm;
    }
  };
  orthonormalize(Q);

  bool converged = false;
  Eigen::MatrixXd WQ = W * Q;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Eigen::MatrixXd B = WQ + shift * Q;
    orthonormalize(B);
    const double overlap = (Q.transpose() * B).squaredNorm();
    const double dist = std::sqrt(std::max(0.0, static_cast<double>(r) - overlap));
    WQ = W * B;  // doubles as next sweep's multiply
    const Eigen::MatrixXd H = B.transpose() * WQ;
    const double residual = (WQ - B * H).norm();
    Q = std::move(B);
    if (dist < tol && residual <= tol * (1.0 + H.norm())) {
      converged = true;
      break;
    }
  }
  for (Eigen::Index j = 0; j < r; ++j) {
    Eigen::VectorXd col = Q.col(j);
    detail::fix_sign(col);
    Q.col(j) = col;
  }
  return SubspaceBasis{std::move(Q), converged};
}

}  // namespace privmc
