#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "privmc/parallel.hpp"

namespace privmc {

// Row-major sparse matrix (CSR without the class baggage). Column indices
// are sorted within each row; rows may be empty. This is the only matrix
// shape the user-facing algorithms ever hold: m can be huge, n is moderate,
// and nothing here ever materializes an m x n dense array.
struct SparseRows {
  Eigen::Index ncols = 0;
  std::vector<std::size_t> offsets{0};  // size m+1
  std::vector<Eigen::Index> cols;
  std::vector<double> vals;

  std::size_t rows() const { return offsets.size() - 1; }
  std::size_t nnz() const { return cols.size(); }

  std::span<const Eigen::Index> row_cols(std::size_t i) const {
    return {cols.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
  std::span<const double> row_vals(std::size_t i) const {
    return {vals.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
  std::span<double> row_vals(std::size_t i) {
    return {vals.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }

  double row_norm(std::size_t i) const {
    double s = 0.0;
    for (double v : row_vals(i)) s += v * v;
    return std::sqrt(s);
  }
};

namespace detail {
constexpr std::size_t kCovarianceChunk = 1024;
}

// W = sum_i a_i a_i^T as a dense n x n matrix. Rows are accumulated into the
// upper triangle in fixed chunks and the chunk partials are folded in a fixed
// pairwise order (see chunked_tree_reduce), so the result is bit-identical
// for any thread count. The lower triangle is mirrored at the end, which also
// makes W symmetric to bit precision.
inline Eigen::MatrixXd covariance_accumulate(const SparseRows& rows) {
  const Eigen::Index n = rows.ncols;
  Eigen::MatrixXd W = chunked_tree_reduce<Eigen::MatrixXd>(
      rows.rows(), detail::kCovarianceChunk, Eigen::MatrixXd::Zero(n, n).eval(),
      [&](std::size_t begin, std::size_t end) {
        Eigen::MatrixXd part = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t i = begin; i < end; ++i) {
          const auto cs = rows.row_cols(i);
          const auto vs = rows.row_vals(i);
          for (std::size_t a = 0; a < cs.size(); ++a)
            for (std::size_t b = a; b < cs.size(); ++b)
              part(cs[a], cs[b]) += vs[a] * vs[b];
        }
        return part;
      },
      [](Eigen::MatrixXd x, Eigen::MatrixXd y) {
        x += y;
        return x;
      });
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) W(j, i) = W(i, j);
  return W;
}

// out = A^T A v without forming A^T A: one sparse dot and one sparse axpy per
// row, O(nnz) time and no allocation. Row order is fixed, so the result is
// deterministic.
inline void gram_matvec(const SparseRows& rows, std::span<const double> v,
                        std::span<double> out) {
  if (static_cast<Eigen::Index>(v.size()) != rows.ncols ||
      out.size() != v.size())
    throw std::invalid_argument("gram_matvec: size mismatch");
  for (double& x : out) x = 0.0;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const auto cs = rows.row_cols(i);
    const auto vs = rows.row_vals(i);
    double dot = 0.0;
    for (std::size_t a = 0; a < cs.size(); ++a) dot += vs[a] * v[cs[a]];
    for (std::size_t a = 0; a < cs.size(); ++a) out[cs[a]] += dot * vs[a];
  }
}

inline Eigen::VectorXd gram_matvec(const SparseRows& rows, const Eigen::VectorXd& v) {
  Eigen::VectorXd out(v.size());
  gram_matvec(rows, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())),
              std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

// ||A v||^2 = v^T (A^T A) v, again one pass over the rows.
inline double gram_quadratic_form(const SparseRows& rows, std::span<const double> v) {
  double total = 0.0;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const auto cs = rows.row_cols(i);
    const auto vs = rows.row_vals(i);
    double dot = 0.0;
    for (std::size_t a = 0; a < cs.size(); ++a) dot += vs[a] * v[cs[a]];
    total += dot * dot;
  }
  return total;
}

}  // namespace privmc
