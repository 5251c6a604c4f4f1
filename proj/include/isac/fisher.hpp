#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isac/errors.hpp"

namespace isac {

/// Collects non-fatal numerical diagnostics (ill conditioning and the like).
using Warnings = std::vector<std::string>;

inline constexpr double kConditionWarnLimit = 1e12;

/// Square symmetric information matrix with one label per parameter.
struct FisherMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;

  FisherMatrix() = default;
  FisherMatrix(std::vector<std::string> l, Eigen::MatrixXd v) : labels(std::move(l)), values(std::move(v)) {
    if (values.rows() != values.cols() || static_cast<std::size_t>(values.rows()) != labels.size()) {
      throw BoundsError(ErrorCode::invalid_argument, "FisherMatrix labels/shape mismatch");
    }
  }

  std::size_t size() const { return labels.size(); }
  double operator()(std::size_t i, std::size_t j) const {
    return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  std::size_t index_of(const std::string& label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw BoundsError(ErrorCode::invalid_argument, "no parameter '" + label + "'");
    return static_cast<std::size_t>(it - labels.begin());
  }

  bool is_symmetric(double rel_tol = 1e-10) const {
    const double scale = values.cwiseAbs().maxCoeff();
    return (values - values.transpose()).cwiseAbs().maxCoeff() <= rel_tol * std::max(scale, 1e-300);
  }
};

namespace detail {

// Symmetric diagonal (Jacobi) equilibration: m = D s D with unit-ish diagonal s.
// Parameters in these models span twenty-plus orders of magnitude, so every
// inversion goes through the scaled matrix.
inline Eigen::VectorXd jacobi_scale(const Eigen::MatrixXd& m) {
  Eigen::VectorXd d(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double v = std::abs(m(i, i));
    d(i) = v > 0.0 ? std::sqrt(v) : 1.0;
  }
  return d;
}

}  // namespace detail

/// Spectral condition number of the Jacobi-equilibrated matrix.
inline double scaled_condition(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd d = detail::jacobi_scale(m);
  const Eigen::MatrixXd s = d.cwiseInverse().asDiagonal() * m * d.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 1.0;
  const double smin = sv(sv.size() - 1);
  return smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
}

/// Inverse via full-pivot LU of the equilibrated matrix. Throws `code` when the
/// matrix is numerically singular; pushes a warning when it is merely ill conditioned.
inline Eigen::MatrixXd invert_information(const Eigen::MatrixXd& m, Warnings* warnings = nullptr,
                                          ErrorCode code = ErrorCode::nuisance_block_singular) {
  if (m.rows() == 0) return m;
  const Eigen::VectorXd d = detail::jacobi_scale(m);
  const Eigen::MatrixXd s = d.cwiseInverse().asDiagonal() * m * d.cwiseInverse().asDiagonal();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(s);
  lu.setThreshold(1e-14);
  if (!lu.isInvertible()) {
    throw BoundsError(code, "information matrix is singular");
  }
  const double cond = scaled_condition(m);
  if (warnings && cond > kConditionWarnLimit) {
    warnings->push_back("ill-conditioned information matrix (scaled condition " + std::to_string(cond) + ")");
  }
  return d.cwiseInverse().asDiagonal() * lu.inverse() * d.cwiseInverse().asDiagonal();
}

inline Eigen::MatrixXd invert(const FisherMatrix& m, Warnings* warnings = nullptr) {
  return invert_information(m.values, warnings);
}

/// Effective information for the parameters in `keep`: C - B^T A^-1 B, where A is
/// the block of all other parameters. The order of `keep` is preserved.
inline FisherMatrix schur_complement(const FisherMatrix& m, const std::vector<std::size_t>& keep,
                                     Warnings* warnings = nullptr) {
  const std::size_t n = m.size();
  std::vector<bool> kept(n, false);
  for (auto k : keep) {
    if (k >= n || kept[k]) throw BoundsError(ErrorCode::invalid_argument, "invalid keep index set");
    kept[k] = true;
  }
  std::vector<std::size_t> drop;
  for (std::size_t i = 0; i < n; ++i)
    if (!kept[i]) drop.push_back(i);

  const auto nk = static_cast<Eigen::Index>(keep.size());
  const auto nd = static_cast<Eigen::Index>(drop.size());
  Eigen::MatrixXd A(nd, nd), B(nd, nk), C(nk, nk);
  for (Eigen::Index i = 0; i < nd; ++i) {
    for (Eigen::Index j = 0; j < nd; ++j) A(i, j) = m(drop[i], drop[j]);
    for (Eigen::Index j = 0; j < nk; ++j) B(i, j) = m(drop[i], keep[j]);
  }
  for (Eigen::Index i = 0; i < nk; ++i)
    for (Eigen::Index j = 0; j < nk; ++j) C(i, j) = m(keep[i], keep[j]);

  std::vector<std::string> labels;
  for (auto k : keep) labels.push_back(m.labels[k]);
  if (nd == 0) return FisherMatrix(std::move(labels), C);

  Eigen::MatrixXd result = C - B.transpose() * invert_information(A, warnings) * B;
  result = 0.5 * (result + result.transpose());
  return FisherMatrix(std::move(labels), std::move(result));
}

inline FisherMatrix schur_complement(const FisherMatrix& m, const std::vector<std::string>& keep,
                                     Warnings* warnings = nullptr) {
  std::vector<std::size_t> idx;
  for (const auto& l : keep) idx.push_back(m.index_of(l));
  return schur_complement(m, idx, warnings);
}

// ---------------------------------------------------------------------------
// 2x2 helpers shared by the bound pipelines

/// Relative determinant test used to declare a 2x2 information matrix singular.
inline bool is_singular_2x2(const Eigen::Matrix2d& m, double rel_tol = 1e-10) {
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double scale = std::abs(m(0, 0) * m(1, 1)) + m(0, 1) * m(1, 0);
  return !(det > rel_tol * scale) || !std::isfinite(det);
}

}  // namespace isac
