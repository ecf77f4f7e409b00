#pragma once

// Exact k-DPP machinery: L-ensemble kernels built from quality-scaled unit
// features, their eigendecomposition, elementary symmetric polynomial tables
// and the two-phase spectral sampler. `exact_k_dpp_pmf` enumerates subsets
// directly from determinants and serves as the reference distribution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dprover/error.hpp"

namespace dprover::dpp {

using Subset = std::vector<std::size_t>;
using SubsetPmf = std::map<Subset, double>;

inline constexpr double kUnitNormTolerance = 1e-6;
inline constexpr double kDefaultClampTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-8;
inline constexpr std::size_t kMaxOracleOrder = 12;

/// N unit-norm diversity features (stored as columns) with positive qualities.
class FeatureBank {
public:
  FeatureBank(Eigen::MatrixXd features, Eigen::VectorXd qualities)
      : features_(std::move(features)), qualities_(std::move(qualities)) {
    if (features_.cols() != qualities_.size())
      throw InvalidInput("feature bank: " + std::to_string(features_.cols()) +
                         " features but " + std::to_string(qualities_.size()) +
                         " qualities");
    if (features_.cols() == 0 || features_.rows() == 0)
      throw InvalidInput("feature bank: empty");
    for (Eigen::Index i = 0; i < features_.cols(); ++i) {
      const double norm = features_.col(i).norm();
      if (!(std::abs(norm - 1.0) <= kUnitNormTolerance))
        throw InvalidInput("feature bank: feature " + std::to_string(i) +
                           " has norm " + std::to_string(norm));
      if (!(qualities_[i] > 0.0) || !std::isfinite(qualities_[i]))
        throw InvalidInput("feature bank: quality " + std::to_string(i) +
                           " is not positive");
    }
  }

  /// Builds a bank from per-item feature rows; all rows must share a length.
  static FeatureBank from_rows(std::span<const std::vector<double>> rows,
                               std::span<const double> qualities) {
    if (rows.empty())
      throw InvalidInput("feature bank: empty");
    const std::size_t dim = rows.front().size();
    Eigen::MatrixXd features(static_cast<Eigen::Index>(dim),
                             static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != dim)
        throw InvalidInput("feature bank: feature " + std::to_string(i) +
                           " has dimension " + std::to_string(rows[i].size()) +
                           ", expected " + std::to_string(dim));
      features.col(static_cast<Eigen::Index>(i)) =
          Eigen::Map<const Eigen::VectorXd>(rows[i].data(),
                                            static_cast<Eigen::Index>(dim));
    }
    Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(
        qualities.data(), static_cast<Eigen::Index>(qualities.size()));
    return FeatureBank(std::move(features), std::move(q));
  }

  std::size_t dim() const { return static_cast<std::size_t>(features_.rows()); }
  std::size_t count() const {
    return static_cast<std::size_t>(features_.cols());
  }
  const Eigen::MatrixXd &features() const { return features_; }
  const Eigen::VectorXd &qualities() const { return qualities_; }

private:
  Eigen::MatrixXd features_;
  Eigen::VectorXd qualities_;
};

/// Symmetric PSD L-ensemble kernel. Symmetry is enforced on construction;
/// positive semi-definiteness is checked by `eigendecompose`.
class Kernel {
public:
  static Kernel from_matrix(Eigen::MatrixXd entries) {
    if (entries.rows() != entries.cols())
      throw InvalidInput("kernel must be square, got " +
                         std::to_string(entries.rows()) + "x" +
                         std::to_string(entries.cols()));
    if (!entries.allFinite())
      throw InvalidInput("kernel has non-finite entries");
    for (Eigen::Index i = 0; i < entries.rows(); ++i)
      for (Eigen::Index j = i + 1; j < entries.cols(); ++j) {
        const double a = entries(i, j), b = entries(j, i);
        if (std::abs(a - b) > 1e-10 * std::max(1.0, std::abs(a)))
          throw InvalidInput("kernel is not symmetric at (" +
                             std::to_string(i) + "," + std::to_string(j) +
                             ")");
      }
    return Kernel(std::move(entries));
  }

  std::size_t order() const { return static_cast<std::size_t>(L_.rows()); }
  const Eigen::MatrixXd &entries() const { return L_; }
  double operator()(std::size_t i, std::size_t j) const {
    return L_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

private:
  explicit Kernel(Eigen::MatrixXd m) : L_(0.5 * (m + m.transpose())) {}
  Eigen::MatrixXd L_;
};

struct Eigendecomposition {
  Eigen::VectorXd eigenvalues;  // ascending, clamped to >= 0
  Eigen::MatrixXd eigenvectors; // column i pairs with eigenvalues[i]

  std::size_t order() const {
    return static_cast<std::size_t>(eigenvalues.size());
  }
  std::size_t rank() const {
    return static_cast<std::size_t>((eigenvalues.array() > 0.0).count());
  }
};

/// E[l][n] = e_l(lambda_1..lambda_n), for l in 0..k and n in 0..N.
class EspTable {
public:
  EspTable(std::size_t k, std::size_t n)
      : k_(k), n_(n), data_((k + 1) * (n + 1), 0.0) {}

  double operator()(std::size_t l, std::size_t n) const {
    return data_[l * (n_ + 1) + n];
  }
  double &operator()(std::size_t l, std::size_t n) {
    return data_[l * (n_ + 1) + n];
  }
  std::size_t max_size() const { return k_; }
  std::size_t item_count() const { return n_; }
  /// e_k over all N eigenvalues: the k-DPP normaliser.
  double normalizer() const { return (*this)(k_, n_); }

private:
  std::size_t k_;
  std::size_t n_;
  std::vector<double> data_;
};

inline Kernel build_kernel(const FeatureBank &bank) {
  const Eigen::MatrixXd B =
      bank.features() * bank.qualities().asDiagonal(); // columns q_i * phi_i
  return Kernel::from_matrix(B.transpose() * B);
}

inline Eigendecomposition
eigendecompose(const Kernel &kernel,
               double clamp_tol = kDefaultClampTolerance) {
  const std::size_t n = kernel.order();
  Eigendecomposition out;
  if (n == 0) {
    out.eigenvalues.resize(0);
    out.eigenvectors.resize(0, 0);
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(kernel.entries());
  if (solver.info() != Eigen::Success)
    throw NumericalError("eigen solver did not converge", n);

  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  const double top = std::max(0.0, out.eigenvalues.maxCoeff());
  for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i) {
    double &v = out.eigenvalues[i];
    if (v < -kPsdTolerance * top)
      throw NumericalError("kernel is not positive semi-definite (eigenvalue " +
                               std::to_string(v) + ")",
                           n);
    if (v < clamp_tol * top || top == 0.0)
      v = 0.0;
  }
  return out;
}

inline EspTable esp_table(std::span<const double> eigenvalues, std::size_t k) {
  const std::size_t n = eigenvalues.size();
  if (k > n)
    throw InvalidInput("esp table: k = " + std::to_string(k) +
                       " exceeds item count " + std::to_string(n));
  EspTable table(k, n);
  for (std::size_t j = 0; j <= n; ++j)
    table(0, j) = 1.0;
  for (std::size_t l = 1; l <= k; ++l)
    for (std::size_t j = 1; j <= n; ++j)
      table(l, j) = table(l, j - 1) + eigenvalues[j - 1] * table(l - 1, j - 1);
  return table;
}

inline EspTable esp_table(const Eigen::VectorXd &eigenvalues, std::size_t k) {
  return esp_table(std::span<const double>(eigenvalues.data(),
                                           static_cast<std::size_t>(
                                               eigenvalues.size())),
                   k);
}

namespace detail {

// Modified Gram-Schmidt over the columns of `basis`, in place.
inline void orthonormalize(Eigen::MatrixXd &basis) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    for (Eigen::Index p = 0; p < c; ++p)
      basis.col(c) -= basis.col(p).dot(basis.col(c)) * basis.col(p);
    const double norm = basis.col(c).norm();
    if (!(norm > 1e-12))
      throw NumericalError("degenerate basis during k-DPP projection",
                           static_cast<std::size_t>(basis.rows()));
    basis.col(c) /= norm;
  }
}

inline void drop_column(Eigen::MatrixXd &m, Eigen::Index col) {
  const Eigen::Index last = m.cols() - 1;
  if (col < last)
    m.block(0, col, m.rows(), last - col) =
        m.block(0, col + 1, m.rows(), last - col).eval();
  m.conservativeResize(Eigen::NoChange, last);
}

} // namespace detail

/// Phase 1: choose k eigenvector indices with probability proportional to
/// their eigenvalue products.
template <std::uniform_random_bit_generator Rng>
std::vector<Eigen::Index> select_elementary_set(const Eigendecomposition &decomp,
                                                std::size_t k, Rng &rng) {
  const std::size_t rank = decomp.rank();
  if (k > rank)
    throw RankDeficient(k, rank);
  const EspTable table = esp_table(decomp.eigenvalues, k);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Eigen::Index> chosen;
  chosen.reserve(k);
  std::size_t remaining = k;
  for (std::size_t n = decomp.order(); n >= 1 && remaining > 0; --n) {
    const double lambda = decomp.eigenvalues[static_cast<Eigen::Index>(n - 1)];
    const double ratio =
        lambda * table(remaining - 1, n - 1) / table(remaining, n);
    if (unit(rng) < ratio) {
      chosen.push_back(static_cast<Eigen::Index>(n - 1));
      --remaining;
    }
  }
  if (remaining != 0)
    throw NumericalError("elementary set selection ended early",
                         decomp.order());
  return chosen;
}

/// Draws a size-k subset with P(A) = det(L_A) / e_k(lambda). Returns sorted
/// item indices.
template <std::uniform_random_bit_generator Rng>
Subset sample_k_dpp(const Eigendecomposition &decomp, std::size_t k, Rng &rng) {
  if (k == 0)
    return {};
  const auto chosen = select_elementary_set(decomp, k, rng);

  const Eigen::Index n = static_cast<Eigen::Index>(decomp.order());
  Eigen::MatrixXd basis(n, static_cast<Eigen::Index>(chosen.size()));
  for (std::size_t c = 0; c < chosen.size(); ++c)
    basis.col(static_cast<Eigen::Index>(c)) = decomp.eigenvectors.col(chosen[c]);

  Subset picked;
  picked.reserve(k);
  std::vector<double> weights(static_cast<std::size_t>(n));
  while (basis.cols() > 0) {
    for (Eigen::Index i = 0; i < n; ++i)
      weights[static_cast<std::size_t>(i)] = basis.row(i).squaredNorm();
    for (std::size_t i : picked)
      weights[i] = 0.0;
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0))
      throw NumericalError("k-DPP item weights vanished", decomp.order());
    for (double &w : weights)
      w /= total;

    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    const std::size_t item = pick(rng);
    picked.push_back(item);

    // Project the basis onto the complement of e_item.
    const Eigen::Index row = static_cast<Eigen::Index>(item);
    Eigen::Index pivot = 0;
    basis.row(row).cwiseAbs().maxCoeff(&pivot);
    const Eigen::VectorXd pivot_col = basis.col(pivot);
    const double pivot_val = pivot_col[row];
    for (Eigen::Index c = 0; c < basis.cols(); ++c)
      if (c != pivot)
        basis.col(c) -= pivot_col * (basis(row, c) / pivot_val);
    detail::drop_column(basis, pivot);
    if (basis.cols() > 0)
      detail::orthonormalize(basis);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

inline Eigen::MatrixXd submatrix(const Kernel &kernel,
                                 std::span<const std::size_t> subset) {
  const Eigen::Index m = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd sub(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      sub(a, b) = kernel(subset[static_cast<std::size_t>(a)],
                         subset[static_cast<std::size_t>(b)]);
  return sub;
}

/// log det(L_A); -infinity when L_A is singular.
inline double subset_log_det(const Kernel &kernel,
                             std::span<const std::size_t> subset) {
  std::vector<bool> seen(kernel.order(), false);
  for (std::size_t i : subset) {
    if (i >= kernel.order())
      throw InvalidInput("subset index " + std::to_string(i) +
                         " out of range for kernel of order " +
                         std::to_string(kernel.order()));
    if (seen[i])
      throw InvalidInput("subset repeats index " + std::to_string(i));
    seen[i] = true;
  }
  if (subset.empty())
    return 0.0;
  Eigen::LLT<Eigen::MatrixXd> chol(submatrix(kernel, subset));
  if (chol.info() != Eigen::Success)
    return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd diag = chol.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any())
    return -std::numeric_limits<double>::infinity();
  return 2.0 * diag.array().log().sum();
}

/// Calls `fn(subset)` for every size-k subset of {0..n-1} in lexicographic
/// order.
template <typename Fn>
void for_each_subset(std::size_t n, std::size_t k, Fn &&fn) {
  if (k > n)
    return;
  Subset current(k);
  std::iota(current.begin(), current.end(), std::size_t{0});
  while (true) {
    fn(static_cast<const Subset &>(current));
    std::size_t pos = k;
    while (pos > 0 && current[pos - 1] == n - k + pos - 1)
      --pos;
    if (pos == 0)
      return;
    ++current[pos - 1];
    for (std::size_t j = pos; j < k; ++j)
      current[j] = current[j - 1] + 1;
  }
}

/// Exact k-DPP distribution by enumeration of determinants. Refuses N > 12.
inline SubsetPmf exact_k_dpp_pmf(const Kernel &kernel, std::size_t k) {
  const std::size_t n = kernel.order();
  if (n > kMaxOracleOrder)
    throw InvalidInput("exact pmf refused for order " + std::to_string(n) +
                       " (limit " + std::to_string(kMaxOracleOrder) + ")");
  if (k == 0 || k > n)
    throw InvalidInput("exact pmf: k = " + std::to_string(k) +
                       " not in 1.." + std::to_string(n));
  SubsetPmf pmf;
  double total = 0.0;
  for_each_subset(n, k, [&](const Subset &s) {
    const double det =
        std::max(0.0, Eigen::FullPivLU<Eigen::MatrixXd>(submatrix(kernel, s))
                          .determinant());
    pmf.emplace(s, det);
    total += det;
  });
  if (!(total > 0.0))
    throw RankDeficient(k, static_cast<std::size_t>(
                               Eigen::FullPivLU<Eigen::MatrixXd>(
                                   kernel.entries())
                                   .rank()));
  for (auto &[subset, p] : pmf)
    p /= total;
  return pmf;
}

/// Half the L1 distance between a pmf and empirical counts over `draws`.
inline double total_variation(const SubsetPmf &pmf,
                              const std::map<Subset, std::size_t> &counts,
                              std::size_t draws) {
  if (draws == 0)
    return 0.0;
  double sum = 0.0;
  for (const auto &[subset, p] : pmf) {
    const auto it = counts.find(subset);
    const double freq =
        it == counts.end() ? 0.0 : static_cast<double>(it->second) / draws;
    sum += std::abs(p - freq);
  }
  for (const auto &[subset, c] : counts)
    if (!pmf.contains(subset))
      sum += static_cast<double>(c) / draws;
  return 0.5 * sum;
}

} // namespace dprover::dpp
