// Ordinal datasets and the per-pair contingency tensor.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ordprobit/model.hpp"

namespace ordprobit {

using CategoryMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// n x q matrix of 1-based categories in 1..K.
class OrdinalDataset {
 public:
  OrdinalDataset(CategoryMatrix rows, int K) : rows_(std::move(rows)), K_(K) {
    if (rows_.rows() < 1) throw std::invalid_argument("dataset has no observations");
    if (rows_.cols() < 2) throw std::invalid_argument("dataset needs at least 2 margins");
    if (K_ < 2) throw std::invalid_argument("K must be >= 2");
    for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
      for (Eigen::Index j = 0; j < rows_.cols(); ++j) {
        const int v = rows_(i, j);
        if (v < 1 || v > K_) {
          throw std::domain_error("category out of range at row " + std::to_string(i) +
                                  ", column " + std::to_string(j) + ": value " +
                                  std::to_string(v) + " not in 1.." + std::to_string(K_));
        }
      }
    }
  }

  int n() const { return static_cast<int>(rows_.rows()); }
  int q() const { return static_cast<int>(rows_.cols()); }
  int K() const { return K_; }
  ModelDims dims() const { return {q(), K_, n()}; }
  const CategoryMatrix& rows() const { return rows_; }
  int operator()(int i, int j) const { return rows_(i, j); }

  std::span<const int> row(int i) const {
    return {rows_.data() + static_cast<std::ptrdiff_t>(i) * rows_.cols(),
            static_cast<std::size_t>(rows_.cols())};
  }

 private:
  CategoryMatrix rows_;
  int K_;
};

/// counts[pair][l][m] = number of observations with Y_r = l and Y_s = m.
class PairCounts {
 public:
  PairCounts(ModelDims dims, std::int64_t n)
      : dims_(dims), n_(n), counts_(static_cast<std::size_t>(dims.num_pairs()) * dims.K * dims.K) {}

  const ModelDims& dims() const { return dims_; }
  std::int64_t n() const { return n_; }

  /// l, m are 1-based categories.
  std::int64_t operator()(int pair, int l, int m) const { return counts_[offset(pair, l, m)]; }
  std::int64_t& at(int pair, int l, int m) { return counts_[offset(pair, l, m)]; }

  std::int64_t pair_total(int pair) const {
    std::int64_t total = 0;
    for (int l = 1; l <= dims_.K; ++l)
      for (int m = 1; m <= dims_.K; ++m) total += (*this)(pair, l, m);
    return total;
  }

 private:
  std::size_t offset(int pair, int l, int m) const {
    return (static_cast<std::size_t>(pair) * dims_.K + (l - 1)) * dims_.K + (m - 1);
  }

  ModelDims dims_;
  std::int64_t n_;
  std::vector<std::int64_t> counts_;
};

inline PairCounts compute_counts(const OrdinalDataset& data) {
  const ModelDims dims = data.dims();
  PairCounts counts(dims, data.n());
  for (int i = 0; i < data.n(); ++i) {
    const auto y = data.row(i);
    int p = 0;
    for (int r = 0; r < dims.q; ++r)
      for (int s = r + 1; s < dims.q; ++s, ++p) ++counts.at(p, y[r], y[s]);
  }
  return counts;
}

/// Number of observations in each category of margin j (index 0 is category 1).
inline std::vector<std::int64_t> margin_tally(const OrdinalDataset& data, int j) {
  std::vector<std::int64_t> tally(data.K(), 0);
  for (int i = 0; i < data.n(); ++i) ++tally[data(i, j) - 1];
  return tally;
}

}  // namespace ordprobit
