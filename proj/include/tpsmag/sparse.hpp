#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace tpsmag {

/// Compressed-row sparse matrix. Column indices are sorted and unique per row.
struct SparseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;  // size rows+1
  std::vector<int> col;
  std::vector<double> val;

  std::size_t nnz() const { return val.size(); }

  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    y.assign(rows, 0.0);
    for (int i = 0; i < rows; ++i) {
      double s = 0.0;
      for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += val[p] * x[col[p]];
      y[i] = s;
    }
  }

  std::vector<double> operator*(const std::vector<double>& x) const {
    std::vector<double> y;
    apply(x, y);
    return y;
  }

  /// y += s * A x
  void apply_add(const std::vector<double>& x, std::vector<double>& y, double s = 1.0) const {
    for (int i = 0; i < rows; ++i) {
      double acc = 0.0;
      for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) acc += val[p] * x[col[p]];
      y[i] += s * acc;
    }
  }

  /// y += s * A^T x
  void apply_transpose_add(const std::vector<double>& x, std::vector<double>& y,
                           double s = 1.0) const {
    for (int i = 0; i < rows; ++i)
      for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) y[col[p]] += s * val[p] * x[i];
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : val) m = std::max(m, std::abs(v));
    return m;
  }

  double coeff(int i, int j) const {
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
      if (col[p] == j) return val[p];
    return 0.0;
  }

  SparseMatrix transposed() const;

  /// ||A - A^T||_max, for symmetry checks.
  double asymmetry_max() const {
    SparseMatrix at = transposed();
    double worst = 0.0;
    for (int i = 0; i < rows; ++i)
      for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
        worst = std::max(worst, std::abs(val[p] - at.coeff(i, col[p])));
    return worst;
  }

  std::vector<std::vector<double>> to_dense() const {
    std::vector<std::vector<double>> d(rows, std::vector<double>(cols, 0.0));
    for (int i = 0; i < rows; ++i)
      for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) d[i][col[p]] += val[p];
    return d;
  }
};

/// Accumulates (i,j,v) triplets; duplicate entries are summed on compression.
class TripletBuffer {
 public:
  TripletBuffer(int rows, int cols) : rows_(rows), cols_(cols) {}

  void add(int i, int j, double v) {
    if (v == 0.0) return;
    i_.push_back(i);
    j_.push_back(j);
    v_.push_back(v);
  }

  SparseMatrix compress() const {
    const std::size_t n = v_.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (i_[a] != i_[b]) return i_[a] < i_[b];
      return j_[a] < j_[b];
    });

    SparseMatrix m;
    m.rows = rows_;
    m.cols = cols_;
    m.row_ptr.assign(rows_ + 1, 0);
    int last_i = -1, last_j = -1;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t s = order[k];
      if (i_[s] == last_i && j_[s] == last_j) {
        m.val.back() += v_[s];
      } else {
        m.col.push_back(j_[s]);
        m.val.push_back(v_[s]);
        m.row_ptr[i_[s] + 1] += 1;
        last_i = i_[s];
        last_j = j_[s];
      }
    }
    for (int r = 0; r < rows_; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    return m;
  }

 private:
  int rows_, cols_;
  std::vector<int> i_, j_;
  std::vector<double> v_;
};

inline SparseMatrix SparseMatrix::transposed() const {
  TripletBuffer t(cols, rows);
  for (int i = 0; i < rows; ++i)
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) t.add(col[p], i, val[p]);
  return t.compress();
}

/// a*A + b*B, patterns may differ.
inline SparseMatrix sparse_add(const SparseMatrix& A, const SparseMatrix& B, double a = 1.0,
                               double b = 1.0) {
  if (A.rows != B.rows || A.cols != B.cols) throw std::invalid_argument("sparse_add: shape mismatch");
  TripletBuffer t(A.rows, A.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p) t.add(i, A.col[p], a * A.val[p]);
  for (int i = 0; i < B.rows; ++i)
    for (int p = B.row_ptr[i]; p < B.row_ptr[i + 1]; ++p) t.add(i, B.col[p], b * B.val[p]);
  return t.compress();
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline void axpy(double s, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

}  // namespace tpsmag
