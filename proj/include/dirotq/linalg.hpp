// Copyright 2026 The DiRotQ Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major matrices and the handful of factorizations the pipeline
// needs: symmetric eigendecomposition (tridiagonal QL or cyclic Jacobi),
// Householder QR for Haar-random orthogonal matrices, and Cholesky.

#ifndef DIROTQ_LINALG_HPP_
#define DIROTQ_LINALG_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dirotq/error.hpp"

namespace dirotq {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  // Builds from external data; rejects wrong lengths and non-finite values.
  static Matrix from_data(std::size_t rows, std::size_t cols,
                          std::vector<double> data) {
    if (data.size() != rows * cols) {
      throw ShapeError("matrix data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_string(rows, cols));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!std::isfinite(data[i])) {
        throw NumericalError("non-finite matrix entry at flat index " +
                             std::to_string(i));
      }
    }
    Matrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.data_ = std::move(data);
    return m;
  }

  static Matrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged initializer rows");
      data.insert(data.end(), row.begin(), row.end());
    }
    return from_data(r, c, std::move(data));
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::string shape_of(const Matrix& m) {
  return shape_string(m.rows(), m.cols());
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// Fixed i-k-j loop order, so results are reproducible run to run.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul dimension mismatch: " + shape_of(a) + " x " +
                     shape_of(b));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out = c.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

// aᵀa, computed on the upper triangle and mirrored so the result is exactly
// symmetric.
inline Matrix gram(const Matrix& a) {
  const std::size_t n = a.cols();
  Matrix g(n, n);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* x = a.row(r).data();
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      double* gi = g.row(i).data();
      for (std::size_t j = i; j < n; ++j) gi[j] += xi * x[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

inline void check_same_shape(const Matrix& a, const Matrix& b,
                             const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_of(a) +
                     " vs " + shape_of(b));
  }
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "add");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "subtract");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

inline Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

inline double frobenius_sq(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

inline double frobenius(const Matrix& a) { return std::sqrt(frobenius_sq(a)); }

inline double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// ‖a − b‖_F / ‖b‖_F; returns the absolute norm when b is zero.
inline double relative_frobenius_error(const Matrix& a, const Matrix& b) {
  const double denom = frobenius(b);
  const double num = frobenius(a - b);
  return denom == 0.0 ? num : num / denom;
}

// Columns [begin, end).
inline Matrix column_slice(const Matrix& a, std::size_t begin,
                           std::size_t end) {
  if (begin > end || end > a.cols()) {
    throw ShapeError("column slice [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of range for " + shape_of(a));
  }
  Matrix s(a.rows(), end - begin);
  for (std::size_t i = 0; i < a.rows(); ++i)
    std::copy_n(a.row(i).data() + begin, end - begin, s.row(i).data());
  return s;
}

// Rows [begin, end).
inline Matrix row_slice(const Matrix& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) {
    throw ShapeError("row slice [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of range for " + shape_of(a));
  }
  Matrix s(end - begin, a.cols());
  std::copy(a.data().begin() + static_cast<std::ptrdiff_t>(begin * a.cols()),
            a.data().begin() + static_cast<std::ptrdiff_t>(end * a.cols()),
            s.data().begin());
  return s;
}

inline Matrix hstack(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("hstack row mismatch: " + shape_of(a) + " vs " +
                     shape_of(b));
  }
  Matrix s(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy(a.row(i).begin(), a.row(i).end(), s.row(i).begin());
    std::copy(b.row(i).begin(), b.row(i).end(),
              s.row(i).begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return s;
}

inline Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("vstack column mismatch: " + shape_of(a) + " vs " +
                     shape_of(b));
  }
  Matrix s(a.rows() + b.rows(), a.cols());
  std::copy(a.data().begin(), a.data().end(), s.data().begin());
  std::copy(b.data().begin(), b.data().end(),
            s.data().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return s;
}

// ---------------------------------------------------------------------------
// Seeding and random matrices.

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix_seed(mix_seed(mix_seed(mix_seed(base) ^ a) ^ b) ^ c);
}

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols,
                              std::uint64_t seed, double stddev = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition.

struct EigenDecomposition {
  Matrix vectors;              // m×m, column j is the j-th eigenvector
  std::vector<double> values;  // descending
};

enum class EigenMethod {
  tridiagonal_ql,  // Householder reduction + implicit-shift QL
  jacobi,          // cyclic Jacobi rotations
};

struct EighOptions {
  EigenMethod method = EigenMethod::tridiagonal_ql;
  double tolerance = 1e-12;  // Jacobi: off-diagonal norm / diagonal norm
  int max_sweeps = 100;      // Jacobi sweeps, or QL iterations per eigenvalue
};

namespace detail {

// Orders raw (value, vector) pairs descending with a stable sort and fixes
// each vector's sign so its largest-magnitude entry is positive. Row i of
// vectors_by_row is the eigenvector for values[i].
inline EigenDecomposition finish_eigen(const std::vector<double>& values,
                                       const Matrix& vectors_by_row) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) {
                     return values[i] > values[j];
                   });
  EigenDecomposition out{Matrix(n, n), std::vector<double>(n)};
  for (std::size_t col = 0; col < n; ++col) {
    const std::size_t src = order[col];
    out.values[col] = values[src];
    const auto v = vectors_by_row.row(src);
    std::size_t arg = 0;
    for (std::size_t k = 1; k < n; ++k)
      if (std::abs(v[k]) > std::abs(v[arg])) arg = k;
    const double sign = v[arg] < 0.0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, col) = sign * v[k];
  }
  return out;
}

inline EigenDecomposition eigh_jacobi(Matrix a, const EighOptions& opts) {
  const std::size_t n = a.rows();
  // vt row p is eigenvector p, so rotations touch contiguous memory.
  Matrix vt = Matrix::identity(n);

  auto off_and_diag = [&]() {
    double off = 0.0, diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* ai = a.row(i).data();
      diag += ai[i] * ai[i];
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * ai[j] * ai[j];
    }
    return std::pair{std::sqrt(off), std::sqrt(diag)};
  };

  bool converged = false;
  double off = 0.0;
  for (int sweep = 0; sweep <= opts.max_sweeps; ++sweep) {
    auto [o, d] = off_and_diag();
    off = o;
    if (off <= opts.tolerance * d) {
      converged = true;
      break;
    }
    if (sweep == opts.max_sweeps) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Negligible against both diagonal entries: drop it.
        if (std::abs(app) + 1e-3 * std::abs(apq) == std::abs(app) &&
            std::abs(aqq) + 1e-3 * std::abs(apq) == std::abs(aqq)) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        double* rp = a.row(p).data();
        double* rq = a.row(q).data();
        for (std::size_t k = 0; k < n; ++k) {
          const double x = rp[k];
          const double y = rq[k];
          rp[k] = c * x - s * y;
          rq[k] = s * x + c * y;
        }
        rp[p] = app - t * apq;
        rq[q] = aqq + t * apq;
        rp[q] = 0.0;
        rq[p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          a(k, p) = rp[k];
          a(k, q) = rq[k];
        }

        double* vp = vt.row(p).data();
        double* vq = vt.row(q).data();
        for (std::size_t k = 0; k < n; ++k) {
          const double x = vp[k];
          const double y = vq[k];
          vp[k] = c * x - s * y;
          vq[k] = s * x + c * y;
        }
      }
    }
  }
  if (!converged) {
    throw NumericalError(
        "eigh_descending did not converge after " +
        std::to_string(opts.max_sweeps) +
        " sweeps; residual off-diagonal norm " + std::to_string(off));
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
  return finish_eigen(values, vt);
}

// Householder tridiagonalization followed by implicit-shift QL (the EISPACK
// tred2/tql2 pair).
inline EigenDecomposition eigh_tridiagonal_ql(Matrix v,
                                              const EighOptions& opts) {
  const int n = static_cast<int>(v.rows());
  std::vector<double> d(n), e(n);

  // --- tred2: v becomes the accumulated orthogonal transform.
  for (int j = 0; j < n; ++j) d[j] = v(n - 1, j);
  for (int i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (int k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (int j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (int k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (int j = 0; j < i; ++j) e[j] = 0.0;
      for (int j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (int k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (int j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (int j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (int j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (int k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }
  for (int i = 0; i < n - 1; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (int k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (int j = 0; j <= i; ++j) {
        double g = 0.0;
        for (int k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (int k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (int k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (int j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;

  // --- tql2 on the transposed transform so rotations hit contiguous rows.
  Matrix vt = transpose(v);
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::ldexp(1.0, -52);
  for (int l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    int m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > opts.max_sweeps) {
          throw NumericalError(
              "eigh_descending (QL) did not converge for eigenvalue " +
              std::to_string(l) + "; residual off-diagonal " +
              std::to_string(std::abs(e[l])));
        }
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (int i = l + 2; i < n; ++i) d[i] -= h;
        f += h;
        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (int i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          double* vi = vt.row(static_cast<std::size_t>(i)).data();
          double* vi1 = vt.row(static_cast<std::size_t>(i + 1)).data();
          for (int k = 0; k < n; ++k) {
            const double hk = vi1[k];
            vi1[k] = s * vi[k] + c * hk;
            vi[k] = c * vi[k] - s * hk;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
  return finish_eigen(d, vt);
}

}  // namespace detail

// Eigendecomposition of the symmetrized input. Eigenvalues come back sorted
// descending (stable for ties) and each eigenvector is sign-fixed so that its
// largest-magnitude entry is positive.
inline EigenDecomposition eigh_descending(const Matrix& sigma,
                                          const EighOptions& opts = {}) {
  if (sigma.rows() != sigma.cols()) {
    throw ShapeError("eigh_descending needs a square matrix, got " +
                     shape_of(sigma));
  }
  const std::size_t n = sigma.rows();
  if (n == 0) return {};
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a(i, j) = 0.5 * (sigma(i, j) + sigma(j, i));
  if (!a.all_finite()) throw NumericalError("eigh_descending: non-finite input");
  if (opts.method == EigenMethod::jacobi) return detail::eigh_jacobi(std::move(a), opts);
  return detail::eigh_tridiagonal_ql(std::move(a), opts);
}

// ---------------------------------------------------------------------------
// QR and random orthogonal matrices.

struct QrResult {
  Matrix q;
  Matrix r;
};

// Householder QR of a square matrix.
inline QrResult householder_qr(const Matrix& input) {
  if (input.rows() != input.cols()) {
    throw ShapeError("householder_qr expects a square matrix, got " +
                     shape_of(input));
  }
  const std::size_t n = input.rows();
  Matrix r = input;
  std::vector<std::vector<double>> reflectors(n);
  for (std::size_t j = 0; j < n; ++j) {
    double norm = 0.0;
    for (std::size_t i = j; i < n; ++i) norm += r(i, j) * r(i, j);
    norm = std::sqrt(norm);
    std::vector<double> v(n - j, 0.0);
    if (norm == 0.0) {
      reflectors[j] = std::move(v);
      continue;
    }
    const double alpha = r(j, j) > 0.0 ? -norm : norm;
    for (std::size_t i = j; i < n; ++i) v[i - j] = r(i, j);
    v[0] -= alpha;
    double vnorm = 0.0;
    for (double x : v) vnorm += x * x;
    vnorm = std::sqrt(vnorm);
    if (vnorm == 0.0) {
      std::fill(v.begin(), v.end(), 0.0);
      reflectors[j] = std::move(v);
      continue;
    }
    for (double& x : v) x /= vnorm;
    // r ← (I − 2vvᵀ) r on rows j..n.
    for (std::size_t c = j; c < n; ++c) {
      double dot = 0.0;
      for (std::size_t i = j; i < n; ++i) dot += v[i - j] * r(i, c);
      for (std::size_t i = j; i < n; ++i) r(i, c) -= 2.0 * v[i - j] * dot;
    }
    reflectors[j] = std::move(v);
  }
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) r(i, j) = 0.0;

  // q = H_0 H_1 … H_{n−1}, applied right to left onto the identity.
  Matrix q = Matrix::identity(n);
  for (std::size_t jj = n; jj-- > 0;) {
    const auto& v = reflectors[jj];
    for (std::size_t c = 0; c < n; ++c) {
      double dot = 0.0;
      for (std::size_t i = jj; i < n; ++i) dot += v[i - jj] * q(i, c);
      if (dot == 0.0) continue;
      for (std::size_t i = jj; i < n; ++i) q(i, c) -= 2.0 * v[i - jj] * dot;
    }
  }
  return {std::move(q), std::move(r)};
}

// Haar-distributed orthogonal matrix: Gaussian → QR → make diag(R) positive.
inline Matrix random_orthogonal(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("random_orthogonal: dim must be >= 1");
  auto [q, r] = householder_qr(gaussian_matrix(dim, dim, seed));
  for (std::size_t j = 0; j < dim; ++j) {
    if (r(j, j) < 0.0) {
      for (std::size_t i = 0; i < dim; ++i) q(i, j) = -q(i, j);
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// Cholesky.

// Lower factor L with a = L Lᵀ. Throws NumericalError naming the first
// non-positive pivot.
inline Matrix cholesky_lower(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw ShapeError("cholesky expects a square matrix, got " + shape_of(a));
  }
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NumericalError("cholesky failed at pivot " + std::to_string(j) +
                           " (value " + std::to_string(d) + ")");
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      const double* li = l.row(i).data();
      const double* lj = l.row(j).data();
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      l(i, j) = s / ljj;
    }
  }
  return l;
}

// Inverse of a symmetric positive definite matrix through its Cholesky factor.
inline Matrix spd_inverse(const Matrix& a) {
  const Matrix l = cholesky_lower(a);
  const std::size_t n = l.rows();
  // linv = L⁻¹ (lower triangular), by forward substitution per column.
  Matrix linv(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    linv(c, c) = 1.0 / l(c, c);
    for (std::size_t i = c + 1; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = c; k < i; ++k) s += l(i, k) * linv(k, c);
      linv(i, c) = -s / l(i, i);
    }
  }
  // a⁻¹ = L⁻ᵀ L⁻¹, exactly symmetric by construction.
  Matrix inv(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = j; k < n; ++k) s += linv(k, i) * linv(k, j);
      inv(i, j) = s;
      inv(j, i) = s;
    }
  }
  return inv;
}

}  // namespace dirotq

#endif  // DIROTQ_LINALG_HPP_
