#pragma once

// Dense kernels for the small matrices that appear in promoter models:
// nonsymmetric eigenvalues, LU solves, determinants, the matrix exponential
// and the null vector of an irreducible generator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "multistate/errors.hpp"

namespace multistate {

using cplx = std::complex<double>;

template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<const T> data() const noexcept { return data_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  /// Maximum absolute column sum.
  double norm1() const {
    double best = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < rows_; ++i) s += std::abs((*this)(i, j));
      best = std::max(best, s);
    }
    return best;
  }

  /// Maximum absolute row sum.
  double norm_inf() const {
    double best = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) s += std::abs((*this)(i, j));
      best = std::max(best, s);
    }
    return best;
  }

  Matrix& operator*=(T s) {
    for (auto& x : data_) x *= s;
    return *this;
  }
  friend Matrix operator*(Matrix m, T s) { return m *= s; }

  Matrix& operator+=(const Matrix& o) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const T aik = a(i, k);
        if (aik == T{}) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  friend std::vector<T> operator*(const Matrix& a, std::span<const T> v) {
    std::vector<T> out(a.rows_, T{});
    for (std::size_t i = 0; i < a.rows_; ++i) {
      T s{};
      for (std::size_t j = 0; j < a.cols_; ++j) s += a(i, j) * v[j];
      out[i] = s;
    }
    return out;
  }
  friend std::vector<T> operator*(const Matrix& a, const std::vector<T>& v) {
    return a * std::span<const T>(v);
  }

  /// Copy with row and column `k` removed.
  Matrix without(std::size_t k) const {
    Matrix m(rows_ - 1, cols_ - 1);
    for (std::size_t i = 0, ii = 0; i < rows_; ++i) {
      if (i == k) continue;
      for (std::size_t j = 0, jj = 0; j < cols_; ++j) {
        if (j == k) continue;
        m(ii, jj++) = (*this)(i, j);
      }
      ++ii;
    }
    return m;
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    os << '[';
    for (std::size_t i = 0; i < rows_; ++i) {
      os << (i ? ",[" : "[");
      for (std::size_t j = 0; j < cols_; ++j) os << (j ? "," : "") << (*this)(i, j);
      os << ']';
    }
    os << ']';
    return os.str();
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<cplx>;

template <typename T>
double max_abs(std::span<const T> v) {
  double m = 0.0;
  for (const auto& x : v) m = std::max(m, static_cast<double>(std::abs(x)));
  return m;
}
template <typename T>
double max_abs(const std::vector<T>& v) {
  return max_abs(std::span<const T>(v));
}

// ---------------------------------------------------------------------------
// LU with partial pivoting

template <typename T>
class LuDecomposition {
 public:
  explicit LuDecomposition(Matrix<T> m) : lu_(std::move(m)), perm_(lu_.rows()) {
    if (!lu_.square()) throw Singularity("LU: matrix is not square");
    const std::size_t n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    scale_ = lu_.norm_inf();
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > best) {
          best = std::abs(lu_(i, k));
          p = i;
        }
      }
      if (p != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
        std::swap(perm_[k], perm_[p]);
        sign_ = -sign_;
      }
      min_pivot_ = std::min(min_pivot_, best);
      if (best == 0.0) continue;
      const T pivot = lu_(k, k);
      for (std::size_t i = k + 1; i < n; ++i) {
        const T f = lu_(i, k) / pivot;
        lu_(i, k) = f;
        if (f == T{}) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
  }

  /// True when some pivot is below `rel_tol` times the matrix norm.
  bool singular(double rel_tol = 1e-14) const {
    return !(min_pivot_ > rel_tol * scale_) || scale_ == 0.0;
  }

  T determinant() const {
    T d = static_cast<T>(sign_);
    for (std::size_t i = 0; i < lu_.rows(); ++i) d *= lu_(i, i);
    return d;
  }

  std::vector<T> solve(std::span<const T> rhs) const {
    const std::size_t n = lu_.rows();
    std::vector<T> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = rhs[perm_[i]];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
      x[i] /= lu_(i, i);
    }
    return x;
  }

 private:
  Matrix<T> lu_;
  std::vector<std::size_t> perm_;
  int sign_ = 1;
  double scale_ = 0.0;
  double min_pivot_ = std::numeric_limits<double>::infinity();
};

template <typename T>
T det(const Matrix<T>& m) {
  if (!m.square()) throw Singularity("det: matrix is not square");
  return LuDecomposition<T>(m).determinant();
}

/// Solves m·x = rhs with one step of iterative refinement.
template <typename T>
std::vector<T> solve(const Matrix<T>& m, std::span<const T> rhs) {
  LuDecomposition<T> lu(m);
  if (lu.singular()) throw Singularity("solve: matrix is singular to working precision: " + m.to_string());
  auto x = lu.solve(rhs);
  for (int pass = 0; pass < 2; ++pass) {
    auto r = m * std::span<const T>(x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = rhs[i] - r[i];
    if (max_abs(r) <= 1e-15 * max_abs(rhs)) break;
    const auto dx = lu.solve(r);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
  }
  return x;
}
template <typename T>
std::vector<T> solve(const Matrix<T>& m, const std::vector<T>& rhs) {
  return solve(m, std::span<const T>(rhs));
}

// ---------------------------------------------------------------------------
// Eigenvalues

struct EigenResult {
  std::vector<cplx> values;
  /// max over values of ||A v - lambda v|| / ||v|| for inverse-iteration vectors
  double residual_bound = 0.0;
};

namespace detail {

// 1-based square scratch array, so the Hessenberg/QR code reads like the
// classical EISPACK formulation.
class Square1 {
 public:
  explicit Square1(std::size_t n) : n_(n), a_((n + 1) * (n + 1), 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a_[i * (n_ + 1) + j]; }

 private:
  std::size_t n_;
  std::vector<double> a_;
};

inline double sign_of(double a, double b) { return b >= 0.0 ? std::abs(a) : -std::abs(a); }

inline void balance(Square1& a, std::size_t n) {
  constexpr double radix = 2.0;
  constexpr double sqrdx = radix * radix;
  bool done = false;
  while (!done) {
    done = true;
    for (std::size_t i = 1; i <= n; ++i) {
      double r = 0.0, c = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= sqrdx;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= sqrdx;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        g = 1.0 / f;
        for (std::size_t j = 1; j <= n; ++j) a(i, j) *= g;
        for (std::size_t j = 1; j <= n; ++j) a(j, i) *= f;
      }
    }
  }
}

// Reduction to upper Hessenberg form by stabilized elementary similarity
// transformations.
inline void to_hessenberg(Square1& a, std::size_t n) {
  for (std::size_t m = 2; m < n; ++m) {
    double x = 0.0;
    std::size_t i = m;
    for (std::size_t j = m; j <= n; ++j) {
      if (std::abs(a(j, m - 1)) > std::abs(x)) {
        x = a(j, m - 1);
        i = j;
      }
    }
    if (i != m) {
      for (std::size_t j = m - 1; j <= n; ++j) std::swap(a(i, j), a(m, j));
      for (std::size_t j = 1; j <= n; ++j) std::swap(a(j, i), a(j, m));
    }
    if (x != 0.0) {
      for (i = m + 1; i <= n; ++i) {
        double y = a(i, m - 1);
        if (y == 0.0) continue;
        y /= x;
        a(i, m - 1) = y;
        for (std::size_t j = m; j <= n; ++j) a(i, j) -= y * a(m, j);
        for (std::size_t j = 1; j <= n; ++j) a(j, m) += y * a(j, i);
      }
    }
  }
  for (std::size_t i = 3; i <= n; ++i)
    for (std::size_t j = 1; j + 1 < i; ++j) a(i, j) = 0.0;
}

// Francis implicit double-shift QR on an upper Hessenberg matrix.
inline std::vector<cplx> hessenberg_qr(Square1& a, std::size_t n, int max_iterations_per_value) {
  std::vector<double> wr(n + 1, 0.0), wi(n + 1, 0.0);
  double anorm = 0.0;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = std::max<std::size_t>(i - 1, 1); j <= n; ++j) anorm += std::abs(a(i, j));

  std::ptrdiff_t nn = static_cast<std::ptrdiff_t>(n);
  double t = 0.0;
  double p = 0.0, q = 0.0, r = 0.0, s = 0.0, w = 0.0, x = 0.0, y = 0.0, z = 0.0;
  while (nn >= 1) {
    int its = 0;
    std::ptrdiff_t l = 0;
    do {
      for (l = nn; l >= 2; --l) {
        s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) + s == s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      x = a(nn, nn);
      if (l == nn) {
        wr[nn] = x + t;
        wi[nn--] = 0.0;
      } else {
        y = a(nn - 1, nn - 1);
        w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            wr[nn - 1] = wr[nn] = x + z;
            if (z != 0.0) wr[nn] = x - w / z;
            wi[nn - 1] = wi[nn] = 0.0;
          } else {
            wr[nn - 1] = wr[nn] = x + p;
            wi[nn - 1] = -(wi[nn] = z);
          }
          nn -= 2;
        } else {
          if (its == max_iterations_per_value) {
            throw NoConvergence("eigenvalues: QR iteration cap of " +
                                std::to_string(max_iterations_per_value) +
                                " sweeps per eigenvalue exceeded");
          }
          if (its == 10 || its == 20) {
            // exceptional shift
            t += x;
            for (std::ptrdiff_t i = 1; i <= nn; ++i) a(i, i) -= x;
            s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          std::ptrdiff_t m = nn - 2;
          for (; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s;
            r = a(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
            if (u + v == v) break;
          }
          for (std::ptrdiff_t i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (std::ptrdiff_t k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = a(k + 2, k - 1);
              if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            if ((s = sign_of(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
              if (k == m) {
                if (l != m) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (std::ptrdiff_t j = k; j <= nn; ++j) {
                p = a(k, j) + q * a(k + 1, j);
                if (k != nn - 1) {
                  p += r * a(k + 2, j);
                  a(k + 2, j) -= p * z;
                }
                a(k + 1, j) -= p * y;
                a(k, j) -= p * x;
              }
              const std::ptrdiff_t mmin = nn < k + 3 ? nn : k + 3;
              for (std::ptrdiff_t i = l; i <= mmin; ++i) {
                p = x * a(i, k) + y * a(i, k + 1);
                if (k != nn - 1) {
                  p += z * a(i, k + 2);
                  a(i, k + 2) -= p * r;
                }
                a(i, k + 1) -= p * q;
                a(i, k) -= p;
              }
            }
          }
        }
      }
    } while (l < nn - 1);
  }
  std::vector<cplx> out;
  out.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) out.emplace_back(wr[i], wi[i]);
  return out;
}

inline double inverse_iteration_residual(const RealMatrix& m, cplx lambda) {
  const std::size_t n = m.rows();
  const double scale = std::max(m.norm_inf(), 1e-300);
  ComplexMatrix shifted(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) shifted(i, j) = m(i, j);
  const cplx mu = lambda + cplx(1e-10 * scale, 1e-10 * scale);
  for (std::size_t i = 0; i < n; ++i) shifted(i, i) -= mu;
  LuDecomposition<cplx> lu(shifted);
  std::vector<cplx> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = cplx(1.0 + 0.1 * static_cast<double>(i), 0.3);
  for (int it = 0; it < 3; ++it) {
    v = lu.solve(v);
    const double nv = max_abs(v);
    if (!(nv > 0.0) || !std::isfinite(nv)) return std::numeric_limits<double>::infinity();
    for (auto& x : v) x /= nv;
  }
  double res = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cplx s = -lambda * v[i];
    for (std::size_t j = 0; j < n; ++j) s += m(i, j) * v[j];
    res += std::norm(s);
    nv += std::norm(v[i]);
  }
  return std::sqrt(res / nv);
}

}  // namespace detail

/// Makes a spectrum of a real matrix exactly closed under conjugation:
/// values are matched to their nearest conjugate within `tol`, each pair is
/// replaced by (z, conj z) with z the average, and lone values with a tiny
/// imaginary part are snapped to the real axis.
inline void symmetrize_conjugates(std::vector<cplx>& values, double tol) {
  const std::size_t n = values.size();
  std::vector<bool> done(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (done[i]) continue;
    if (std::abs(values[i].imag()) <= tol) {
      values[i] = cplx(values[i].real(), 0.0);
      done[i] = true;
      continue;
    }
    std::size_t best = n;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = i + 1; j < n; ++j) {
      if (done[j]) continue;
      const double d = std::abs(values[j] - std::conj(values[i]));
      if (d < best_dist) {
        best_dist = d;
        best = j;
      }
    }
    if (best < n && best_dist <= tol) {
      const cplx z = 0.5 * (values[i] + std::conj(values[best]));
      values[i] = z;
      values[best] = std::conj(z);
      done[best] = true;
    }
    done[i] = true;
  }
}

/// All eigenvalues (with multiplicity) of a real square matrix.
inline EigenResult eigenvalues(const RealMatrix& m) {
  if (!m.square() || m.rows() == 0) throw Singularity("eigenvalues: matrix must be square and nonempty");
  const std::size_t n = m.rows();
  for (double x : m.data())
    if (!std::isfinite(x)) throw Overflow("eigenvalues: nonfinite matrix entry");

  EigenResult result;
  if (n == 1) {
    result.values = {cplx(m(0, 0), 0.0)};
    return result;
  }
  detail::Square1 a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i + 1, j + 1) = m(i, j);
  detail::balance(a, n);
  detail::to_hessenberg(a, n);
  constexpr int cap = 60;
  try {
    result.values = detail::hessenberg_qr(a, n, cap);
  } catch (const NoConvergence& e) {
    throw NoConvergence(std::string(e.what()) + " for matrix " + m.to_string());
  }

  double radius = 0.0;
  for (const auto& z : result.values) radius = std::max(radius, std::abs(z));
  symmetrize_conjugates(result.values, 1e-8 * std::max(radius, 1e-300));

  for (const auto& z : result.values)
    result.residual_bound = std::max(result.residual_bound, detail::inverse_iteration_residual(m, z));
  return result;
}

// ---------------------------------------------------------------------------
// Matrix exponential

/// exp(m) by scaling and squaring with the diagonal [6/6] Padé approximant.
inline RealMatrix expm(const RealMatrix& m) {
  if (!m.square()) throw Singularity("expm: matrix is not square");
  const std::size_t n = m.rows();
  const double norm = m.norm1();
  if (!std::isfinite(norm)) throw Overflow("expm: nonfinite matrix entry");
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const RealMatrix a = m * std::ldexp(1.0, -squarings);

  // [6/6] Padé coefficients c_k = (12-k)! 6! / (12! k! (6-k)!)
  constexpr double c[7] = {1.0,
                           1.0 / 2.0,
                           5.0 / 44.0,
                           1.0 / 66.0,
                           1.0 / 792.0,
                           1.0 / 15840.0,
                           1.0 / 665280.0};
  const RealMatrix id = RealMatrix::identity(n);
  const RealMatrix a2 = a * a;
  const RealMatrix a4 = a2 * a2;
  const RealMatrix a6 = a4 * a2;
  const RealMatrix even = id * c[0] + a2 * c[2] + a4 * c[4] + a6 * c[6];
  const RealMatrix odd = a * (id * c[1] + a2 * c[3] + a4 * c[5]);
  const RealMatrix num = even + odd;
  const RealMatrix den = even - odd;

  LuDecomposition<double> lu(den);
  RealMatrix result(n, n);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = num(i, j);
    const auto x = lu.solve(col);
    for (std::size_t i = 0; i < n; ++i) result(i, j) = x[i];
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  for (double x : result.data())
    if (!std::isfinite(x)) throw Overflow("expm: result exceeds the representable range");
  return result;
}

/// exp(t·m)·v.
inline std::vector<double> expm_apply(const RealMatrix& m, double t, std::span<const double> v) {
  if (t < 0.0) throw Singularity("expm_apply: t must be nonnegative");
  if (t == 0.0) return {v.begin(), v.end()};
  auto out = expm(m * t) * v;
  for (double x : out)
    if (!std::isfinite(x)) throw Overflow("expm_apply: result exceeds the representable range");
  return out;
}
inline std::vector<double> expm_apply(const RealMatrix& m, double t, const std::vector<double>& v) {
  return expm_apply(m, t, std::span<const double>(v));
}

// ---------------------------------------------------------------------------
// Null vector of a generator transpose

/// Probability vector p with m·p = 0, for m an irreducible matrix whose
/// columns sum to zero. The last equation is replaced by sum(p) = 1.
inline std::vector<double> null_vector(const RealMatrix& m) {
  if (!m.square()) throw Singularity("null_vector: matrix is not square");
  const std::size_t n = m.rows();
  RealMatrix a = m;
  for (std::size_t j = 0; j < n; ++j) a(n - 1, j) = 1.0;
  std::vector<double> rhs(n, 0.0);
  rhs[n - 1] = 1.0;
  LuDecomposition<double> lu(a);
  if (lu.singular(1e-12)) {
    throw Singularity("null_vector: zero eigenvalue is not simple for matrix " + m.to_string());
  }
  auto p = lu.solve(rhs);
  // refinement against the original equations
  for (int pass = 0; pass < 2; ++pass) {
    auto r = a * p;
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
    const auto dp = lu.solve(r);
    for (std::size_t i = 0; i < n; ++i) p[i] += dp[i];
  }
  for (double x : p) {
    if (!(x > 0.0)) throw Singularity("null_vector: solution has a nonpositive entry (reducible generator?)");
  }
  return p;
}

}  // namespace multistate
