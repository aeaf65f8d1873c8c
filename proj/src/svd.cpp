#include "fedkge/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedkge {

namespace {

constexpr double kOffDiagTol = 1e-12;
constexpr int kMaxSweeps = 64;

}  // namespace

SvdFactors jacobi_svd(const Mat& a, int rank) {
  const auto m = static_cast<int>(a.rows());
  const auto n = static_cast<int>(a.cols());
  if (m < n) throw std::invalid_argument("jacobi_svd expects m >= n");
  if (rank < 1 || rank > n) throw std::invalid_argument("rank out of range");

  // Work on columns of a copy; accumulate the right rotations into v.
  Mat w = a;
  Mat v(n, n);
  for (int j = 0; j < n; ++j) v.at(j, j) = 1.0;

  auto col_dot = [&](const Mat& x, int p, int q) {
    double s = 0.0;
    for (int i = 0; i < static_cast<int>(x.rows()); ++i) {
      s += x.at(i, p) * x.at(i, q);
    }
    return s;
  };
  auto rotate_cols = [](Mat& x, int p, int q, double c, double s) {
    for (int i = 0; i < static_cast<int>(x.rows()); ++i) {
      const double xp = x.at(i, p);
      const double xq = x.at(i, q);
      x.at(i, p) = c * xp - s * xq;
      x.at(i, q) = s * xp + c * xq;
    }
  };

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double app = col_dot(w, p, p);
        const double aqq = col_dot(w, q, q);
        const double apq = col_dot(w, p, q);
        if (std::abs(apq) <= kOffDiagTol * std::sqrt(app * aqq) ||
            apq == 0.0) {
          continue;
        }
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_cols(w, p, q, c, s);
        rotate_cols(v, p, q, c, s);
        rotated = true;
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sv(n);
  for (int j = 0; j < n; ++j) {
    double sq = 0.0;
    for (int i = 0; i < m; ++i) sq += w.at(i, j) * w.at(i, j);
    sv[j] = std::sqrt(sq);
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return sv[x] > sv[y]; });

  SvdFactors f;
  f.u = Mat(m, rank);
  f.v = Mat(n, rank);
  f.s.resize(rank);
  for (int j = 0; j < rank; ++j) {
    const int src = order[j];
    f.s[j] = sv[src];
    if (sv[src] > 0.0) {
      for (int i = 0; i < m; ++i) f.u.at(i, j) = w.at(i, src) / sv[src];
    }
    for (int i = 0; i < n; ++i) f.v.at(i, j) = v.at(i, src);
  }
  return f;
}

SvdFactors svd_compress(std::span<const double> update, int m, int n, int r) {
  if (static_cast<std::size_t>(m) * static_cast<std::size_t>(n) !=
      update.size()) {
    throw std::invalid_argument("m*n does not match update length");
  }
  Mat a(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) a.at(i, j) = update[i * n + j];
  }
  return jacobi_svd(a, r);
}

std::vector<double> svd_restore(const SvdFactors& f, int m, int n) {
  const auto r = static_cast<int>(f.s.size());
  if (static_cast<int>(f.u.rows()) != m || static_cast<int>(f.u.cols()) != r ||
      static_cast<int>(f.v.rows()) != n || static_cast<int>(f.v.cols()) != r) {
    throw std::invalid_argument("svd factor shape mismatch");
  }
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < r; ++k) s += f.u.at(i, k) * f.s[k] * f.v.at(j, k);
      out[i * n + j] = s;
    }
  }
  return out;
}

namespace {

// G = X^T X - I for the n-column matrix X
Mat gram_minus_identity(const Mat& x) {
  const auto n = static_cast<int>(x.cols());
  Mat g(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      double s = 0.0;
      for (int i = 0; i < static_cast<int>(x.rows()); ++i) {
        s += x.at(i, a) * x.at(i, b);
      }
      g.at(a, b) = s - (a == b ? 1.0 : 0.0);
    }
  }
  return g;
}

double frob_sq(const Mat& x) {
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  return s;
}

}  // namespace

double orthogonality_regularizer(const Mat& u, const Mat& v, double alpha) {
  const auto n = static_cast<double>(u.cols());
  return alpha / (n * n) *
         (frob_sq(gram_minus_identity(u)) + frob_sq(gram_minus_identity(v)));
}

void orthogonality_regularizer_grad(const Mat& u, const Mat& v, double alpha,
                                    Mat& gu, Mat& gv) {
  const auto n = static_cast<double>(u.cols());
  const double scale = 4.0 * alpha / (n * n);
  const Mat mu = gram_minus_identity(u);
  const Mat mv = gram_minus_identity(v);
  for (std::size_t i = 0; i < u.rows(); ++i) {
    for (std::size_t j = 0; j < u.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < u.cols(); ++k) s += u.at(i, k) * mu.at(k, j);
      gu.at(i, j) += scale * s;
    }
  }
  for (std::size_t i = 0; i < v.rows(); ++i) {
    for (std::size_t j = 0; j < v.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < v.cols(); ++k) s += v.at(i, k) * mv.at(k, j);
      gv.at(i, j) += scale * s;
    }
  }
}

}  // namespace fedkge
