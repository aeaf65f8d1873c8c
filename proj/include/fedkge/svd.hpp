#pragma once
// Truncated SVD for per-entity update compression. Update vectors of length
// m*n are reshaped row-major to m x n (n is small, 8 by default), decomposed
// by one-sided Jacobi, and only the top r singular triples travel:
// m*r + r + n*r parameters per entity.

#include <span>
#include <vector>

#include "fedkge/mat.hpp"

namespace fedkge {

struct SvdFactors {
  Mat u;                  // m x r, orthonormal columns
  std::vector<double> s;  // r singular values, descending, >= 0
  Mat v;                  // n x r; approximation is u * diag(s) * v^T
};

// One-sided Jacobi on the columns of `a` (m >= n required); keeps the top
// `rank` triples. Off-diagonal tolerance 1e-12.
SvdFactors jacobi_svd(const Mat& a, int rank);

SvdFactors svd_compress(std::span<const double> update, int m, int n, int r);

std::vector<double> svd_restore(const SvdFactors& f, int m, int n);

constexpr int svd_param_count(int m, int n, int r) {
  return m * r + r + n * r;
}

// L_r = alpha / n^2 * (||U^T U - I||_F^2 + ||V^T V - I||_F^2)
double orthogonality_regularizer(const Mat& u, const Mat& v, double alpha);

// d(L_r)/dU = 4 alpha / n^2 * U (U^T U - I), likewise for V; accumulated.
void orthogonality_regularizer_grad(const Mat& u, const Mat& v, double alpha,
                                    Mat& gu, Mat& gv);

}  // namespace fedkge
