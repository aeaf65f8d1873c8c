#include <doctest.h>

#include <cmath>

#include "fedkge/rng.hpp"
#include "fedkge/svd.hpp"
#include "helpers.hpp"

using namespace fedkge;

namespace {

double frob_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double frob(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

}  // namespace

TEST_CASE("transmitted parameter counts") {
  CHECK(svd_param_count(32, 8, 5) == 205);
  CHECK(svd_param_count(64, 8, 5) == 365);
  // per-round compression ratios at D = 256
  CHECK(doctest::Approx((256.0 - 205.0) / 256.0).epsilon(1e-4) == 0.1992);
  CHECK(doctest::Approx((512.0 - 365.0) / 512.0).epsilon(1e-4) == 0.2871);
}

TEST_CASE("full-rank round trip reconstructs exactly") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = random_vec(256, seed);
    const SvdFactors f = svd_compress(x, 32, 8, 8);
    const auto back = svd_restore(f, 32, 8);
    CHECK(frob_diff(x, back) <= 1e-9 * std::max(1.0, frob(x)));
  }
}

TEST_CASE("rank-1 matrix is exactly captured at r = 1") {
  Rng rng(4);
  std::vector<double> u(32), v(8), x(256);
  for (auto& a : u) a = rng.uniform(-1, 1);
  for (auto& a : v) a = rng.uniform(-1, 1);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 8; ++j) x[i * 8 + j] = u[i] * v[j];
  const SvdFactors f = svd_compress(x, 32, 8, 1);
  const auto back = svd_restore(f, 32, 8);
  CHECK(frob_diff(x, back) <= 1e-9 * frob(x));
}

TEST_CASE("singular values are sorted and non-negative") {
  const auto x = random_vec(256, 17);
  const SvdFactors f = svd_compress(x, 32, 8, 8);
  for (std::size_t i = 0; i + 1 < f.s.size(); ++i) {
    CHECK(f.s[i] >= f.s[i + 1]);
  }
  CHECK(f.s.back() >= 0.0);
}

TEST_CASE("truncation error equals the singular-value tail") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = random_vec(256, 100 + seed);
    const SvdFactors full = svd_compress(x, 32, 8, 8);
    for (int r : {1, 3, 5, 7}) {
      const SvdFactors f = svd_compress(x, 32, 8, r);
      const auto back = svd_restore(f, 32, 8);
      double tail = 0.0;
      for (std::size_t i = r; i < full.s.size(); ++i) {
        tail += full.s[i] * full.s[i];
      }
      CHECK(frob_diff(x, back) ==
            doctest::Approx(std::sqrt(tail)).epsilon(1e-9));
    }
  }
}

TEST_CASE("truncation beats random rank-r candidates") {
  Rng rng(9);
  const auto x = random_vec(128, 23);
  const int m = 16, n = 8, r = 3;
  const SvdFactors f = svd_compress(x, m, n, r);
  const auto best = svd_restore(f, m, n);
  const double best_err = frob_diff(x, best);
  for (int trial = 0; trial < 100; ++trial) {
    // random rank-r approximation
    std::vector<double> cand(x.size(), 0.0);
    for (int k = 0; k < r; ++k) {
      std::vector<double> u(m), v(n);
      for (auto& a : u) a = rng.uniform(-1, 1);
      for (auto& a : v) a = rng.uniform(-1, 1);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) cand[i * n + j] += u[i] * v[j];
    }
    CHECK(frob_diff(x, cand) >= best_err - 1e-9);
  }
}

TEST_CASE("shape errors") {
  const auto x = random_vec(100, 1);
  CHECK_THROWS_AS(svd_compress(x, 32, 8, 5), std::invalid_argument);
  SvdFactors f = svd_compress(random_vec(256, 2), 32, 8, 5);
  CHECK_THROWS_AS(svd_restore(f, 16, 8), std::invalid_argument);
}

TEST_CASE("orthogonality regularizer values") {
  SUBCASE("orthonormal inputs score zero") {
    Mat u(4, 2), v(2, 2);
    u.at(0, 0) = 1; u.at(1, 1) = 1;  // orthonormal columns
    v.at(0, 0) = 1; v.at(1, 1) = 1;
    CHECK(orthogonality_regularizer(u, v, 0.05) == doctest::Approx(0.0));
  }
  SUBCASE("scaled identity") {
    Mat u(2, 2), v(2, 2);
    u.at(0, 0) = 2; u.at(1, 1) = 2;  // U^T U = 4 I
    v.at(0, 0) = 1; v.at(1, 1) = 1;
    CHECK(orthogonality_regularizer(u, v, 0.05) == doctest::Approx(0.225));
  }
}

TEST_CASE("regularizer gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(40 + seed);
    Mat u(6, 3), v(3, 3);
    for (auto& x : u.data()) x = rng.uniform(-1, 1);
    for (auto& x : v.data()) x = rng.uniform(-1, 1);
    const double alpha = 0.05;

    Mat gu(6, 3), gv(3, 3);
    orthogonality_regularizer_grad(u, v, alpha, gu, gv);

    auto value = [&]() { return orthogonality_regularizer(u, v, alpha); };
    for (auto [mat, grad] : {std::pair{&u, &gu}, std::pair{&v, &gv}}) {
      const auto fd = testutil::fd_gradient(mat->data(), value);
      for (std::size_t i = 0; i < fd.size(); ++i) {
        CHECK(testutil::close_rel(grad->data()[i], fd[i]));
      }
    }
  }
}
