#include "fedkge/methods.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fedkge {

namespace {

constexpr double kNormFloor = 1e-300;  // zero-distance guard for L2 gradients

double transe_score(int dim, std::span<const double> h,
                    std::span<const double> r, std::span<const double> t) {
  double sq = 0.0;
  for (int k = 0; k < dim; ++k) {
    const double d = (h[k] + r[k]) - t[k];
    sq += d * d;
  }
  return -std::sqrt(sq);
}

double rotate_score(int dim, std::span<const double> h,
                    std::span<const double> r, std::span<const double> t) {
  double sq = 0.0;
  for (int k = 0; k < dim; ++k) {
    const double c = std::cos(r[k]);
    const double s = std::sin(r[k]);
    const double u = (h[k] * c - h[k + dim] * s) - t[k];
    const double v = (h[k] * s + h[k + dim] * c) - t[k + dim];
    sq += u * u + v * v;
  }
  return -std::sqrt(sq);
}

double complex_score(int dim, std::span<const double> h,
                     std::span<const double> r, std::span<const double> t) {
  double sum = 0.0;
  for (int k = 0; k < dim; ++k) {
    const double a = h[k], b = h[k + dim];
    const double c = r[k], d = r[k + dim];
    const double e = t[k], f = t[k + dim];
    sum += (a * c - b * d) * e + (a * d + b * c) * f;
  }
  return sum;
}

}  // namespace

double score(KgeMethod m, int dim, std::span<const double> h,
             std::span<const double> r, std::span<const double> t) {
  double s;
  switch (m) {
    case KgeMethod::TransE: s = transe_score(dim, h, r, t); break;
    case KgeMethod::RotatE: s = rotate_score(dim, h, r, t); break;
    case KgeMethod::ComplEx: s = complex_score(dim, h, r, t); break;
    default: throw std::logic_error("bad method");
  }
  if (!std::isfinite(s)) {
    throw std::domain_error("non-finite score (non-finite embedding inputs?)");
  }
  return s;
}

void accum_score_grad(KgeMethod m, int dim, std::span<const double> h,
                      std::span<const double> r, std::span<const double> t,
                      double coeff, std::span<double> gh, std::span<double> gr,
                      std::span<double> gt) {
  switch (m) {
    case KgeMethod::TransE: {
      double sq = 0.0;
      for (int k = 0; k < dim; ++k) {
        const double d = (h[k] + r[k]) - t[k];
        sq += d * d;
      }
      const double norm = std::sqrt(sq);
      if (norm < kNormFloor) return;  // score flat at the cusp
      const double scale = -coeff / norm;
      for (int k = 0; k < dim; ++k) {
        const double d = (h[k] + r[k]) - t[k];
        if (!gh.empty()) gh[k] += scale * d;
        if (!gr.empty()) gr[k] += scale * d;
        if (!gt.empty()) gt[k] -= scale * d;
      }
      return;
    }
    case KgeMethod::RotatE: {
      double sq = 0.0;
      for (int k = 0; k < dim; ++k) {
        const double c = std::cos(r[k]);
        const double s = std::sin(r[k]);
        const double u = (h[k] * c - h[k + dim] * s) - t[k];
        const double v = (h[k] * s + h[k + dim] * c) - t[k + dim];
        sq += u * u + v * v;
      }
      const double norm = std::sqrt(sq);
      if (norm < kNormFloor) return;
      const double scale = -coeff / norm;
      for (int k = 0; k < dim; ++k) {
        const double a = h[k], b = h[k + dim];
        const double c = std::cos(r[k]);
        const double s = std::sin(r[k]);
        const double u = (a * c - b * s) - t[k];
        const double v = (a * s + b * c) - t[k + dim];
        if (!gh.empty()) {
          gh[k] += scale * (u * c + v * s);
          gh[k + dim] += scale * (-u * s + v * c);
        }
        if (!gr.empty()) {
          gr[k] += scale * (u * (-a * s - b * c) + v * (a * c - b * s));
        }
        if (!gt.empty()) {
          gt[k] -= scale * u;
          gt[k + dim] -= scale * v;
        }
      }
      return;
    }
    case KgeMethod::ComplEx: {
      for (int k = 0; k < dim; ++k) {
        const double a = h[k], b = h[k + dim];
        const double c = r[k], d = r[k + dim];
        const double e = t[k], f = t[k + dim];
        if (!gh.empty()) {
          gh[k] += coeff * (c * e + d * f);
          gh[k + dim] += coeff * (-d * e + c * f);
        }
        if (!gr.empty()) {
          gr[k] += coeff * (a * e + b * f);
          gr[k + dim] += coeff * (-b * e + a * f);
        }
        if (!gt.empty()) {
          gt[k] += coeff * (a * c - b * d);
          gt[k + dim] += coeff * (a * d + b * c);
        }
      }
      return;
    }
  }
}

// Candidate loops repeat score()'s exact expressions (same operation order)
// so ranking ties behave identically whether scores come from score() or
// from here.
void score_all_candidates(KgeMethod m, int dim, const Mat& entities,
                          std::span<const double> fixed_entity,
                          std::span<const double> relation, bool replace_tail,
                          std::span<double> out) {
  const std::size_t n = entities.rows();
  switch (m) {
    case KgeMethod::TransE: {
      if (replace_tail) {
        std::vector<double> q(dim);
        for (int k = 0; k < dim; ++k) q[k] = fixed_entity[k] + relation[k];
        for (std::size_t e = 0; e < n; ++e) {
          auto cand = entities.row(e);
          double sq = 0.0;
          for (int k = 0; k < dim; ++k) {
            const double d = q[k] - cand[k];
            sq += d * d;
          }
          out[e] = -std::sqrt(sq);
        }
      } else {
        for (std::size_t e = 0; e < n; ++e) {
          auto cand = entities.row(e);
          double sq = 0.0;
          for (int k = 0; k < dim; ++k) {
            const double d = (cand[k] + relation[k]) - fixed_entity[k];
            sq += d * d;
          }
          out[e] = -std::sqrt(sq);
        }
      }
      return;
    }
    case KgeMethod::RotatE: {
      std::vector<double> cs(dim), sn(dim);
      for (int k = 0; k < dim; ++k) {
        cs[k] = std::cos(relation[k]);
        sn[k] = std::sin(relation[k]);
      }
      if (replace_tail) {
        std::vector<double> wre(dim), wim(dim);
        for (int k = 0; k < dim; ++k) {
          wre[k] = fixed_entity[k] * cs[k] - fixed_entity[k + dim] * sn[k];
          wim[k] = fixed_entity[k] * sn[k] + fixed_entity[k + dim] * cs[k];
        }
        for (std::size_t e = 0; e < n; ++e) {
          auto cand = entities.row(e);
          double sq = 0.0;
          for (int k = 0; k < dim; ++k) {
            const double u = wre[k] - cand[k];
            const double v = wim[k] - cand[k + dim];
            sq += u * u + v * v;
          }
          out[e] = -std::sqrt(sq);
        }
      } else {
        for (std::size_t e = 0; e < n; ++e) {
          auto cand = entities.row(e);
          double sq = 0.0;
          for (int k = 0; k < dim; ++k) {
            const double u = (cand[k] * cs[k] - cand[k + dim] * sn[k]) -
                             fixed_entity[k];
            const double v = (cand[k] * sn[k] + cand[k + dim] * cs[k]) -
                             fixed_entity[k + dim];
            sq += u * u + v * v;
          }
          out[e] = -std::sqrt(sq);
        }
      }
      return;
    }
    case KgeMethod::ComplEx: {
      for (std::size_t e = 0; e < n; ++e) {
        auto cand = entities.row(e);
        std::span<const double> h = replace_tail ? fixed_entity : cand;
        std::span<const double> t = replace_tail ? cand : fixed_entity;
        double sum = 0.0;
        for (int k = 0; k < dim; ++k) {
          const double a = h[k], b = h[k + dim];
          const double c = relation[k], d = relation[k + dim];
          const double ee = t[k], f = t[k + dim];
          sum += (a * c - b * d) * ee + (a * d + b * c) * f;
        }
        out[e] = sum;
      }
      return;
    }
  }
}

}  // namespace fedkge
