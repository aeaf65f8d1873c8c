#pragma once
// Score functions and their analytic gradients.
//
//   TransE   s = -||h + r - t||_2
//   RotatE   s = -||h o r - t||_2, r = e^{i theta}, flat L2 over the 2D
//            real components
//   ComplEx  s = Re(sum_k h_k r_k conj(t_k))

#include <span>

#include "fedkge/embedding.hpp"

namespace fedkge {

// Throws if the result is non-finite (poisoned inputs propagate to NaN).
double score(KgeMethod m, int dim, std::span<const double> h,
             std::span<const double> r, std::span<const double> t);

// Accumulates coeff * d(score)/d{h,r,t} into gh/gr/gt. Any of the gradient
// spans may be empty to skip that part.
void accum_score_grad(KgeMethod m, int dim, std::span<const double> h,
                      std::span<const double> r, std::span<const double> t,
                      double coeff, std::span<double> gh, std::span<double> gr,
                      std::span<double> gt);

// Candidate scoring for ranking: scores `query` against every entity row of
// `entities` in the given replacement direction. Precomputes what it can per
// query; results match score() exactly.
void score_all_candidates(KgeMethod m, int dim, const Mat& entities,
                          std::span<const double> fixed_entity,
                          std::span<const double> relation, bool replace_tail,
                          std::span<double> out);

}  // namespace fedkge
