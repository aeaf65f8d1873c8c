#include "fedkge/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace fedkge {

void AdamState::step(Mat& params, const GradBuffer& grads,
                     const AdamParams& ap) {
  if (m_.rows() != params.rows() || m_.cols() != params.cols()) {
    throw std::invalid_argument("adam state shape does not match parameters");
  }
  if (grads.width() != params.cols()) {
    throw std::invalid_argument("gradient width does not match parameters");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(ap.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(ap.beta2, static_cast<double>(t_));
  for (std::int32_t id : grads.sorted_ids()) {
    auto g = grads.row(id);
    auto m = m_.row(id);
    auto v = v_.row(id);
    auto p = params.row(id);
    for (std::size_t k = 0; k < g.size(); ++k) {
      m[k] = ap.beta1 * m[k] + (1.0 - ap.beta1) * g[k];
      v[k] = ap.beta2 * v[k] + (1.0 - ap.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= ap.lr * mhat / (std::sqrt(vhat) + ap.eps);
    }
  }
}

}  // namespace fedkge
