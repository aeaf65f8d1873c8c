#pragma once
// Bias-corrected Adam applied sparsely: only rows present in the gradient
// buffer advance their moments. One step counter per state, shared by all
// rows, persists across communication rounds.

#include <cstdint>

#include "fedkge/gradbuf.hpp"
#include "fedkge/mat.hpp"

namespace fedkge {

struct AdamParams {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols) : m_(rows, cols), v_(rows, cols) {}

  void step(Mat& params, const GradBuffer& grads, const AdamParams& ap);

  std::int64_t steps() const { return t_; }

 private:
  Mat m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace fedkge
