#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pavesage/matrix.hpp"

namespace pavesage {

struct AdamOptions {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are sized on the first step
/// from the parameter shapes and must keep the same layout afterwards.
class Adam {
 public:
  explicit Adam(AdamOptions options) : options_(options) {}

  void step(std::span<DenseMatrix* const> params, std::span<const DenseMatrix* const> grads);

  std::size_t steps_taken() const { return t_; }

 private:
  AdamOptions options_;
  std::size_t t_ = 0;
  std::vector<DenseMatrix> m_;
  std::vector<DenseMatrix> v_;
};

}  // namespace pavesage
