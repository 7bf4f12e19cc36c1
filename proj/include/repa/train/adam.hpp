#pragma once

#include <vector>

#include "repa/nets/params.hpp"

namespace repa::train {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over the trainable arrays of a parameter set.
class Adam {
 public:
  Adam(const nets::ParameterSet& params, AdamConfig config = {});

  // grads[i] belongs to params.value(i); entries for fixed arrays are ignored.
  void step(nets::ParameterSet& params, const std::vector<diffcore::Tensor>& grads);
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamConfig config_;
  std::vector<diffcore::Tensor> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace repa::train
