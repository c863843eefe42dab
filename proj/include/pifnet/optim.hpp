#pragma once

#include <vector>

#include "pifnet/tensor.hpp"

namespace pifnet {

struct AdamConfig {
    Scalar lr = 1e-4;
    Scalar weight_decay = 0.0;
    Scalar beta1 = 0.9;
    Scalar beta2 = 0.999;
    Scalar eps = 1e-8;
};

// Adam with bias correction. Weight decay is decoupled: parameters shrink by
// lr * wd before the moment update, so the regularizer is independent of the
// adaptive step size.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig cfg);

    // Consumes the gradients populated by backward(); every parameter must
    // carry one. Gradients are cleared afterwards.
    void step();

    std::size_t step_count() const { return t_; }

private:
    std::vector<Tensor> params_;
    AdamConfig cfg_;
    std::vector<std::vector<Scalar>> m_;
    std::vector<std::vector<Scalar>> v_;
    std::size_t t_ = 0;
};

}  // namespace pifnet
