#include "pifnet/optim.hpp"

#include <cmath>

namespace pifnet {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        if (!p.defined() || !p.is_leaf()) throw Error("adam: parameters must be leaf tensors");
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const Scalar bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<Scalar>(t_));
    const Scalar bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<Scalar>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        if (!p.has_grad()) throw Error("adam: missing gradient for parameter " + std::to_string(i));
        const auto& g = p.grad();
        auto& w = p.data_mut();
        auto& m = m_[i];
        auto& v = v_[i];
        const Scalar decay = 1.0 - cfg_.lr * cfg_.weight_decay;
        for (std::size_t j = 0; j < w.size(); ++j) {
            if (cfg_.weight_decay != 0.0) w[j] *= decay;
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            const Scalar mhat = m[j] / bc1;
            const Scalar vhat = v[j] / bc2;
            w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        ensure_finite(w, "adam");
        p.zero_grad();
    }
}

}  // namespace pifnet
