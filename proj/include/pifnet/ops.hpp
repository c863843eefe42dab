#pragma once

#include <memory>
#include <utility>

#include "pifnet/rng.hpp"
#include "pifnet/tensor.hpp"

namespace pifnet {

struct Conv3dSpec {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_size = 1;  // isotropic
    std::size_t stride = 1;
    std::size_t padding = 0;

    void validate() const;
    // Output extent along one axis; throws ShapeError if non-positive.
    std::size_t out_extent(std::size_t in, const char* axis) const;
};

struct PoolSpec {
    std::size_t kernel_size = 1;
    std::size_t stride = 1;

    void validate() const;
    std::size_t out_extent(std::size_t in, const char* axis) const;
};

// Sliding-window weighted sum (cross-correlation orientation) plus bias.
// input (B,C,D,H,W), weights (F,C,k,k,k), bias (F) -> (B,F,OD,OH,OW).
Tensor conv3d(const Tensor& input, const Conv3dSpec& spec, const Tensor& weights, const Tensor& bias);

struct MaxPoolResult {
    Tensor output;
    // Flat index into the input tensor of each window's maximum; ties break
    // to the first position in row-major scan order. Shared with the
    // backward pass and with relevance routing.
    std::shared_ptr<const std::vector<std::size_t>> argmax;
};

MaxPoolResult maxpool3d(const Tensor& input, const PoolSpec& spec);

// ELU with unit alpha: x for x > 0, exp(x) - 1 otherwise.
Tensor elu(const Tensor& input);
Tensor sigmoid(const Tensor& input);

// Inverted dropout: at training, kept elements are scaled by 1/(1-p);
// identity at evaluation. Per-element masks.
Tensor dropout(const Tensor& input, Scalar p, Rng& rng, bool training);

// input (B,N), weights (M,N), bias (M) -> (B,M).
Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias);

// (B, ...) -> (B, prod(rest)).
Tensor flatten(const Tensor& input);
// Concatenates two rank-2 tensors along the feature axis.
Tensor concat_features(const Tensor& a, const Tensor& b);

// Mean over the batch of -[y ln p + (1-y) ln(1-p)]; predictions clamped to
// [1e-12, 1 - 1e-12]. Labels must be exactly 0 or 1.
Tensor bce_loss(const Tensor& predictions, const std::vector<Scalar>& labels);

// Zero-mean Gaussian with variance 2/fan_in. For kernels fan_in is
// in_channels * k^3; for linear weights it is the input feature count.
Tensor he_init(Shape shape, std::size_t fan_in, Rng& rng);
Tensor zero_bias(std::size_t n);

}  // namespace pifnet
