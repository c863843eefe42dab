#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pifnet/model.hpp"

namespace pifnet {

// alpha/beta rule configuration. alpha and beta trade off positive against
// negative evidence and must satisfy alpha = 1 + beta, which also makes the
// propagation conserve relevance through bias-free layers.
struct LrpConfig {
    Scalar alpha = 5.0;
    Scalar beta = 4.0;
    Scalar stabilizer = 1e-9;

    void validate() const;
};

struct StartPoint {
    enum class Kind { Output, Hidden, PifPatch };
    Kind kind = Kind::Output;
    std::string layer;              // hidden starts
    std::size_t filter = 0;         // channel / feature index
    std::size_t patch = 0;          // bank index for PifPatch (originals first)

    static StartPoint output();
    static StartPoint hidden(std::string layer, std::size_t filter);
    static StartPoint pif_patch(std::size_t patch, std::size_t filter);

    // "output" | "<layer>:<filter>" | "pif:patch<p>:filter<f>"
    static StartPoint parse(const std::string& text);
    std::string to_string() const;
};

struct RelevanceMap {
    std::array<std::size_t, 3> extents{};  // (d, h, w)
    std::vector<Scalar> values;            // row-major, summed over input channels
    std::string start;
    Scalar alpha = 0.0;
    Scalar beta = 0.0;
    std::uint64_t model_checksum = 0;
};

// Positive/negative split of per-connection contributions z_ij = a_i * w_ij,
// each side normalized by its own sum (sign-matched stabilizer); biases are
// excluded from redistribution. act_in is the recorded forward activation.
std::vector<Scalar> relprop_linear(const std::vector<Scalar>& weights, std::size_t out_features,
                                   std::size_t in_features, const std::vector<Scalar>& act_in,
                                   const std::vector<Scalar>& rel_out, const LrpConfig& cfg);

std::vector<Scalar> relprop_conv(const Conv3dSpec& spec, const std::array<std::size_t, 4>& in_dims,
                                 const std::vector<Scalar>& weights, const std::vector<Scalar>& act_in,
                                 const std::vector<Scalar>& rel_out, const LrpConfig& cfg);

// Winner-takes-all routing consistent with the pooling backward pass.
std::vector<Scalar> relprop_pool(const std::vector<std::size_t>& argmax,
                                 const std::vector<Scalar>& rel_out, std::size_t in_size);

// Forward pass with recorded activations, relevance seeded at the
// pre-sigmoid logit (output start) or at a hidden filter's activation map,
// then propagated to the input. Input must be a single volume (1,C,D,H,W).
RelevanceMap heatmap(Model& model, const Tensor& input, const LrpConfig& cfg, const StartPoint& start);

}  // namespace pifnet
