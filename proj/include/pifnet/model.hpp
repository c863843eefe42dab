#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pifnet/pif.hpp"

namespace pifnet {

struct LayerSpec {
    enum class Kind { Conv3d, MaxPool, Elu, Dropout, Pif, Flatten, FlattenConcat, Linear, Sigmoid };

    Kind kind = Kind::Elu;
    std::size_t out_channels = 0;  // conv
    std::size_t kernel = 0;        // conv / pool / pif
    std::size_t stride = 1;        // conv / pool
    std::size_t padding = 0;       // conv
    Scalar rate = 0.0;             // dropout
    std::size_t patch_size = 0;    // pif
    std::size_t filters = 0;       // pif
    bool overlap = true;           // pif
    std::size_t out_features = 0;  // linear

    static LayerSpec conv(std::size_t out_channels, std::size_t kernel, std::size_t stride = 1,
                          std::size_t padding = 0);
    static LayerSpec maxpool(std::size_t kernel, std::size_t stride);
    static LayerSpec elu();
    static LayerSpec dropout(Scalar rate);
    static LayerSpec pif(std::size_t patch_size, std::size_t kernel, std::size_t filters,
                         bool overlap = true);
    static LayerSpec flatten();
    static LayerSpec flatten_concat();
    static LayerSpec linear(std::size_t out_features);
    static LayerSpec sigmoid();
};

// Declarative architecture description. Shapes are chain-checked before any
// training; a PIF layer whose patch size does not divide the incoming
// extents is a configuration error, not something to pad or crop away.
struct ModelSpec {
    std::string name;
    std::array<std::size_t, 4> input{1, 0, 0, 0};  // (C, D, H, W)
    std::vector<LayerSpec> layers;
    std::size_t suggested_batch = 8;

    bool has_pif() const;

    std::string to_text() const;
    static ModelSpec from_text(const std::string& text);
};

// Static activation shape between layers.
struct ShapeInfo {
    bool flat = false;
    std::array<std::size_t, 4> vol{};        // (C,D,H,W) when !flat
    std::size_t features = 0;                // when flat
    bool has_secondary = false;              // overlap branch present
    std::array<std::size_t, 4> secondary{};  // (C,D,H,W) of the overlap branch
};

// Shapes entering each layer plus the final output; throws ShapeError with
// the offending layer named.
std::vector<ShapeInfo> check_shapes(const ModelSpec& spec);

struct LayerParamCount {
    std::string name;
    std::string detail;
    std::int64_t count = 0;
};

std::int64_t count_parameters(const ModelSpec& spec);
std::vector<LayerParamCount> count_parameters_by_layer(const ModelSpec& spec);

// Architecture presets. The *_full variants document the architectures at
// full volume extents (input sizes rounded to the nearest patch-aligned
// extents); the *_desk variants are reduced 32^3 versions used by tests and
// experiments, and *_micro are tiny 12^3 smoke-test models. Baseline/PIF
// desk pairs are feature-count balanced to within 10%.
ModelSpec preset(const std::string& name);
std::vector<std::string> preset_names();

struct Act {
    Tensor primary;
    Tensor secondary;  // defined only between a PIF layer and flatten-concat

    Act() = default;
    explicit Act(Tensor t) : primary(std::move(t)) {}
};

struct TraceEntry {
    Act input;
    Act output;
    std::shared_ptr<const std::vector<std::size_t>> pool_argmax;
};

// Per-layer activations recorded during a forward pass (relevance
// propagation replays these).
struct ForwardTrace {
    std::vector<TraceEntry> entries;
};

class Model {
public:
    struct Layer {
        LayerSpec spec;
        std::string name;
        Tensor weights;         // conv / linear
        Tensor bias;            // conv / linear
        std::optional<PifBanks> banks;  // pif
        Conv3dSpec conv_spec;   // conv only, resolved channels
    };

    static Model build(const ModelSpec& spec, Rng& rng);

    const ModelSpec& spec() const { return spec_; }
    const std::vector<Layer>& layers() const { return layers_; }

    // All learnable tensors (shared handles into the model).
    std::vector<Tensor> parameters();

    // Input (B, C, D, H, W) -> (B, 1) sigmoid output for the presets here.
    Tensor forward(const Tensor& input, bool training, Rng& rng, ForwardTrace* trace = nullptr);

    std::int64_t parameter_count() const;
    // FNV-1a over the parameter bytes in storage order.
    std::uint64_t checksum() const;

    int layer_index(const std::string& name) const;  // -1 when absent

    // Deep copies of all parameter values, and restore.
    std::vector<std::vector<Scalar>> snapshot_parameters();
    void restore_parameters(const std::vector<std::vector<Scalar>>& snap);

private:
    ModelSpec spec_;
    std::vector<Layer> layers_;
};

}  // namespace pifnet
