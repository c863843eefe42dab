#include "pifnet/model.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

namespace pifnet {

LayerSpec LayerSpec::conv(std::size_t out_channels, std::size_t kernel, std::size_t stride,
                          std::size_t padding) {
    LayerSpec s;
    s.kind = Kind::Conv3d;
    s.out_channels = out_channels;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
}

LayerSpec LayerSpec::maxpool(std::size_t kernel, std::size_t stride) {
    LayerSpec s;
    s.kind = Kind::MaxPool;
    s.kernel = kernel;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::elu() {
    LayerSpec s;
    s.kind = Kind::Elu;
    return s;
}

LayerSpec LayerSpec::dropout(Scalar rate) {
    LayerSpec s;
    s.kind = Kind::Dropout;
    s.rate = rate;
    return s;
}

LayerSpec LayerSpec::pif(std::size_t patch_size, std::size_t kernel, std::size_t filters, bool overlap) {
    LayerSpec s;
    s.kind = Kind::Pif;
    s.patch_size = patch_size;
    s.kernel = kernel;
    s.filters = filters;
    s.overlap = overlap;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = Kind::Flatten;
    return s;
}

LayerSpec LayerSpec::flatten_concat() {
    LayerSpec s;
    s.kind = Kind::FlattenConcat;
    return s;
}

LayerSpec LayerSpec::linear(std::size_t out_features) {
    LayerSpec s;
    s.kind = Kind::Linear;
    s.out_features = out_features;
    return s;
}

LayerSpec LayerSpec::sigmoid() {
    LayerSpec s;
    s.kind = Kind::Sigmoid;
    return s;
}

bool ModelSpec::has_pif() const {
    return std::any_of(layers.begin(), layers.end(),
                       [](const LayerSpec& l) { return l.kind == LayerSpec::Kind::Pif; });
}

namespace {

std::vector<std::string> layer_names(const ModelSpec& spec) {
    std::vector<std::string> names;
    std::size_t conv = 0, pool = 0, eluc = 0, drop = 0, fc = 0;
    for (const auto& l : spec.layers) {
        switch (l.kind) {
            case LayerSpec::Kind::Conv3d: names.push_back("conv" + std::to_string(++conv)); break;
            case LayerSpec::Kind::MaxPool: names.push_back("pool" + std::to_string(++pool)); break;
            case LayerSpec::Kind::Elu: names.push_back("elu" + std::to_string(++eluc)); break;
            case LayerSpec::Kind::Dropout: names.push_back("drop" + std::to_string(++drop)); break;
            case LayerSpec::Kind::Pif: names.push_back("pif"); break;
            case LayerSpec::Kind::Flatten: names.push_back("flatten"); break;
            case LayerSpec::Kind::FlattenConcat: names.push_back("flatten"); break;
            case LayerSpec::Kind::Linear: names.push_back("fc" + std::to_string(++fc)); break;
            case LayerSpec::Kind::Sigmoid: names.push_back("sigmoid"); break;
        }
    }
    return names;
}

[[noreturn]] void shape_fail(const std::string& layer, const std::string& msg) {
    throw ShapeError("shape check at " + layer + ": " + msg);
}

}  // namespace

std::vector<ShapeInfo> check_shapes(const ModelSpec& spec) {
    if (spec.input[0] == 0 || spec.input[1] == 0 || spec.input[2] == 0 || spec.input[3] == 0) {
        throw ShapeError("shape check: model input extents must be positive");
    }
    std::vector<ShapeInfo> infos;
    ShapeInfo cur;
    cur.vol = spec.input;
    infos.push_back(cur);

    const auto names = layer_names(spec);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const std::string& nm = names[i];
        if (cur.has_secondary && l.kind != LayerSpec::Kind::FlattenConcat) {
            shape_fail(nm, "overlap branch must be consumed by a flatten-concat layer");
        }
        switch (l.kind) {
            case LayerSpec::Kind::Conv3d: {
                if (cur.flat) shape_fail(nm, "convolution applied to flattened features");
                Conv3dSpec cs{cur.vol[0], l.out_channels, l.kernel, l.stride, l.padding};
                try {
                    cs.validate();
                    cur.vol = {l.out_channels, cs.out_extent(cur.vol[1], "depth"),
                               cs.out_extent(cur.vol[2], "height"), cs.out_extent(cur.vol[3], "width")};
                } catch (const ShapeError& e) {
                    shape_fail(nm, e.what());
                }
                break;
            }
            case LayerSpec::Kind::MaxPool: {
                if (cur.flat) shape_fail(nm, "pooling applied to flattened features");
                PoolSpec ps{l.kernel, l.stride};
                try {
                    ps.validate();
                    cur.vol = {cur.vol[0], ps.out_extent(cur.vol[1], "depth"),
                               ps.out_extent(cur.vol[2], "height"), ps.out_extent(cur.vol[3], "width")};
                } catch (const ShapeError& e) {
                    shape_fail(nm, e.what());
                }
                break;
            }
            case LayerSpec::Kind::Elu:
            case LayerSpec::Kind::Sigmoid:
                break;  // shape preserved
            case LayerSpec::Kind::Dropout:
                if (!(l.rate >= 0.0 && l.rate < 1.0)) shape_fail(nm, "dropout rate outside [0,1)");
                break;
            case LayerSpec::Kind::Pif: {
                if (cur.flat) shape_fail(nm, "pif applied to flattened features");
                if (l.kernel > l.patch_size) shape_fail(nm, "kernel exceeds patch size");
                PatchGrid grid;
                try {
                    grid = PatchGrid::make({cur.vol[1], cur.vol[2], cur.vol[3]}, l.patch_size, l.overlap);
                } catch (const ShapeError& e) {
                    shape_fail(nm, e.what());
                }
                const std::size_t q = l.patch_size - l.kernel + 1;
                cur.vol = {l.filters, grid.grid_dims[0] * q, grid.grid_dims[1] * q,
                           grid.grid_dims[2] * q};
                if (grid.num_overlap() > 0) {
                    cur.has_secondary = true;
                    cur.secondary = {grid.num_overlap() * l.filters, q, q, q};
                }
                break;
            }
            case LayerSpec::Kind::Flatten: {
                if (cur.flat) shape_fail(nm, "flatten applied twice");
                cur.features = cur.vol[0] * cur.vol[1] * cur.vol[2] * cur.vol[3];
                cur.flat = true;
                break;
            }
            case LayerSpec::Kind::FlattenConcat: {
                if (cur.flat) shape_fail(nm, "flatten applied twice");
                std::size_t n = cur.vol[0] * cur.vol[1] * cur.vol[2] * cur.vol[3];
                if (cur.has_secondary) {
                    n += cur.secondary[0] * cur.secondary[1] * cur.secondary[2] * cur.secondary[3];
                }
                cur = ShapeInfo{};
                cur.flat = true;
                cur.features = n;
                break;
            }
            case LayerSpec::Kind::Linear: {
                if (!cur.flat) shape_fail(nm, "linear layer needs flattened input");
                if (l.out_features == 0) shape_fail(nm, "output feature count must be positive");
                cur.features = l.out_features;
                break;
            }
        }
        infos.push_back(cur);
    }
    return infos;
}

std::vector<LayerParamCount> count_parameters_by_layer(const ModelSpec& spec) {
    const auto infos = check_shapes(spec);
    const auto names = layer_names(spec);
    std::vector<LayerParamCount> out;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const ShapeInfo& in = infos[i];
        LayerParamCount c{names[i], "", 0};
        std::ostringstream detail;
        switch (l.kind) {
            case LayerSpec::Kind::Conv3d: {
                const std::int64_t k3 = static_cast<std::int64_t>(l.kernel * l.kernel * l.kernel);
                c.count = static_cast<std::int64_t>(l.out_channels) *
                              static_cast<std::int64_t>(in.vol[0]) * k3 +
                          static_cast<std::int64_t>(l.out_channels);
                detail << l.out_channels << "x" << in.vol[0] << "x" << l.kernel << "^3 + bias";
                break;
            }
            case LayerSpec::Kind::Pif: {
                PatchGrid grid = PatchGrid::make({in.vol[1], in.vol[2], in.vol[3]}, l.patch_size, l.overlap);
                const std::int64_t per_bank =
                    static_cast<std::int64_t>(l.filters) *
                        static_cast<std::int64_t>(in.vol[0] * l.kernel * l.kernel * l.kernel) +
                    static_cast<std::int64_t>(l.filters);
                c.count = static_cast<std::int64_t>(grid.num_banks()) * per_bank;
                detail << grid.num_original() << "+" << grid.num_overlap() << " banks x " << per_bank;
                break;
            }
            case LayerSpec::Kind::Linear: {
                c.count = static_cast<std::int64_t>(l.out_features) *
                              static_cast<std::int64_t>(in.features) +
                          static_cast<std::int64_t>(l.out_features);
                detail << l.out_features << "x" << in.features << " + bias";
                break;
            }
            default:
                break;
        }
        c.detail = detail.str();
        out.push_back(std::move(c));
    }
    return out;
}

std::int64_t count_parameters(const ModelSpec& spec) {
    std::int64_t total = 0;
    for (const auto& c : count_parameters_by_layer(spec)) total += c.count;
    return total;
}

std::string ModelSpec::to_text() const {
    std::ostringstream os;
    os << "name " << name << "\n";
    os << "input " << input[0] << " " << input[1] << " " << input[2] << " " << input[3] << "\n";
    os << "batch " << suggested_batch << "\n";
    for (const auto& l : layers) {
        switch (l.kind) {
            case LayerSpec::Kind::Conv3d:
                os << "conv " << l.out_channels << " " << l.kernel << " " << l.stride << " " << l.padding
                   << "\n";
                break;
            case LayerSpec::Kind::MaxPool:
                os << "maxpool " << l.kernel << " " << l.stride << "\n";
                break;
            case LayerSpec::Kind::Elu:
                os << "elu\n";
                break;
            case LayerSpec::Kind::Dropout:
                os << "dropout " << l.rate << "\n";
                break;
            case LayerSpec::Kind::Pif:
                os << "pif " << l.patch_size << " " << l.kernel << " " << l.filters << " "
                   << (l.overlap ? 1 : 0) << "\n";
                break;
            case LayerSpec::Kind::Flatten:
                os << "flatten\n";
                break;
            case LayerSpec::Kind::FlattenConcat:
                os << "flattenconcat\n";
                break;
            case LayerSpec::Kind::Linear:
                os << "linear " << l.out_features << "\n";
                break;
            case LayerSpec::Kind::Sigmoid:
                os << "sigmoid\n";
                break;
        }
    }
    return os.str();
}

ModelSpec ModelSpec::from_text(const std::string& text) {
    ModelSpec spec;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok.empty()) continue;
        auto need = [&](std::size_t n) {
            std::vector<std::size_t> vals(n);
            for (auto& v : vals) {
                if (!(ls >> v)) throw ConfigError("model text: malformed line '" + line + "'");
            }
            return vals;
        };
        if (tok == "name") {
            ls >> spec.name;
        } else if (tok == "input") {
            auto v = need(4);
            spec.input = {v[0], v[1], v[2], v[3]};
        } else if (tok == "batch") {
            spec.suggested_batch = need(1)[0];
        } else if (tok == "conv") {
            auto v = need(4);
            spec.layers.push_back(LayerSpec::conv(v[0], v[1], v[2], v[3]));
        } else if (tok == "maxpool") {
            auto v = need(2);
            spec.layers.push_back(LayerSpec::maxpool(v[0], v[1]));
        } else if (tok == "elu") {
            spec.layers.push_back(LayerSpec::elu());
        } else if (tok == "dropout") {
            Scalar rate;
            if (!(ls >> rate)) throw ConfigError("model text: malformed line '" + line + "'");
            spec.layers.push_back(LayerSpec::dropout(rate));
        } else if (tok == "pif") {
            auto v = need(4);
            spec.layers.push_back(LayerSpec::pif(v[0], v[1], v[2], v[3] != 0));
        } else if (tok == "flatten") {
            spec.layers.push_back(LayerSpec::flatten());
        } else if (tok == "flattenconcat") {
            spec.layers.push_back(LayerSpec::flatten_concat());
        } else if (tok == "linear") {
            spec.layers.push_back(LayerSpec::linear(need(1)[0]));
        } else if (tok == "sigmoid") {
            spec.layers.push_back(LayerSpec::sigmoid());
        } else {
            throw ConfigError("model text: unknown layer '" + tok + "'");
        }
    }
    return spec;
}

namespace {

ModelSpec make_baseline(const std::string& name, std::array<std::size_t, 4> input,
                        std::vector<std::size_t> conv_filters, std::vector<LayerSpec> head,
                        std::size_t batch, bool pool_after_second, std::size_t pool1_k,
                        std::size_t pool1_s, std::size_t final_pool_k, std::size_t final_pool_s) {
    ModelSpec m;
    m.name = name;
    m.input = input;
    m.suggested_batch = batch;
    for (std::size_t i = 0; i < conv_filters.size(); ++i) {
        m.layers.push_back(LayerSpec::conv(conv_filters[i], 3, 1, 1));
        m.layers.push_back(LayerSpec::elu());
        const bool pool_here = (i == 0) || (pool_after_second && i == 1);
        if (pool_here) {
            m.layers.push_back(LayerSpec::maxpool(pool1_k, pool1_s));
            m.layers.push_back(LayerSpec::dropout(0.3));
        }
    }
    m.layers.push_back(LayerSpec::maxpool(final_pool_k, final_pool_s));
    m.layers.push_back(LayerSpec::dropout(0.3));
    m.layers.push_back(LayerSpec::flatten());
    for (auto& l : head) m.layers.push_back(l);
    return m;
}

ModelSpec make_pif(const std::string& name, std::array<std::size_t, 4> input,
                   std::vector<std::size_t> conv_filters, std::size_t patch, std::size_t kernel,
                   std::size_t filters, std::vector<LayerSpec> head, std::size_t batch,
                   bool pool_after_second, std::size_t pool_k, std::size_t pool_s) {
    ModelSpec m;
    m.name = name;
    m.input = input;
    m.suggested_batch = batch;
    for (std::size_t i = 0; i < conv_filters.size(); ++i) {
        m.layers.push_back(LayerSpec::conv(conv_filters[i], 3, 1, 1));
        m.layers.push_back(LayerSpec::elu());
        const bool pool_here = (i == 0) || (pool_after_second && i == 1);
        if (pool_here) {
            m.layers.push_back(LayerSpec::maxpool(pool_k, pool_s));
            m.layers.push_back(LayerSpec::dropout(0.3));
        }
    }
    m.layers.push_back(LayerSpec::pif(patch, kernel, filters, true));
    m.layers.push_back(LayerSpec::flatten_concat());
    for (auto& l : head) m.layers.push_back(l);
    return m;
}

std::vector<LayerSpec> head_two_fc(std::size_t hidden) {
    return {LayerSpec::linear(hidden), LayerSpec::elu(), LayerSpec::linear(1), LayerSpec::sigmoid()};
}

std::vector<LayerSpec> head_one_fc() { return {LayerSpec::linear(1), LayerSpec::sigmoid()}; }

}  // namespace

ModelSpec preset(const std::string& name) {
    // Full-scale MRI-like extents do not divide evenly into 5^3 patches
    // after two pooling stages, so the *_full inputs are rounded to the
    // nearest patch-aligned extents.
    if (name == "baseline_a_full") {
        return make_baseline(name, {1, 180, 225, 180}, {8, 16, 32, 64, 64}, head_two_fc(100), 8,
                             true, 3, 3, 4, 2);
    }
    if (name == "pif_a_full") {
        return make_pif(name, {1, 180, 225, 180}, {8, 16, 32, 64}, 5, 3, 6, head_two_fc(100), 12,
                        true, 3, 3);
    }
    if (name == "baseline_b_full") {
        return make_baseline(name, {1, 96, 96, 96}, {64, 64, 64, 64, 36}, head_two_fc(80), 12, true,
                             3, 3, 4, 2);
    }
    if (name == "pif_b_full") {
        return make_pif(name, {1, 96, 96, 96}, {64, 64, 64, 64}, 5, 3, 3, head_two_fc(80), 6, true,
                        3, 3);
    }
    if (name == "baseline_c_full") {
        return make_baseline(name, {1, 96, 96, 96}, {64, 64, 64, 64}, head_one_fc(), 4, true, 3, 3,
                             3, 3);
    }
    if (name == "pif_c_full") {
        return make_pif(name, {1, 96, 96, 96}, {16, 32, 64, 64}, 5, 3, 4, head_two_fc(100), 4, true,
                        3, 3);
    }
    // Desk-scale variants: 32^3 inputs, reduced filter counts, one early
    // pooling stage so the patch layer still sees a 10^3 map. Each pair is
    // parameter balanced to within 10%.
    if (name == "baseline_a_desk") {
        return make_baseline(name, {1, 32, 32, 32}, {4, 4, 8, 8, 8}, head_two_fc(100), 8, false, 3,
                             3, 4, 2);
    }
    if (name == "pif_a_desk") {
        return make_pif(name, {1, 32, 32, 32}, {4, 4, 8, 8}, 5, 3, 2, head_two_fc(100), 12, false,
                        3, 3);
    }
    if (name == "baseline_b_desk") {
        return make_baseline(name, {1, 32, 32, 32}, {4, 4, 8, 8, 4}, head_two_fc(80), 12, false, 3,
                             3, 4, 2);
    }
    if (name == "pif_b_desk") {
        return make_pif(name, {1, 32, 32, 32}, {4, 4, 8, 8}, 5, 3, 1, head_two_fc(80), 12, false, 3,
                        3);
    }
    if (name == "baseline_c_desk") {
        return make_baseline(name, {1, 32, 32, 32}, {8, 16, 16, 16}, head_one_fc(), 4, false, 3, 3,
                             3, 3);
    }
    if (name == "pif_c_desk") {
        return make_pif(name, {1, 32, 32, 32}, {2, 4, 8, 8}, 5, 3, 1, head_two_fc(60), 4, false, 3,
                        3);
    }
    // Tiny smoke-test models.
    if (name == "baseline_micro") {
        ModelSpec m;
        m.name = name;
        m.input = {1, 12, 12, 12};
        m.suggested_batch = 4;
        m.layers = {LayerSpec::conv(2, 3, 1, 1), LayerSpec::elu(),    LayerSpec::maxpool(2, 2),
                    LayerSpec::conv(2, 3, 1, 1), LayerSpec::elu(),    LayerSpec::maxpool(2, 2),
                    LayerSpec::flatten(),        LayerSpec::linear(24), LayerSpec::elu(),
                    LayerSpec::linear(1),        LayerSpec::sigmoid()};
        return m;
    }
    if (name == "pif_micro") {
        ModelSpec m;
        m.name = name;
        m.input = {1, 12, 12, 12};
        m.suggested_batch = 4;
        m.layers = {LayerSpec::conv(2, 3, 1, 1), LayerSpec::elu(),      LayerSpec::maxpool(2, 2),
                    LayerSpec::conv(2, 3, 1, 1), LayerSpec::elu(),      LayerSpec::pif(3, 3, 2, true),
                    LayerSpec::flatten_concat(), LayerSpec::linear(24), LayerSpec::elu(),
                    LayerSpec::linear(1),        LayerSpec::sigmoid()};
        return m;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() {
    return {"baseline_a_full", "pif_a_full", "baseline_b_full", "pif_b_full",
            "baseline_c_full", "pif_c_full", "baseline_a_desk",  "pif_a_desk",
            "baseline_b_desk",  "pif_b_desk",  "baseline_c_desk",  "pif_c_desk",
            "baseline_micro",   "pif_micro"};
}

Model Model::build(const ModelSpec& spec, Rng& rng) {
    const auto infos = check_shapes(spec);
    const auto names = layer_names(spec);
    Model model;
    model.spec_ = spec;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const ShapeInfo& in = infos[i];
        Layer layer;
        layer.spec = l;
        layer.name = names[i];
        switch (l.kind) {
            case LayerSpec::Kind::Conv3d: {
                layer.conv_spec = Conv3dSpec{in.vol[0], l.out_channels, l.kernel, l.stride, l.padding};
                const std::size_t fan_in = in.vol[0] * l.kernel * l.kernel * l.kernel;
                layer.weights =
                    he_init(Shape{l.out_channels, in.vol[0], l.kernel, l.kernel, l.kernel}, fan_in, rng);
                layer.bias = zero_bias(l.out_channels);
                break;
            }
            case LayerSpec::Kind::Pif: {
                PatchGrid grid = PatchGrid::make({in.vol[1], in.vol[2], in.vol[3]}, l.patch_size, l.overlap);
                layer.banks = PifBanks::init(grid, in.vol[0], l.kernel, l.filters, rng);
                break;
            }
            case LayerSpec::Kind::Linear: {
                layer.weights = he_init(Shape{l.out_features, in.features}, in.features, rng);
                layer.bias = zero_bias(l.out_features);
                break;
            }
            default:
                break;
        }
        model.layers_.push_back(std::move(layer));
    }
    return model;
}

std::vector<Tensor> Model::parameters() {
    std::vector<Tensor> params;
    for (auto& l : layers_) {
        if (l.weights.defined()) {
            params.push_back(l.weights);
            params.push_back(l.bias);
        }
        if (l.banks) {
            for (auto& w : l.banks->weights) params.push_back(w);
            for (auto& b : l.banks->biases) params.push_back(b);
        }
    }
    return params;
}

Tensor Model::forward(const Tensor& input, bool training, Rng& rng, ForwardTrace* trace) {
    if (input.shape().size() != 5) throw ShapeError("model: input must be rank 5 (B,C,D,H,W)");
    for (std::size_t a = 0; a < 4; ++a) {
        if (input.shape()[a + 1] != spec_.input[a]) {
            throw ShapeError("model: input shape " + shape_str(input.shape()) +
                             " does not match spec input");
        }
    }
    if (trace) trace->entries.clear();

    Act cur(input);
    for (auto& layer : layers_) {
        TraceEntry entry;
        entry.input = cur;
        Act next;
        switch (layer.spec.kind) {
            case LayerSpec::Kind::Conv3d:
                next = Act(conv3d(cur.primary, layer.conv_spec, layer.weights, layer.bias));
                break;
            case LayerSpec::Kind::MaxPool: {
                MaxPoolResult r = maxpool3d(cur.primary, PoolSpec{layer.spec.kernel, layer.spec.stride});
                next = Act(std::move(r.output));
                entry.pool_argmax = r.argmax;
                break;
            }
            case LayerSpec::Kind::Elu:
                next = Act(elu(cur.primary));
                break;
            case LayerSpec::Kind::Dropout:
                next = Act(dropout(cur.primary, layer.spec.rate, rng, training));
                break;
            case LayerSpec::Kind::Pif: {
                PifOutput out = pif_forward(cur.primary, *layer.banks);
                next.primary = std::move(out.original);
                next.secondary = std::move(out.overlap);
                break;
            }
            case LayerSpec::Kind::Flatten:
                next = Act(flatten(cur.primary));
                break;
            case LayerSpec::Kind::FlattenConcat: {
                Tensor flat = flatten(cur.primary);
                if (cur.secondary.defined()) flat = concat_features(flat, flatten(cur.secondary));
                next = Act(std::move(flat));
                break;
            }
            case LayerSpec::Kind::Linear:
                next = Act(linear(cur.primary, layer.weights, layer.bias));
                break;
            case LayerSpec::Kind::Sigmoid:
                next = Act(sigmoid(cur.primary));
                break;
        }
        entry.output = next;
        if (trace) trace->entries.push_back(entry);
        cur = std::move(next);
    }
    return cur.primary;
}

std::int64_t Model::parameter_count() const { return count_parameters(spec_); }

std::uint64_t Model::checksum() const {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    auto mix = [&hash](const std::vector<Scalar>& v) {
        for (Scalar x : v) {
            std::uint64_t bits;
            std::memcpy(&bits, &x, sizeof(bits));
            for (int i = 0; i < 8; ++i) {
                hash ^= (bits >> (8 * i)) & 0xff;
                hash *= 0x100000001b3ULL;
            }
        }
    };
    for (const auto& l : layers_) {
        if (l.weights.defined()) {
            mix(l.weights.data());
            mix(l.bias.data());
        }
        if (l.banks) {
            for (const auto& w : l.banks->weights) mix(w.data());
            for (const auto& b : l.banks->biases) mix(b.data());
        }
    }
    return hash;
}

int Model::layer_index(const std::string& name) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

std::vector<std::vector<Scalar>> Model::snapshot_parameters() {
    std::vector<std::vector<Scalar>> snap;
    for (auto& p : parameters()) snap.push_back(p.data());
    return snap;
}

void Model::restore_parameters(const std::vector<std::vector<Scalar>>& snap) {
    auto params = parameters();
    if (snap.size() != params.size()) throw Error("model: snapshot size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (snap[i].size() != params[i].size()) throw Error("model: snapshot tensor size mismatch");
        params[i].data_mut() = snap[i];
    }
}

}  // namespace pifnet
