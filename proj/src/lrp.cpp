#include "pifnet/lrp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pifnet {

void LrpConfig::validate() const {
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("lrp: alpha and beta must be non-negative");
    if (std::abs(alpha - (1.0 + beta)) > 1e-12) {
        throw ConfigError("lrp: alpha must equal 1 + beta (got alpha=" + std::to_string(alpha) +
                          ", beta=" + std::to_string(beta) + ")");
    }
    if (!(stabilizer > 0.0)) throw ConfigError("lrp: stabilizer must be positive");
}

StartPoint StartPoint::output() { return StartPoint{}; }

StartPoint StartPoint::hidden(std::string layer, std::size_t filter) {
    StartPoint s;
    s.kind = Kind::Hidden;
    s.layer = std::move(layer);
    s.filter = filter;
    return s;
}

StartPoint StartPoint::pif_patch(std::size_t patch, std::size_t filter) {
    StartPoint s;
    s.kind = Kind::PifPatch;
    s.layer = "pif";
    s.patch = patch;
    s.filter = filter;
    return s;
}

StartPoint StartPoint::parse(const std::string& text) {
    if (text == "output") return output();
    const auto first = text.find(':');
    if (first == std::string::npos) {
        throw ConfigError("lrp start: expected 'output', '<layer>:<filter>' or "
                          "'pif:patch<p>:filter<f>', got '" + text + "'");
    }
    const std::string head = text.substr(0, first);
    const std::string rest = text.substr(first + 1);
    auto parse_num = [&](const std::string& s, const std::string& prefix) {
        std::string digits = s;
        if (!prefix.empty()) {
            if (s.rfind(prefix, 0) != 0) {
                throw ConfigError("lrp start: expected '" + prefix + "<n>' in '" + text + "'");
            }
            digits = s.substr(prefix.size());
        }
        if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
            throw ConfigError("lrp start: bad index in '" + text + "'");
        }
        return static_cast<std::size_t>(std::stoull(digits));
    };
    if (head == "pif" && rest.rfind("patch", 0) == 0) {
        const auto second = rest.find(':');
        if (second == std::string::npos) {
            throw ConfigError("lrp start: expected 'pif:patch<p>:filter<f>', got '" + text + "'");
        }
        const std::size_t patch = parse_num(rest.substr(0, second), "patch");
        const std::size_t filter = parse_num(rest.substr(second + 1), "filter");
        return pif_patch(patch, filter);
    }
    return hidden(head, parse_num(rest, ""));
}

std::string StartPoint::to_string() const {
    switch (kind) {
        case Kind::Output: return "output";
        case Kind::Hidden: return layer + ":" + std::to_string(filter);
        case Kind::PifPatch:
            return "pif:patch" + std::to_string(patch) + ":filter" + std::to_string(filter);
    }
    return "?";
}

std::vector<Scalar> relprop_linear(const std::vector<Scalar>& weights, std::size_t out_features,
                                   std::size_t in_features, const std::vector<Scalar>& act_in,
                                   const std::vector<Scalar>& rel_out, const LrpConfig& cfg) {
    if (weights.size() != out_features * in_features || act_in.size() != in_features ||
        rel_out.size() != out_features) {
        throw ShapeError("relprop_linear: size mismatch");
    }
    std::vector<Scalar> rel_in(in_features, 0.0);
    const Scalar eps = cfg.stabilizer;
    for (std::size_t m = 0; m < out_features; ++m) {
        const Scalar rj = rel_out[m];
        if (rj == 0.0) continue;
        const Scalar* wr = weights.data() + m * in_features;
        Scalar sp = 0.0, sn = 0.0;
        for (std::size_t n = 0; n < in_features; ++n) {
            const Scalar z = act_in[n] * wr[n];
            if (z > 0.0) sp += z;
            else sn += z;
        }
        const Scalar dp = sp + eps;
        const Scalar dn = sn - eps;
        for (std::size_t n = 0; n < in_features; ++n) {
            const Scalar z = act_in[n] * wr[n];
            if (z > 0.0) rel_in[n] += cfg.alpha * (z / dp) * rj;
            else if (z < 0.0) rel_in[n] -= cfg.beta * (z / dn) * rj;
        }
    }
    return rel_in;
}

std::vector<Scalar> relprop_conv(const Conv3dSpec& spec, const std::array<std::size_t, 4>& in_dims,
                                 const std::vector<Scalar>& weights, const std::vector<Scalar>& act_in,
                                 const std::vector<Scalar>& rel_out, const LrpConfig& cfg) {
    const std::size_t C = in_dims[0], D = in_dims[1], H = in_dims[2], W = in_dims[3];
    if (act_in.size() != C * D * H * W) throw ShapeError("relprop_conv: activation size mismatch");
    const std::size_t k = spec.kernel_size, st = spec.stride, pad = spec.padding;
    const std::size_t F = spec.out_channels;
    const std::size_t OD = spec.out_extent(D, "depth");
    const std::size_t OH = spec.out_extent(H, "height");
    const std::size_t OW = spec.out_extent(W, "width");
    if (rel_out.size() != F * OD * OH * OW) throw ShapeError("relprop_conv: relevance size mismatch");

    std::vector<Scalar> rel_in(act_in.size(), 0.0);
    const Scalar eps = cfg.stabilizer;
    const std::size_t k3 = k * k * k;
    std::size_t o = 0;
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t oz = 0; oz < OD; ++oz)
            for (std::size_t oy = 0; oy < OH; ++oy)
                for (std::size_t ox = 0; ox < OW; ++ox, ++o) {
                    const Scalar rj = rel_out[o];
                    if (rj == 0.0) continue;
                    Scalar sp = 0.0, sn = 0.0;
                    for (std::size_t c = 0; c < C; ++c) {
                        const Scalar* wc = weights.data() + (f * C + c) * k3;
                        for (std::size_t kz = 0; kz < k; ++kz) {
                            const long iz = static_cast<long>(oz * st + kz) - static_cast<long>(pad);
                            if (iz < 0 || iz >= static_cast<long>(D)) continue;
                            for (std::size_t ky = 0; ky < k; ++ky) {
                                const long iy = static_cast<long>(oy * st + ky) - static_cast<long>(pad);
                                if (iy < 0 || iy >= static_cast<long>(H)) continue;
                                for (std::size_t kx = 0; kx < k; ++kx) {
                                    const long ix = static_cast<long>(ox * st + kx) - static_cast<long>(pad);
                                    if (ix < 0 || ix >= static_cast<long>(W)) continue;
                                    const Scalar z = act_in[((c * D + iz) * H + iy) * W + ix] *
                                                     wc[(kz * k + ky) * k + kx];
                                    if (z > 0.0) sp += z;
                                    else sn += z;
                                }
                            }
                        }
                    }
                    const Scalar dp = sp + eps;
                    const Scalar dn = sn - eps;
                    for (std::size_t c = 0; c < C; ++c) {
                        const Scalar* wc = weights.data() + (f * C + c) * k3;
                        for (std::size_t kz = 0; kz < k; ++kz) {
                            const long iz = static_cast<long>(oz * st + kz) - static_cast<long>(pad);
                            if (iz < 0 || iz >= static_cast<long>(D)) continue;
                            for (std::size_t ky = 0; ky < k; ++ky) {
                                const long iy = static_cast<long>(oy * st + ky) - static_cast<long>(pad);
                                if (iy < 0 || iy >= static_cast<long>(H)) continue;
                                for (std::size_t kx = 0; kx < k; ++kx) {
                                    const long ix = static_cast<long>(ox * st + kx) - static_cast<long>(pad);
                                    if (ix < 0 || ix >= static_cast<long>(W)) continue;
                                    const std::size_t ii = ((c * D + iz) * H + iy) * W + ix;
                                    const Scalar z = act_in[ii] * wc[(kz * k + ky) * k + kx];
                                    if (z > 0.0) rel_in[ii] += cfg.alpha * (z / dp) * rj;
                                    else if (z < 0.0) rel_in[ii] -= cfg.beta * (z / dn) * rj;
                                }
                            }
                        }
                    }
                }
    return rel_in;
}

std::vector<Scalar> relprop_pool(const std::vector<std::size_t>& argmax,
                                 const std::vector<Scalar>& rel_out, std::size_t in_size) {
    if (argmax.size() != rel_out.size()) throw ShapeError("relprop_pool: argmax indices missing");
    std::vector<Scalar> rel_in(in_size, 0.0);
    for (std::size_t i = 0; i < rel_out.size(); ++i) rel_in[argmax[i]] += rel_out[i];
    return rel_in;
}

namespace {

struct RelAct {
    std::vector<Scalar> primary;
    std::vector<Scalar> secondary;
};

std::array<std::size_t, 4> vol_dims(const Tensor& t) {
    const Shape& s = t.shape();
    if (s.size() != 5) throw ShapeError("lrp: expected a rank-5 activation");
    return {s[1], s[2], s[3], s[4]};
}

// Relevance through one layer: output relevance -> input relevance.
RelAct relprop_layer(const Model::Layer& layer, const TraceEntry& trace, const RelAct& rel,
                     const LrpConfig& cfg) {
    RelAct out;
    switch (layer.spec.kind) {
        case LayerSpec::Kind::Elu:
        case LayerSpec::Kind::Sigmoid:
        case LayerSpec::Kind::Dropout:
            // Monotone activations pass relevance through unchanged;
            // dropout is identity at evaluation.
            out = rel;
            break;
        case LayerSpec::Kind::MaxPool: {
            if (!trace.pool_argmax) throw Error("lrp: pooling indices missing from trace");
            out.primary = relprop_pool(*trace.pool_argmax, rel.primary, trace.input.primary.size());
            break;
        }
        case LayerSpec::Kind::Conv3d: {
            out.primary = relprop_conv(layer.conv_spec, vol_dims(trace.input.primary),
                                       layer.weights.data(), trace.input.primary.data(), rel.primary,
                                       cfg);
            break;
        }
        case LayerSpec::Kind::Linear: {
            const Shape& ws = layer.weights.shape();
            out.primary = relprop_linear(layer.weights.data(), ws[0], ws[1],
                                         trace.input.primary.data(), rel.primary, cfg);
            break;
        }
        case LayerSpec::Kind::Flatten:
            out.primary = rel.primary;
            break;
        case LayerSpec::Kind::FlattenConcat: {
            const std::size_t n1 = trace.input.primary.size();
            out.primary.assign(rel.primary.begin(), rel.primary.begin() + n1);
            if (trace.input.secondary.defined()) {
                out.secondary.assign(rel.primary.begin() + n1, rel.primary.end());
            }
            break;
        }
        case LayerSpec::Kind::Pif: {
            const PifBanks& banks = *layer.banks;
            const PatchGrid& grid = banks.grid;
            const auto in_dims = vol_dims(trace.input.primary);
            const std::size_t C = in_dims[0], D = in_dims[1], H = in_dims[2], W = in_dims[3];
            const std::size_t s = grid.patch_size;
            const std::size_t q = banks.block_extent();
            const std::size_t f = banks.filters;
            const auto& act = trace.input.primary.data();
            out.primary.assign(C * D * H * W, 0.0);

            Conv3dSpec cs{C, f, banks.kernel_size, 1, 0};
            auto propagate_bank = [&](std::size_t bank, const std::array<std::size_t, 3>& origin,
                                      const std::vector<Scalar>& block_rel) {
                // Slice the patch activations, run the conv rule inside the
                // patch, accumulate into the patch's input region.
                std::vector<Scalar> patch_act(C * s * s * s);
                std::size_t i = 0;
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t z = 0; z < s; ++z)
                        for (std::size_t y = 0; y < s; ++y)
                            for (std::size_t x = 0; x < s; ++x, ++i)
                                patch_act[i] = act[((c * D + origin[0] + z) * H + origin[1] + y) * W +
                                                   origin[2] + x];
                std::vector<Scalar> patch_rel = relprop_conv(cs, {C, s, s, s},
                                                             banks.weights[bank].data(), patch_act,
                                                             block_rel, cfg);
                i = 0;
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t z = 0; z < s; ++z)
                        for (std::size_t y = 0; y < s; ++y)
                            for (std::size_t x = 0; x < s; ++x, ++i)
                                out.primary[((c * D + origin[0] + z) * H + origin[1] + y) * W +
                                            origin[2] + x] += patch_rel[i];
            };

            // Original branch: rel.primary laid out (f, nz*q, ny*q, nx*q).
            const std::size_t ny = grid.grid_dims[1], nx = grid.grid_dims[2];
            const std::size_t OD = grid.grid_dims[0] * q, OH = ny * q, OW = nx * q;
            for (std::size_t p = 0; p < grid.num_original(); ++p) {
                const std::size_t gz = p / (ny * nx);
                const std::size_t gy = (p / nx) % ny;
                const std::size_t gx = p % nx;
                std::vector<Scalar> block(f * q * q * q);
                bool any = false;
                std::size_t i = 0;
                for (std::size_t ff = 0; ff < f; ++ff)
                    for (std::size_t z = 0; z < q; ++z)
                        for (std::size_t y = 0; y < q; ++y)
                            for (std::size_t x = 0; x < q; ++x, ++i) {
                                const Scalar v = rel.primary[((ff * OD + gz * q + z) * OH + gy * q + y) *
                                                                 OW +
                                                             gx * q + x];
                                block[i] = v;
                                any = any || v != 0.0;
                            }
                if (any) propagate_bank(p, grid.origins[p], block);
            }
            // Overlap branch: rel.secondary laid out (M*f, q, q, q).
            if (!rel.secondary.empty()) {
                const std::size_t vol = q * q * q;
                for (std::size_t m = 0; m < grid.num_overlap(); ++m) {
                    std::vector<Scalar> block(rel.secondary.begin() + m * f * vol,
                                              rel.secondary.begin() + (m + 1) * f * vol);
                    bool any = std::any_of(block.begin(), block.end(),
                                           [](Scalar v) { return v != 0.0; });
                    if (any) {
                        propagate_bank(grid.num_original() + m, grid.overlap_origins[m], block);
                    }
                }
            }
            break;
        }
    }
    return out;
}

}  // namespace

RelevanceMap heatmap(Model& model, const Tensor& input, const LrpConfig& cfg, const StartPoint& start) {
    cfg.validate();
    const Shape& in = input.shape();
    if (in.size() != 5 || in[0] != 1) throw ShapeError("heatmap: input must be a single (1,C,D,H,W) volume");

    Rng dummy(0);
    ForwardTrace trace;
    model.forward(input, /*training=*/false, dummy, &trace);
    const auto& layers = model.layers();

    int start_idx = -1;
    RelAct rel;
    switch (start.kind) {
        case StartPoint::Kind::Output: {
            for (std::size_t i = 0; i < layers.size(); ++i) {
                if (layers[i].spec.kind == LayerSpec::Kind::Linear) start_idx = static_cast<int>(i);
            }
            if (start_idx < 0) throw ConfigError("heatmap: model has no linear output layer");
            // Pre-sigmoid logit as the starting relevance.
            rel.primary = trace.entries[start_idx].output.primary.data();
            break;
        }
        case StartPoint::Kind::Hidden: {
            start_idx = model.layer_index(start.layer);
            if (start_idx < 0) throw ConfigError("heatmap: unknown layer '" + start.layer + "'");
            const Tensor& out = trace.entries[start_idx].output.primary;
            const Shape& os = out.shape();
            rel.primary.assign(out.size(), 0.0);
            if (os.size() == 5) {
                if (start.filter >= os[1]) throw ConfigError("heatmap: filter index out of range");
                const std::size_t vol = os[2] * os[3] * os[4];
                std::copy_n(out.data().data() + start.filter * vol, vol,
                            rel.primary.data() + start.filter * vol);
            } else {
                if (start.filter >= out.size()) throw ConfigError("heatmap: feature index out of range");
                rel.primary[start.filter] = out.data()[start.filter];
            }
            break;
        }
        case StartPoint::Kind::PifPatch: {
            start_idx = model.layer_index("pif");
            if (start_idx < 0) throw ConfigError("heatmap: model has no pif layer");
            const Model::Layer& pl = layers[start_idx];
            const PifBanks& banks = *pl.banks;
            const PatchGrid& grid = banks.grid;
            if (start.patch >= grid.num_banks()) throw ConfigError("heatmap: patch index out of range");
            if (start.filter >= banks.filters) throw ConfigError("heatmap: filter index out of range");
            const std::size_t q = banks.block_extent();
            const std::size_t f = banks.filters;
            const TraceEntry& e = trace.entries[start_idx];
            rel.primary.assign(e.output.primary.size(), 0.0);
            if (e.output.secondary.defined()) rel.secondary.assign(e.output.secondary.size(), 0.0);
            if (!grid.is_overlap_bank(start.patch)) {
                const std::size_t ny = grid.grid_dims[1], nx = grid.grid_dims[2];
                const std::size_t OD = grid.grid_dims[0] * q, OH = ny * q, OW = nx * q;
                const std::size_t gz = start.patch / (ny * nx);
                const std::size_t gy = (start.patch / nx) % ny;
                const std::size_t gx = start.patch % nx;
                const auto& act = e.output.primary.data();
                for (std::size_t z = 0; z < q; ++z)
                    for (std::size_t y = 0; y < q; ++y)
                        for (std::size_t x = 0; x < q; ++x) {
                            const std::size_t idx =
                                ((start.filter * OD + gz * q + z) * OH + gy * q + y) * OW + gx * q + x;
                            rel.primary[idx] = act[idx];
                        }
            } else {
                const std::size_t m = start.patch - grid.num_original();
                const std::size_t vol = q * q * q;
                const auto& act = e.output.secondary.data();
                for (std::size_t i = 0; i < vol; ++i) {
                    const std::size_t idx = (m * f + start.filter) * vol + i;
                    rel.secondary[idx] = act[idx];
                }
            }
            break;
        }
    }

    for (int i = start_idx; i >= 0; --i) {
        rel = relprop_layer(layers[i], trace.entries[i], rel, cfg);
    }

    // Sum over input channels to a per-voxel volume.
    const std::size_t C = in[1], D = in[2], H = in[3], W = in[4];
    RelevanceMap map;
    map.extents = {D, H, W};
    map.values.assign(D * H * W, 0.0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < D * H * W; ++i) map.values[i] += rel.primary[c * D * H * W + i];
    map.start = start.to_string();
    map.alpha = cfg.alpha;
    map.beta = cfg.beta;
    map.model_checksum = model.checksum();
    return map;
}

}  // namespace pifnet
