#include "pifnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pifnet {

void Conv3dSpec::validate() const {
    if (kernel_size < 1) throw ShapeError("conv3d: kernel_size must be >= 1");
    if (stride < 1) throw ShapeError("conv3d: stride must be >= 1");
    if (in_channels < 1 || out_channels < 1) throw ShapeError("conv3d: channel counts must be >= 1");
}

std::size_t Conv3dSpec::out_extent(std::size_t in, const char* axis) const {
    const std::size_t padded = in + 2 * padding;
    if (padded < kernel_size) {
        throw ShapeError(std::string("conv3d: kernel does not fit input along ") + axis);
    }
    return (padded - kernel_size) / stride + 1;
}

void PoolSpec::validate() const {
    if (kernel_size < 1) throw ShapeError("maxpool3d: kernel_size must be >= 1");
    if (stride < 1) throw ShapeError("maxpool3d: stride must be >= 1");
}

std::size_t PoolSpec::out_extent(std::size_t in, const char* axis) const {
    if (in < kernel_size) {
        throw ShapeError(std::string("maxpool3d: window larger than input along ") + axis);
    }
    return (in - kernel_size) / stride + 1;
}

namespace {

struct ConvGeom {
    std::size_t B, C, D, H, W;       // input
    std::size_t F, k, st, pad;       // kernel
    std::size_t OD, OH, OW;          // output
    std::size_t Dp, Hp, Wp;          // padded input
    std::size_t in_vol() const { return D * H * W; }
    std::size_t pad_vol() const { return Dp * Hp * Wp; }
    std::size_t out_vol() const { return OD * OH * OW; }
};

ConvGeom conv_geometry(const Shape& in, const Conv3dSpec& spec) {
    if (in.size() != 5) throw ShapeError("conv3d: input must be rank 5 (B,C,D,H,W)");
    spec.validate();
    ConvGeom g{};
    g.B = in[0];
    g.C = in[1];
    g.D = in[2];
    g.H = in[3];
    g.W = in[4];
    if (g.C != spec.in_channels) {
        throw ShapeError("conv3d: input has " + std::to_string(g.C) + " channels, spec expects " +
                         std::to_string(spec.in_channels));
    }
    g.F = spec.out_channels;
    g.k = spec.kernel_size;
    g.st = spec.stride;
    g.pad = spec.padding;
    g.OD = spec.out_extent(g.D, "depth");
    g.OH = spec.out_extent(g.H, "height");
    g.OW = spec.out_extent(g.W, "width");
    g.Dp = g.D + 2 * g.pad;
    g.Hp = g.H + 2 * g.pad;
    g.Wp = g.W + 2 * g.pad;
    return g;
}

// Copies (B,C,D,H,W) into a zero-padded (B,C,Dp,Hp,Wp) buffer.
std::vector<Scalar> pad_batch(const std::vector<Scalar>& in, const ConvGeom& g) {
    std::vector<Scalar> out(g.B * g.C * g.pad_vol(), 0.0);
    for (std::size_t bc = 0; bc < g.B * g.C; ++bc) {
        const Scalar* src = in.data() + bc * g.in_vol();
        Scalar* dst = out.data() + bc * g.pad_vol();
        for (std::size_t z = 0; z < g.D; ++z)
            for (std::size_t y = 0; y < g.H; ++y) {
                std::copy_n(src + (z * g.H + y) * g.W,
                            g.W,
                            dst + ((z + g.pad) * g.Hp + (y + g.pad)) * g.Wp + g.pad);
            }
    }
    return out;
}

// out[b,f] += sum_{c,kz,ky,kx} w[f,c,kz,ky,kx] * pin[b,c,oz*st+kz,...].
// Row-blocked: each output row is accumulated in a local buffer while its
// input neighborhood is hot in cache. The accumulation order per output
// voxel is fixed as (c,kz,ky,kx) regardless of extents, so the same patch
// convolved standalone or inside a larger map gives bit-identical sums.
void conv_forward_one(const Scalar* pin, const Scalar* w, const Scalar* bias, Scalar* out,
                      std::size_t f, const ConvGeom& g) {
    const std::size_t k3 = g.k * g.k * g.k;
    std::vector<Scalar> acc(g.OW);
    for (std::size_t oz = 0; oz < g.OD; ++oz)
        for (std::size_t oy = 0; oy < g.OH; ++oy) {
            std::fill(acc.begin(), acc.end(), bias[f]);
            for (std::size_t c = 0; c < g.C; ++c) {
                const Scalar* pc = pin + c * g.pad_vol();
                const Scalar* wc = w + (f * g.C + c) * k3;
                for (std::size_t kz = 0; kz < g.k; ++kz) {
                    const Scalar* pz = pc + (oz * g.st + kz) * g.Hp * g.Wp;
                    for (std::size_t ky = 0; ky < g.k; ++ky) {
                        const Scalar* row = pz + (oy * g.st + ky) * g.Wp;
                        const Scalar* wk = wc + (kz * g.k + ky) * g.k;
                        for (std::size_t kx = 0; kx < g.k; ++kx) {
                            const Scalar wv = wk[kx];
                            const Scalar* r = row + kx;
                            if (g.st == 1) {
                                for (std::size_t ox = 0; ox < g.OW; ++ox) acc[ox] += wv * r[ox];
                            } else {
                                for (std::size_t ox = 0; ox < g.OW; ++ox) acc[ox] += wv * r[ox * g.st];
                            }
                        }
                    }
                }
            }
            std::copy(acc.begin(), acc.end(), out + (oz * g.OH + oy) * g.OW);
        }
}

}  // namespace

Tensor conv3d(const Tensor& input, const Conv3dSpec& spec, const Tensor& weights, const Tensor& bias) {
    const ConvGeom g = conv_geometry(input.shape(), spec);
    const Shape wshape{g.F, g.C, g.k, g.k, g.k};
    if (!same_shape(weights.shape(), wshape)) {
        throw ShapeError("conv3d: weights shape " + shape_str(weights.shape()) + " does not match " +
                         shape_str(wshape));
    }
    if (!same_shape(bias.shape(), Shape{g.F})) {
        throw ShapeError("conv3d: bias shape mismatch");
    }

    auto padded = std::make_shared<std::vector<Scalar>>();
    const std::vector<Scalar>* pin_all = &input.data();
    if (g.pad > 0) {
        *padded = pad_batch(input.data(), g);
        pin_all = padded.get();
    } else {
        padded = nullptr;
    }

    std::vector<Scalar> out(g.B * g.F * g.out_vol());
    {
        const Scalar* pin = pin_all->data();
        const Scalar* w = weights.data().data();
        const Scalar* bs = bias.data().data();
        Scalar* o = out.data();
        parallel_for(g.B * g.F, [&](std::size_t begin, std::size_t end) {
            for (std::size_t bf = begin; bf < end; ++bf) {
                const std::size_t b = bf / g.F;
                const std::size_t f = bf % g.F;
                conv_forward_one(pin + b * g.C * g.pad_vol(), w, bs,
                                 o + (b * g.F + f) * g.out_vol(), f, g);
            }
        });
    }

    auto in_node = input.node();
    auto w_node = weights.node();
    auto b_node = bias.node();
    auto backprop = [g, in_node, w_node, b_node, padded](Tensor::Node& self) {
        const Scalar* gout = self.grad.data();
        const std::vector<Scalar>& pin_src = padded ? *padded : in_node->value;

        if (in_node->requires_grad) {
            auto& gin = in_node->grad_buffer();
            // Gradient w.r.t. the padded input, then strip the margins.
            std::vector<Scalar> gpad(g.pad > 0 ? g.B * g.C * g.pad_vol() : 0, 0.0);
            Scalar* gtarget = g.pad > 0 ? gpad.data() : gin.data();
            const Scalar* w = w_node->value.data();
            const std::size_t k3 = g.k * g.k * g.k;
            parallel_for(g.B * g.C, [&](std::size_t begin, std::size_t end) {
                for (std::size_t bc = begin; bc < end; ++bc) {
                    const std::size_t b = bc / g.C;
                    const std::size_t c = bc % g.C;
                    Scalar* gc = gtarget + (b * g.C + c) * g.pad_vol();
                    for (std::size_t f = 0; f < g.F; ++f) {
                        const Scalar* go = gout + (b * g.F + f) * g.out_vol();
                        const Scalar* wc = w + (f * g.C + c) * k3;
                        for (std::size_t oz = 0; oz < g.OD; ++oz)
                            for (std::size_t oy = 0; oy < g.OH; ++oy) {
                                const Scalar* gorow = go + (oz * g.OH + oy) * g.OW;
                                for (std::size_t kz = 0; kz < g.k; ++kz) {
                                    Scalar* gz = gc + (oz * g.st + kz) * g.Hp * g.Wp;
                                    for (std::size_t ky = 0; ky < g.k; ++ky) {
                                        Scalar* grow = gz + (oy * g.st + ky) * g.Wp;
                                        const Scalar* wk = wc + (kz * g.k + ky) * g.k;
                                        for (std::size_t kx = 0; kx < g.k; ++kx) {
                                            const Scalar wv = wk[kx];
                                            Scalar* gr = grow + kx;
                                            if (g.st == 1) {
                                                for (std::size_t ox = 0; ox < g.OW; ++ox)
                                                    gr[ox] += wv * gorow[ox];
                                            } else {
                                                for (std::size_t ox = 0; ox < g.OW; ++ox)
                                                    gr[ox * g.st] += wv * gorow[ox];
                                            }
                                        }
                                    }
                                }
                            }
                    }
                }
            });
            if (g.pad > 0) {
                for (std::size_t bc = 0; bc < g.B * g.C; ++bc) {
                    const Scalar* src = gpad.data() + bc * g.pad_vol();
                    Scalar* dst = gin.data() + bc * g.in_vol();
                    for (std::size_t z = 0; z < g.D; ++z)
                        for (std::size_t y = 0; y < g.H; ++y)
                            for (std::size_t x = 0; x < g.W; ++x)
                                dst[(z * g.H + y) * g.W + x] +=
                                    src[((z + g.pad) * g.Hp + (y + g.pad)) * g.Wp + (x + g.pad)];
                }
            }
        }

        if (w_node->requires_grad) {
            auto& gw = w_node->grad_buffer();
            auto& gb = b_node->grad_buffer();
            const Scalar* pin = pin_src.data();
            const std::size_t k3 = g.k * g.k * g.k;
            parallel_for(g.F, [&](std::size_t begin, std::size_t end) {
                for (std::size_t f = begin; f < end; ++f) {
                    Scalar bias_acc = 0.0;
                    std::vector<Scalar> wacc(g.C * k3);
                    std::fill(wacc.begin(), wacc.end(), 0.0);
                    for (std::size_t b = 0; b < g.B; ++b) {
                        const Scalar* go = gout + (b * g.F + f) * g.out_vol();
                        for (std::size_t i = 0; i < g.out_vol(); ++i) bias_acc += go[i];
                        for (std::size_t c = 0; c < g.C; ++c) {
                            const Scalar* pc = pin + (b * g.C + c) * g.pad_vol();
                            Scalar* wa = wacc.data() + c * k3;
                            for (std::size_t oz = 0; oz < g.OD; ++oz)
                                for (std::size_t oy = 0; oy < g.OH; ++oy) {
                                    const Scalar* gorow = go + (oz * g.OH + oy) * g.OW;
                                    for (std::size_t kz = 0; kz < g.k; ++kz) {
                                        const Scalar* pz = pc + (oz * g.st + kz) * g.Hp * g.Wp;
                                        for (std::size_t ky = 0; ky < g.k; ++ky) {
                                            const Scalar* row = pz + (oy * g.st + ky) * g.Wp;
                                            Scalar* wk = wa + (kz * g.k + ky) * g.k;
                                            for (std::size_t kx = 0; kx < g.k; ++kx) {
                                                const Scalar* r = row + kx;
                                                Scalar acc = 0.0;
                                                if (g.st == 1) {
                                                    for (std::size_t ox = 0; ox < g.OW; ++ox)
                                                        acc += r[ox] * gorow[ox];
                                                } else {
                                                    for (std::size_t ox = 0; ox < g.OW; ++ox)
                                                        acc += r[ox * g.st] * gorow[ox];
                                                }
                                                wk[kx] += acc;
                                            }
                                        }
                                    }
                                }
                        }
                    }
                    for (std::size_t i = 0; i < wacc.size(); ++i) gw[f * g.C * k3 + i] += wacc[i];
                    gb[f] += bias_acc;
                }
            });
        }
    };

    return Tensor::make_result(Shape{g.B, g.F, g.OD, g.OH, g.OW}, std::move(out),
                               {input, weights, bias}, std::move(backprop), "conv3d");
}

MaxPoolResult maxpool3d(const Tensor& input, const PoolSpec& spec) {
    const Shape& in = input.shape();
    if (in.size() != 5) throw ShapeError("maxpool3d: input must be rank 5 (B,C,D,H,W)");
    spec.validate();
    const std::size_t B = in[0], C = in[1], D = in[2], H = in[3], W = in[4];
    const std::size_t k = spec.kernel_size, st = spec.stride;
    const std::size_t OD = spec.out_extent(D, "depth");
    const std::size_t OH = spec.out_extent(H, "height");
    const std::size_t OW = spec.out_extent(W, "width");

    const auto& x = input.data();
    std::vector<Scalar> out(B * C * OD * OH * OW);
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
    std::size_t o = 0;
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        const Scalar* vol = x.data() + bc * D * H * W;
        const std::size_t base = bc * D * H * W;
        for (std::size_t oz = 0; oz < OD; ++oz)
            for (std::size_t oy = 0; oy < OH; ++oy)
                for (std::size_t ox = 0; ox < OW; ++ox, ++o) {
                    Scalar best = -std::numeric_limits<Scalar>::infinity();
                    std::size_t best_idx = 0;
                    for (std::size_t kz = 0; kz < k; ++kz)
                        for (std::size_t ky = 0; ky < k; ++ky)
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const std::size_t idx =
                                    ((oz * st + kz) * H + (oy * st + ky)) * W + (ox * st + kx);
                                if (vol[idx] > best) {
                                    best = vol[idx];
                                    best_idx = idx;
                                }
                            }
                    out[o] = best;
                    (*argmax)[o] = base + best_idx;
                }
    }

    auto in_node = input.node();
    auto backprop = [in_node, argmax](Tensor::Node& self) {
        if (!in_node->requires_grad) return;
        auto& gin = in_node->grad_buffer();
        const auto& g = self.grad;
        for (std::size_t i = 0; i < g.size(); ++i) gin[(*argmax)[i]] += g[i];
    };
    Tensor out_t = Tensor::make_result(Shape{B, C, OD, OH, OW}, std::move(out), {input},
                                       std::move(backprop), "maxpool3d");
    return MaxPoolResult{std::move(out_t), argmax};
}

Tensor elu(const Tensor& input) {
    const auto& x = input.data();
    std::vector<Scalar> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : std::expm1(x[i]);

    auto in_node = input.node();
    auto backprop = [in_node](Tensor::Node& self) {
        if (!in_node->requires_grad) return;
        auto& gin = in_node->grad_buffer();
        const auto& g = self.grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            // d/dx = 1 for x > 0, exp(x) = elu(x) + 1 otherwise.
            gin[i] += g[i] * (in_node->value[i] > 0.0 ? 1.0 : self.value[i] + 1.0);
        }
    };
    return Tensor::make_result(input.shape(), std::move(out), {input}, std::move(backprop), "elu");
}

Tensor sigmoid(const Tensor& input) {
    const auto& x = input.data();
    std::vector<Scalar> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-x[i]));
        } else {
            const Scalar e = std::exp(x[i]);
            out[i] = e / (1.0 + e);
        }
    }
    auto in_node = input.node();
    auto backprop = [in_node](Tensor::Node& self) {
        if (!in_node->requires_grad) return;
        auto& gin = in_node->grad_buffer();
        const auto& g = self.grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Scalar s = self.value[i];
            gin[i] += g[i] * s * (1.0 - s);
        }
    };
    return Tensor::make_result(input.shape(), std::move(out), {input}, std::move(backprop), "sigmoid");
}

Tensor dropout(const Tensor& input, Scalar p, Rng& rng, bool training) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout: p must be in [0,1)");
    if (!training || p == 0.0) return input;

    const Scalar scale = 1.0 / (1.0 - p);
    const auto& x = input.data();
    auto mask = std::make_shared<std::vector<Scalar>>(x.size());
    std::vector<Scalar> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        (*mask)[i] = rng.uniform() < p ? 0.0 : scale;
        out[i] = x[i] * (*mask)[i];
    }
    auto in_node = input.node();
    auto backprop = [in_node, mask](Tensor::Node& self) {
        if (!in_node->requires_grad) return;
        auto& gin = in_node->grad_buffer();
        const auto& g = self.grad;
        for (std::size_t i = 0; i < g.size(); ++i) gin[i] += g[i] * (*mask)[i];
    };
    return Tensor::make_result(input.shape(), std::move(out), {input}, std::move(backprop), "dropout");
}

Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    const Shape& in = input.shape();
    const Shape& ws = weights.shape();
    if (in.size() != 2) throw ShapeError("linear: input must be rank 2 (B,N)");
    if (ws.size() != 2) throw ShapeError("linear: weights must be rank 2 (M,N)");
    const std::size_t B = in[0], N = in[1], M = ws[0];
    if (ws[1] != N) {
        throw ShapeError("linear: input features " + std::to_string(N) + " do not match weight columns " +
                         std::to_string(ws[1]));
    }
    if (!same_shape(bias.shape(), Shape{M})) throw ShapeError("linear: bias shape mismatch");

    const auto& x = input.data();
    const auto& w = weights.data();
    const auto& bs = bias.data();
    std::vector<Scalar> out(B * M);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t m = 0; m < M; ++m) {
            Scalar acc = bs[m];
            const Scalar* xr = x.data() + b * N;
            const Scalar* wr = w.data() + m * N;
            for (std::size_t n = 0; n < N; ++n) acc += xr[n] * wr[n];
            out[b * M + m] = acc;
        }

    auto in_node = input.node();
    auto w_node = weights.node();
    auto b_node = bias.node();
    auto backprop = [B, N, M, in_node, w_node, b_node](Tensor::Node& self) {
        const auto& g = self.grad;
        if (in_node->requires_grad) {
            auto& gin = in_node->grad_buffer();
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t m = 0; m < M; ++m) {
                    const Scalar gv = g[b * M + m];
                    if (gv == 0.0) continue;
                    const Scalar* wr = w_node->value.data() + m * N;
                    Scalar* gr = gin.data() + b * N;
                    for (std::size_t n = 0; n < N; ++n) gr[n] += gv * wr[n];
                }
        }
        if (w_node->requires_grad) {
            auto& gw = w_node->grad_buffer();
            auto& gb = b_node->grad_buffer();
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t m = 0; m < M; ++m) {
                    const Scalar gv = g[b * M + m];
                    gb[m] += gv;
                    if (gv == 0.0) continue;
                    const Scalar* xr = in_node->value.data() + b * N;
                    Scalar* gr = gw.data() + m * N;
                    for (std::size_t n = 0; n < N; ++n) gr[n] += gv * xr[n];
                }
        }
    };
    return Tensor::make_result(Shape{B, M}, std::move(out), {input, weights, bias}, std::move(backprop),
                               "linear");
}

Tensor flatten(const Tensor& input) {
    const Shape& in = input.shape();
    if (in.empty()) throw ShapeError("flatten: undefined shape");
    const std::size_t B = in[0];
    const std::size_t rest = numel(in) / (B == 0 ? 1 : B);
    std::vector<Scalar> out = input.data();
    auto in_node = input.node();
    auto backprop = [in_node](Tensor::Node& self) {
        if (!in_node->requires_grad) return;
        auto& gin = in_node->grad_buffer();
        const auto& g = self.grad;
        for (std::size_t i = 0; i < g.size(); ++i) gin[i] += g[i];
    };
    return Tensor::make_result(Shape{B, rest}, std::move(out), {input}, std::move(backprop), "flatten");
}

Tensor concat_features(const Tensor& a, const Tensor& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.size() != 2 || bs.size() != 2 || as[0] != bs[0]) {
        throw ShapeError("concat_features: inputs must be rank 2 with matching batch");
    }
    const std::size_t B = as[0], N1 = as[1], N2 = bs[1];
    std::vector<Scalar> out(B * (N1 + N2));
    for (std::size_t i = 0; i < B; ++i) {
        std::copy_n(a.data().data() + i * N1, N1, out.data() + i * (N1 + N2));
        std::copy_n(b.data().data() + i * N2, N2, out.data() + i * (N1 + N2) + N1);
    }
    auto an = a.node();
    auto bn = b.node();
    auto backprop = [B, N1, N2, an, bn](Tensor::Node& self) {
        const auto& g = self.grad;
        if (an->requires_grad) {
            auto& ga = an->grad_buffer();
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t n = 0; n < N1; ++n) ga[i * N1 + n] += g[i * (N1 + N2) + n];
        }
        if (bn->requires_grad) {
            auto& gb = bn->grad_buffer();
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t n = 0; n < N2; ++n) gb[i * N2 + n] += g[i * (N1 + N2) + N1 + n];
        }
    };
    return Tensor::make_result(Shape{B, N1 + N2}, std::move(out), {a, b}, std::move(backprop),
                               "concat_features");
}

Tensor bce_loss(const Tensor& predictions, const std::vector<Scalar>& labels) {
    constexpr Scalar kClamp = 1e-12;
    if (predictions.size() != labels.size()) {
        throw ShapeError("bce_loss: prediction/label count mismatch");
    }
    if (labels.empty()) throw ShapeError("bce_loss: empty batch");
    for (Scalar y : labels) {
        if (y != 0.0 && y != 1.0) throw Error("bce_loss: label outside {0,1}");
    }
    const auto& p = predictions.data();
    const std::size_t n = labels.size();
    auto clamped = std::make_shared<std::vector<Scalar>>(n);
    Scalar acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Scalar pc = std::clamp(p[i], kClamp, 1.0 - kClamp);
        (*clamped)[i] = pc;
        acc -= labels[i] * std::log(pc) + (1.0 - labels[i]) * std::log(1.0 - pc);
    }
    acc /= static_cast<Scalar>(n);

    auto p_node = predictions.node();
    auto labels_copy = std::make_shared<std::vector<Scalar>>(labels);
    auto backprop = [p_node, clamped, labels_copy, n](Tensor::Node& self) {
        if (!p_node->requires_grad) return;
        auto& gp = p_node->grad_buffer();
        const Scalar g = self.grad[0] / static_cast<Scalar>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Scalar pc = (*clamped)[i];
            gp[i] += g * (pc - (*labels_copy)[i]) / (pc * (1.0 - pc));
        }
    };
    return Tensor::make_result(Shape{1}, {acc}, {predictions}, std::move(backprop), "bce_loss");
}

Tensor he_init(Shape shape, std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) throw ShapeError("he_init: fan_in must be positive");
    const Scalar stddev = std::sqrt(2.0 / static_cast<Scalar>(fan_in));
    std::vector<Scalar> data(numel(shape));
    for (auto& v : data) v = stddev * rng.normal();
    return Tensor::parameter(std::move(shape), std::move(data));
}

Tensor zero_bias(std::size_t n) {
    return Tensor::parameter(Shape{n}, std::vector<Scalar>(n, 0.0));
}

}  // namespace pifnet
