#pragma once

// Test-only reference implementations. These stay independent of the
// library's fast paths: convolution is a direct six-nested-loop summation,
// gradients come from central finite differences, receptive fields from
// exhaustive input perturbation.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "pifnet/model.hpp"
#include "pifnet/synth.hpp"
#include "pifnet/tensor.hpp"

namespace oracles {

using pifnet::Scalar;

struct ConvCase {
    std::size_t B = 1, C = 1, D = 1, H = 1, W = 1;
    std::size_t F = 1, k = 1, stride = 1, pad = 0;
    std::size_t OD() const { return (D + 2 * pad - k) / stride + 1; }
    std::size_t OH() const { return (H + 2 * pad - k) / stride + 1; }
    std::size_t OW() const { return (W + 2 * pad - k) / stride + 1; }
};

inline std::vector<Scalar> conv3d_naive(const ConvCase& c, const std::vector<Scalar>& in,
                                        const std::vector<Scalar>& w, const std::vector<Scalar>& bias) {
    const std::size_t OD = c.OD(), OH = c.OH(), OW = c.OW();
    std::vector<Scalar> out(c.B * c.F * OD * OH * OW, 0.0);
    for (std::size_t b = 0; b < c.B; ++b)
        for (std::size_t f = 0; f < c.F; ++f)
            for (std::size_t oz = 0; oz < OD; ++oz)
                for (std::size_t oy = 0; oy < OH; ++oy)
                    for (std::size_t ox = 0; ox < OW; ++ox) {
                        Scalar acc = bias[f];
                        for (std::size_t cc = 0; cc < c.C; ++cc)
                            for (std::size_t kz = 0; kz < c.k; ++kz)
                                for (std::size_t ky = 0; ky < c.k; ++ky)
                                    for (std::size_t kx = 0; kx < c.k; ++kx) {
                                        const long iz = static_cast<long>(oz * c.stride + kz) -
                                                        static_cast<long>(c.pad);
                                        const long iy = static_cast<long>(oy * c.stride + ky) -
                                                        static_cast<long>(c.pad);
                                        const long ix = static_cast<long>(ox * c.stride + kx) -
                                                        static_cast<long>(c.pad);
                                        if (iz < 0 || iz >= static_cast<long>(c.D)) continue;
                                        if (iy < 0 || iy >= static_cast<long>(c.H)) continue;
                                        if (ix < 0 || ix >= static_cast<long>(c.W)) continue;
                                        acc += in[(((b * c.C + cc) * c.D + iz) * c.H + iy) * c.W + ix] *
                                               w[(((f * c.C + cc) * c.k + kz) * c.k + ky) * c.k + kx];
                                    }
                        out[(((b * c.F + f) * OD + oz) * OH + oy) * OW + ox] = acc;
                    }
    return out;
}

inline std::vector<Scalar> maxpool3d_naive(std::size_t BC, std::size_t D, std::size_t H, std::size_t W,
                                           std::size_t k, std::size_t stride,
                                           const std::vector<Scalar>& in) {
    const std::size_t OD = (D - k) / stride + 1;
    const std::size_t OH = (H - k) / stride + 1;
    const std::size_t OW = (W - k) / stride + 1;
    std::vector<Scalar> out(BC * OD * OH * OW);
    std::size_t o = 0;
    for (std::size_t bc = 0; bc < BC; ++bc)
        for (std::size_t oz = 0; oz < OD; ++oz)
            for (std::size_t oy = 0; oy < OH; ++oy)
                for (std::size_t ox = 0; ox < OW; ++ox, ++o) {
                    Scalar best = -1e300;
                    for (std::size_t kz = 0; kz < k; ++kz)
                        for (std::size_t ky = 0; ky < k; ++ky)
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const Scalar v = in[((bc * D + oz * stride + kz) * H + oy * stride + ky) *
                                                        W +
                                                    ox * stride + kx];
                                if (v > best) best = v;
                            }
                    out[o] = best;
                }
    return out;
}

// Central finite differences against reverse-mode gradients. `loss_fn` must
// rebuild the graph from the given leaf parameters on every call. Returns
// the largest relative error over all parameter elements.
inline double fd_max_rel_error(const std::function<pifnet::Tensor()>& loss_fn,
                               std::vector<pifnet::Tensor> params, double h = 1e-5) {
    for (auto& p : params) p.zero_grad();
    pifnet::Tensor loss = loss_fn();
    pifnet::backward(loss);
    std::vector<std::vector<Scalar>> analytic;
    for (auto& p : params) {
        analytic.push_back(p.has_grad() ? p.grad() : std::vector<Scalar>(p.size(), 0.0));
        p.zero_grad();
    }

    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& data = params[pi].data_mut();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const Scalar keep = data[i];
            data[i] = keep + h;
            const Scalar up = loss_fn().item();
            data[i] = keep - h;
            const Scalar down = loss_fn().item();
            data[i] = keep;
            const Scalar fd = (up - down) / (2.0 * h);
            const Scalar an = analytic[pi][i];
            const Scalar denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    return worst;
}

// Standalone scalar Adam with decoupled weight decay, for trajectory
// comparison.
struct ScalarAdamRef {
    double lr, wd, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double m = 0.0, v = 0.0;
    std::size_t t = 0;

    double step(double w, double g) {
        ++t;
        w *= (wd != 0.0) ? (1.0 - lr * wd) : 1.0;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        const double mhat = m / (1.0 - std::pow(b1, static_cast<double>(t)));
        const double vhat = v / (1.0 - std::pow(b2, static_cast<double>(t)));
        return w - lr * mhat / (std::sqrt(vhat) + eps);
    }
};

// Hand-written classifier for the synthetic data: signed mean intensity
// inside each known signal site, thresholded at the midpoint of the two
// training-class means.
inline double oracle_classifier_balacc(const std::vector<pifnet::VolumeRecord>& train,
                                       const std::vector<pifnet::VolumeRecord>& test,
                                       const std::vector<pifnet::SignalSite>& sites) {
    auto score = [&sites](const pifnet::VolumeRecord& rec) {
        const auto& e = rec.extents;
        Scalar total = 0.0;
        for (const auto& site : sites) {
            Scalar sum = 0.0;
            std::size_t n = 0;
            const Scalar r2 = site.radius * site.radius;
            for (std::size_t z = 0; z < e[0]; ++z)
                for (std::size_t y = 0; y < e[1]; ++y)
                    for (std::size_t x = 0; x < e[2]; ++x) {
                        const Scalar dz = static_cast<Scalar>(z) - site.center[0];
                        const Scalar dy = static_cast<Scalar>(y) - site.center[1];
                        const Scalar dx = static_cast<Scalar>(x) - site.center[2];
                        if (dz * dz + dy * dy + dx * dx <= r2) {
                            sum += rec.voxels[(z * e[1] + y) * e[2] + x];
                            ++n;
                        }
                    }
            if (n > 0) total += (site.amplitude >= 0 ? 1.0 : -1.0) * sum / static_cast<Scalar>(n);
        }
        return total;
    };

    Scalar mean0 = 0.0, mean1 = 0.0;
    std::size_t n0 = 0, n1 = 0;
    for (const auto& r : train) {
        if (r.label == 0) {
            mean0 += score(r);
            ++n0;
        } else {
            mean1 += score(r);
            ++n1;
        }
    }
    mean0 /= static_cast<Scalar>(n0);
    mean1 /= static_cast<Scalar>(n1);
    const Scalar threshold = 0.5 * (mean0 + mean1);

    std::size_t tp = 0, tn = 0, pos = 0, neg = 0;
    for (const auto& r : test) {
        const int pred = score(r) > threshold ? 1 : 0;
        if (r.label == 1) {
            ++pos;
            tp += pred == 1;
        } else {
            ++neg;
            tn += pred == 0;
        }
    }
    return 0.5 * (static_cast<double>(tp) / pos + static_cast<double>(tn) / neg);
}

// True input receptive field of a selected activation set, by exhaustive
// single-voxel perturbation. `changed` must return true when the watched
// activations differ from the unperturbed forward pass.
inline std::vector<std::uint8_t> receptive_field_by_perturbation(
    const std::function<std::vector<Scalar>(const pifnet::Tensor&)>& watched,
    const pifnet::Tensor& input, Scalar delta = 0.5) {
    const std::vector<Scalar> base = watched(input);
    std::vector<std::uint8_t> mask(input.size(), 0);
    for (std::size_t i = 0; i < input.size(); ++i) {
        std::vector<Scalar> data = input.data();
        data[i] += delta;
        const std::vector<Scalar> probe = watched(pifnet::Tensor::from(input.shape(), data));
        for (std::size_t j = 0; j < base.size(); ++j) {
            if (probe[j] != base[j]) {
                mask[i] = 1;
                break;
            }
        }
    }
    return mask;
}

}  // namespace oracles
