#include "pifnet/pif.hpp"

#include <algorithm>

namespace pifnet {

namespace {
const char* axis_name(std::size_t i) { return i == 0 ? "depth" : (i == 1 ? "height" : "width"); }
}

PatchGrid PatchGrid::make(const std::array<std::size_t, 3>& extents, std::size_t patch_size,
                          bool with_overlap) {
    if (patch_size == 0) throw ShapeError("patch grid: patch size must be positive");
    PatchGrid grid;
    grid.extents = extents;
    grid.patch_size = patch_size;
    for (std::size_t a = 0; a < 3; ++a) {
        if (extents[a] == 0 || extents[a] % patch_size != 0) {
            throw ShapeError(std::string("patch grid: ") + axis_name(a) + " extent " +
                             std::to_string(extents[a]) + " is not divisible by patch size " +
                             std::to_string(patch_size));
        }
        grid.grid_dims[a] = extents[a] / patch_size;
    }
    for (std::size_t z = 0; z < grid.grid_dims[0]; ++z)
        for (std::size_t y = 0; y < grid.grid_dims[1]; ++y)
            for (std::size_t x = 0; x < grid.grid_dims[2]; ++x) {
                grid.origins.push_back({z * patch_size, y * patch_size, x * patch_size});
            }
    if (with_overlap) {
        const std::size_t shift = patch_size / 2;
        for (const auto& o : grid.origins) {
            const std::array<std::size_t, 3> ov{o[0] + shift, o[1] + shift, o[2] + shift};
            bool fits = true;
            for (std::size_t a = 0; a < 3; ++a) fits = fits && (ov[a] + patch_size <= extents[a]);
            if (fits) grid.overlap_origins.push_back(ov);
        }
    }
    return grid;
}

const std::array<std::size_t, 3>& PatchGrid::bank_origin(std::size_t bank) const {
    if (bank < origins.size()) return origins[bank];
    bank -= origins.size();
    if (bank >= overlap_origins.size()) throw Error("patch grid: bank index out of range");
    return overlap_origins[bank];
}

PifBanks PifBanks::init(const PatchGrid& grid, std::size_t in_channels, std::size_t kernel_size,
                        std::size_t filters, Rng& rng) {
    if (kernel_size > grid.patch_size) {
        throw ShapeError("pif: kernel size " + std::to_string(kernel_size) +
                         " exceeds patch size " + std::to_string(grid.patch_size));
    }
    if (filters == 0 || in_channels == 0) throw ShapeError("pif: filters and channels must be positive");
    PifBanks banks;
    banks.grid = grid;
    banks.kernel_size = kernel_size;
    banks.filters = filters;
    banks.in_channels = in_channels;
    const std::size_t fan_in = in_channels * kernel_size * kernel_size * kernel_size;
    for (std::size_t i = 0; i < grid.num_banks(); ++i) {
        banks.weights.push_back(
            he_init(Shape{filters, in_channels, kernel_size, kernel_size, kernel_size}, fan_in, rng));
        banks.biases.push_back(zero_bias(filters));
    }
    return banks;
}

std::int64_t PifBanks::parameter_count() const {
    const std::int64_t per_bank =
        static_cast<std::int64_t>(filters) *
            static_cast<std::int64_t>(in_channels * kernel_size * kernel_size * kernel_size) +
        static_cast<std::int64_t>(filters);
    return static_cast<std::int64_t>(grid.num_banks()) * per_bank;
}

Tensor slice_patch(const Tensor& input, const std::array<std::size_t, 3>& origin, std::size_t s) {
    const Shape& in = input.shape();
    if (in.size() != 5) throw ShapeError("slice_patch: input must be rank 5 (B,C,D,H,W)");
    const std::size_t B = in[0], C = in[1], D = in[2], H = in[3], W = in[4];
    for (std::size_t a = 0; a < 3; ++a) {
        const std::size_t extent = in[2 + a];
        if (origin[a] + s > extent) {
            throw ShapeError(std::string("slice_patch: patch exceeds ") + axis_name(a) + " extent");
        }
    }
    std::vector<Scalar> out(B * C * s * s * s);
    const auto& x = input.data();
    std::size_t o = 0;
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        const Scalar* vol = x.data() + bc * D * H * W;
        for (std::size_t z = 0; z < s; ++z)
            for (std::size_t y = 0; y < s; ++y) {
                const Scalar* row = vol + ((origin[0] + z) * H + (origin[1] + y)) * W + origin[2];
                std::copy_n(row, s, out.data() + o);
                o += s;
            }
    }
    auto in_node = input.node();
    auto backprop = [B, C, D, H, W, s, origin, in_node](Tensor::Node& self) {
        if (!in_node->requires_grad) return;
        auto& gin = in_node->grad_buffer();
        const auto& g = self.grad;
        std::size_t i = 0;
        for (std::size_t bc = 0; bc < B * C; ++bc) {
            Scalar* vol = gin.data() + bc * D * H * W;
            for (std::size_t z = 0; z < s; ++z)
                for (std::size_t y = 0; y < s; ++y) {
                    Scalar* row = vol + ((origin[0] + z) * H + (origin[1] + y)) * W + origin[2];
                    for (std::size_t x2 = 0; x2 < s; ++x2) row[x2] += g[i++];
                }
        }
    };
    return Tensor::make_result(Shape{B, C, s, s, s}, std::move(out), {input}, std::move(backprop),
                               "slice_patch");
}

namespace {

// Places per-patch blocks (B,f,q,q,q) into (B,f,nz*q,ny*q,nx*q) in the same
// row-major order the patches were split in.
Tensor assemble_original(const std::vector<Tensor>& blocks, const PatchGrid& grid, std::size_t f,
                         std::size_t q) {
    const std::size_t nz = grid.grid_dims[0], ny = grid.grid_dims[1], nx = grid.grid_dims[2];
    const std::size_t B = blocks.front().shape()[0];
    const std::size_t OD = nz * q, OH = ny * q, OW = nx * q;
    std::vector<Scalar> out(B * f * OD * OH * OW);

    std::vector<Tensor> parents = blocks;
    for (std::size_t p = 0; p < blocks.size(); ++p) {
        const std::size_t gz = p / (ny * nx);
        const std::size_t gy = (p / nx) % ny;
        const std::size_t gx = p % nx;
        const auto& bd = blocks[p].data();
        std::size_t i = 0;
        for (std::size_t bf = 0; bf < B * f; ++bf) {
            Scalar* vol = out.data() + bf * OD * OH * OW;
            for (std::size_t z = 0; z < q; ++z)
                for (std::size_t y = 0; y < q; ++y) {
                    Scalar* row = vol + ((gz * q + z) * OH + (gy * q + y)) * OW + gx * q;
                    std::copy_n(bd.data() + i, q, row);
                    i += q;
                }
        }
    }

    std::vector<std::shared_ptr<Tensor::Node>> nodes;
    for (const auto& b : blocks) nodes.push_back(b.node());
    auto backprop = [nodes, B, f, q, ny, nx, OD, OH, OW](Tensor::Node& self) {
        const auto& g = self.grad;
        for (std::size_t p = 0; p < nodes.size(); ++p) {
            if (!nodes[p]->requires_grad) continue;
            auto& gb = nodes[p]->grad_buffer();
            const std::size_t gz = p / (ny * nx);
            const std::size_t gy = (p / nx) % ny;
            const std::size_t gx = p % nx;
            std::size_t i = 0;
            for (std::size_t bf = 0; bf < B * f; ++bf) {
                const Scalar* vol = g.data() + bf * OD * OH * OW;
                for (std::size_t z = 0; z < q; ++z)
                    for (std::size_t y = 0; y < q; ++y) {
                        const Scalar* row = vol + ((gz * q + z) * OH + (gy * q + y)) * OW + gx * q;
                        for (std::size_t x2 = 0; x2 < q; ++x2) gb[i++] += row[x2];
                    }
            }
        }
    };
    return Tensor::make_result(Shape{B, f, OD, OH, OW}, std::move(out), std::move(parents),
                               std::move(backprop), "pif_assemble");
}

// Stacks blocks (B,f,q,q,q) along the channel axis: (B, M*f, q, q, q).
Tensor stack_blocks(const std::vector<Tensor>& blocks, std::size_t f, std::size_t q) {
    const std::size_t B = blocks.front().shape()[0];
    const std::size_t M = blocks.size();
    const std::size_t vol = q * q * q;
    std::vector<Scalar> out(B * M * f * vol);
    for (std::size_t m = 0; m < M; ++m) {
        const auto& bd = blocks[m].data();
        for (std::size_t b = 0; b < B; ++b)
            std::copy_n(bd.data() + b * f * vol, f * vol, out.data() + (b * M * f + m * f) * vol);
    }
    std::vector<std::shared_ptr<Tensor::Node>> nodes;
    for (const auto& b : blocks) nodes.push_back(b.node());
    auto backprop = [nodes, B, f, vol, M](Tensor::Node& self) {
        const auto& g = self.grad;
        for (std::size_t m = 0; m < M; ++m) {
            if (!nodes[m]->requires_grad) continue;
            auto& gb = nodes[m]->grad_buffer();
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t i = 0; i < f * vol; ++i)
                    gb[b * f * vol + i] += g[(b * M * f + m * f) * vol + i];
        }
    };
    return Tensor::make_result(Shape{B, M * f, q, q, q}, std::move(out), blocks, std::move(backprop),
                               "pif_stack");
}

}  // namespace

PifOutput pif_forward(const Tensor& input, const PifBanks& banks) {
    const Shape& in = input.shape();
    if (in.size() != 5) throw ShapeError("pif: input must be rank 5 (B,C,D,H,W)");
    const PatchGrid& grid = banks.grid;
    for (std::size_t a = 0; a < 3; ++a) {
        if (in[2 + a] != grid.extents[a]) {
            throw ShapeError(std::string("pif: input ") + axis_name(a) + " extent " +
                             std::to_string(in[2 + a]) + " does not match grid extent " +
                             std::to_string(grid.extents[a]));
        }
    }
    if (in[1] != banks.in_channels) {
        throw ShapeError("pif: input has " + std::to_string(in[1]) + " channels, banks expect " +
                         std::to_string(banks.in_channels));
    }

    Conv3dSpec conv{banks.in_channels, banks.filters, banks.kernel_size, 1, 0};
    const std::size_t q = banks.block_extent();

    std::vector<Tensor> original_blocks;
    original_blocks.reserve(grid.num_original());
    for (std::size_t p = 0; p < grid.num_original(); ++p) {
        Tensor patch = slice_patch(input, grid.origins[p], grid.patch_size);
        original_blocks.push_back(conv3d(patch, conv, banks.weights[p], banks.biases[p]));
    }

    PifOutput out;
    out.original = assemble_original(original_blocks, grid, banks.filters, q);

    if (grid.num_overlap() > 0) {
        std::vector<Tensor> overlap_blocks;
        overlap_blocks.reserve(grid.num_overlap());
        for (std::size_t p = 0; p < grid.num_overlap(); ++p) {
            const std::size_t bank = grid.num_original() + p;
            Tensor patch = slice_patch(input, grid.overlap_origins[p], grid.patch_size);
            overlap_blocks.push_back(conv3d(patch, conv, banks.weights[bank], banks.biases[bank]));
        }
        out.overlap = stack_blocks(overlap_blocks, banks.filters, q);
    }
    return out;
}

LocalityMask pif_locality_probe(const Tensor& input, const PifBanks& banks, std::size_t bank_index,
                                Scalar delta) {
    if (bank_index >= banks.grid.num_banks()) throw Error("pif_locality_probe: bank index out of range");
    const Tensor x = input.detached();
    PifOutput base = pif_forward(x, banks);

    PifBanks perturbed = banks;
    {
        std::vector<Scalar> w = banks.weights[bank_index].data();
        for (auto& v : w) v += delta;
        std::vector<Scalar> b = banks.biases[bank_index].data();
        for (auto& v : b) v += delta;
        perturbed.weights[bank_index] = Tensor::parameter(banks.weights[bank_index].shape(), std::move(w));
        perturbed.biases[bank_index] = Tensor::parameter(banks.biases[bank_index].shape(), std::move(b));
    }
    PifOutput probed = pif_forward(x, perturbed);

    LocalityMask mask;
    mask.original.resize(base.original.size());
    for (std::size_t i = 0; i < mask.original.size(); ++i) {
        mask.original[i] = base.original.data()[i] != probed.original.data()[i] ? 1 : 0;
    }
    if (base.overlap.defined()) {
        mask.overlap.resize(base.overlap.size());
        for (std::size_t i = 0; i < mask.overlap.size(); ++i) {
            mask.overlap[i] = base.overlap.data()[i] != probed.overlap.data()[i] ? 1 : 0;
        }
    }
    return mask;
}

}  // namespace pifnet
