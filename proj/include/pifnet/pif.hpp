#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "pifnet/ops.hpp"
#include "pifnet/tensor.hpp"

namespace pifnet {

// Partition of a feature map's spatial extent into patches. Original
// patches tile the extent exactly; overlap patches sit at the original
// origins shifted by floor(s/2) on every axis and are kept only when the
// full s^3 patch fits inside the extent, so no padding is ever introduced
// at the borders. Both origin lists are row-major ordered and stable.
struct PatchGrid {
    std::array<std::size_t, 3> extents{};  // (d, h, w)
    std::size_t patch_size = 0;
    std::array<std::size_t, 3> grid_dims{};              // originals per axis
    std::vector<std::array<std::size_t, 3>> origins;     // original patches
    std::vector<std::array<std::size_t, 3>> overlap_origins;

    static PatchGrid make(const std::array<std::size_t, 3>& extents, std::size_t patch_size,
                          bool with_overlap = true);

    std::size_t num_original() const { return origins.size(); }
    std::size_t num_overlap() const { return overlap_origins.size(); }
    std::size_t num_banks() const { return origins.size() + overlap_origins.size(); }

    bool is_overlap_bank(std::size_t bank) const { return bank >= origins.size(); }
    // Origin of a bank; originals come first, then overlaps.
    const std::array<std::size_t, 3>& bank_origin(std::size_t bank) const;
};

// One kernel-and-bias bank per patch (originals first, then overlaps).
// Banks never share storage, so perturbing one bank can only move the
// output block it owns.
struct PifBanks {
    PatchGrid grid;
    std::size_t kernel_size = 0;
    std::size_t filters = 0;
    std::size_t in_channels = 0;
    std::vector<Tensor> weights;  // each (f, c, k, k, k)
    std::vector<Tensor> biases;   // each (f)

    static PifBanks init(const PatchGrid& grid, std::size_t in_channels, std::size_t kernel_size,
                         std::size_t filters, Rng& rng);

    std::size_t block_extent() const { return grid.patch_size - kernel_size + 1; }
    std::int64_t parameter_count() const;
};

struct PifOutput {
    // Original blocks reassembled row-major: (B, f, nz*q, ny*q, nx*q).
    Tensor original;
    // Overlap blocks stacked along the channel axis in origin order:
    // (B, M*f, q, q, q). Undefined when the grid has no overlap patches.
    Tensor overlap;
};

// Extracts the s^3 region of every patch across all channels, applies the
// patch's own bank as a valid stride-1 convolution and reassembles the
// blocks in split order. Differentiable through input and every bank.
PifOutput pif_forward(const Tensor& input, const PifBanks& banks);

// Copy of one patch region: (B, C, s, s, s); backward scatters into place.
Tensor slice_patch(const Tensor& input, const std::array<std::size_t, 3>& origin, std::size_t s);

struct LocalityMask {
    std::vector<std::uint8_t> original;  // per value of the original branch
    std::vector<std::uint8_t> overlap;   // per value of the overlap branch
};

// Runs the layer twice, once with bank `bank_index` perturbed by `delta`,
// and flags every output value that changed.
LocalityMask pif_locality_probe(const Tensor& input, const PifBanks& banks, std::size_t bank_index,
                                Scalar delta);

}  // namespace pifnet
