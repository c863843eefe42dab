#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pifnet/common.hpp"
#include "pifnet/rng.hpp"

namespace pifnet {

struct VolumeRecord {
    std::array<std::size_t, 3> extents{};  // (d, h, w)
    std::vector<Scalar> voxels;            // row-major, single channel
    int label = -1;                        // 0/1
    std::string subject_id;
    std::string split;  // "train" | "val" | "test" | "" while unassigned
};

struct SignalSite {
    std::array<Scalar, 3> center{};  // voxel coordinates, fractional allowed
    Scalar radius = 1.0;
    Scalar amplitude = 0.0;  // class-contrast; sign gives hyper/hypo intensity
};

// Synthetic spatially-normalized volumes: a smooth low-frequency anatomy
// template shared by all samples, Gaussian voxel noise, and for class-1
// subjects localized blobs at fixed signal sites with small sub-voxel
// jitter. Emulates focal effects on a registered template at desk scale.
struct SynthSpec {
    std::array<std::size_t, 3> extents{32, 32, 32};
    std::size_t per_class = 100;
    std::size_t images_per_subject = 1;
    std::vector<SignalSite> sites;
    std::uint64_t template_seed = 7;
    std::size_t template_components = 4;
    Scalar template_base = 0.55;
    Scalar template_amp = 0.12;
    Scalar noise_sigma = 0.08;
    Scalar jitter = 1.5;  // per-subject site displacement bound (voxels)

    void validate() const;
    static std::vector<SignalSite> default_sites(const std::array<std::size_t, 3>& extents);
};

// Deterministic in (spec, seed); intensities clamped to >= 0 and
// max-normalized per volume. Noise and jitter use separate substreams so a
// zero-amplitude site list produces the same voxels as no sites at all.
std::vector<VolumeRecord> generate_dataset(const SynthSpec& spec, std::uint64_t seed);

struct SplitFractions {
    Scalar train = 0.64;
    Scalar val = 0.16;
    Scalar test = 0.20;
};

// Subject-level assignment: all records of a subject share one split.
// Subjects are sorted by id, shuffled by seed, and allotted by largest
// remainder, so the result does not depend on record order.
void split_subjects(std::vector<VolumeRecord>& records, const SplitFractions& fractions,
                    std::uint64_t seed);

// Throws if any subject appears in more than one split.
void assert_no_leakage(const std::vector<VolumeRecord>& records);

// Scales so the maximum becomes 1. Returns false and leaves the volume
// unchanged when it is all zero.
bool normalize_max(VolumeRecord& rec);

enum class AugmentMode { None, Translate, Flip, Both };
AugmentMode parse_augment_mode(const std::string& name);
std::string augment_mode_name(AugmentMode mode);

// Integer shift with zero fill; voxel (z,y,x) moves to (z+s0, y+s1, x+s2).
std::vector<Scalar> translate_volume(const std::vector<Scalar>& voxels,
                                     const std::array<std::size_t, 3>& extents,
                                     const std::array<int, 3>& shift);
// Mirror along the width (sagittal) axis.
std::vector<Scalar> flip_sagittal(const std::vector<Scalar>& voxels,
                                  const std::array<std::size_t, 3>& extents);

// Random augmentation draw: translation up to +/-2 voxels per axis; flip
// applied with probability 1/2 where the mode allows it.
std::vector<Scalar> augment(const std::vector<Scalar>& voxels,
                            const std::array<std::size_t, 3>& extents, AugmentMode mode, Rng& rng);

}  // namespace pifnet
