#pragma once

#include <string>
#include <vector>

#include "pifnet/lrp.hpp"
#include "pifnet/model.hpp"
#include "pifnet/synth.hpp"

namespace pifnet {

// PIFV volume format (little-endian, bit-exact):
//   magic "PIFV" | u16 version=1 | u32 channels | u32 d | u32 h | u32 w |
//   f32 payload, row-major (c,z,y,x)
// Labels, subject ids and split tags live in a separate manifest.
void write_volume(const VolumeRecord& rec, const std::string& path);
VolumeRecord read_volume(const std::string& path);

// Manifest: one record per line, tab-separated: path, label, subject-id,
// split. Paths are relative to the manifest's directory. '#' starts a
// comment line.
struct ManifestEntry {
    std::string path;
    int label = -1;
    std::string subject;
    std::string split;
};

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& path);

// Reads the manifest and every referenced volume.
std::vector<VolumeRecord> load_dataset(const std::string& manifest_path);

// Checkpoint format:
//   magic "PIFM" | u16 version=1 | u32 text_len | model spec text |
//   u32 tensor_count | per tensor: u32 rank, u32 extents..., f64 payload
void save_checkpoint(const std::string& path, Model& model);
Model load_checkpoint(const std::string& path);

// Relevance volume as single-channel PIFV plus a small text sidecar with
// the start point, alpha/beta and the model checksum.
void write_relevance(const RelevanceMap& map, const std::string& volume_path,
                     const std::string& meta_path);

// One PPM (P6) image per axial slice, blue-white-red diverging colors
// normalized symmetrically around zero.
void write_heatmap_slices(const RelevanceMap& map, const std::string& dir, const std::string& stem);

}  // namespace pifnet
