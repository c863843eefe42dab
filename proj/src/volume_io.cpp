#include "pifnet/volume_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pifnet {

namespace {

namespace fs = std::filesystem;

void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u32(buf, bits);
}

void put_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    std::size_t remaining() const { return data_.size() - pos_; }

    void expect_magic(const char* magic) {
        if (remaining() < 4 || std::memcmp(data_.data() + pos_, magic, 4) != 0) {
            throw IoError(path_ + ": bad magic, not a " + magic + " file");
        }
        pos_ += 4;
    }

    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint8_t>(data_[pos_]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(data_[pos_ + 1])) << 8);
        pos_ += 2;
        return v;
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
            bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void expect_end() {
        if (remaining() != 0) throw IoError(path_ + ": trailing bytes after payload");
    }

private:
    void need(std::size_t n) {
        if (remaining() < n) throw IoError(path_ + ": truncated payload");
    }
    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

constexpr std::uint64_t kMaxVoxels = 1ULL << 32;

}  // namespace

void write_volume(const VolumeRecord& rec, const std::string& path) {
    std::string buf;
    buf.reserve(18 + rec.voxels.size() * 4);
    buf += "PIFV";
    put_u16(buf, 1);
    put_u32(buf, 1);  // channels
    put_u32(buf, static_cast<std::uint32_t>(rec.extents[0]));
    put_u32(buf, static_cast<std::uint32_t>(rec.extents[1]));
    put_u32(buf, static_cast<std::uint32_t>(rec.extents[2]));
    for (Scalar v : rec.voxels) put_f32(buf, static_cast<float>(v));
    spit(path, buf);
}

VolumeRecord read_volume(const std::string& path) {
    Reader r(slurp(path), path);
    r.expect_magic("PIFV");
    const std::uint16_t version = r.u16();
    if (version != 1) throw IoError(path + ": unsupported PIFV version " + std::to_string(version));
    const std::uint64_t c = r.u32();
    const std::uint64_t d = r.u32();
    const std::uint64_t h = r.u32();
    const std::uint64_t w = r.u32();
    if (c != 1) throw IoError(path + ": expected a single-channel volume");
    const std::uint64_t n = c * d * h * w;
    if (n == 0 || n > kMaxVoxels) throw IoError(path + ": extent overflow");
    VolumeRecord rec;
    rec.extents = {static_cast<std::size_t>(d), static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
    rec.voxels.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) rec.voxels.push_back(static_cast<Scalar>(r.f32()));
    r.expect_end();
    return rec;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ostringstream os;
    os << "# path\tlabel\tsubject\tsplit\n";
    for (const auto& e : entries) {
        os << e.path << "\t" << e.label << "\t" << e.subject << "\t" << e.split << "\n";
    }
    spit(path, os.str());
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::istringstream is(slurp(path));
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        ManifestEntry e;
        std::string label;
        if (!std::getline(ls, e.path, '\t') || !std::getline(ls, label, '\t') ||
            !std::getline(ls, e.subject, '\t') || !std::getline(ls, e.split)) {
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed manifest line");
        }
        if (label != "0" && label != "1") {
            throw IoError(path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
        }
        e.label = label == "1" ? 1 : 0;
        if (e.split != "train" && e.split != "val" && e.split != "test") {
            throw IoError(path + ":" + std::to_string(lineno) + ": unknown split '" + e.split + "'");
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<VolumeRecord> load_dataset(const std::string& manifest_path) {
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<VolumeRecord> records;
    for (const auto& e : read_manifest(manifest_path)) {
        fs::path vol_path = fs::path(e.path).is_absolute() ? fs::path(e.path) : base / e.path;
        VolumeRecord rec = read_volume(vol_path.string());
        rec.label = e.label;
        rec.subject_id = e.subject;
        rec.split = e.split;
        records.push_back(std::move(rec));
    }
    assert_no_leakage(records);
    return records;
}

void save_checkpoint(const std::string& path, Model& model) {
    std::string buf;
    buf += "PIFM";
    put_u16(buf, 1);
    const std::string text = model.spec().to_text();
    put_u32(buf, static_cast<std::uint32_t>(text.size()));
    buf += text;
    auto params = model.parameters();
    put_u32(buf, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put_u32(buf, static_cast<std::uint32_t>(p.shape().size()));
        for (std::size_t d : p.shape()) put_u32(buf, static_cast<std::uint32_t>(d));
        for (Scalar v : p.data()) put_f64(buf, v);
    }
    spit(path, buf);
}

Model load_checkpoint(const std::string& path) {
    Reader r(slurp(path), path);
    r.expect_magic("PIFM");
    const std::uint16_t version = r.u16();
    if (version != 1) throw IoError(path + ": unsupported checkpoint version");
    const std::uint32_t text_len = r.u32();
    const std::string text = r.bytes(text_len);
    ModelSpec spec = ModelSpec::from_text(text);
    Rng rng(0);
    Model model = Model::build(spec, rng);
    auto params = model.parameters();
    const std::uint32_t count = r.u32();
    if (count != params.size()) {
        throw IoError(path + ": checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(params.size()));
    }
    for (auto& p : params) {
        const std::uint32_t rank = r.u32();
        Shape shape(rank);
        for (auto& d : shape) d = r.u32();
        if (!same_shape(shape, p.shape())) throw IoError(path + ": checkpoint tensor shape mismatch");
        auto& data = p.data_mut();
        for (auto& v : data) v = r.f64();
    }
    r.expect_end();
    return model;
}

void write_relevance(const RelevanceMap& map, const std::string& volume_path,
                     const std::string& meta_path) {
    VolumeRecord rec;
    rec.extents = map.extents;
    rec.voxels = map.values;
    write_volume(rec, volume_path);

    std::ostringstream os;
    os << "start = " << map.start << "\n";
    os << "alpha = " << map.alpha << "\n";
    os << "beta = " << map.beta << "\n";
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(map.model_checksum));
    os << "model_checksum = " << hex << "\n";
    spit(meta_path, os.str());
}

void write_heatmap_slices(const RelevanceMap& map, const std::string& dir, const std::string& stem) {
    fs::create_directories(dir);
    const std::size_t D = map.extents[0], H = map.extents[1], W = map.extents[2];
    Scalar maxabs = 0.0;
    for (Scalar v : map.values) maxabs = std::max(maxabs, std::abs(v));
    if (maxabs == 0.0) maxabs = 1.0;

    for (std::size_t z = 0; z < D; ++z) {
        std::string buf = "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                const Scalar v = map.values[(z * H + y) * W + x] / maxabs;  // [-1, 1]
                // Diverging: blue for negative, white at zero, red for positive.
                const Scalar mag = std::min(1.0, std::abs(v));
                const std::uint8_t rch = static_cast<std::uint8_t>(255.0 * (v >= 0.0 ? 1.0 : 1.0 - mag));
                const std::uint8_t gch = static_cast<std::uint8_t>(255.0 * (1.0 - mag));
                const std::uint8_t bch = static_cast<std::uint8_t>(255.0 * (v <= 0.0 ? 1.0 : 1.0 - mag));
                buf.push_back(static_cast<char>(rch));
                buf.push_back(static_cast<char>(gch));
                buf.push_back(static_cast<char>(bch));
            }
        char name[64];
        std::snprintf(name, sizeof(name), "%s_z%03zu.ppm", stem.c_str(), z);
        spit((fs::path(dir) / name).string(), buf);
    }
}

}  // namespace pifnet
