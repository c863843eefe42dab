#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "pifnet/synth.hpp"
#include "pifnet/volume_io.hpp"

using namespace pifnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("pifnet_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

SynthSpec small_spec() {
    SynthSpec spec;
    spec.extents = {16, 16, 16};
    spec.per_class = 20;
    spec.sites = SynthSpec::default_sites(spec.extents);
    return spec;
}

}  // namespace

TEST_CASE("generate_dataset: same (spec, seed) twice is byte-identical") {
    SynthSpec spec = small_spec();
    auto a = generate_dataset(spec, 42);
    auto b = generate_dataset(spec, 42);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].voxels == b[i].voxels);
        CHECK(a[i].subject_id == b[i].subject_id);
        CHECK(a[i].label == b[i].label);
    }
    auto c = generate_dataset(spec, 43);
    CHECK(a[0].voxels != c[0].voxels);
}

TEST_CASE("generate_dataset: zero amplitude is identical to having no sites at all") {
    SynthSpec with_sites = small_spec();
    for (auto& s : with_sites.sites) s.amplitude = 0.0;
    SynthSpec no_sites = small_spec();
    no_sites.sites.clear();
    auto a = generate_dataset(with_sites, 7);
    auto b = generate_dataset(no_sites, 7);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].voxels == b[i].voxels);
}

TEST_CASE("generate_dataset: intensities clamped >= 0 and max-normalized") {
    auto records = generate_dataset(small_spec(), 11);
    for (const auto& r : records) {
        Scalar mx = 0.0;
        for (Scalar v : r.voxels) {
            CHECK(v >= 0.0);
            mx = std::max(mx, v);
        }
        CHECK(mx == doctest::Approx(1.0));
    }
}

TEST_CASE("oracle classifier reaches balanced accuracy > 0.95 on a held-out set") {
    SynthSpec spec = small_spec();
    spec.per_class = 40;
    auto records = generate_dataset(spec, 21);
    split_subjects(records, SplitFractions{0.625, 0.125, 0.25}, 21);
    std::vector<VolumeRecord> train, test;
    for (const auto& r : records) {
        if (r.split == "train") train.push_back(r);
        if (r.split == "test") test.push_back(r);
    }
    CHECK(oracles::oracle_classifier_balacc(train, test, spec.sites) > 0.95);
}

TEST_CASE("split_subjects: 10 subjects with (0.64,0.16,0.20) -> 6/2/2 by largest remainder") {
    std::vector<VolumeRecord> records;
    for (int i = 0; i < 10; ++i) {
        VolumeRecord r;
        r.extents = {1, 1, 1};
        r.voxels = {0.5};
        r.label = i % 2;
        r.subject_id = "p" + std::to_string(i);
        records.push_back(r);
    }
    split_subjects(records, SplitFractions{0.64, 0.16, 0.20}, 3);
    std::size_t train = 0, val = 0, test = 0;
    for (const auto& r : records) {
        if (r.split == "train") ++train;
        if (r.split == "val") ++val;
        if (r.split == "test") ++test;
    }
    CHECK(train == 6);
    CHECK(val == 2);
    CHECK(test == 2);
}

TEST_CASE("split_subjects: all records of one subject stay together") {
    std::vector<VolumeRecord> records;
    for (int s = 0; s < 6; ++s) {
        for (int img = 0; img < 3; ++img) {
            VolumeRecord r;
            r.extents = {1, 1, 1};
            r.voxels = {0.1};
            r.label = s % 2;
            r.subject_id = "subj" + std::to_string(s);
            records.push_back(r);
        }
    }
    split_subjects(records, SplitFractions{0.5, 0.25, 0.25}, 9);
    std::map<std::string, std::set<std::string>> by_subject;
    for (const auto& r : records) by_subject[r.subject_id].insert(r.split);
    for (const auto& [subject, splits] : by_subject) CHECK(splits.size() == 1);
    CHECK_NOTHROW(assert_no_leakage(records));
}

TEST_CASE("split_subjects: permuting record order with a fixed seed keeps the assignment") {
    std::vector<VolumeRecord> records;
    for (int i = 0; i < 12; ++i) {
        VolumeRecord r;
        r.extents = {1, 1, 1};
        r.voxels = {0.2};
        r.label = i % 2;
        r.subject_id = "q" + std::to_string(i);
        records.push_back(r);
    }
    auto shuffled = records;
    std::reverse(shuffled.begin(), shuffled.end());
    split_subjects(records, SplitFractions{}, 17);
    split_subjects(shuffled, SplitFractions{}, 17);
    std::map<std::string, std::string> a, b;
    for (const auto& r : records) a[r.subject_id] = r.split;
    for (const auto& r : shuffled) b[r.subject_id] = r.split;
    CHECK(a == b);
}

TEST_CASE("split_subjects errors") {
    std::vector<VolumeRecord> one;
    VolumeRecord r;
    r.extents = {1, 1, 1};
    r.voxels = {0.1};
    r.subject_id = "only";
    one.push_back(r);
    CHECK_THROWS_AS(split_subjects(one, SplitFractions{}, 1), ConfigError);
    CHECK_THROWS_AS(split_subjects(one, SplitFractions{0.5, 0.3, 0.3}, 1), ConfigError);
}

TEST_CASE("leakage guard fires on a straddling subject") {
    std::vector<VolumeRecord> records(2);
    records[0].subject_id = records[1].subject_id = "dup";
    records[0].split = "train";
    records[1].split = "test";
    CHECK_THROWS_AS(assert_no_leakage(records), Error);
}

TEST_CASE("normalize_max: scale, degenerate all-zero, idempotence") {
    VolumeRecord rec;
    rec.extents = {1, 1, 4};
    rec.voxels = {1.0, 4.0, 2.0, 0.0};
    CHECK(normalize_max(rec));
    CHECK(rec.voxels == std::vector<Scalar>{0.25, 1.0, 0.5, 0.0});

    VolumeRecord zero;
    zero.extents = {1, 1, 2};
    zero.voxels = {0.0, 0.0};
    CHECK_FALSE(normalize_max(zero));
    CHECK(zero.voxels == std::vector<Scalar>{0.0, 0.0});

    auto before = rec.voxels;
    CHECK(normalize_max(rec));
    CHECK(rec.voxels == before);
}

TEST_CASE("augment primitives: flip involution, zero translate identity, shift semantics") {
    const std::array<std::size_t, 3> e{2, 2, 3};
    std::vector<Scalar> v(12);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(i);

    CHECK(flip_sagittal(flip_sagittal(v, e), e) == v);
    CHECK(translate_volume(v, e, {0, 0, 0}) == v);

    // (z,y,x) -> (z+1,y,x); vacated plane zero.
    auto t = translate_volume(v, e, {1, 0, 0});
    for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 3; ++x) {
            CHECK(t[(0 * 2 + y) * 3 + x] == 0.0);
            CHECK(t[(1 * 2 + y) * 3 + x] == v[(0 * 2 + y) * 3 + x]);
        }
}

TEST_CASE("augment mode parsing round-trips, unknown mode rejected") {
    for (const char* name : {"none", "translate", "flip", "both"}) {
        CHECK(augment_mode_name(parse_augment_mode(name)) == name);
    }
    CHECK_THROWS_AS(parse_augment_mode("mirror"), ConfigError);
}

TEST_CASE("augment: translation bounded by +/-2 voxels") {
    Rng rng(33);
    const std::array<std::size_t, 3> e{5, 5, 5};
    std::vector<Scalar> v(125, 0.0);
    v[(2 * 5 + 2) * 5 + 2] = 1.0;  // single marker at the center
    for (int it = 0; it < 50; ++it) {
        auto out = augment(v, e, AugmentMode::Translate, rng);
        std::size_t idx = 0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out[i] == 1.0) idx = i;
        }
        const long z = static_cast<long>(idx / 25), y = static_cast<long>((idx / 5) % 5),
                   x = static_cast<long>(idx % 5);
        CHECK(std::abs(z - 2) <= 2);
        CHECK(std::abs(y - 2) <= 2);
        CHECK(std::abs(x - 2) <= 2);
    }
}

TEST_CASE("pifv round trip is bit-exact at the file level") {
    const fs::path dir = temp_dir("pifv");
    VolumeRecord rec;
    rec.extents = {3, 4, 5};
    Rng rng(44);
    rec.voxels.resize(60);
    for (auto& v : rec.voxels) v = rng.uniform();

    const fs::path p1 = dir / "a.pifv";
    const fs::path p2 = dir / "b.pifv";
    write_volume(rec, p1.string());
    VolumeRecord back = read_volume(p1.string());
    CHECK(back.extents == rec.extents);
    write_volume(back, p2.string());
    CHECK(file_bytes(p1) == file_bytes(p2));

    // Data change must change the bytes.
    back.voxels[0] += 0.5;
    write_volume(back, p2.string());
    CHECK(file_bytes(p1) != file_bytes(p2));
}

TEST_CASE("pifv read errors: bad magic, truncated payload, extent overflow") {
    const fs::path dir = temp_dir("pifv_err");

    {
        std::ofstream f(dir / "bad_magic.pifv", std::ios::binary);
        f << "NOPE" << std::string(20, '\0');
    }
    CHECK_THROWS_AS(read_volume((dir / "bad_magic.pifv").string()), IoError);

    {
        // Header claims 2x2x2 but only 7 floats follow.
        std::string buf = "PIFV";
        auto u16 = [&](std::uint16_t v) {
            buf.push_back(static_cast<char>(v & 0xff));
            buf.push_back(static_cast<char>(v >> 8));
        };
        auto u32 = [&](std::uint32_t v) {
            for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        };
        u16(1);
        u32(1);
        u32(2);
        u32(2);
        u32(2);
        for (int i = 0; i < 7 * 4; ++i) buf.push_back('\0');
        std::ofstream f(dir / "truncated.pifv", std::ios::binary);
        f << buf;
    }
    CHECK_THROWS_AS(read_volume((dir / "truncated.pifv").string()), IoError);

    {
        std::string buf = "PIFV";
        auto u16 = [&](std::uint16_t v) {
            buf.push_back(static_cast<char>(v & 0xff));
            buf.push_back(static_cast<char>(v >> 8));
        };
        auto u32 = [&](std::uint32_t v) {
            for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        };
        u16(1);
        u32(1);
        u32(0xffffffffu);
        u32(0xffffffffu);
        u32(2);
        std::ofstream f(dir / "overflow.pifv", std::ios::binary);
        f << buf;
    }
    CHECK_THROWS_AS(read_volume((dir / "overflow.pifv").string()), IoError);
}

TEST_CASE("manifest round trip and dataset loading") {
    const fs::path dir = temp_dir("manifest");
    SynthSpec spec = small_spec();
    spec.per_class = 4;
    auto records = generate_dataset(spec, 5);
    split_subjects(records, SplitFractions{0.5, 0.25, 0.25}, 5);

    std::vector<ManifestEntry> entries;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const std::string name = "v" + std::to_string(i) + ".pifv";
        write_volume(records[i], (dir / name).string());
        entries.push_back(ManifestEntry{name, records[i].label, records[i].subject_id,
                                        records[i].split});
    }
    write_manifest((dir / "manifest.tsv").string(), entries);

    auto loaded = load_dataset((dir / "manifest.tsv").string());
    REQUIRE(loaded.size() == records.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].label == records[i].label);
        CHECK(loaded[i].subject_id == records[i].subject_id);
        CHECK(loaded[i].split == records[i].split);
        CHECK(loaded[i].extents == records[i].extents);
        // One float32 quantization between the generated doubles and disk.
        for (std::size_t j = 0; j < loaded[i].voxels.size(); ++j) {
            CHECK(loaded[i].voxels[j] ==
                  static_cast<Scalar>(static_cast<float>(records[i].voxels[j])));
        }
    }

    CHECK_THROWS_AS(read_manifest((dir / "missing.tsv").string()), IoError);
}

TEST_CASE("checkpoint round trip restores parameters and spec exactly") {
    const fs::path dir = temp_dir("ckpt");
    ModelSpec spec = preset("pif_micro");
    Rng rng(71);
    Model model = Model::build(spec, rng);
    const std::uint64_t sum_before = model.checksum();

    save_checkpoint((dir / "m.pifm").string(), model);
    Model loaded = load_checkpoint((dir / "m.pifm").string());
    CHECK(loaded.checksum() == sum_before);
    CHECK(loaded.spec().to_text() == spec.to_text());
}

TEST_CASE("relevance export writes volume, meta and slices") {
    const fs::path dir = temp_dir("relevance");
    RelevanceMap map;
    map.extents = {2, 3, 3};
    map.values.assign(18, 0.0);
    map.values[4] = 1.0;
    map.values[10] = -0.5;
    map.start = "output";
    map.alpha = 5.0;
    map.beta = 4.0;
    map.model_checksum = 0xabcdef;

    write_relevance(map, (dir / "rel.pifv").string(), (dir / "rel_meta.txt").string());
    VolumeRecord rec = read_volume((dir / "rel.pifv").string());
    CHECK(rec.voxels[4] == 1.0);
    CHECK(rec.voxels[10] == -0.5);
    CHECK(file_bytes(dir / "rel_meta.txt").find("start = output") != std::string::npos);

    write_heatmap_slices(map, (dir / "slices").string(), "rel");
    CHECK(fs::exists(dir / "slices" / "rel_z000.ppm"));
    CHECK(fs::exists(dir / "slices" / "rel_z001.ppm"));
    const std::string ppm = file_bytes(dir / "slices" / "rel_z001.ppm");
    CHECK(ppm.substr(0, 2) == "P6");
}
