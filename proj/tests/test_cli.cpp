#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pifnet/cli.hpp"
#include "pifnet/volume_io.hpp"

using namespace pifnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("pifnet_cli_" + tag);
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

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

int run(std::initializer_list<std::string> args) { return cli::run(std::vector<std::string>(args)); }

// Shared micro dataset for the training commands.
fs::path micro_data_dir() {
    static fs::path dir = [] {
        fs::path d = temp_dir("data");
        const int rc = cli::run({"synth", "--out", d.string(), "--extents", "12,12,12",
                                 "--n-per-class", "8", "--seed", "9", "--noise", "0.05"});
        REQUIRE(rc == cli::kOk);
        return d;
    }();
    return dir;
}

}  // namespace

TEST_CASE("synth: writes the expected number of volumes plus manifest, deterministically") {
    const fs::path a = temp_dir("synth_a");
    const fs::path b = temp_dir("synth_b");
    for (const auto& dir : {a, b}) {
        const int rc = run({"synth", "--out", dir.string(), "--extents", "12,12,12",
                            "--n-per-class", "5", "--seed", "42"});
        CHECK(rc == cli::kOk);
    }
    std::size_t volumes = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        if (entry.path().extension() == ".pifv") ++volumes;
    }
    CHECK(volumes == 10);  // 2 classes x 5 subjects
    CHECK(fs::exists(a / "manifest.tsv"));
    CHECK(fs::exists(a / "resolved_config.txt"));

    // Identical flags give identical bytes.
    CHECK(file_bytes(a / "manifest.tsv") == file_bytes(b / "manifest.tsv"));
    CHECK(file_bytes(a / "vol00000.pifv") == file_bytes(b / "vol00000.pifv"));
    CHECK(file_bytes(a / "resolved_config.txt") == file_bytes(b / "resolved_config.txt"));
}

TEST_CASE("synth: bad site spec is a config error") {
    const fs::path dir = temp_dir("synth_bad");
    CHECK(run({"synth", "--out", dir.string(), "--sites", "1,2,3"}) == cli::kConfigError);
    CHECK(run({"synth", "--out", dir.string(), "--sites", "100,2,3,2,0.5"}) == cli::kConfigError);
}

TEST_CASE("params: per-layer counts and the pair verdict") {
    const fs::path dir = temp_dir("params");
    write_file(dir / "pair.cfg", "model.pair = baseline_a_desk, pif_a_desk\n");
    CHECK(run({"params", "--config", (dir / "pair.cfg").string()}) == cli::kOk);

    write_file(dir / "single.cfg", "model.preset = pif_micro\n");
    CHECK(run({"params", "--config", (dir / "single.cfg").string()}) == cli::kOk);
}

TEST_CASE("config errors: unknown key, unknown preset, missing model") {
    const fs::path dir = temp_dir("cfg_err");
    write_file(dir / "unknown_key.cfg", "model.preset = pif_micro\ntrain.typo = 3\n");
    CHECK(run({"params", "--config", (dir / "unknown_key.cfg").string()}) == cli::kConfigError);

    write_file(dir / "unknown_preset.cfg", "model.preset = resnet\n");
    CHECK(run({"params", "--config", (dir / "unknown_preset.cfg").string()}) == cli::kConfigError);

    write_file(dir / "empty.cfg", "train.lr = 0.01\n");
    CHECK(run({"params", "--config", (dir / "empty.cfg").string()}) == cli::kConfigError);

    CHECK(run({"params", "--config", (dir / "missing.cfg").string()}) == cli::kIoError);
}

TEST_CASE("shape errors surface with their own exit code before training") {
    const fs::path dir = temp_dir("shape_err");
    // Patch size 7 does not divide the 10^3 map the micro pif layer sees.
    write_file(dir / "bad_shape.cfg", "model.preset = pif_micro\npif.patch_size = 7\n");
    CHECK(run({"params", "--config", (dir / "bad_shape.cfg").string()}) == cli::kShapeError);
}

TEST_CASE("flip augmentation with a pif model is refused") {
    const fs::path dir = temp_dir("flip");
    write_file(dir / "flip.cfg", "model.preset = pif_micro\naugment.mode = flip\n");
    CHECK(run({"params", "--config", (dir / "flip.cfg").string()}) == cli::kConfigError);
}

TEST_CASE("train: single repeat on micro data writes reports and checkpoints") {
    const fs::path data = micro_data_dir();
    const fs::path out = temp_dir("train_out");
    const fs::path cfg = out / "run.cfg";
    write_file(cfg,
               "model.preset = baseline_micro\n"
               "train.lr = 0.001\n"
               "train.weight_decay = 0\n"
               "train.max_epochs = 2\n"
               "train.patience = 2\n"
               "train.seed = 4\n"
               "augment.mode = none\n");
    const int rc = run({"train", "--config", cfg.string(), "--data",
                        (data / "manifest.tsv").string(), "--out", out.string(), "--repeats", "1"});
    CHECK(rc == cli::kOk);
    CHECK(fs::exists(out / "resolved_config.txt"));
    CHECK(fs::exists(out / "aggregate.txt"));
    CHECK(fs::exists(out / "baseline_micro" / "repeats.tsv"));
    CHECK(fs::exists(out / "baseline_micro" / "repeat_0" / "checkpoint.pifm"));
    CHECK(fs::exists(out / "baseline_micro" / "repeat_0" / "epochs.tsv"));

    // The resolved config echoes defaults too.
    const std::string resolved = file_bytes(out / "resolved_config.txt");
    CHECK(resolved.find("train.repeats = 1") != std::string::npos);
    CHECK(resolved.find("train.lr = 0.001") != std::string::npos);
    CHECK(resolved.find("eval.metric = balanced_accuracy") != std::string::npos);

    SUBCASE("identical config and seed reproduce the run byte-identically") {
        const fs::path out2 = temp_dir("train_out2");
        const int rc2 =
            run({"train", "--config", cfg.string(), "--data", (data / "manifest.tsv").string(),
                 "--out", out2.string(), "--repeats", "1"});
        CHECK(rc2 == cli::kOk);
        CHECK(file_bytes(out / "aggregate.txt") == file_bytes(out2 / "aggregate.txt"));
        CHECK(file_bytes(out / "baseline_micro" / "repeat_0" / "epochs.tsv") ==
              file_bytes(out2 / "baseline_micro" / "repeat_0" / "epochs.tsv"));
        CHECK(file_bytes(out / "baseline_micro" / "repeat_0" / "checkpoint.pifm") ==
              file_bytes(out2 / "baseline_micro" / "repeat_0" / "checkpoint.pifm"));
    }

    SUBCASE("eval runs on the written checkpoint") {
        CHECK(run({"eval", "--model", (out / "baseline_micro" / "repeat_0" / "checkpoint.pifm").string(),
                   "--data", (data / "manifest.tsv").string(), "--split", "test"}) == cli::kOk);
    }

    SUBCASE("heatmap from the trained checkpoint") {
        const fs::path hm = temp_dir("heatmap_out");
        const int hrc = run({"heatmap", "--model",
                             (out / "baseline_micro" / "repeat_0" / "checkpoint.pifm").string(),
                             "--input", (data / "vol00000.pifv").string(), "--start", "output",
                             "--out", hm.string()});
        CHECK(hrc == cli::kOk);
        CHECK(fs::exists(hm / "relevance.pifv"));
        CHECK(fs::exists(hm / "relevance_meta.txt"));
        CHECK(fs::exists(hm / "slices" / "relevance_z000.ppm"));
        CHECK(fs::exists(hm / "resolved_config.txt"));

        // alpha != 1 + beta is rejected.
        const fs::path hm2 = temp_dir("heatmap_bad");
        CHECK(run({"heatmap", "--model",
                   (out / "baseline_micro" / "repeat_0" / "checkpoint.pifm").string(), "--input",
                   (data / "vol00000.pifv").string(), "--alpha", "2", "--beta", "4", "--out",
                   hm2.string()}) == cli::kConfigError);
    }
}

TEST_CASE("train: pair config produces the two-row aggregate table") {
    const fs::path data = micro_data_dir();
    const fs::path out = temp_dir("train_pair");
    const fs::path cfg = out / "pair.cfg";
    write_file(cfg,
               "model.pair = baseline_micro, pif_micro\n"
               "train.lr = 0.001\n"
               "train.max_epochs = 1\n"
               "train.seed = 6\n"
               "augment.mode = none\n");
    const int rc = run({"train", "--config", cfg.string(), "--data",
                        (data / "manifest.tsv").string(), "--out", out.string(), "--repeats", "1"});
    CHECK(rc == cli::kOk);
    const std::string table = file_bytes(out / "aggregate.txt");
    CHECK(table.find("baseline_micro") != std::string::npos);
    CHECK(table.find("pif_micro") != std::string::npos);
    CHECK(table.find("balanced") != std::string::npos);

    SUBCASE("heatmap started at a single patch bank of the trained pif model") {
        const fs::path hm = temp_dir("heatmap_pif");
        const int hrc = run({"heatmap", "--model",
                             (out / "pif_micro" / "repeat_0" / "checkpoint.pifm").string(),
                             "--input", (data / "vol00000.pifv").string(), "--start",
                             "pif:patch3:filter0", "--out", hm.string()});
        CHECK(hrc == cli::kOk);
        CHECK(fs::exists(hm / "relevance.pifv"));
        const std::string meta = file_bytes(hm / "relevance_meta.txt");
        CHECK(meta.find("start = pif:patch3:filter0") != std::string::npos);

        // Out-of-range patch index is a config error.
        CHECK(run({"heatmap", "--model",
                   (out / "pif_micro" / "repeat_0" / "checkpoint.pifm").string(), "--input",
                   (data / "vol00000.pifv").string(), "--start", "pif:patch99:filter0", "--out",
                   hm.string()}) == cli::kConfigError);
    }
}

TEST_CASE("io errors: missing manifest and unwritable output") {
    const fs::path dir = temp_dir("io_err");
    write_file(dir / "ok.cfg", "model.preset = baseline_micro\n");
    CHECK(run({"train", "--config", (dir / "ok.cfg").string(), "--data",
               (dir / "nope.tsv").string(), "--out", (dir / "out").string()}) == cli::kIoError);
    CHECK(run({"eval", "--model", (dir / "nope.pifm").string(), "--data",
               (dir / "nope.tsv").string()}) == cli::kIoError);
}

TEST_CASE("cli usage errors map to the config exit code") {
    CHECK(run({"unknown-verb"}) == cli::kConfigError);
    CHECK(run({"synth"}) == cli::kConfigError);  // --out is required
    CHECK(run({}) == cli::kConfigError);
    CHECK(run({"--help"}) == cli::kOk);
}
