#include "pifnet/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pifnet/lrp.hpp"
#include "pifnet/volume_io.hpp"

namespace pifnet::cli {

namespace {

namespace fs = std::filesystem;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<double> parse_csv(const std::string& text, std::size_t expect, const char* what) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            vals.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": expected comma-separated numbers, got '" + text +
                              "'");
        }
    }
    if (expect != 0 && vals.size() != expect) {
        throw ConfigError(std::string(what) + ": expected " + std::to_string(expect) + " values, got " +
                          std::to_string(vals.size()));
    }
    return vals;
}

// "z,y,x,radius,amplitude;z,y,x,radius,amplitude;..."
std::vector<SignalSite> parse_sites(const std::string& text) {
    std::vector<SignalSite> sites;
    std::stringstream ss(text);
    std::string group;
    while (std::getline(ss, group, ';')) {
        if (group.empty()) continue;
        const auto v = parse_csv(group, 5, "--sites");
        sites.push_back(SignalSite{{v[0], v[1], v[2]}, v[3], v[4]});
    }
    if (sites.empty()) throw ConfigError("--sites: no sites given");
    return sites;
}

struct SynthArgs {
    std::string out;
    std::string extents = "32,32,32";
    std::size_t n_per_class = 100;
    std::uint64_t seed = 42;
    std::string sites;  // empty: defaults
    double noise = 0.08;
    double jitter = 1.5;
    std::size_t images_per_subject = 1;
    std::string fractions = "0.64,0.16,0.20";
};

int cmd_synth(const SynthArgs& a) {
    const auto ext = parse_csv(a.extents, 3, "--extents");
    SynthSpec spec;
    spec.extents = {static_cast<std::size_t>(ext[0]), static_cast<std::size_t>(ext[1]),
                    static_cast<std::size_t>(ext[2])};
    spec.per_class = a.n_per_class;
    spec.images_per_subject = a.images_per_subject;
    spec.noise_sigma = a.noise;
    spec.jitter = a.jitter;
    spec.sites = a.sites.empty() ? SynthSpec::default_sites(spec.extents) : parse_sites(a.sites);

    const auto fr = parse_csv(a.fractions, 3, "--fractions");
    SplitFractions fractions{fr[0], fr[1], fr[2]};

    auto records = generate_dataset(spec, a.seed);
    split_subjects(records, fractions, a.seed);

    fs::create_directories(a.out);
    std::vector<ManifestEntry> manifest;
    for (std::size_t i = 0; i < records.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "vol%05zu.pifv", i);
        write_volume(records[i], (fs::path(a.out) / name).string());
        manifest.push_back(ManifestEntry{name, records[i].label, records[i].subject_id,
                                         records[i].split});
    }
    write_manifest((fs::path(a.out) / "manifest.tsv").string(), manifest);

    KeyValueConfig resolved;
    resolved.set("synth.extents", a.extents);
    resolved.set("synth.n_per_class", std::to_string(a.n_per_class));
    resolved.set("synth.seed", std::to_string(a.seed));
    resolved.set("synth.noise", fmt_double(a.noise));
    resolved.set("synth.jitter", fmt_double(a.jitter));
    resolved.set("synth.images_per_subject", std::to_string(a.images_per_subject));
    resolved.set("synth.fractions", a.fractions);
    {
        std::ostringstream os;
        for (std::size_t i = 0; i < spec.sites.size(); ++i) {
            const auto& s = spec.sites[i];
            if (i) os << ";";
            os << fmt_double(s.center[0]) << "," << fmt_double(s.center[1]) << ","
               << fmt_double(s.center[2]) << "," << fmt_double(s.radius) << ","
               << fmt_double(s.amplitude);
        }
        resolved.set("synth.sites", os.str());
    }
    write_text_file(fs::path(a.out) / "resolved_config.txt", resolved.to_text());

    std::size_t train = 0, val = 0, test = 0;
    for (const auto& r : records) {
        if (r.split == "train") ++train;
        else if (r.split == "val") ++val;
        else ++test;
    }
    std::cout << "wrote " << records.size() << " volumes to " << a.out << " (train " << train
              << ", val " << val << ", test " << test << ")\n";
    return kOk;
}

}  // namespace

ResolvedExperiment resolve_experiment(KeyValueConfig& cfg) {
    ResolvedExperiment out;

    const std::string preset_name = cfg.get_string("model.preset", "");
    const std::string pair = cfg.get_string("model.pair", "");
    if (!preset_name.empty() && !pair.empty()) {
        throw ConfigError("config: set either model.preset or model.pair, not both");
    }
    if (preset_name.empty() && pair.empty()) {
        throw ConfigError("config: model.preset or model.pair is required");
    }
    std::vector<std::string> names;
    if (!preset_name.empty()) {
        names.push_back(preset_name);
    } else {
        std::stringstream ss(pair);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto b = item.find_first_not_of(" \t");
            const auto e = item.find_last_not_of(" \t");
            if (b != std::string::npos) names.push_back(item.substr(b, e - b + 1));
        }
        if (names.size() != 2) throw ConfigError("config: model.pair needs exactly two preset names");
    }
    for (const auto& n : names) out.specs.push_back(preset(n));

    // Optional overrides for the patch layer.
    const std::size_t patch = cfg.get_size("pif.patch_size", 0);
    const std::size_t filters = cfg.get_size("pif.filters", 0);
    const bool has_overlap_key = cfg.has("pif.overlap");
    const bool overlap = cfg.get_bool("pif.overlap", true);
    if (patch > 0 || filters > 0 || has_overlap_key) {
        bool applied = false;
        for (auto& spec : out.specs) {
            for (auto& layer : spec.layers) {
                if (layer.kind != LayerSpec::Kind::Pif) continue;
                if (patch > 0) layer.patch_size = patch;
                if (filters > 0) layer.filters = filters;
                if (has_overlap_key) layer.overlap = overlap;
                applied = true;
            }
        }
        if (!applied) throw ConfigError("config: pif.* overrides given but no model has a pif layer");
    }

    out.train.lr = cfg.get_double("train.lr", 1e-4);
    out.train.weight_decay = cfg.get_double("train.weight_decay", 1e-5);
    out.train.batch_size = cfg.get_size("train.batch_size", 0);
    out.train.patience = cfg.get_size("train.patience", 8);
    out.train.max_epochs = cfg.get_size("train.max_epochs", 50);
    out.train.seed = cfg.get_u64("train.seed", 1);
    out.train.repeats = cfg.get_size("train.repeats", 10);
    out.train.augment = parse_augment_mode(cfg.get_string("augment.mode", "translate"));
    out.train.metric = cfg.get_string("eval.metric", "balanced_accuracy");
    cfg.ensure_all_consumed();
    out.train.validate();

    bool any_pif = false;
    for (const auto& s : out.specs) any_pif = any_pif || s.has_pif();
    if (any_pif && (out.train.augment == AugmentMode::Flip || out.train.augment == AugmentMode::Both)) {
        throw ConfigError(
            "config: flip augmentation is not allowed for patch-layer models; patches must have "
            "the same content during each training iteration, use augment.mode = translate");
    }

    // Report shape problems before any data is touched.
    for (const auto& s : out.specs) check_shapes(s);

    KeyValueConfig resolved;
    if (names.size() == 1) {
        resolved.set("model.preset", names[0]);
    } else {
        resolved.set("model.pair", names[0] + "," + names[1]);
    }
    for (const auto& spec : out.specs) {
        for (const auto& layer : spec.layers) {
            if (layer.kind == LayerSpec::Kind::Pif) {
                resolved.set("pif.patch_size", std::to_string(layer.patch_size));
                resolved.set("pif.filters", std::to_string(layer.filters));
                resolved.set("pif.overlap", layer.overlap ? "true" : "false");
            }
        }
    }
    resolved.set("train.lr", fmt_double(out.train.lr));
    resolved.set("train.weight_decay", fmt_double(out.train.weight_decay));
    resolved.set("train.batch_size", std::to_string(out.train.batch_size));
    resolved.set("train.patience", std::to_string(out.train.patience));
    resolved.set("train.max_epochs", std::to_string(out.train.max_epochs));
    resolved.set("train.seed", std::to_string(out.train.seed));
    resolved.set("train.repeats", std::to_string(out.train.repeats));
    resolved.set("augment.mode", augment_mode_name(out.train.augment));
    resolved.set("eval.metric", out.train.metric);
    out.resolved = resolved;
    return out;
}

namespace {

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out;
    std::size_t repeats = 0;  // 0: from config
};

int cmd_train(const TrainArgs& a) {
    KeyValueConfig cfg = KeyValueConfig::parse_file(a.config);
    ResolvedExperiment exp = resolve_experiment(cfg);
    if (a.repeats > 0) {
        exp.train.repeats = a.repeats;
        exp.resolved.set("train.repeats", std::to_string(a.repeats));
    }

    fs::create_directories(a.out);
    write_text_file(fs::path(a.out) / "resolved_config.txt", exp.resolved.to_text());

    Dataset data(load_dataset(a.data));
    RunHooks hooks;
    hooks.progress = [](const std::string& msg) { std::cerr << msg << "\n"; };
    hooks.on_run = [&](const ModelSpec& spec, std::size_t repeat, const RepeatResult& result,
                       Model& model) {
        const fs::path dir = fs::path(a.out) / spec.name / ("repeat_" + std::to_string(repeat));
        fs::create_directories(dir);
        save_checkpoint((dir / "checkpoint.pifm").string(), model);
        write_text_file(dir / "epochs.tsv", format_epoch_log(result));
    };

    ExperimentReport report = run_experiment(exp.specs, data, exp.train, hooks);

    for (const auto& m : report.models) {
        write_text_file(fs::path(a.out) / m.model_name / "repeats.tsv", format_repeat_log(m));
    }
    const std::string table = format_report_table(report);
    write_text_file(fs::path(a.out) / "aggregate.txt", table);
    std::cout << table;
    if (report.balance_checked && !report.balance_ok) {
        std::cerr << "warning: model pair parameter counts differ by more than 10%\n";
    }
    return kOk;
}

struct EvalArgs {
    std::string model;
    std::string data;
    std::string split = "test";
};

int cmd_eval(const EvalArgs& a) {
    Model model = load_checkpoint(a.model);
    Dataset data(load_dataset(a.data));
    const auto& records = data.split(a.split);
    if (records.empty()) throw Error("eval: split '" + a.split + "' is empty");
    auto [loss, balacc] = evaluate(model, records, model.spec().suggested_batch);
    std::printf("split=%s n=%zu loss=%.6f balanced_accuracy=%.4f\n", a.split.c_str(), records.size(),
                loss, balacc);
    return kOk;
}

struct HeatmapArgs {
    std::string model;
    std::string input;
    std::string start = "output";
    double alpha = 5.0;
    double beta = 4.0;
    std::string out;
};

int cmd_heatmap(const HeatmapArgs& a) {
    Model model = load_checkpoint(a.model);
    VolumeRecord vol = read_volume(a.input);
    const auto& want = model.spec().input;
    if (want[0] != 1 || vol.extents[0] != want[1] || vol.extents[1] != want[2] ||
        vol.extents[2] != want[3]) {
        throw ShapeError("heatmap: volume extents do not match the model input");
    }
    LrpConfig lrp;
    lrp.alpha = a.alpha;
    lrp.beta = a.beta;
    lrp.validate();
    StartPoint start = StartPoint::parse(a.start);

    Tensor input = Tensor::from(Shape{1, 1, vol.extents[0], vol.extents[1], vol.extents[2]},
                                vol.voxels);
    RelevanceMap map = heatmap(model, input, lrp, start);

    fs::create_directories(a.out);
    write_relevance(map, (fs::path(a.out) / "relevance.pifv").string(),
                    (fs::path(a.out) / "relevance_meta.txt").string());
    write_heatmap_slices(map, (fs::path(a.out) / "slices").string(), "relevance");

    KeyValueConfig resolved;
    resolved.set("heatmap.model", a.model);
    resolved.set("heatmap.input", a.input);
    resolved.set("heatmap.start", start.to_string());
    resolved.set("heatmap.alpha", fmt_double(a.alpha));
    resolved.set("heatmap.beta", fmt_double(a.beta));
    write_text_file(fs::path(a.out) / "resolved_config.txt", resolved.to_text());

    std::cout << "wrote relevance volume and " << map.extents[0] << " slice images to " << a.out
              << "\n";
    return kOk;
}

int cmd_params(const std::string& config_path) {
    KeyValueConfig cfg = KeyValueConfig::parse_file(config_path);
    ResolvedExperiment exp = resolve_experiment(cfg);
    std::vector<std::int64_t> totals;
    for (const auto& spec : exp.specs) {
        std::printf("%s (input %zux%zux%zux%zu)\n", spec.name.c_str(), spec.input[0], spec.input[1],
                    spec.input[2], spec.input[3]);
        std::int64_t total = 0;
        for (const auto& c : count_parameters_by_layer(spec)) {
            if (c.count == 0) continue;
            std::printf("  %-10s %10lld   %s\n", c.name.c_str(), static_cast<long long>(c.count),
                        c.detail.c_str());
            total += c.count;
        }
        std::printf("  %-10s %10lld\n", "total", static_cast<long long>(total));
        totals.push_back(total);
    }
    if (totals.size() == 2) {
        const double delta =
            std::abs(static_cast<double>(totals[1] - totals[0])) / static_cast<double>(totals[0]);
        std::printf("pair delta: %.2f%% -> %s\n", 100.0 * delta,
                    delta <= 0.10 ? "balanced" : "NOT balanced (over 10%)");
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"patch-individual-filter experiments on synthetic volumes"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads for data-parallel loops (0: auto)");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--out", synth_args.out, "output directory")->required();
    synth->add_option("--extents", synth_args.extents, "volume extents d,h,w");
    synth->add_option("--n-per-class", synth_args.n_per_class, "subjects per class");
    synth->add_option("--seed", synth_args.seed, "generator seed");
    synth->add_option("--sites", synth_args.sites, "signal sites z,y,x,radius,amplitude;...");
    synth->add_option("--noise", synth_args.noise, "voxel noise sigma");
    synth->add_option("--jitter", synth_args.jitter, "per-subject site jitter bound (voxels)");
    synth->add_option("--images-per-subject", synth_args.images_per_subject, "scans per subject");
    synth->add_option("--fractions", synth_args.fractions, "split fractions train,val,test");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train one model or a baseline/pif pair");
    train->add_option("--config", train_args.config, "config file")->required();
    train->add_option("--data", train_args.data, "dataset manifest")->required();
    train->add_option("--out", train_args.out, "output directory")->required();
    train->add_option("--repeats", train_args.repeats, "override train.repeats");

    EvalArgs eval_args;
    auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    evalc->add_option("--model", eval_args.model, "checkpoint file")->required();
    evalc->add_option("--data", eval_args.data, "dataset manifest")->required();
    evalc->add_option("--split", eval_args.split, "train|val|test");

    HeatmapArgs heat_args;
    auto* heat = app.add_subcommand("heatmap", "relevance heatmap for one volume");
    heat->add_option("--model", heat_args.model, "checkpoint file")->required();
    heat->add_option("--input", heat_args.input, "input volume (.pifv)")->required();
    heat->add_option("--start", heat_args.start, "output | <layer>:<filter> | pif:patch<p>:filter<f>");
    heat->add_option("--alpha", heat_args.alpha, "lrp alpha");
    heat->add_option("--beta", heat_args.beta, "lrp beta");
    heat->add_option("--out", heat_args.out, "output directory")->required();

    std::string params_config;
    auto* params = app.add_subcommand("params", "parameter counts per layer");
    params->add_option("--config", params_config, "config file")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (threads > 0) set_num_threads(threads);
        if (synth->parsed()) return cmd_synth(synth_args);
        if (train->parsed()) return cmd_train(train_args);
        if (evalc->parsed()) return cmd_eval(eval_args);
        if (heat->parsed()) return cmd_heatmap(heat_args);
        if (params->parsed()) return cmd_params(params_config);
        return kConfigError;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return kShapeError;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIoError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}

}  // namespace pifnet::cli
