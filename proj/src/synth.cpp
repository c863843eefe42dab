#include "pifnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

namespace pifnet {

void SynthSpec::validate() const {
    if (extents[0] == 0 || extents[1] == 0 || extents[2] == 0) {
        throw ConfigError("synth: extents must be positive");
    }
    if (per_class == 0) throw ConfigError("synth: per_class must be positive");
    if (images_per_subject == 0) throw ConfigError("synth: images_per_subject must be positive");
    if (!(noise_sigma >= 0.0)) throw ConfigError("synth: noise sigma must be non-negative");
    if (!(jitter >= 0.0)) throw ConfigError("synth: jitter must be non-negative");
    for (const auto& s : sites) {
        if (!std::isfinite(s.amplitude) || !std::isfinite(s.radius) || s.radius <= 0.0) {
            throw ConfigError("synth: site radius/amplitude must be finite, radius positive");
        }
        for (std::size_t a = 0; a < 3; ++a) {
            if (s.center[a] < 0.0 || s.center[a] >= static_cast<Scalar>(extents[a])) {
                throw ConfigError("synth: site center outside extents");
            }
        }
    }
}

std::vector<SignalSite> SynthSpec::default_sites(const std::array<std::size_t, 3>& e) {
    auto at = [&](Scalar fz, Scalar fy, Scalar fx) {
        return std::array<Scalar, 3>{fz * static_cast<Scalar>(e[0]), fy * static_cast<Scalar>(e[1]),
                                     fx * static_cast<Scalar>(e[2])};
    };
    // Three focal sites in different patch regions, mixed contrast signs.
    return {
        SignalSite{at(0.25, 0.25, 0.25), 2.8, 0.40},
        SignalSite{at(0.70, 0.70, 0.70), 3.2, -0.38},
        SignalSite{at(0.28, 0.72, 0.30), 2.5, 0.30},
    };
}

namespace {

struct TemplateComponent {
    std::array<Scalar, 3> freq{};
    Scalar phase = 0.0;
    Scalar amp = 0.0;
};

std::vector<TemplateComponent> make_template(const SynthSpec& spec) {
    Rng rng(spec.template_seed);
    std::vector<TemplateComponent> comps(spec.template_components);
    for (auto& c : comps) {
        for (auto& f : c.freq) f = 1.0 + std::floor(rng.uniform() * 3.0);  // 1..3 cycles
        c.phase = rng.uniform() * 2.0 * M_PI;
        c.amp = spec.template_amp * (0.5 + 0.5 * rng.uniform());
    }
    return comps;
}

}  // namespace

std::vector<VolumeRecord> generate_dataset(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    const auto comps = make_template(spec);
    const std::size_t D = spec.extents[0], H = spec.extents[1], W = spec.extents[2];
    const std::size_t subjects = 2 * spec.per_class;

    // Shared anatomy template, computed once.
    std::vector<Scalar> base(D * H * W);
    {
        std::size_t i = 0;
        for (std::size_t z = 0; z < D; ++z)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x, ++i) {
                    Scalar v = spec.template_base;
                    for (const auto& c : comps) {
                        const Scalar arg = 2.0 * M_PI *
                                               (c.freq[0] * static_cast<Scalar>(z) / static_cast<Scalar>(D) +
                                                c.freq[1] * static_cast<Scalar>(y) / static_cast<Scalar>(H) +
                                                c.freq[2] * static_cast<Scalar>(x) / static_cast<Scalar>(W)) +
                                           c.phase;
                        v += c.amp * std::cos(arg);
                    }
                    base[i] = v;
                }
    }

    Rng root(seed);
    std::vector<VolumeRecord> records;
    records.reserve(subjects * spec.images_per_subject);
    std::size_t record_index = 0;
    for (std::size_t su = 0; su < subjects; ++su) {
        const int label = su < spec.per_class ? 0 : 1;

        // One anatomy per subject: jittered site positions shared by all of
        // the subject's scans; noise varies per scan.
        Rng jitter_rng = root.child(0xA0000000ULL + su);
        std::vector<std::array<Scalar, 3>> centers;
        for (const auto& site : spec.sites) {
            std::array<Scalar, 3> c{};
            for (std::size_t a = 0; a < 3; ++a) {
                const Scalar offset = (2.0 * jitter_rng.uniform() - 1.0) * spec.jitter;
                c[a] = site.center[a] + offset;
            }
            centers.push_back(c);
        }

        for (std::size_t img = 0; img < spec.images_per_subject; ++img, ++record_index) {
            VolumeRecord rec;
            rec.extents = spec.extents;
            rec.label = label;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "subj%04zu", su);
            rec.subject_id = buf;
            rec.voxels = base;

            Rng noise_rng = root.child(0xB0000000ULL + record_index);
            if (spec.noise_sigma > 0.0) {
                for (auto& v : rec.voxels) v += spec.noise_sigma * noise_rng.normal();
            }

            if (label == 1) {
                for (std::size_t s = 0; s < spec.sites.size(); ++s) {
                    const Scalar amp = spec.sites[s].amplitude;
                    if (amp == 0.0) continue;
                    const Scalar r = spec.sites[s].radius;
                    const auto& c = centers[s];
                    const Scalar cut = 3.0 * r;
                    const long z0 = std::max(0L, static_cast<long>(std::floor(c[0] - cut)));
                    const long z1 = std::min(static_cast<long>(D) - 1, static_cast<long>(std::ceil(c[0] + cut)));
                    const long y0 = std::max(0L, static_cast<long>(std::floor(c[1] - cut)));
                    const long y1 = std::min(static_cast<long>(H) - 1, static_cast<long>(std::ceil(c[1] + cut)));
                    const long x0 = std::max(0L, static_cast<long>(std::floor(c[2] - cut)));
                    const long x1 = std::min(static_cast<long>(W) - 1, static_cast<long>(std::ceil(c[2] + cut)));
                    for (long z = z0; z <= z1; ++z)
                        for (long y = y0; y <= y1; ++y)
                            for (long x = x0; x <= x1; ++x) {
                                const Scalar dz = static_cast<Scalar>(z) - c[0];
                                const Scalar dy = static_cast<Scalar>(y) - c[1];
                                const Scalar dx = static_cast<Scalar>(x) - c[2];
                                const Scalar d2 = dz * dz + dy * dy + dx * dx;
                                rec.voxels[(static_cast<std::size_t>(z) * H + y) * W + x] +=
                                    amp * std::exp(-d2 / (2.0 * r * r));
                            }
                }
            }

            for (auto& v : rec.voxels) v = std::max(0.0, v);
            normalize_max(rec);
            records.push_back(std::move(rec));
        }
    }
    return records;
}

void split_subjects(std::vector<VolumeRecord>& records, const SplitFractions& fractions,
                    std::uint64_t seed) {
    const Scalar sum = fractions.train + fractions.val + fractions.test;
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");
    if (fractions.train < 0.0 || fractions.val < 0.0 || fractions.test < 0.0) {
        throw ConfigError("split: fractions must be non-negative");
    }

    std::vector<std::string> subjects;
    for (const auto& r : records) subjects.push_back(r.subject_id);
    std::sort(subjects.begin(), subjects.end());
    subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());

    const std::size_t S = subjects.size();
    std::size_t nonzero = 0;
    for (Scalar f : {fractions.train, fractions.val, fractions.test}) nonzero += f > 0.0 ? 1 : 0;
    if (S < nonzero) throw ConfigError("split: fewer subjects than splits");

    Rng rng(seed);
    for (std::size_t i = S; i > 1; --i) {
        const std::size_t j = rng.uniform_below(i);
        std::swap(subjects[i - 1], subjects[j]);
    }

    // Largest-remainder allotment at subject granularity.
    const std::array<Scalar, 3> frac{fractions.train, fractions.val, fractions.test};
    std::array<std::size_t, 3> count{};
    std::array<Scalar, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const Scalar quota = frac[i] * static_cast<Scalar>(S);
        count[i] = static_cast<std::size_t>(std::floor(quota));
        remainder[i] = quota - std::floor(quota);
        assigned += count[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
        if (frac[a] != frac[b]) return frac[a] > frac[b];
        return a < b;
    });
    for (std::size_t i = 0; assigned < S; ++i) {
        ++count[order[i % 3]];
        ++assigned;
    }

    std::map<std::string, std::string> assignment;
    std::size_t pos = 0;
    const std::array<const char*, 3> names{"train", "val", "test"};
    for (std::size_t split = 0; split < 3; ++split) {
        for (std::size_t i = 0; i < count[split]; ++i) assignment[subjects[pos++]] = names[split];
    }

    for (auto& r : records) r.split = assignment.at(r.subject_id);
    assert_no_leakage(records);
}

void assert_no_leakage(const std::vector<VolumeRecord>& records) {
    std::map<std::string, std::string> seen;
    for (const auto& r : records) {
        auto [it, inserted] = seen.emplace(r.subject_id, r.split);
        if (!inserted && it->second != r.split) {
            throw Error("subject leakage: '" + r.subject_id + "' appears in splits '" + it->second +
                        "' and '" + r.split + "'");
        }
    }
}

bool normalize_max(VolumeRecord& rec) {
    Scalar mx = 0.0;
    for (Scalar v : rec.voxels) mx = std::max(mx, v);
    if (mx == 0.0) return false;
    const Scalar inv = 1.0 / mx;
    for (auto& v : rec.voxels) v *= inv;
    return true;
}

AugmentMode parse_augment_mode(const std::string& name) {
    if (name == "none") return AugmentMode::None;
    if (name == "translate") return AugmentMode::Translate;
    if (name == "flip") return AugmentMode::Flip;
    if (name == "both") return AugmentMode::Both;
    throw ConfigError("augment: unknown mode '" + name + "'");
}

std::string augment_mode_name(AugmentMode mode) {
    switch (mode) {
        case AugmentMode::None: return "none";
        case AugmentMode::Translate: return "translate";
        case AugmentMode::Flip: return "flip";
        case AugmentMode::Both: return "both";
    }
    return "?";
}

std::vector<Scalar> translate_volume(const std::vector<Scalar>& voxels,
                                     const std::array<std::size_t, 3>& e,
                                     const std::array<int, 3>& shift) {
    const long D = static_cast<long>(e[0]), H = static_cast<long>(e[1]), W = static_cast<long>(e[2]);
    std::vector<Scalar> out(voxels.size(), 0.0);
    for (long z = 0; z < D; ++z) {
        const long sz = z - shift[0];
        if (sz < 0 || sz >= D) continue;
        for (long y = 0; y < H; ++y) {
            const long sy = y - shift[1];
            if (sy < 0 || sy >= H) continue;
            for (long x = 0; x < W; ++x) {
                const long sx = x - shift[2];
                if (sx < 0 || sx >= W) continue;
                out[(z * H + y) * W + x] = voxels[(sz * H + sy) * W + sx];
            }
        }
    }
    return out;
}

std::vector<Scalar> flip_sagittal(const std::vector<Scalar>& voxels,
                                  const std::array<std::size_t, 3>& e) {
    const std::size_t D = e[0], H = e[1], W = e[2];
    std::vector<Scalar> out(voxels.size());
    for (std::size_t z = 0; z < D; ++z)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x)
                out[(z * H + y) * W + x] = voxels[(z * H + y) * W + (W - 1 - x)];
    return out;
}

std::vector<Scalar> augment(const std::vector<Scalar>& voxels, const std::array<std::size_t, 3>& e,
                            AugmentMode mode, Rng& rng) {
    std::vector<Scalar> out = voxels;
    if (mode == AugmentMode::Translate || mode == AugmentMode::Both) {
        std::array<int, 3> shift{};
        for (auto& s : shift) s = static_cast<int>(rng.uniform_below(5)) - 2;
        if (shift[0] != 0 || shift[1] != 0 || shift[2] != 0) out = translate_volume(out, e, shift);
    }
    if (mode == AugmentMode::Flip || mode == AugmentMode::Both) {
        if (rng.uniform() < 0.5) out = flip_sagittal(out, e);
    }
    return out;
}

}  // namespace pifnet
