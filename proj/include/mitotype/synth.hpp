#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "mitotype/error.hpp"
#include "mitotype/feature_table.hpp"
#include "mitotype/image.hpp"
#include "mitotype/imaging.hpp"
#include "mitotype/parallel.hpp"
#include "mitotype/random.hpp"
#include "mitotype/segmentation.hpp"

namespace mitotype {

struct MixtureComponent {
    double weight = 1.0;
    double mean = 128.0;
    double sd = 8.0;
};

/// Distribution of mitochondria-channel intensities (0..255, dark = strong
/// stain) inside the cytoplasm of one class.
struct IntensityModel {
    std::vector<MixtureComponent> components;

    double sample(Rng& rng) const {
        double u = rng.uniform(), acc = 0.0;
        for (const auto& c : components) {
            acc += c.weight;
            if (u < acc) return rng.normal(c.mean, c.sd);
        }
        const auto& last = components.back();
        return rng.normal(last.mean, last.sd);
    }

    double pdf(double x) const {
        double p = 0.0;
        for (const auto& c : components) {
            const double z = (x - c.mean) / c.sd;
            p += c.weight * std::exp(-0.5 * z * z) / (c.sd * std::sqrt(2.0 * std::numbers::pi));
        }
        return p;
    }
};

/// Class models chosen for separability, not histological fidelity:
/// CC bimodal (clear and stained cells), CCP one bright mode, ONC mostly dark.
inline std::array<IntensityModel, subtype_count> default_intensity_models() {
    return {IntensityModel{{{0.5, 105.0, 8.0}, {0.5, 215.0, 8.0}}}, IntensityModel{{{1.0, 160.0, 8.0}}},
            IntensityModel{{{0.85, 30.0, 8.0}, {0.15, 60.0, 8.0}}}};
}

struct SynthSpec {
    std::size_t patients_per_class = 8;
    std::size_t spots_per_patient = 3;
    std::size_t spot_size = 750;
    std::size_t min_nuclei = 100;
    std::size_t max_nuclei = 140;
    double tissue_radius_fraction = 0.42;
    double nucleus_radius = 8.0;
    double cytoplasm_radius = 24.0;
    double min_center_spacing = 28.0;
    double background = 245.0;      ///< illumination level of empty glass
    double noise_sd = 1.5;          ///< per-sample RGB noise
    double nucleus_hematoxylin = 0.9;
    double tissue_hematoxylin = 0.15;
    double stroma_dab = 0.05;
    /// Per-pixel spread of the stroma stains; gives the tissue the texture
    /// the patch entropy constraint expects.
    double stroma_hematoxylin_sd = 0.08;
    double stroma_dab_sd = 0.04;
    std::size_t attempts_per_nucleus = 200;
    std::array<IntensityModel, subtype_count> models = default_intensity_models();
    std::uint64_t seed = 1;

    void validate() const {
        if (patients_per_class == 0 || spots_per_patient == 0) throw Error(ErrorCode::invalid_argument, "empty cohort");
        if (spot_size < 64) throw Error(ErrorCode::invalid_argument, "spot_size must be at least 64");
        if (min_nuclei == 0 || min_nuclei > max_nuclei) throw Error(ErrorCode::invalid_argument, "bad nuclei range");
        if (!(nucleus_radius > 0) || !(cytoplasm_radius > nucleus_radius))
            throw Error(ErrorCode::invalid_argument, "cytoplasm radius must exceed nucleus radius");
        if (!(tissue_radius_fraction > 0) || tissue_radius_fraction > 0.5)
            throw Error(ErrorCode::invalid_argument, "tissue_radius_fraction must lie in (0, 0.5]");
        if (stroma_hematoxylin_sd < 0 || stroma_dab_sd < 0) throw Error(ErrorCode::invalid_argument, "negative stroma spread");
        if (!(background > 0) || background > 255) throw Error(ErrorCode::invalid_argument, "background must lie in (0, 255]");
        for (const auto& m : models) {
            double w = 0;
            for (const auto& c : m.components) {
                if (!(c.sd > 0) || c.weight < 0) throw Error(ErrorCode::invalid_argument, "bad mixture component");
                w += c.weight;
            }
            if (m.components.empty() || std::abs(w - 1.0) > 1e-9) throw Error(ErrorCode::invalid_argument, "mixture weights must sum to 1");
        }
    }
};

struct SynthSpot {
    RasterImage image;
    NucleusSet nuclei;   ///< ground-truth centers, radius = nucleus_radius
    BitMask cytoplasm;   ///< pixels whose DAB amount came from the class model
};

/// Renders one spot. Nuclei are placed by dart throwing inside the tissue
/// disk with a minimum center spacing; each cell gets a cytoplasm disk whose
/// per-pixel stain intensity is drawn from the class model.
inline SynthSpot generate_spot(Subtype cls, const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    const std::size_t n = spec.spot_size;
    const double c = (static_cast<double>(n) - 1.0) / 2.0;
    const double tissue_r = spec.tissue_radius_fraction * static_cast<double>(n);
    const double place_r = tissue_r - spec.cytoplasm_radius;
    if (!(place_r > 0)) throw Error(ErrorCode::overcrowded_spec, "cells do not fit inside the tissue disk");

    const std::size_t want = spec.min_nuclei + static_cast<std::size_t>(rng.below(spec.max_nuclei - spec.min_nuclei + 1));
    SynthSpot spot{RasterImage(n, n), {}, BitMask(n, n)};
    const double sep2 = spec.min_center_spacing * spec.min_center_spacing;
    std::size_t attempts = 0;
    const std::size_t budget = spec.attempts_per_nucleus * want;
    while (spot.nuclei.size() < want) {
        if (attempts++ >= budget)
            throw Error(ErrorCode::overcrowded_spec, "placed " + std::to_string(spot.nuclei.size()) + " of " + std::to_string(want) + " nuclei");
        const double dx = rng.uniform(-place_r, place_r), dy = rng.uniform(-place_r, place_r);
        if (dx * dx + dy * dy > place_r * place_r) continue;
        const auto x = static_cast<std::size_t>(std::lround(c + dx)), y = static_cast<std::size_t>(std::lround(c + dy));
        bool ok = true;
        for (const auto& m : spot.nuclei) {
            const double ex = static_cast<double>(x) - static_cast<double>(m.x), ey = static_cast<double>(y) - static_cast<double>(m.y);
            if (ex * ex + ey * ey < sep2) {
                ok = false;
                break;
            }
        }
        if (ok) spot.nuclei.push_back({x, y, spec.nucleus_radius});
    }

    // Stain amounts per pixel: [hematoxylin, dab].
    std::vector<std::array<double, 2>> amount(n * n, {0.0, 0.0});
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const double ex = static_cast<double>(x) - c, ey = static_cast<double>(y) - c;
            if (ex * ex + ey * ey <= tissue_r * tissue_r)
                amount[y * n + x] = {std::max(0.0, rng.normal(spec.tissue_hematoxylin, spec.stroma_hematoxylin_sd)),
                                     std::max(0.0, rng.normal(spec.stroma_dab, spec.stroma_dab_sd))};
        }
    for (const auto& m : spot.nuclei)
        detail::for_each_in_disk(n, n, m, spec.cytoplasm_radius, [&](std::size_t x, std::size_t y, double d2) {
            if (d2 <= spec.cytoplasm_radius * spec.cytoplasm_radius) spot.cytoplasm.set(x, y);
        });
    const auto& model = spec.models[static_cast<std::size_t>(cls)];
    for (std::size_t i = 0; i < n * n; ++i) {
        if (!spot.cytoplasm[i]) continue;
        const double v = std::clamp(model.sample(rng), 2.0, 254.0);
        amount[i] = {spec.tissue_hematoxylin, -std::log10(v / 255.0)};
    }
    const double r2 = spec.nucleus_radius * spec.nucleus_radius;
    for (const auto& m : spot.nuclei)
        detail::for_each_in_disk(n, n, m, spec.nucleus_radius, [&](std::size_t x, std::size_t y, double d2) {
            if (d2 > r2) return;
            amount[y * n + x] = {spec.nucleus_hematoxylin, 0.0};
            spot.cytoplasm.set(x, y, false);
        });

    const StainBasis basis = StainBasis::hematoxylin_dab();
    const double gain = spec.background / 255.0;
    for (std::size_t i = 0; i < n * n; ++i) {
        const Vec3 rgb = synthesize_intensity(basis, {amount[i][0], amount[i][1], 0.0});
        std::array<std::uint8_t, 3> px{};
        for (std::size_t k = 0; k < 3; ++k) px[k] = clamp_round_u8(rgb[k] * gain + rng.normal(0.0, spec.noise_sd));
        spot.image.set(i % n, i / n, px[0], px[1], px[2]);
    }
    return spot;
}

struct SpotPlan {
    std::string patient_id;
    std::string spot_id;
    Subtype label = Subtype::CC;
    std::uint64_t seed = 0;
};

/// Patients P01.. in class order CC, CCP, ONC; spots <patient>_s1.. ; one
/// derived seed per spot.
inline std::vector<SpotPlan> cohort_plan(const SynthSpec& spec) {
    spec.validate();
    std::vector<SpotPlan> plan;
    std::size_t patient = 0;
    for (std::size_t cls = 0; cls < subtype_count; ++cls)
        for (std::size_t p = 0; p < spec.patients_per_class; ++p) {
            ++patient;
            char pid[16];
            std::snprintf(pid, sizeof pid, "P%02zu", patient);
            for (std::size_t s = 1; s <= spec.spots_per_patient; ++s)
                plan.push_back({pid, std::string(pid) + "_s" + std::to_string(s), static_cast<Subtype>(cls),
                                derive_seed(spec.seed, plan.size())});
        }
    return plan;
}

struct SynthCohort {
    std::vector<SpotPlan> plan;
    std::vector<SynthSpot> spots;
};

inline SynthCohort generate_cohort(const SynthSpec& spec, std::size_t threads = 1) {
    SynthCohort cohort{cohort_plan(spec), {}};
    cohort.spots.resize(cohort.plan.size());
    parallel_for(cohort.plan.size(), threads,
                 [&](std::size_t i) { cohort.spots[i] = generate_spot(cohort.plan[i].label, spec, cohort.plan[i].seed); });
    return cohort;
}

/// Accuracy of the Bayes rule on single pixel intensities with equal class
/// priors, integrated numerically over the real line.
inline double bayes_accuracy(const std::array<IntensityModel, subtype_count>& models) {
    const double lo = -200.0, hi = 455.0, step = 0.01;
    double acc = 0.0;
    for (double x = lo; x < hi; x += step) {
        double best = 0.0;
        for (const auto& m : models) best = std::max(best, m.pdf(x + step / 2));
        acc += best * step;
    }
    return acc / static_cast<double>(subtype_count);
}

} // namespace mitotype
