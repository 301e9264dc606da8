#pragma once

#include <string>
#include <vector>

#include "mitotype/feature_table.hpp"
#include "mitotype/flat_features.hpp"
#include "mitotype/image.hpp"
#include "mitotype/imaging.hpp"
#include "mitotype/patching.hpp"
#include "mitotype/segmentation.hpp"

namespace mitotype {

/// Settings for the histogram workflow on one spot.
struct HistPipelineConfig {
    WhiteBalanceConfig white_balance;
    NucleusDetectionConfig nuclei;
    RingConfig rings;
    StainBasis basis = StainBasis::hematoxylin_dab();
    std::size_t nucleus_stain = 0;
    std::size_t mitochondria_stain = 1;
    int foreground_threshold = 230; ///< for the mean-intensity baseline
    double foreground_sigma = 2.0;
};

struct SpotAnalysis {
    RasterImage balanced;
    std::array<GrayImage, 3> channels;
    GrayImage gray; ///< grayscale of the balanced image
    NucleusSet nuclei;
    RoiMask roi;
    RoiIntensitySample sample;
};

/// White balance, deconvolution, nucleus detection and ring ROI for one spot.
inline SpotAnalysis analyze_spot(const RasterImage& spot, const HistPipelineConfig& cfg = {}, const std::string& spot_id = {}) {
    if (cfg.nucleus_stain > 2 || cfg.mitochondria_stain > 2 || cfg.nucleus_stain == cfg.mitochondria_stain)
        throw Error(ErrorCode::invalid_argument, "stain indices must be distinct and below 3");
    SpotAnalysis a;
    a.balanced = white_balance(spot, cfg.white_balance);
    a.channels = color_deconvolve(a.balanced, cfg.basis);
    a.gray = to_grayscale(a.balanced);
    a.nuclei = detect_nuclei(a.channels[cfg.nucleus_stain], cfg.nuclei);
    if (a.nuclei.empty()) throw Error(ErrorCode::empty_roi, spot_id.empty() ? "no nuclei detected" : spot_id + ": no nuclei detected");
    a.roi = build_cytoplasm_rings(a.nuclei, a.gray, cfg.rings);
    a.sample = collect_roi_sample(a.channels[cfg.mitochondria_stain], a.roi, spot_id);
    return a;
}

/// Mean gray level of the balanced spot over its tissue mask.
inline double baseline_feature(const RasterImage& balanced, const HistPipelineConfig& cfg = {}) {
    SamplerConfig fg;
    fg.fg_threshold = cfg.foreground_threshold;
    fg.blur_sigma = cfg.foreground_sigma;
    return mean_intensity_baseline(to_grayscale(balanced), foreground_mask(balanced, fg));
}

struct SpotIdentity {
    std::string patient_id;
    std::string spot_id;
    Subtype label = Subtype::CC;
};

/// HIST and baseline rows for one spot (unit_id = spot_id).
inline std::vector<FeatureRow> spot_feature_rows(const RasterImage& spot, const SpotIdentity& id, const HistPipelineConfig& cfg = {}) {
    const SpotAnalysis a = analyze_spot(spot, cfg, id.spot_id);
    FeatureRow hist{id.patient_id, id.spot_id, id.spot_id, "orig", id.label, Source::HIST, assemble_hist_features(a.sample)};
    FeatureRow base{id.patient_id, id.spot_id, id.spot_id, "orig", id.label, Source::baseline, {baseline_feature(a.balanced, cfg)}};
    return {std::move(hist), std::move(base)};
}

} // namespace mitotype
