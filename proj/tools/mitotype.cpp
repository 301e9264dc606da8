// Command-line front end for the mitotype library.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mitotype/analysis.hpp"
#include "mitotype/config.hpp"
#include "mitotype/evaluation.hpp"
#include "mitotype/feature_table.hpp"
#include "mitotype/forest.hpp"
#include "mitotype/image_io.hpp"
#include "mitotype/manifest.hpp"
#include "mitotype/patching.hpp"
#include "mitotype/pipeline.hpp"
#include "mitotype/synth.hpp"

namespace fs = std::filesystem;
using namespace mitotype;

namespace {

struct Settings {
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    HistPipelineConfig hist;
    SamplerConfig sampler;
    TrainConfig train;
    AggregationMode mode = AggregationMode::whole_image;
    double kl_epsilon = default_kl_epsilon;
    SynthSpec synth;
    std::vector<std::size_t> grid{1, 5, 10, 25, 50, 100};
};

LogBase parse_log_base(const std::string& s) {
    if (s == "natural" || s == "e") return LogBase::natural;
    if (s == "two" || s == "2") return LogBase::two;
    throw Error(ErrorCode::parse_error, "entropy.log_base must be natural or two, got '" + s + "'");
}

AggregationMode parse_mode(const std::string& s) {
    if (s == "whole_image") return AggregationMode::whole_image;
    if (s == "patch") return AggregationMode::patch;
    throw Error(ErrorCode::parse_error, "cv.aggregation must be whole_image or patch, got '" + s + "'");
}

// Every default the library exposes, under one flat key.
Settings read_settings(const Config& c) {
    Settings s;
    s.seed = c.get_uint("seed", 1);
    s.threads = c.get_uint("threads", 1);
    const LogBase base = parse_log_base(c.get_string("entropy.log_base", "natural"));

    auto& wb = s.hist.white_balance;
    wb.window = c.get_uint("wb.window", wb.window);
    wb.stride = c.get_uint("wb.stride", wb.stride);
    wb.log_base = base;

    auto& nu = s.hist.nuclei;
    nu.smooth_sigma = c.get_double("nuclei.sigma", nu.smooth_sigma);
    nu.min_area = c.get_uint("nuclei.min_area", nu.min_area);
    nu.min_separation = c.get_double("nuclei.min_separation", nu.min_separation);
    nu.max_threshold = c.get_int("nuclei.max_threshold", nu.max_threshold);

    auto& ring = s.hist.rings;
    ring.thickness = c.get_double("ring.thickness", ring.thickness);
    ring.bg_threshold = c.get_int("ring.bg_threshold", ring.bg_threshold);
    ring.use_radius_estimate = c.get_bool("ring.use_radius_estimate", ring.use_radius_estimate);
    ring.fallback_radius = c.get_double("ring.fallback_radius", ring.fallback_radius);

    s.hist.nucleus_stain = c.get_uint("stain.nucleus", s.hist.nucleus_stain);
    s.hist.mitochondria_stain = c.get_uint("stain.mitochondria", s.hist.mitochondria_stain);
    s.hist.foreground_threshold = c.get_int("baseline.fg_threshold", s.hist.foreground_threshold);
    s.hist.foreground_sigma = c.get_double("baseline.blur_sigma", s.hist.foreground_sigma);

    auto& sp = s.sampler;
    sp.side = c.get_uint("patch.side", sp.side);
    sp.candidates = c.get_uint("patch.candidates", sp.candidates);
    sp.fg_threshold = c.get_int("patch.fg_threshold", sp.fg_threshold);
    sp.blur_sigma = c.get_double("patch.blur_sigma", sp.blur_sigma);
    sp.min_fg_fraction = c.get_double("patch.min_fg_fraction", sp.min_fg_fraction);
    sp.max_overlap_fraction = c.get_double("patch.max_overlap_fraction", sp.max_overlap_fraction);
    sp.min_entropy = c.get_double("patch.min_entropy", sp.min_entropy);
    sp.log_base = base;

    s.train.n_trees = c.get_uint("forest.trees", s.train.n_trees);
    s.train.mtry = c.get_uint("forest.mtry", s.train.mtry);
    s.train.min_node_size = c.get_uint("forest.min_node_size", s.train.min_node_size);
    s.train.seed = s.seed;
    s.train.threads = s.threads;
    s.mode = parse_mode(c.get_string("cv.aggregation", "whole_image"));
    s.kl_epsilon = c.get_double("kl.epsilon", s.kl_epsilon);
    const auto grid = c.get_uint_list("sweep.grid", {1, 5, 10, 25, 50, 100});
    s.grid.assign(grid.begin(), grid.end());

    auto& sy = s.synth;
    sy.patients_per_class = c.get_uint("synth.patients_per_class", sy.patients_per_class);
    sy.spots_per_patient = c.get_uint("synth.spots_per_patient", sy.spots_per_patient);
    sy.spot_size = c.get_uint("synth.spot_size", sy.spot_size);
    sy.min_nuclei = c.get_uint("synth.min_nuclei", sy.min_nuclei);
    sy.max_nuclei = c.get_uint("synth.max_nuclei", sy.max_nuclei);
    sy.tissue_radius_fraction = c.get_double("synth.tissue_radius_fraction", sy.tissue_radius_fraction);
    sy.background = c.get_double("synth.background", sy.background);
    sy.noise_sd = c.get_double("synth.noise_sd", sy.noise_sd);
    sy.stroma_hematoxylin_sd = c.get_double("synth.stroma_hematoxylin_sd", sy.stroma_hematoxylin_sd);
    sy.stroma_dab_sd = c.get_double("synth.stroma_dab_sd", sy.stroma_dab_sd);
    sy.seed = s.seed;

    if (const auto unused = c.unused_keys(); !unused.empty()) throw Error(ErrorCode::parse_error, "unknown config key '" + unused.front() + "'");
    return s;
}

/// Options shared by every command. Flags are written into the config so
/// they override values from --config.
struct Common {
    std::string config_path;
    std::string out_dir = ".";
    std::map<std::string, std::string> overrides;

    Settings settings() const {
        Config c = config_path.empty() ? Config{} : Config::load(config_path);
        for (const auto& [k, v] : overrides) c.set(k, v);
        return read_settings(c);
    }

    fs::path out() const {
        fs::create_directories(out_dir);
        return out_dir;
    }
};

void add_common(CLI::App* app, Common& common) {
    app->add_option("--config", common.config_path, "key=value settings file")->check(CLI::ExistingFile);
    app->add_option("--out-dir", common.out_dir, "output directory");
    app->add_option_function<std::string>("--seed", [&](const std::string& v) { common.overrides["seed"] = v; }, "master seed");
    app->add_option_function<std::string>("--threads", [&](const std::string& v) { common.overrides["threads"] = v; },
                                          "worker threads (results do not depend on it)");
}

void add_override(CLI::App* app, Common& common, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(flag, [&common, key](const std::string& v) { common.overrides[key] = v; }, help);
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(ErrorCode::io_error, "cannot write " + p.string());
    return f;
}

fs::path resolve(const fs::path& manifest, const std::string& rel) {
    const fs::path p(rel);
    return p.is_absolute() ? p : manifest.parent_path() / p;
}

Source require_source(const std::string& s) {
    const auto src = parse_source(s);
    if (!src) throw Error(ErrorCode::parse_error, "unknown source '" + s + "'");
    return *src;
}

void write_nuclei_csv(const fs::path& p, const NucleusSet& nuclei) {
    auto f = open_out(p);
    f << "x,y,radius\n";
    for (const auto& n : nuclei) f << n.x << ',' << n.y << ',' << format_value(n.radius) << '\n';
}

// --- synth ------------------------------------------------------------------

void cmd_synth(const Common& common) {
    const Settings s = common.settings();
    const fs::path out = common.out();
    fs::create_directories(out / "spots");
    fs::create_directories(out / "truth");
    const auto plan = cohort_plan(s.synth);
    parallel_for(plan.size(), s.threads, [&](std::size_t i) {
        const SynthSpot spot = generate_spot(plan[i].label, s.synth, plan[i].seed);
        io::write(out / "spots" / (plan[i].spot_id + ".png"), spot.image);
        write_nuclei_csv(out / "truth" / (plan[i].spot_id + "_nuclei.csv"), spot.nuclei);
    });
    std::vector<ManifestEntry> manifest;
    for (const auto& p : plan)
        manifest.push_back({p.patient_id, p.spot_id, p.spot_id, "orig", p.label, "spots/" + p.spot_id + ".png", 0, 0,
                            s.synth.spot_size, s.synth.spot_size});
    save_manifest(out / "manifest.csv", manifest);
    std::cout << "synth: " << plan.size() << " spots written to " << (out / "manifest.csv").string() << '\n';
}

// --- balance ----------------------------------------------------------------

void cmd_balance(const Common& common, const std::string& input, bool augment) {
    const Settings s = common.settings();
    const fs::path out = common.out();
    const fs::path in(input);
    if (in.extension() != ".csv") {
        const RasterImage img = io::read_rgb(in);
        const RasterImage bal = white_balance(img, s.hist.white_balance);
        const std::string stem = in.stem().string();
        io::write(out / (stem + "_balanced.png"), bal);
        if (augment)
            for (const auto& v : augment_variants(bal)) io::write(out / (stem + "_" + v.tag + ".png"), v.image);
        return;
    }

    const auto entries = load_manifest(in);
    fs::create_directories(out / "balanced");
    std::vector<std::vector<ManifestEntry>> produced(entries.size());
    std::vector<BackgroundEstimate> backgrounds(entries.size());
    parallel_for(entries.size(), s.threads, [&](std::size_t i) {
        const auto& e = entries[i];
        const RasterImage img = io::read_rgb(resolve(in, e.path));
        backgrounds[i] = estimate_background(img, s.hist.white_balance);
        const RasterImage bal = apply_white_balance(img, backgrounds[i].color);
        if (!augment) {
            const std::string rel = "balanced/" + e.unit_id + ".png";
            io::write(out / rel, bal);
            ManifestEntry m = e;
            m.path = rel;
            produced[i].push_back(m);
            return;
        }
        for (const auto& v : augment_variants(bal)) {
            const std::string unit = e.unit_id + "_" + v.tag;
            const std::string rel = "balanced/" + unit + ".png";
            io::write(out / rel, v.image);
            ManifestEntry m = e;
            m.unit_id = unit;
            m.variant = v.tag;
            m.path = rel;
            produced[i].push_back(m);
        }
    });
    std::vector<ManifestEntry> manifest;
    for (auto& p : produced) manifest.insert(manifest.end(), p.begin(), p.end());
    save_manifest(out / "manifest.csv", manifest);
    auto bg = open_out(out / "background.csv");
    bg << "unit_id,x,y,entropy,r,g,b\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& b = backgrounds[i];
        bg << entries[i].unit_id << ',' << b.x << ',' << b.y << ',' << format_value(b.entropy) << ',' << format_value(b.color[0])
           << ',' << format_value(b.color[1]) << ',' << format_value(b.color[2]) << '\n';
    }
    std::cout << "balance: " << manifest.size() << " images\n";
}

// --- deconv / nuclei --------------------------------------------------------

void cmd_deconv(const Common& common, const std::string& input) {
    const Settings s = common.settings();
    const fs::path out = common.out();
    const auto channels = color_deconvolve(io::read_rgb(input), s.hist.basis);
    const std::string stem = fs::path(input).stem().string();
    const char* names[] = {"stain0", "stain1", "stain2"};
    for (std::size_t k = 0; k < 3; ++k) {
        std::string name = names[k];
        if (k == s.hist.nucleus_stain) name = "nucleus";
        if (k == s.hist.mitochondria_stain) name = "mitochondria";
        io::write(out / (stem + "_" + name + ".png"), channels[k]);
    }
}

void cmd_nuclei(const Common& common, const std::string& input, bool overlay) {
    const Settings s = common.settings();
    const fs::path out = common.out();
    const std::string stem = fs::path(input).stem().string();
    const SpotAnalysis a = analyze_spot(io::read_rgb(input), s.hist, stem);
    write_nuclei_csv(out / (stem + "_nuclei.csv"), a.nuclei);
    if (overlay) io::write(out / (stem + "_overlay.png"), roi_overlay(a.balanced, a.nuclei, a.roi, s.hist.rings));
    std::cout << "nuclei: " << a.nuclei.size() << " detected, ROI " << a.roi.pixel_count << " px\n";
}

// --- patches ----------------------------------------------------------------

/// Samples patches from every manifest image with one derived seed per image.
void cmd_patches(const Common& common, const std::string& manifest_path) {
    const Settings s = common.settings();
    const fs::path out = common.out();
    const auto entries = load_manifest(manifest_path);
    fs::create_directories(out / "patches");
    std::vector<std::vector<ManifestEntry>> produced(entries.size());
    parallel_for(entries.size(), s.threads, [&](std::size_t i) {
        const auto& e = entries[i];
        const RasterImage img = io::read_rgb(resolve(manifest_path, e.path));
        SamplerConfig cfg = s.sampler;
        cfg.seed = derive_seed(s.seed, i);
        for (const Patch& p : sample_patches(img, cfg, e.spot_id)) {
            const std::string unit = e.unit_id + "_" + std::to_string(p.patch_id);
            const std::string rel = "patches/" + unit + ".png";
            io::write(out / rel, crop(img, p));
            produced[i].push_back({e.patient_id, e.spot_id, unit, "patch", e.label, rel, p.x, p.y, p.side, p.side});
        }
    });
    std::vector<ManifestEntry> manifest;
    for (auto& p : produced) manifest.insert(manifest.end(), p.begin(), p.end());
    save_manifest(out / "manifest.csv", manifest);
    std::cout << "patches: " << manifest.size() << " patches from " << entries.size() << " images\n";
}

// --- features ---------------------------------------------------------------

void cmd_features_hist(const Common& common, const std::string& manifest_path) {
    const Settings s = common.settings();
    const fs::path out = common.out();
    const auto entries = load_manifest(manifest_path);
    std::vector<std::vector<FeatureRow>> rows(entries.size());
    parallel_for(entries.size(), s.threads, [&](std::size_t i) {
        const auto& e = entries[i];
        auto r = spot_feature_rows(io::read_rgb(resolve(manifest_path, e.path)), {e.patient_id, e.spot_id, e.label}, s.hist);
        for (auto& row : r) {
            row.unit_id = e.unit_id;
            row.variant = e.variant;
        }
        rows[i] = std::move(r);
    });
    std::vector<FeatureRow> all;
    for (auto& r : rows) all.insert(all.end(), r.begin(), r.end());
    save_feature_table(out / "features_hist.csv", FeatureTable(std::move(all)));
    std::cout << "features hist: " << entries.size() << " images\n";
}

void cmd_features_import(const Common& common, const std::vector<std::string>& tables) {
    common.settings();
    const fs::path out = common.out();
    std::vector<FeatureRow> all;
    for (const auto& t : tables) {
        const FeatureTable table = load_feature_table(t);
        all.insert(all.end(), table.rows().begin(), table.rows().end());
    }
    const FeatureTable merged(std::move(all));
    save_feature_table(out / "features.csv", merged);
    std::cout << "features import: " << merged.size() << " rows";
    for (const auto& [src, dim] : merged.dimensions()) std::cout << ", " << to_string(src) << " dim " << dim;
    std::cout << '\n';
}

void cmd_features_combine(const Common& common, const std::string& table_path, const std::vector<std::string>& sources) {
    common.settings();
    const fs::path out = common.out();
    std::vector<Source> src;
    for (const auto& s : sources) src.push_back(require_source(s));
    const FeatureTable combined = concatenate_sources(load_feature_table(table_path), src);
    save_feature_table(out / "features_combined.csv", combined);
    std::cout << "features combine: " << combined.size() << " rows of dimension " << combined.dimension(Source::combined) << '\n';
}

// --- classification ---------------------------------------------------------

void cmd_train(const Common& common, const std::string& table_path, const std::string& source) {
    const Settings s = common.settings();
    const fs::path out = common.out();
    const FeatureTable t = load_feature_table(table_path).select(require_source(source));
    if (t.empty()) throw Error(ErrorCode::empty_table, "no rows for source " + source);
    const Dataset data = make_dataset(t);
    const RandomForestModel model = train_forest(data, s.train);
    {
        auto f = open_out(out / "model.txt");
        save_forest(f, model);
    }
    auto f = open_out(out / "oob.txt");
    const std::size_t oob_rows = oob_row_count(model);
    f << "rows: " << data.rows() << "\ntrees: " << model.tree_count() << "\noob rows: " << oob_rows << '\n';
    if (oob_rows) f << "oob error: " << format_value(oob_error(model, data)) << '\n';
    std::cout << "train: " << model.tree_count() << " trees on " << data.rows() << " rows\n";
}

void cmd_crossval(const Common& common, const std::string& table_path, const std::string& source) {
    const Settings s = common.settings();
    const fs::path out = common.out();
    const FeatureTable t = load_feature_table(table_path);
    const CvReport rep = run_lopo(t, require_source(source), {s.mode, s.train, s.threads});
    write_report(out, rep, t);
    std::cout << "crossval: balanced error " << format_value(rep.balanced_error) << " over " << rep.patients.size() << " patients\n";
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
}

void cmd_sweep(const Common& common, const std::string& table_path, const std::string& source, int fold) {
    const Settings s = common.settings();
    const fs::path out = common.out();
    const FeatureTable t = load_feature_table(table_path);
    std::optional<std::size_t> single;
    if (fold >= 0) single = static_cast<std::size_t>(fold);
    const auto rows = tree_count_sweep(t, require_source(source), s.grid, {s.mode, s.train, s.threads}, single);
    auto f = open_out(out / "sweep.csv");
    write_sweep_csv(f, rows);
    // Wall time is informational and stays out of the CSV.
    for (const auto& r : rows)
        std::cout << "sweep: " << r.n_trees << " trees, accuracy " << format_value(r.accuracy) << ", " << format_value(r.seconds) << " s\n";
}

// --- analysis ---------------------------------------------------------------

struct MdsInputs {
    DissimilarityMatrix matrix;
    std::vector<std::size_t> labels; ///< class per item; class means get the class too
};

/// HIST rows use their 256-bin level and kl_sym, with one class-mean item per
/// class appended; other sources use Euclidean distances.
MdsInputs mds_inputs(const FeatureTable& table, Source source, const Settings& s) {
    const FeatureTable t = table.select(source);
    if (t.empty()) throw Error(ErrorCode::empty_table, "no rows for source " + std::string(to_string(source)));
    MdsInputs in;
    std::vector<std::string> ids;
    for (const auto& r : t.rows()) {
        ids.push_back(r.unit_id);
        in.labels.push_back(static_cast<std::size_t>(r.label));
    }
    if (source == Source::HIST) {
        std::vector<NormalizedHistogram> hists;
        std::vector<std::vector<NormalizedHistogram>> by_class(subtype_count);
        for (const auto& r : t.rows()) {
            std::vector<double> fine(r.values.begin(), r.values.begin() + 256);
            hists.push_back(NormalizedHistogram::from_counts(std::span<const double>(fine)));
            by_class[static_cast<std::size_t>(r.label)].push_back(hists.back());
        }
        for (std::size_t c = 0; c < subtype_count; ++c) {
            if (by_class[c].empty()) continue;
            hists.push_back(class_mean_histogram({by_class[c]}).front());
            ids.push_back("mean_" + std::string(to_string(static_cast<Subtype>(c))));
            in.labels.push_back(c);
        }
        in.matrix = kl_matrix(hists, ids, s.kl_epsilon, s.threads);
    } else {
        std::vector<std::vector<double>> pts;
        for (const auto& r : t.rows()) pts.push_back(r.values);
        in.matrix = euclidean_matrix(pts, ids);
    }
    return in;
}

void cmd_mds(const Common& common, const std::string& table_path, const std::string& source) {
    const Settings s = common.settings();
    const fs::path out = common.out();
    const MdsInputs in = mds_inputs(load_feature_table(table_path), require_source(source), s);
    {
        auto f = open_out(out / "dissimilarity.csv");
        write_matrix_csv(f, in.matrix);
    }
    {
        auto f = open_out(out / "mds.csv");
        write_embedding_csv(f, classical_mds(in.matrix));
    }
    const ClassSeparation sep = class_separation(in.matrix, in.labels);
    auto f = open_out(out / "separation.txt");
    f << "mean intra-class dissimilarity: " << format_value(sep.intra) << "\nmean inter-class dissimilarity: " << format_value(sep.inter)
      << '\n';
    std::cout << "mds: " << in.matrix.size() << " items, intra " << format_value(sep.intra) << ", inter " << format_value(sep.inter) << '\n';
}

/// Summarizes a crossval directory from its patients.csv.
void cmd_report(const Common& common, const std::string& cv_dir, bool mds, const std::string& table_path, const std::string& source) {
    const Settings s = common.settings();
    const fs::path out = common.out();
    if (cv_dir.empty() && !mds) throw Error(ErrorCode::invalid_argument, "report needs --cv-dir and/or --mds");
    if (!cv_dir.empty()) {
        std::ifstream in(fs::path(cv_dir) / "patients.csv");
        if (!in) throw Error(ErrorCode::io_error, "cannot read " + (fs::path(cv_dir) / "patients.csv").string());
        std::string line;
        std::getline(in, line);
        ConfusionMatrix cm{};
        std::vector<std::array<double, subtype_count>> scores;
        std::vector<std::size_t> truth;
        std::vector<double> confidence;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto f = mitotype::detail::split_commas(line);
            auto t = f.size() >= 7 ? parse_subtype(f[1]) : std::nullopt;
            auto p = f.size() >= 7 ? parse_subtype(f[2]) : std::nullopt;
            std::array<double, subtype_count> sc{};
            double conf = 0;
            bool ok = t && p && mitotype::detail::parse_double(f[3], conf);
            for (std::size_t k = 0; ok && k < subtype_count; ++k) ok = mitotype::detail::parse_double(f[4 + k], sc[k]);
            if (!ok) throw Error(ErrorCode::parse_error, "patients.csv:" + std::to_string(line_no) + ": malformed row");
            ++cm[static_cast<std::size_t>(*t)][static_cast<std::size_t>(*p)];
            scores.push_back(sc);
            truth.push_back(static_cast<std::size_t>(*t));
            confidence.push_back(conf);
        }
        auto f = open_out(out / "summary.txt");
        f << "patients: " << truth.size() << '\n';
        try {
            f << "balanced error: " << format_value(balanced_error(cm)) << '\n';
        } catch (const Error& e) {
            f << "balanced error: n/a (" << e.what() << ")\n";
        }
        for (std::size_t c = 0; c < subtype_count; ++c) {
            std::vector<double> sc;
            std::vector<bool> pos;
            for (std::size_t i = 0; i < truth.size(); ++i) {
                sc.push_back(scores[i][c]);
                pos.push_back(truth[i] == c);
            }
            f << "AUC " << to_string(static_cast<Subtype>(c)) << ": ";
            try {
                f << format_value(roc_auc(sc, pos).auc) << '\n';
            } catch (const Error&) {
                f << "n/a\n";
            }
        }
        double mean_conf = 0;
        for (double c : confidence) mean_conf += c;
        f << "mean confidence: " << format_value(truth.empty() ? 0.0 : mean_conf / static_cast<double>(truth.size())) << '\n';
        f << "confusion (rows = truth CC/CCP/ONC, columns = predicted):\n";
        for (const auto& row : cm) f << row[0] << ' ' << row[1] << ' ' << row[2] << '\n';
    }
    if (mds) {
        if (table_path.empty()) throw Error(ErrorCode::invalid_argument, "--mds needs --table");
        const MdsInputs in = mds_inputs(load_feature_table(table_path), require_source(source), s);
        auto f = open_out(out / "mds_coordinates.csv");
        write_embedding_csv(f, classical_mds(in.matrix));
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mitotype: mitochondria-stain subtype classification tools"};
    app.require_subcommand(1);

    Common common;
    std::string input, manifest, table, source = "HIST", cv_dir;
    std::vector<std::string> tables, sources;
    bool augment = false, overlay = false, mds_flag = false;
    int fold = -1;
    std::function<void()> run;

    auto* synth = app.add_subcommand("synth", "generate a synthetic cohort (spots/, truth/, manifest.csv)");
    add_common(synth, common);
    add_override(synth, common, "--patients-per-class", "synth.patients_per_class", "patients per class");
    add_override(synth, common, "--spots", "synth.spots_per_patient", "spots per patient");
    add_override(synth, common, "--size", "synth.spot_size", "spot edge length in pixels");
    synth->callback([&] { run = [&] { cmd_synth(common); }; });

    auto* balance = app.add_subcommand("balance", "white-balance an image or every image of a manifest");
    add_common(balance, common);
    balance->add_option("--input", input, "image file or manifest.csv")->required();
    balance->add_flag("--augment", augment, "also write the 8 rotation/flip variants");
    balance->callback([&] { run = [&] { cmd_balance(common, input, augment); }; });

    auto* deconv = app.add_subcommand("deconv", "split an image into stain channels");
    add_common(deconv, common);
    deconv->add_option("--input", input, "image file")->required();
    deconv->callback([&] { run = [&] { cmd_deconv(common, input); }; });

    auto* nuclei = app.add_subcommand("nuclei", "detect nuclei on one spot");
    add_common(nuclei, common);
    nuclei->add_option("--input", input, "image file")->required();
    nuclei->add_flag("--overlay", overlay, "write the ROI overlay image");
    nuclei->callback([&] { run = [&] { cmd_nuclei(common, input, overlay); }; });

    auto* patches = app.add_subcommand("patches", "sample patches from every manifest image");
    add_common(patches, common);
    patches->add_option("--manifest", manifest, "manifest.csv")->required()->check(CLI::ExistingFile);
    add_override(patches, common, "--candidates", "patch.candidates", "candidate patches per image");
    add_override(patches, common, "--min-entropy", "patch.min_entropy", "entropy threshold");
    patches->callback([&] { run = [&] { cmd_patches(common, manifest); }; });

    auto* features = app.add_subcommand("features", "feature tables");
    features->require_subcommand(1);
    auto* fhist = features->add_subcommand("hist", "HIST and baseline features for every manifest image");
    add_common(fhist, common);
    fhist->add_option("--manifest", manifest, "manifest.csv")->required()->check(CLI::ExistingFile);
    fhist->callback([&] { run = [&] { cmd_features_hist(common, manifest); }; });
    auto* fimport = features->add_subcommand("import", "validate and merge external feature tables");
    add_common(fimport, common);
    fimport->add_option("--table", tables, "feature table CSV (repeatable)")->required()->check(CLI::ExistingFile);
    fimport->callback([&] { run = [&] { cmd_features_import(common, tables); }; });
    auto* fcombine = features->add_subcommand("combine", "concatenate sources per unit");
    add_common(fcombine, common);
    fcombine->add_option("--table", table, "feature table CSV")->required()->check(CLI::ExistingFile);
    fcombine->add_option("--sources", sources, "sources in order, e.g. HIST,fc8")->required()->delimiter(',');
    fcombine->callback([&] { run = [&] { cmd_features_combine(common, table, sources); }; });

    auto add_table = [&](CLI::App* a) {
        a->add_option("--table", table, "feature table CSV")->required()->check(CLI::ExistingFile);
        a->add_option("--source", source, "feature source (HIST, fc6, fc7, fc8, baseline, combined)");
        add_override(a, common, "--trees", "forest.trees", "trees per forest");
        add_override(a, common, "--mtry", "forest.mtry", "features tried per split (0 = sqrt(d))");
        add_override(a, common, "--aggregation", "cv.aggregation", "whole_image or patch");
    };

    auto* train = app.add_subcommand("train", "train a forest on all rows of one source");
    add_common(train, common);
    add_table(train);
    train->callback([&] { run = [&] { cmd_train(common, table, source); }; });

    auto* crossval = app.add_subcommand("crossval", "leave-one-patient-out cross-validation");
    add_common(crossval, common);
    add_table(crossval);
    crossval->callback([&] { run = [&] { cmd_crossval(common, table, source); }; });

    auto* sweep = app.add_subcommand("sweep-trees", "repeat evaluation over a grid of tree counts");
    add_common(sweep, common);
    add_table(sweep);
    add_override(sweep, common, "--grid", "sweep.grid", "comma-separated tree counts");
    sweep->add_option("--fold", fold, "evaluate only this LOPO fold");
    sweep->callback([&] { run = [&] { cmd_sweep(common, table, source, fold); }; });

    auto* mds = app.add_subcommand("mds", "dissimilarity matrix and 2-D embedding");
    add_common(mds, common);
    mds->add_option("--table", table, "feature table CSV")->required()->check(CLI::ExistingFile);
    mds->add_option("--source", source, "feature source");
    mds->callback([&] { run = [&] { cmd_mds(common, table, source); }; });

    auto* report = app.add_subcommand("report", "summarize a crossval directory and/or write MDS coordinates");
    add_common(report, common);
    report->add_option("--cv-dir", cv_dir, "directory written by crossval");
    report->add_flag("--mds", mds_flag, "write mds_coordinates.csv");
    report->add_option("--table", table, "feature table CSV for --mds")->check(CLI::ExistingFile);
    report->add_option("--source", source, "feature source for --mds");
    report->callback([&] { run = [&] { cmd_report(common, cv_dir, mds_flag, table, source); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        if (run) run();
    } catch (const std::exception& e) {
        std::cerr << "mitotype: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
