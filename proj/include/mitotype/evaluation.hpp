#pragma once

#include <algorithm>
#include <chrono>
#include <numeric>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "mitotype/error.hpp"
#include "mitotype/feature_table.hpp"
#include "mitotype/forest.hpp"
#include "mitotype/parallel.hpp"
#include "mitotype/random.hpp"

namespace mitotype {

// ---------------------------------------------------------------------------
// Cohort structure

struct CohortUnit {
    std::string unit_id;
    std::string variant;
    std::size_t row = 0; ///< index into the source table
};

struct CohortSpot {
    std::string spot_id;
    std::vector<CohortUnit> units;
};

struct CohortPatient {
    std::string patient_id;
    Subtype label = Subtype::CC;
    std::vector<CohortSpot> spots;

    std::size_t unit_count() const {
        std::size_t n = 0;
        for (const auto& s : spots) n += s.units.size();
        return n;
    }
};

/// Patients -> spots -> units, in order of first appearance in the table.
struct CohortIndex {
    std::vector<CohortPatient> patients;

    static CohortIndex from_table(const FeatureTable& t) {
        CohortIndex idx;
        std::map<std::string, std::size_t> patient_pos;
        std::map<std::pair<std::size_t, std::string>, std::size_t> spot_pos;
        for (std::size_t i = 0; i < t.rows().size(); ++i) {
            const auto& r = t.rows()[i];
            auto [pit, new_patient] = patient_pos.emplace(r.patient_id, idx.patients.size());
            if (new_patient) idx.patients.push_back({r.patient_id, r.label, {}});
            auto& patient = idx.patients[pit->second];
            if (patient.label != r.label) throw Error(ErrorCode::invalid_argument, "patient " + r.patient_id + " carries two labels");
            auto [sit, new_spot] = spot_pos.emplace(std::make_pair(pit->second, r.spot_id), patient.spots.size());
            if (new_spot) patient.spots.push_back({r.spot_id, {}});
            patient.spots[sit->second].units.push_back({r.unit_id, r.variant, i});
        }
        return idx;
    }

    std::array<std::size_t, subtype_count> class_counts() const {
        std::array<std::size_t, subtype_count> c{};
        for (const auto& p : patients) ++c[static_cast<std::size_t>(p.label)];
        return c;
    }
};

struct Fold {
    std::size_t test_patient = 0;
    std::vector<std::size_t> train_patients;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

/// One fold per patient: train on all rows of the others, test on all rows
/// of the held-out patient.
inline std::vector<Fold> lopo_split(const CohortIndex& idx) {
    for (const auto& p : idx.patients)
        if (p.unit_count() == 0) throw Error(ErrorCode::empty_patient, p.patient_id);
    if (idx.patients.size() < 3) throw Error(ErrorCode::invalid_argument, "LOPO needs at least 3 patients");
    const auto counts = idx.class_counts();
    if (std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) < 2)
        throw Error(ErrorCode::invalid_argument, "LOPO needs at least 2 classes");

    auto rows_of = [&](std::size_t p, std::vector<std::size_t>& out) {
        for (const auto& s : idx.patients[p].spots)
            for (const auto& u : s.units) out.push_back(u.row);
    };
    std::vector<Fold> folds(idx.patients.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        folds[f].test_patient = f;
        rows_of(f, folds[f].test_rows);
        for (std::size_t p = 0; p < idx.patients.size(); ++p) {
            if (p == f) continue;
            folds[f].train_patients.push_back(p);
            rows_of(p, folds[f].train_rows);
        }
        std::sort(folds[f].train_rows.begin(), folds[f].train_rows.end());
    }
    return folds;
}

// ---------------------------------------------------------------------------
// Aggregation

enum class AggregationMode {
    whole_image, ///< every unit is an image (augmented variants vote individually)
    patch,       ///< units are patches; majority per spot, then across spots
};

struct UnitPrediction {
    std::size_t label = 0;
    std::vector<double> proba;
};

struct PatientCall {
    std::size_t label = 0;
    double confidence = 0.0;
    std::vector<std::size_t> image_labels;
};

namespace detail {

// Most frequent label; ties go to the class with the larger mean vote
// fraction, then to the lower class index.
inline std::size_t majority(const std::vector<std::size_t>& labels, const std::vector<double>& mean_fraction) {
    const std::size_t k = mean_fraction.size();
    std::vector<std::size_t> count(k, 0);
    for (auto l : labels) ++count[l];
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
        if (count[c] > count[best] || (count[c] == count[best] && mean_fraction[c] > mean_fraction[best])) best = c;
    }
    return best;
}

inline std::vector<double> mean_proba(const std::vector<const UnitPrediction*>& units, std::size_t k) {
    std::vector<double> m(k, 0.0);
    for (const auto* u : units)
        for (std::size_t c = 0; c < k; ++c) m[c] += u->proba[c];
    if (!units.empty())
        for (double& v : m) v /= static_cast<double>(units.size());
    return m;
}

} // namespace detail

/// Confidence 1 - H(p)/ln K of the empirical distribution of image labels.
inline double label_confidence(const std::vector<std::size_t>& labels, std::size_t num_classes = subtype_count) {
    if (labels.empty()) return 0.0;
    std::vector<double> p(num_classes, 0.0);
    for (auto l : labels) p[l] += 1.0;
    double h = 0.0;
    for (double c : p) {
        if (c == 0.0) continue;
        const double q = c / static_cast<double>(labels.size());
        h -= q * std::log(q);
    }
    const double c = 1.0 - h / std::log(static_cast<double>(num_classes));
    return std::clamp(c, 0.0, 1.0);
}

/// Patient label from unit predictions grouped by spot.
inline PatientCall aggregate_patient(const std::vector<std::vector<UnitPrediction>>& spots, AggregationMode mode,
                                     std::size_t num_classes = subtype_count) {
    std::vector<const UnitPrediction*> all;
    for (const auto& s : spots)
        for (const auto& u : s) all.push_back(&u);
    if (all.empty()) throw Error(ErrorCode::empty_patient, "no unit predictions");
    for (const auto* u : all)
        if (u->proba.size() != num_classes || u->label >= num_classes)
            throw Error(ErrorCode::invalid_argument, "unit prediction does not match class count");

    PatientCall call;
    if (mode == AggregationMode::whole_image) {
        for (const auto* u : all) call.image_labels.push_back(u->label);
    } else {
        for (const auto& s : spots) {
            if (s.empty()) continue;
            std::vector<const UnitPrediction*> units;
            std::vector<std::size_t> labels;
            for (const auto& u : s) {
                units.push_back(&u);
                labels.push_back(u.label);
            }
            call.image_labels.push_back(detail::majority(labels, detail::mean_proba(units, num_classes)));
        }
    }
    call.label = detail::majority(call.image_labels, detail::mean_proba(all, num_classes));
    call.confidence = label_confidence(call.image_labels, num_classes);
    return call;
}

// ---------------------------------------------------------------------------
// Metrics

using ConfusionMatrix = std::array<std::array<std::size_t, subtype_count>, subtype_count>; ///< [true][predicted]

/// Mean over classes of the per-class misclassification rate.
inline double balanced_error(const ConfusionMatrix& cm) {
    double sum = 0.0;
    for (std::size_t t = 0; t < subtype_count; ++t) {
        std::size_t total = 0;
        for (auto v : cm[t]) total += v;
        if (total == 0) throw Error(ErrorCode::empty_class, std::string(to_string(static_cast<Subtype>(t))));
        sum += static_cast<double>(total - cm[t][t]) / static_cast<double>(total);
    }
    return sum / static_cast<double>(subtype_count);
}

struct RocCurve {
    std::vector<std::pair<double, double>> points; ///< (false positive rate, true positive rate)
    double auc = 0.0;
};

/// Area under the ROC by the Mann-Whitney rank statistic, ties counted half.
inline double rank_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double pos = 0, sum = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (positive[i]) {
            ++pos;
            sum += rank[i];
        }
    const double neg = static_cast<double>(n) - pos;
    return (sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

/// One-vs-rest ROC: thresholds sweep the distinct scores from high to low.
inline RocCurve roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive, const std::string& name = {}) {
    if (scores.size() != positive.size()) throw Error(ErrorCode::invalid_argument, "scores and labels differ in length");
    const auto pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
    const std::size_t neg = positive.size() - pos;
    if (pos == 0 || neg == 0) throw Error(ErrorCode::degenerate_class, name.empty() ? "need positives and negatives" : name);

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    RocCurve roc;
    roc.points.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (positive[order[j]] ? tp : fp)++;
            ++j;
        }
        roc.points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos));
        i = j;
    }
    roc.auc = rank_auc(scores, positive);
    return roc;
}

/// Trapezoidal area under a piecewise-linear curve.
inline double trapezoid_area(const std::vector<std::pair<double, double>>& pts) {
    double a = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        a += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
    return a;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct LopoConfig {
    AggregationMode mode = AggregationMode::whole_image;
    TrainConfig train;
    std::size_t threads = 1; ///< folds in flight
};

struct UnitResult {
    std::size_t patient = 0;
    std::size_t spot = 0;
    std::size_t row = 0;
    UnitPrediction prediction;
};

struct PatientResult {
    std::string patient_id;
    Subtype truth = Subtype::CC;
    Subtype predicted = Subtype::CC;
    double confidence = 0.0;
    std::array<double, subtype_count> score{}; ///< mean unit vote fraction per class
    std::vector<std::size_t> image_labels;
};

struct CvReport {
    Source source = Source::HIST;
    AggregationMode mode = AggregationMode::whole_image;
    std::size_t n_trees = 0;
    std::uint64_t seed = 0;
    std::vector<UnitResult> units;
    std::vector<PatientResult> patients;
    ConfusionMatrix confusion{};
    double balanced_error = 0.0;
    double image_error = 0.0;
    std::array<std::optional<RocCurve>, subtype_count> roc;
    std::vector<std::string> warnings;
};

inline Dataset make_dataset(const FeatureTable& t, const std::vector<std::size_t>& rows) {
    Dataset d;
    d.num_classes = subtype_count;
    d.dim = t.rows().empty() ? 0 : t.rows().front().values.size();
    d.x.reserve(rows.size() * d.dim);
    for (auto r : rows) d.add(t.rows()[r].values, static_cast<std::size_t>(t.rows()[r].label));
    return d;
}

inline Dataset make_dataset(const FeatureTable& t) {
    std::vector<std::size_t> rows(t.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return make_dataset(t, rows);
}

/// Leave-one-patient-out cross-validation on the rows of one source.
inline CvReport run_lopo(const FeatureTable& table, Source source, const LopoConfig& cfg) {
    const FeatureTable t = table.select(source);
    if (t.empty()) throw Error(ErrorCode::empty_table, "no rows for source " + std::string(to_string(source)));
    const CohortIndex idx = CohortIndex::from_table(t);
    const auto folds = lopo_split(idx);

    CvReport rep;
    rep.source = source;
    rep.mode = cfg.mode;
    rep.n_trees = cfg.train.n_trees;
    rep.seed = cfg.train.seed;

    std::vector<std::vector<UnitResult>> fold_units(folds.size());
    parallel_for(folds.size(), cfg.threads, [&](std::size_t f) {
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.train.seed, f);
        tc.threads = 1;
        const auto model = train_forest(make_dataset(t, folds[f].train_rows), tc);
        const auto& patient = idx.patients[folds[f].test_patient];
        for (std::size_t s = 0; s < patient.spots.size(); ++s)
            for (const auto& u : patient.spots[s].units) {
                const auto& x = t.rows()[u.row].values;
                UnitPrediction p{model.predict_class(x), model.predict_proba(x)};
                fold_units[f].push_back({folds[f].test_patient, s, u.row, std::move(p)});
            }
    });

    std::size_t images = 0, wrong_images = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto& patient = idx.patients[folds[f].test_patient];
        std::vector<std::vector<UnitPrediction>> grouped(patient.spots.size());
        for (const auto& u : fold_units[f]) grouped[u.spot].push_back(u.prediction);
        const PatientCall call = aggregate_patient(grouped, cfg.mode);

        PatientResult pr;
        pr.patient_id = patient.patient_id;
        pr.truth = patient.label;
        pr.predicted = static_cast<Subtype>(call.label);
        pr.confidence = call.confidence;
        pr.image_labels = call.image_labels;
        for (const auto& u : fold_units[f])
            for (std::size_t c = 0; c < subtype_count; ++c) pr.score[c] += u.prediction.proba[c];
        for (double& s : pr.score) s /= static_cast<double>(fold_units[f].size());
        for (auto l : call.image_labels) {
            ++images;
            wrong_images += l != static_cast<std::size_t>(patient.label);
        }
        ++rep.confusion[static_cast<std::size_t>(pr.truth)][static_cast<std::size_t>(pr.predicted)];
        rep.patients.push_back(std::move(pr));
        rep.units.insert(rep.units.end(), fold_units[f].begin(), fold_units[f].end());
    }
    rep.image_error = images ? static_cast<double>(wrong_images) / static_cast<double>(images) : 0.0;

    try {
        rep.balanced_error = balanced_error(rep.confusion);
    } catch (const Error& e) {
        rep.balanced_error = std::nan("");
        rep.warnings.push_back(std::string("balanced error undefined: ") + e.what());
    }

    for (std::size_t c = 0; c < subtype_count; ++c) {
        std::vector<double> scores;
        std::vector<bool> positive;
        for (const auto& p : rep.patients) {
            scores.push_back(p.score[c]);
            positive.push_back(static_cast<std::size_t>(p.truth) == c);
        }
        const auto pos = std::count(positive.begin(), positive.end(), true);
        // A single positive (or negative) patient gives a one-point ROC; skip it.
        if (pos < 2 || static_cast<std::size_t>(pos) + 2 > positive.size()) {
            rep.warnings.push_back("ROC skipped for " + std::string(to_string(static_cast<Subtype>(c))) +
                                   ": too few positive or negative patients");
            continue;
        }
        rep.roc[c] = roc_auc(scores, positive, std::string(to_string(static_cast<Subtype>(c))));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Tree-count sweep

struct SweepRow {
    std::size_t n_trees = 0;
    std::array<std::optional<double>, subtype_count> class_accuracy; ///< empty when a class is absent
    double accuracy = 0.0;
    double balanced_error = 0.0; ///< NaN in single-fold mode
    double seconds = 0.0;        ///< wall time, informational only
};

/// Repeats the evaluation for every grid value with the same master seed.
/// With `single_fold` set, only that fold is trained and accuracy is measured
/// on its test units; otherwise full LOPO with patient-level accuracy.
inline std::vector<SweepRow> tree_count_sweep(const FeatureTable& table, Source source, const std::vector<std::size_t>& grid,
                                              const LopoConfig& cfg, std::optional<std::size_t> single_fold = std::nullopt) {
    std::vector<SweepRow> out;
    for (std::size_t n_trees : grid) {
        LopoConfig c = cfg;
        c.train.n_trees = n_trees;
        SweepRow row;
        row.n_trees = n_trees;
        const auto start = std::chrono::steady_clock::now();
        std::array<std::size_t, subtype_count> hit{}, total{};
        if (!single_fold) {
            const CvReport rep = run_lopo(table, source, c);
            for (const auto& p : rep.patients) {
                ++total[static_cast<std::size_t>(p.truth)];
                hit[static_cast<std::size_t>(p.truth)] += p.truth == p.predicted;
            }
            row.balanced_error = rep.balanced_error;
        } else {
            const FeatureTable t = table.select(source);
            const CohortIndex idx = CohortIndex::from_table(t);
            const auto folds = lopo_split(idx);
            if (*single_fold >= folds.size()) throw Error(ErrorCode::invalid_argument, "fold index out of range");
            const Fold& fold = folds[*single_fold];
            TrainConfig tc = c.train;
            tc.seed = derive_seed(c.train.seed, *single_fold);
            const auto model = train_forest(make_dataset(t, fold.train_rows), tc);
            for (auto r : fold.test_rows) {
                const auto truth = static_cast<std::size_t>(t.rows()[r].label);
                ++total[truth];
                hit[truth] += model.predict_class(t.rows()[r].values) == truth;
            }
            row.balanced_error = std::nan("");
        }
        std::size_t all_hit = 0, all_total = 0;
        for (std::size_t k = 0; k < subtype_count; ++k) {
            if (total[k]) row.class_accuracy[k] = static_cast<double>(hit[k]) / static_cast<double>(total[k]);
            all_hit += hit[k];
            all_total += total[k];
        }
        row.accuracy = all_total ? static_cast<double>(all_hit) / static_cast<double>(all_total) : 0.0;
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report output

inline std::string_view to_string(AggregationMode m) { return m == AggregationMode::patch ? "patch" : "whole_image"; }

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "n_trees,acc_CC,acc_CCP,acc_ONC,accuracy,balanced_error\n";
    for (const auto& r : rows) {
        out << r.n_trees;
        for (const auto& a : r.class_accuracy) out << ',' << (a ? format_value(*a) : "");
        out << ',' << format_value(r.accuracy) << ',' << (std::isnan(r.balanced_error) ? "" : format_value(r.balanced_error))
            << '\n';
    }
}

/// Writes report.txt plus confusion.csv, patients.csv, units.csv and roc.csv
/// into `dir`.
inline void write_report(const std::filesystem::path& dir, const CvReport& rep, const FeatureTable& table) {
    std::filesystem::create_directories(dir);
    const FeatureTable t = table.select(rep.source);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw Error(ErrorCode::io_error, "cannot write " + (dir / name).string());
        return f;
    };

    {
        auto f = open("confusion.csv");
        f << "truth,CC,CCP,ONC\n";
        for (std::size_t i = 0; i < subtype_count; ++i)
            f << to_string(static_cast<Subtype>(i)) << ',' << rep.confusion[i][0] << ',' << rep.confusion[i][1] << ','
              << rep.confusion[i][2] << '\n';
    }
    {
        auto f = open("patients.csv");
        f << "patient_id,truth,predicted,confidence,score_CC,score_CCP,score_ONC,image_labels\n";
        for (const auto& p : rep.patients) {
            f << p.patient_id << ',' << to_string(p.truth) << ',' << to_string(p.predicted) << ',' << format_value(p.confidence);
            for (double s : p.score) f << ',' << format_value(s);
            f << ',';
            for (std::size_t i = 0; i < p.image_labels.size(); ++i)
                f << (i ? ";" : "") << to_string(static_cast<Subtype>(p.image_labels[i]));
            f << '\n';
        }
    }
    {
        auto f = open("units.csv");
        f << "patient_id,spot_id,unit_id,variant,truth,predicted,p_CC,p_CCP,p_ONC\n";
        for (const auto& u : rep.units) {
            const auto& r = t.rows()[u.row];
            f << r.patient_id << ',' << r.spot_id << ',' << r.unit_id << ',' << r.variant << ',' << to_string(r.label) << ','
              << to_string(static_cast<Subtype>(u.prediction.label));
            for (double p : u.prediction.proba) f << ',' << format_value(p);
            f << '\n';
        }
    }
    {
        auto f = open("roc.csv");
        f << "class,fpr,tpr\n";
        for (std::size_t c = 0; c < subtype_count; ++c) {
            if (!rep.roc[c]) continue;
            for (const auto& [x, y] : rep.roc[c]->points)
                f << to_string(static_cast<Subtype>(c)) << ',' << format_value(x) << ',' << format_value(y) << '\n';
        }
    }
    {
        auto f = open("report.txt");
        f << "LOPO cross-validation\n";
        f << "source: " << to_string(rep.source) << "\naggregation: " << to_string(rep.mode) << "\ntrees: " << rep.n_trees
          << "\nseed: " << rep.seed << "\npatients: " << rep.patients.size() << "\nunits: " << rep.units.size() << "\n\n";
        f << "balanced error: " << format_value(rep.balanced_error) << "\nper-image error: " << format_value(rep.image_error)
          << "\n\nconfusion (rows = truth, columns = predicted CC/CCP/ONC):\n";
        for (std::size_t i = 0; i < subtype_count; ++i)
            f << "  " << to_string(static_cast<Subtype>(i)) << ": " << rep.confusion[i][0] << ' ' << rep.confusion[i][1] << ' '
              << rep.confusion[i][2] << '\n';
        f << "\nAUC (one vs rest):\n";
        for (std::size_t c = 0; c < subtype_count; ++c)
            f << "  " << to_string(static_cast<Subtype>(c)) << ": " << (rep.roc[c] ? format_value(rep.roc[c]->auc) : "n/a") << '\n';
        for (const auto& w : rep.warnings) f << "warning: " << w << '\n';
    }
}

} // namespace mitotype
