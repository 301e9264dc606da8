#pragma once

// Interchange format for feature rows.
//
//   patient_id,spot_id,unit_id,variant,label,source,f0,...,f{d-1}
//
// One header line, then one row per (unit, source). Lines starting with '#'
// are comments and blank lines are ignored. A file may hold a single source
// (every row then has exactly as many values as the header declares) or
// several sources tagged per row; in the mixed case each source's dimension
// is fixed by its first row, rows may be shorter than the header, and
// trailing empty fields are ignored. Values are written with 9 significant
// digits.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "mitotype/error.hpp"

namespace mitotype {

enum class Subtype { CC = 0, CCP = 1, ONC = 2 };
inline constexpr std::size_t subtype_count = 3;

inline std::string_view to_string(Subtype s) {
    switch (s) {
    case Subtype::CC: return "CC";
    case Subtype::CCP: return "CCP";
    case Subtype::ONC: return "ONC";
    }
    return "?";
}

inline std::optional<Subtype> parse_subtype(std::string_view s) {
    if (s == "CC") return Subtype::CC;
    if (s == "CCP") return Subtype::CCP;
    if (s == "ONC") return Subtype::ONC;
    return std::nullopt;
}

enum class Source { HIST, fc6, fc7, fc8, baseline, combined };

inline std::string_view to_string(Source s) {
    switch (s) {
    case Source::HIST: return "HIST";
    case Source::fc6: return "fc6";
    case Source::fc7: return "fc7";
    case Source::fc8: return "fc8";
    case Source::baseline: return "baseline";
    case Source::combined: return "combined";
    }
    return "?";
}

inline std::optional<Source> parse_source(std::string_view s) {
    for (Source src : {Source::HIST, Source::fc6, Source::fc7, Source::fc8, Source::baseline, Source::combined})
        if (s == to_string(src)) return src;
    return std::nullopt;
}

struct FeatureRow {
    std::string patient_id;
    std::string spot_id;
    std::string unit_id;
    std::string variant = "orig";
    Subtype label = Subtype::CC;
    Source source = Source::HIST;
    std::vector<double> values;

    friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

/// Immutable-after-construction set of rows with validated keys and
/// per-source dimensions.
class FeatureTable {
public:
    FeatureTable() = default;

    /// Validates and takes ownership of the rows.
    explicit FeatureTable(std::vector<FeatureRow> rows) : rows_(std::move(rows)) {
        std::set<std::tuple<std::string, std::string, std::string, Source>> keys;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const auto& r = rows_[i];
            const std::string where = "row " + std::to_string(i);
            if (r.patient_id.empty() || r.spot_id.empty() || r.unit_id.empty())
                throw Error(ErrorCode::parse_error, where + ": empty identifier");
            auto [it, inserted] = dims_.emplace(r.source, r.values.size());
            if (!inserted && it->second != r.values.size())
                throw Error(ErrorCode::dimension_mismatch, where + ": expected " + std::to_string(it->second) +
                                                               " values for source " + std::string(to_string(r.source)));
            if (!keys.emplace(r.patient_id, r.spot_id, r.unit_id, r.source).second)
                throw Error(ErrorCode::duplicate_key, where + ": " + r.patient_id + "/" + r.spot_id + "/" + r.unit_id);
        }
    }

    const std::vector<FeatureRow>& rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }

    const std::map<Source, std::size_t>& dimensions() const noexcept { return dims_; }

    std::size_t dimension(Source s) const {
        auto it = dims_.find(s);
        if (it == dims_.end()) throw Error(ErrorCode::invalid_argument, "source not present: " + std::string(to_string(s)));
        return it->second;
    }

    bool has_source(Source s) const { return dims_.count(s) != 0; }

    /// Rows of one source, in table order.
    FeatureTable select(Source s) const {
        std::vector<FeatureRow> out;
        for (const auto& r : rows_)
            if (r.source == s) out.push_back(r);
        return FeatureTable(std::move(out));
    }

    friend bool operator==(const FeatureTable&, const FeatureTable&) = default;

private:
    std::vector<FeatureRow> rows_;
    std::map<Source, std::size_t> dims_;
};

inline std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline const char* const id_columns[] = {"patient_id", "spot_id", "unit_id", "variant", "label", "source"};

} // namespace detail

inline FeatureTable parse_feature_table(std::istream& in, const std::string& name = "<stream>") {
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::size_t> header_values;

    struct Pending {
        FeatureRow row;
        std::size_t line;
    };
    std::vector<Pending> pending;
    auto fail = [&](ErrorCode code, const std::string& msg) -> Error {
        return Error(code, name + ":" + std::to_string(line_no) + ": " + msg);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = detail::split_commas(line);

        if (!header_values) {
            if (fields.size() < 6) throw fail(ErrorCode::parse_error, "header needs the six identifier columns");
            for (std::size_t i = 0; i < 6; ++i)
                if (fields[i] != detail::id_columns[i])
                    throw fail(ErrorCode::parse_error, "expected header column '" + std::string(detail::id_columns[i]) + "'");
            for (std::size_t i = 6; i < fields.size(); ++i)
                if (fields[i] != "f" + std::to_string(i - 6))
                    throw fail(ErrorCode::parse_error, "expected header column 'f" + std::to_string(i - 6) + "'");
            header_values = fields.size() - 6;
            continue;
        }

        while (fields.size() > 6 && fields.back().empty()) fields.pop_back();
        if (fields.size() < 6) throw fail(ErrorCode::parse_error, "row has fewer than six identifier fields");
        if (fields.size() - 6 > *header_values)
            throw fail(ErrorCode::dimension_mismatch, "row has more values than the header declares");

        Pending p{{}, line_no};
        p.row.patient_id = fields[0];
        p.row.spot_id = fields[1];
        p.row.unit_id = fields[2];
        p.row.variant = fields[3];
        if (p.row.patient_id.empty() || p.row.spot_id.empty() || p.row.unit_id.empty())
            throw fail(ErrorCode::parse_error, "empty identifier");
        const auto label = parse_subtype(fields[4]);
        if (!label) throw fail(ErrorCode::unknown_label, "'" + std::string(fields[4]) + "'");
        p.row.label = *label;
        const auto source = parse_source(fields[5]);
        if (!source) throw fail(ErrorCode::parse_error, "unknown source '" + std::string(fields[5]) + "'");
        p.row.source = *source;
        p.row.values.resize(fields.size() - 6);
        for (std::size_t i = 6; i < fields.size(); ++i)
            if (!detail::parse_double(fields[i], p.row.values[i - 6]))
                throw fail(ErrorCode::parse_error, "bad value in column f" + std::to_string(i - 6));
        pending.push_back(std::move(p));
    }
    if (pending.empty()) throw Error(ErrorCode::empty_table, name);

    std::set<Source> sources;
    for (const auto& p : pending) sources.insert(p.row.source);
    std::map<Source, std::size_t> dims;
    if (sources.size() == 1) dims[*sources.begin()] = *header_values;

    std::set<std::tuple<std::string, std::string, std::string, Source>> keys;
    std::map<std::string, Subtype> patient_labels;
    for (const auto& p : pending) {
        line_no = p.line;
        const auto& r = p.row;
        auto [it, inserted] = dims.emplace(r.source, r.values.size());
        if (it->second != r.values.size())
            throw fail(ErrorCode::dimension_mismatch, "expected " + std::to_string(it->second) + " values for source " +
                                                          std::string(to_string(r.source)) + ", found " +
                                                          std::to_string(r.values.size()));
        if (!keys.emplace(r.patient_id, r.spot_id, r.unit_id, r.source).second)
            throw fail(ErrorCode::duplicate_key, r.patient_id + "/" + r.spot_id + "/" + r.unit_id + "/" +
                                                     std::string(to_string(r.source)));
        auto [lab, fresh] = patient_labels.emplace(r.patient_id, r.label);
        if (!fresh && lab->second != r.label)
            throw fail(ErrorCode::parse_error, "patient " + r.patient_id + " carries two labels");
    }

    std::vector<FeatureRow> rows;
    rows.reserve(pending.size());
    for (auto& p : pending) rows.push_back(std::move(p.row));
    return FeatureTable(std::move(rows));
}

inline FeatureTable load_feature_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    return parse_feature_table(in, path.string());
}

inline void write_feature_table(std::ostream& out, const FeatureTable& t) {
    std::size_t width = 0;
    for (const auto& [src, d] : t.dimensions()) width = std::max(width, d);
    out << "patient_id,spot_id,unit_id,variant,label,source";
    for (std::size_t i = 0; i < width; ++i) out << ",f" << i;
    out << '\n';
    for (const auto& r : t.rows()) {
        for (const auto* id : {&r.patient_id, &r.spot_id, &r.unit_id, &r.variant})
            if (id->find_first_of(",\n\r") != std::string::npos)
                throw Error(ErrorCode::invalid_argument, "identifier contains a delimiter: " + *id);
        out << r.patient_id << ',' << r.spot_id << ',' << r.unit_id << ',' << r.variant << ',' << to_string(r.label) << ','
            << to_string(r.source);
        for (double v : r.values) out << ',' << format_value(v);
        out << '\n';
    }
}

inline void save_feature_table(const std::filesystem::path& path, const FeatureTable& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
    write_feature_table(out, t);
}

/// Merges several sources into one `combined` row per unit, parts in the
/// requested order. Units are matched on (patient, spot, unit). A source that
/// holds a single spot-level row for a spot (unit_id == spot_id) is paired
/// with every unit of that spot found in the other sources, which is how one
/// HIST row per spot joins eight augmented or many patch-level deep rows.
inline FeatureTable concatenate_sources(const FeatureTable& t, const std::vector<Source>& sources) {
    if (sources.empty()) throw Error(ErrorCode::invalid_argument, "no sources requested");
    using UnitKey = std::tuple<std::string, std::string, std::string>;
    using SpotKey = std::pair<std::string, std::string>;

    std::vector<std::map<UnitKey, const FeatureRow*>> by_unit(sources.size());
    std::vector<std::map<SpotKey, std::vector<const FeatureRow*>>> by_spot(sources.size());
    for (std::size_t s = 0; s < sources.size(); ++s) {
        if (!t.has_source(sources[s]))
            throw Error(ErrorCode::incomplete_unit, "source " + std::string(to_string(sources[s])) + " missing from table");
        for (const auto& r : t.rows()) {
            if (r.source != sources[s]) continue;
            by_unit[s][{r.patient_id, r.spot_id, r.unit_id}] = &r;
            by_spot[s][{r.patient_id, r.spot_id}].push_back(&r);
        }
    }
    auto spot_level = [&](std::size_t s, const SpotKey& spot) -> const FeatureRow* {
        auto it = by_spot[s].find(spot);
        if (it == by_spot[s].end() || it->second.size() != 1) return nullptr;
        const FeatureRow* r = it->second.front();
        return r->unit_id == r->spot_id ? r : nullptr;
    };

    // Units come from sources that are not spot-level for the unit's spot,
    // enumerated in table order.
    std::vector<UnitKey> units;
    std::set<UnitKey> seen;
    std::set<SpotKey> spots;
    for (const auto& r : t.rows()) {
        const auto pos = std::find(sources.begin(), sources.end(), r.source);
        if (pos == sources.end()) continue;
        const SpotKey spot{r.patient_id, r.spot_id};
        spots.insert(spot);
        const auto s = static_cast<std::size_t>(pos - sources.begin());
        bool others_finer = false;
        for (std::size_t o = 0; o < sources.size(); ++o) {
            auto it = by_spot[o].find(spot);
            if (o != s && it != by_spot[o].end() && spot_level(o, spot) == nullptr) others_finer = true;
        }
        if (spot_level(s, spot) && others_finer) continue;
        UnitKey key{r.patient_id, r.spot_id, r.unit_id};
        if (seen.insert(key).second) units.push_back(key);
    }

    std::vector<FeatureRow> out;
    out.reserve(units.size());
    for (const auto& key : units) {
        const auto& [patient, spot, unit] = key;
        FeatureRow row;
        row.patient_id = patient;
        row.spot_id = spot;
        row.unit_id = unit;
        row.source = Source::combined;
        bool variant_set = false;
        for (std::size_t s = 0; s < sources.size(); ++s) {
            const FeatureRow* part = nullptr;
            if (auto it = by_unit[s].find(key); it != by_unit[s].end())
                part = it->second;
            else
                part = spot_level(s, {patient, spot});
            if (!part)
                throw Error(ErrorCode::incomplete_unit, patient + "/" + spot + "/" + unit + " lacks source " +
                                                            std::string(to_string(sources[s])));
            if (s == 0) row.label = part->label;
            if (part->label != row.label) throw Error(ErrorCode::incomplete_unit, patient + ": conflicting labels");
            if (!variant_set && by_unit[s].count(key)) {
                row.variant = part->variant;
                variant_set = true;
            }
            row.values.insert(row.values.end(), part->values.begin(), part->values.end());
        }
        out.push_back(std::move(row));
    }
    return FeatureTable(std::move(out));
}

} // namespace mitotype
