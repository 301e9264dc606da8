#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mitotype/error.hpp"
#include "mitotype/feature_table.hpp"

namespace mitotype {

/// One image handed to feature extraction: a whole spot, an augmented
/// variant or a patch cut from a spot.
struct ManifestEntry {
    std::string patient_id;
    std::string spot_id;
    std::string unit_id;
    std::string variant = "orig";
    Subtype label = Subtype::CC;
    std::string path; ///< relative to the manifest's directory
    std::size_t origin_x = 0, origin_y = 0, width = 0, height = 0;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline constexpr const char* manifest_header = "patient_id,spot_id,unit_id,variant,label,path,origin_x,origin_y,width,height";

inline void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries) {
    out << manifest_header << '\n';
    for (const auto& e : entries)
        out << e.patient_id << ',' << e.spot_id << ',' << e.unit_id << ',' << e.variant << ',' << to_string(e.label) << ','
            << e.path << ',' << e.origin_x << ',' << e.origin_y << ',' << e.width << ',' << e.height << '\n';
}

inline void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
    write_manifest(out, entries);
}

inline std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::string& name = "<stream>") {
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) { throw Error(ErrorCode::parse_error, name + ":" + std::to_string(line_no) + ": " + what); };
    std::vector<ManifestEntry> out;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!header) {
            if (line != manifest_header) fail("unexpected manifest header");
            header = true;
            continue;
        }
        const auto f = detail::split_commas(line);
        if (f.size() != 10) fail("expected 10 fields");
        ManifestEntry e;
        e.patient_id = f[0];
        e.spot_id = f[1];
        e.unit_id = f[2];
        e.variant = f[3];
        const auto label = parse_subtype(f[4]);
        if (!label) fail("unknown label '" + std::string(f[4]) + "'");
        e.label = *label;
        e.path = f[5];
        std::size_t* nums[] = {&e.origin_x, &e.origin_y, &e.width, &e.height};
        for (std::size_t k = 0; k < 4; ++k) {
            double v = 0;
            if (!detail::parse_double(f[6 + k], v) || v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
                fail("bad integer '" + std::string(f[6 + k]) + "'");
            *nums[k] = static_cast<std::size_t>(v);
        }
        out.push_back(std::move(e));
    }
    if (!header) throw Error(ErrorCode::parse_error, name + ": missing manifest header");
    return out;
}

inline std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
    return parse_manifest(in, path.string());
}

} // namespace mitotype
