#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mitotype/error.hpp"

namespace mitotype {

/// Flat key=value settings. '#' starts a comment; blank lines are ignored.
/// Reads are recorded so callers can reject keys nobody asked for.
class Config {
public:
    static Config parse(std::istream& in, const std::string& name = "<stream>") {
        Config c;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw Error(ErrorCode::parse_error, name + ":" + std::to_string(line_no) + ": expected key=value");
            const std::string key = trim(t.substr(0, eq));
            if (key.empty()) throw Error(ErrorCode::parse_error, name + ":" + std::to_string(line_no) + ": empty key");
            if (!c.values_.emplace(key, trim(t.substr(eq + 1))).second)
                throw Error(ErrorCode::duplicate_key, name + ":" + std::to_string(line_no) + ": " + key);
        }
        return c;
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
        return parse(in, path.string());
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        double v = 0;
        const auto& s = it->second;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) bad(key, "a number");
        return v;
    }

    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::uint64_t v = 0;
        const auto& s = it->second;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) bad(key, "a nonnegative integer");
        return v;
    }

    int get_int(const std::string& key, int fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        int v = 0;
        const auto& s = it->second;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) bad(key, "an integer");
        return v;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const std::string s = get_string(key, fallback ? "true" : "false");
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        bad(key, "true or false");
    }

    std::vector<std::uint64_t> get_uint_list(const std::string& key, const std::vector<std::uint64_t>& fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<std::uint64_t> out;
        std::size_t start = 0;
        const std::string& s = it->second;
        while (start <= s.size()) {
            const auto comma = std::min(s.find(',', start), s.size());
            const std::string part = trim(s.substr(start, comma - start));
            std::uint64_t v = 0;
            auto res = std::from_chars(part.data(), part.data() + part.size(), v);
            if (part.empty() || res.ec != std::errc() || res.ptr != part.data() + part.size()) bad(key, "a comma-separated list of integers");
            out.push_back(v);
            start = comma + 1;
        }
        return out;
    }

    /// Keys present in the file that were never read.
    std::vector<std::string> unused_keys() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) out.push_back(k);
        return out;
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    [[noreturn]] void bad(const std::string& key, const char* what) const {
        throw Error(ErrorCode::parse_error, "config key '" + key + "' must be " + what + ", got '" + values_.at(key) + "'");
    }

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

} // namespace mitotype
