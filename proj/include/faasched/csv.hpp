#pragma once

// Minimal CSV and key=value file helpers. The trace and result files are
// plain unquoted CSV, so no quoting support is needed or provided.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace faasched {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view strip_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

inline bool parse_int(std::string_view s, std::int64_t& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !s.empty();
}

inline bool parse_uint(std::string_view s, std::uint64_t& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !s.empty();
}

inline bool parse_double(std::string_view s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !s.empty();
}

// Shortest round-trip-safe decimal form, deterministic for a given libc.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

// key=value lines; blank lines and lines starting with '#' are skipped.
inline std::map<std::string, std::string> parse_kv(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view v = strip_cr(line);
        if (v.empty() || v.front() == '#') continue;
        const std::size_t eq = v.find('=');
        if (eq == std::string_view::npos)
            throw std::runtime_error("malformed key=value line: " + line);
        out.emplace(std::string(v.substr(0, eq)), std::string(v.substr(eq + 1)));
    }
    return out;
}

inline std::vector<std::int64_t> parse_int_list(std::string_view s) {
    std::vector<std::int64_t> out;
    if (s.empty()) return out;
    for (std::string_view tok : split_csv(s)) {
        std::int64_t v = 0;
        if (!parse_int(tok, v)) throw std::runtime_error("bad integer list entry: " + std::string(tok));
        out.push_back(v);
    }
    return out;
}

inline std::string join_ints(const std::vector<std::int64_t>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out.push_back(',');
        out += std::to_string(xs[i]);
    }
    return out;
}

} // namespace faasched
