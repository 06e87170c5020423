#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <system_error>

namespace ratelab {

// Shortest round-trip decimal form: parsing the text recovers the exact
// double, which is what keeps checksummed artifacts and log-replay oracles
// bit-stable.
inline void append_double(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

inline std::string format_double(double v) {
    std::string s;
    append_double(s, v);
    return s;
}

inline std::string hex64(std::uint64_t h) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// FNV-1a of a file's bytes; used for dataset hashes and artifact checksums.
std::uint64_t hash_file(const std::filesystem::path& path);

// Writes via a sibling temp file and renames into place.
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace ratelab
