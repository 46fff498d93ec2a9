#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "entlink/montecarlo.hpp"

namespace entlink::tagio {

/// Raised when a tag file fails structural validation (bad magic, truncated
/// records, version mismatch). Distinct from plain I/O errors so callers can
/// report malformed input separately.
struct TagFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr char kMagic[8] = {'E', 'N', 'T', 'T', 'A', 'G', '0', '1'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;
inline constexpr std::size_t kRecordBytes = 10; // u16 detector + u64 time_ps, little-endian

namespace detail {

inline void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

} // namespace detail

inline void write_tags(const std::filesystem::path& path, const montecarlo::TagStream& stream) {
    if (stream.tags.size() > std::numeric_limits<std::uint32_t>::max())
        throw std::invalid_argument("tagio: stream exceeds the format's u32 record count");
    std::string buf;
    buf.reserve(kHeaderBytes + kRecordBytes * stream.tags.size());
    buf.append(kMagic, sizeof kMagic);
    detail::put_u32(buf, kVersion);
    detail::put_u32(buf, static_cast<std::uint32_t>(stream.tags.size()));
    for (const auto& tag : stream.tags) {
        detail::put_u16(buf, tag.detector);
        detail::put_u64(buf, static_cast<std::uint64_t>(tag.time_ps));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("tagio: cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("tagio: short write to " + path.string());
}

inline montecarlo::TagStream read_tags(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("tagio: cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < kHeaderBytes)
        throw TagFormatError("tagio: " + path.string() + " shorter than the header");
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    if (std::memcmp(p, kMagic, sizeof kMagic) != 0)
        throw TagFormatError("tagio: " + path.string() + " has a bad magic number");
    std::uint32_t version = detail::get_u32(p + 8);
    if (version != kVersion)
        throw TagFormatError("tagio: unsupported version " + std::to_string(version));
    std::uint32_t count = detail::get_u32(p + 12);
    if (buf.size() != kHeaderBytes + kRecordBytes * static_cast<std::size_t>(count))
        throw TagFormatError("tagio: " + path.string() + " record count disagrees with size");

    montecarlo::TagStream stream;
    stream.tags.reserve(count);
    const unsigned char* rec = p + kHeaderBytes;
    for (std::uint32_t i = 0; i < count; ++i, rec += kRecordBytes) {
        montecarlo::TimeTag tag;
        tag.detector = detail::get_u16(rec);
        tag.time_ps = static_cast<std::int64_t>(detail::get_u64(rec + 2));
        stream.tags.push_back(tag);
    }
    return stream;
}

inline void write_tags_csv(const std::filesystem::path& path,
                           const montecarlo::TagStream& stream) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("tagio: cannot open " + path.string() + " for writing");
    out << "detector,time_ps\n";
    for (const auto& tag : stream.tags) out << tag.detector << ',' << tag.time_ps << '\n';
    if (!out) throw std::runtime_error("tagio: short write to " + path.string());
}

/// Split a merged stream back into per-detector streams, preserving order.
inline std::map<montecarlo::DetectorId, montecarlo::TagStream>
split_by_detector(const montecarlo::TagStream& merged) {
    std::map<montecarlo::DetectorId, montecarlo::TagStream> split;
    for (std::size_t i = 0; i < merged.tags.size(); ++i) {
        auto& s = split[merged.tags[i].detector];
        s.tags.push_back(merged.tags[i]);
        if (merged.origins.size() == merged.tags.size())
            s.origins.push_back(merged.origins[i]);
    }
    return split;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("tagio: cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("tagio: short write to " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("tagio: cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    return j;
}

} // namespace entlink::tagio
