#pragma once

// The .srf sidecar: a parameter array serialized with an offset table so any
// single segment's parameters can be fetched without reading the others.
//
// Layout (all integers little-endian):
//   "SEGREFN1" | u16 version | u32 rho | u8 mode | u8 layer_count
//   | layer_count x (u16 in, u16 out, u8 kernel) | u32 segment_count
//   | segment_count x u64 block offset (from file start)
//   then per segment: u32 index | u32 start_frame | u32 end_frame
//   | parameter_count x f32 | u32 CRC-32 of the payload bytes

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include "segrefine/errors.hpp"
#include "segrefine/refiner.hpp"
#include "segrefine/segmentation.hpp"

namespace segrefine {

inline constexpr std::array<char, 8> kSidecarMagic{'S', 'E', 'G', 'R', 'E', 'F', 'N', '1'};
inline constexpr std::uint16_t kSidecarVersion = 1;

struct SidecarHeader {
    std::uint16_t version = kSidecarVersion;
    std::uint32_t rho = 50;
    RefineMode mode = RefineMode::Residual;
    RefinerTopology topology;
    std::vector<std::uint64_t> offsets;

    std::size_t segment_count() const noexcept { return offsets.size(); }
    std::size_t size_bytes() const noexcept {
        return 8 + 2 + 4 + 1 + 1 + 5 * topology.layers.size() + 4 + 8 * offsets.size();
    }
    std::size_t block_size() const { return 12 + 4 * parameter_count(topology) + 4; }
};

struct SidecarContents {
    SidecarHeader header;
    ParameterArray array;
    RefineMode mode() const noexcept { return header.mode; }
};

struct SegmentBlock {
    SegmentDescriptor segment;
    ParameterSet params;
};

namespace detail {

class LeWriter {
public:
    explicit LeWriter(std::ostream& os) : os_(os) {}
    template <typename U>
    void put(U v) {
        static_assert(std::is_unsigned_v<U>);
        std::array<char, sizeof(U)> b;
        for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        bytes(b.data(), b.size());
    }
    void bytes(const char* p, std::size_t n) {
        os_.write(p, static_cast<std::streamsize>(n));
        if (!os_) throw IoError("sidecar: write failed");
        count_ += n;
    }
    std::size_t count() const noexcept { return count_; }

private:
    std::ostream& os_;
    std::size_t count_ = 0;
};

class LeReader {
public:
    explicit LeReader(std::istream& is) : is_(is) {}
    void bytes(char* p, std::size_t n) {
        is_.read(p, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n)
            throw FormatError("sidecar: truncated stream");
    }
    template <typename U>
    U get() {
        std::array<unsigned char, sizeof(U)> b;
        bytes(reinterpret_cast<char*>(b.data()), b.size());
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
        return v;
    }
    void seek(std::uint64_t pos) {
        is_.clear();
        is_.seekg(static_cast<std::streamoff>(pos));
        if (!is_) throw FormatError("sidecar: cannot seek to offset " + std::to_string(pos));
    }

private:
    std::istream& is_;
};

inline std::uint32_t crc32_of(const std::vector<unsigned char>& bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

inline std::vector<unsigned char> encode_payload(const std::vector<float>& values) {
    std::vector<unsigned char> out(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto u = std::bit_cast<std::uint32_t>(values[i]);
        for (int b = 0; b < 4; ++b) out[4 * i + b] = static_cast<unsigned char>(u >> (8 * b));
    }
    return out;
}

inline std::vector<float> decode_payload(const std::vector<unsigned char>& bytes) {
    std::vector<float> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
        out[i] = std::bit_cast<float>(u);
    }
    return out;
}

inline SidecarHeader read_header(LeReader& in) {
    std::array<char, 8> magic;
    in.bytes(magic.data(), magic.size());
    if (magic != kSidecarMagic) throw FormatError("sidecar: bad magic (not a .srf stream)");
    SidecarHeader h;
    h.version = in.get<std::uint16_t>();
    if (h.version != kSidecarVersion)
        throw FormatError("sidecar: unsupported version " + std::to_string(h.version));
    h.rho = in.get<std::uint32_t>();
    if (h.rho == 0) throw FormatError("sidecar: rho is zero");
    const auto mode = in.get<std::uint8_t>();
    if (mode > 1) throw FormatError("sidecar: unknown mode byte " + std::to_string(mode));
    h.mode = static_cast<RefineMode>(mode);
    const auto layers = in.get<std::uint8_t>();
    if (layers == 0) throw FormatError("sidecar: zero layers");
    for (std::size_t l = 0; l < layers; ++l) {
        ConvSpec s;
        s.in_channels = in.get<std::uint16_t>();
        s.out_channels = in.get<std::uint16_t>();
        s.kernel = in.get<std::uint8_t>();
        h.topology.layers.push_back(s);
    }
    h.topology.hidden_width =
        layers > 1 ? h.topology.layers.front().out_channels : h.topology.layers.front().in_channels;
    try {
        h.topology.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("sidecar: invalid topology: ") + e.what());
    }
    const auto count = in.get<std::uint32_t>();
    if (count == 0) throw FormatError("sidecar: zero segments");
    h.offsets.reserve(count);
    for (std::size_t k = 0; k < count; ++k) h.offsets.push_back(in.get<std::uint64_t>());
    for (std::size_t k = 0; k < count; ++k) {
        const std::uint64_t floor = k == 0 ? h.size_bytes() : h.offsets[k - 1] + h.block_size();
        if (h.offsets[k] < floor)
            throw FormatError("sidecar: offset table entry " + std::to_string(k) +
                              " overlaps preceding data");
    }
    return h;
}

inline SegmentBlock read_block(LeReader& in, const SidecarHeader& h, std::size_t k) {
    in.seek(h.offsets[k]);
    SegmentBlock b;
    b.segment.index = in.get<std::uint32_t>();
    b.segment.start_frame = in.get<std::uint32_t>();
    b.segment.end_frame = in.get<std::uint32_t>();
    if (b.segment.index != k)
        throw FormatError("sidecar: block at table entry " + std::to_string(k) +
                          " carries index " + std::to_string(b.segment.index));
    std::vector<unsigned char> payload(4 * parameter_count(h.topology));
    in.bytes(reinterpret_cast<char*>(payload.data()), payload.size());
    const auto stored = in.get<std::uint32_t>();
    if (stored != crc32_of(payload))
        throw CorruptionError(k, "sidecar: checksum mismatch in segment " + std::to_string(k));
    b.params.values = decode_payload(payload);
    b.params.topology_id = h.topology.id();
    return b;
}

}  // namespace detail

/// Serializes the array. Returns the number of bytes written.
inline std::size_t write_sidecar(const ParameterArray& array, const RefinerTopology& topology,
                                 RefineMode mode, std::ostream& sink) {
    if (array.empty()) throw std::invalid_argument("write_sidecar: parameter array is empty");
    topology.validate();
    if (array.topology_id() != topology.id())
        throw std::invalid_argument("write_sidecar: array topology does not match");
    if (topology.layers.size() > 255) throw std::invalid_argument("write_sidecar: too many layers");
    for (const auto& s : topology.layers)
        if (s.in_channels > 0xffff || s.out_channels > 0xffff || s.kernel > 0xff)
            throw std::invalid_argument("write_sidecar: layer geometry exceeds format limits");
    if (array.config().rho > std::numeric_limits<std::uint32_t>::max() ||
        array.last_frame() > std::numeric_limits<std::uint32_t>::max())
        throw std::invalid_argument("write_sidecar: frame numbers exceed 32 bits");

    SidecarHeader h;
    h.rho = static_cast<std::uint32_t>(array.config().rho);
    h.mode = mode;
    h.topology = topology;
    h.offsets.resize(array.size());
    const std::size_t block = h.block_size();
    for (std::size_t k = 0; k < array.size(); ++k) h.offsets[k] = h.size_bytes() + k * block;

    detail::LeWriter out(sink);
    out.bytes(kSidecarMagic.data(), kSidecarMagic.size());
    out.put<std::uint16_t>(h.version);
    out.put<std::uint32_t>(h.rho);
    out.put<std::uint8_t>(static_cast<std::uint8_t>(mode));
    out.put<std::uint8_t>(static_cast<std::uint8_t>(topology.layers.size()));
    for (const auto& s : topology.layers) {
        out.put<std::uint16_t>(static_cast<std::uint16_t>(s.in_channels));
        out.put<std::uint16_t>(static_cast<std::uint16_t>(s.out_channels));
        out.put<std::uint8_t>(static_cast<std::uint8_t>(s.kernel));
    }
    out.put<std::uint32_t>(static_cast<std::uint32_t>(array.size()));
    for (auto off : h.offsets) out.put<std::uint64_t>(off);

    for (const auto& e : array.entries()) {
        check_parameters(e.params, topology);
        out.put<std::uint32_t>(static_cast<std::uint32_t>(e.segment.index));
        out.put<std::uint32_t>(static_cast<std::uint32_t>(e.segment.start_frame));
        out.put<std::uint32_t>(static_cast<std::uint32_t>(e.segment.end_frame));
        const auto payload = detail::encode_payload(e.params.values);
        out.bytes(reinterpret_cast<const char*>(payload.data()), payload.size());
        out.put<std::uint32_t>(detail::crc32_of(payload));
    }
    sink.flush();
    if (!sink) throw IoError("sidecar: flush failed");
    return out.count();
}

/// Reads and verifies the whole stream. Throws without returning any partial
/// array on malformed or corrupt input.
inline SidecarContents read_sidecar(std::istream& source) {
    detail::LeReader in(source);
    SidecarContents c;
    c.header = detail::read_header(in);
    c.array = ParameterArray(SegmentationConfig{c.header.rho}, c.header.topology.id());
    for (std::size_t k = 0; k < c.header.segment_count(); ++k) {
        auto b = detail::read_block(in, c.header, k);
        try {
            c.array.append_segment(b.segment, std::move(b.params));
        } catch (const std::invalid_argument& e) {
            throw FormatError(std::string("sidecar: ") + e.what());
        }
    }
    return c;
}

/// Random access to the segment blocks of one stream. The header and offset
/// table are read once; each block() call touches only that block.
class SidecarReader {
public:
    explicit SidecarReader(std::istream& source) : in_(source) {
        header_ = detail::read_header(in_);
    }

    const SidecarHeader& header() const noexcept { return header_; }
    std::size_t segment_count() const noexcept { return header_.segment_count(); }

    SegmentBlock block(std::size_t k) {
        if (k >= header_.segment_count())
            throw std::out_of_range("sidecar: segment " + std::to_string(k) + " out of range [0, " +
                                    std::to_string(header_.segment_count()) + ")");
        ++blocks_read_;
        return detail::read_block(in_, header_, k);
    }

    std::size_t blocks_read() const noexcept { return blocks_read_; }

private:
    detail::LeReader in_;
    SidecarHeader header_;
    std::size_t blocks_read_ = 0;
};

inline SegmentBlock read_segment_block(std::istream& source, std::size_t k) {
    SidecarReader reader(source);
    return reader.block(k);
}

/// Sidecar cost in bits per pixel of the video it accompanies.
inline double rate_overhead(std::size_t sidecar_bytes, std::size_t frame_count, std::size_t width,
                            std::size_t height) {
    if (frame_count == 0 || width == 0 || height == 0)
        throw std::invalid_argument("rate_overhead: frame_count, width and height must be positive");
    return 8.0 * static_cast<double>(sidecar_bytes) /
           (static_cast<double>(frame_count) * static_cast<double>(width) *
            static_cast<double>(height));
}

}  // namespace segrefine
