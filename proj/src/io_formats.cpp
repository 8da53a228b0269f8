#include "attrigraph/io_formats.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "attrigraph/error.hpp"

namespace attrigraph {

static_assert(std::numeric_limits<float>::is_iec559, "f32 payloads require IEEE-754 floats");

namespace {

constexpr std::size_t kHeaderFixed = 5;  // magic + rank

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xffu));
    }
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) {
        v |= static_cast<std::uint32_t>(bytes[offset + static_cast<std::size_t>(b)]) << (8 * b);
    }
    return v;
}

std::string dims_string(const std::vector<std::uint32_t>& dims) {
    std::string s;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(dims[i]);
    }
    return s;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const RawTensor& t) {
    if (t.dims.empty() || t.dims.size() > kMaxTensorRank) {
        throw Error(ErrorKind::invalid_argument,
                    "tensor rank " + std::to_string(t.dims.size()) + " outside 1..4");
    }
    std::size_t count = 1;
    for (auto d : t.dims) {
        if (d == 0) {
            throw Error(ErrorKind::invalid_argument, "tensor dims " + dims_string(t.dims) + " contain a zero");
        }
        count *= d;
    }
    if (count != t.data.size()) {
        throw Error(ErrorKind::shape_mismatch, "tensor dims " + dims_string(t.dims) + " describe " +
                                                   std::to_string(count) + " values, data holds " +
                                                   std::to_string(t.data.size()));
    }

    std::vector<std::uint8_t> out;
    out.reserve(kHeaderFixed + 4 * t.dims.size() + 4 * t.data.size());
    out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
    out.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) {
        put_u32(out, d);
    }
    for (float v : t.data) {
        put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

RawTensor decode_tensor(std::span<const std::uint8_t> bytes, std::optional<std::size_t> expected_rank) {
    if (bytes.size() < kHeaderFixed) {
        throw FormatError("tensor file truncated: " + std::to_string(bytes.size()) + " bytes, header needs 5",
                          bytes.size());
    }
    for (std::size_t i = 0; i < 4; ++i) {
        if (bytes[i] != static_cast<std::uint8_t>(kTensorMagic[i])) {
            throw FormatError("bad tensor magic at byte " + std::to_string(i), i);
        }
    }
    const std::size_t rank = bytes[4];
    if (rank < 1 || rank > kMaxTensorRank) {
        throw FormatError("tensor rank " + std::to_string(rank) + " outside 1..4 at byte 4", 4);
    }
    if (expected_rank && rank != *expected_rank) {
        throw FormatError("tensor rank " + std::to_string(rank) + " at byte 4, expected " +
                              std::to_string(*expected_rank),
                          4);
    }
    const std::size_t header = kHeaderFixed + 4 * rank;
    if (bytes.size() < header) {
        throw FormatError("tensor header truncated at byte " + std::to_string(bytes.size()), bytes.size());
    }

    RawTensor t;
    t.dims.resize(rank);
    const std::size_t payload_bytes = bytes.size() - header;
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t off = kHeaderFixed + 4 * i;
        t.dims[i] = get_u32(bytes, off);
        if (t.dims[i] == 0) {
            throw FormatError("tensor dim " + std::to_string(i) + " is zero at byte " + std::to_string(off), off);
        }
        // Checked before multiplying so the running product cannot overflow.
        if (t.dims[i] > (payload_bytes / 4) / count) {
            throw FormatError("tensor dims exceed payload: dim " + std::to_string(i) + " at byte " +
                                  std::to_string(off),
                              off);
        }
        count *= t.dims[i];
    }
    if (payload_bytes != count * 4) {
        throw FormatError("tensor payload is " + std::to_string(payload_bytes) + " bytes at byte " +
                              std::to_string(header) + ", dims " + dims_string(t.dims) + " need " +
                              std::to_string(count * 4),
                          header);
    }

    t.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        t.data[i] = std::bit_cast<float>(get_u32(bytes, header + 4 * i));
    }
    return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::missing_input, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::missing_input, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorKind::io, "short write to " + path.string());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    write_bytes_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_tensor(const std::filesystem::path& path, const RawTensor& t) {
    write_bytes_file(path, encode_tensor(t));
}

RawTensor read_tensor(const std::filesystem::path& path, std::optional<std::size_t> expected_rank) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_tensor(bytes, expected_rank);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what(), e.offset());
    }
}

RawTensor to_raw(const Tensor3& t) {
    return {{static_cast<std::uint32_t>(t.height), static_cast<std::uint32_t>(t.width),
             static_cast<std::uint32_t>(t.channels)},
            t.data};
}

RawTensor to_raw(const Kernel4& k) {
    return {{static_cast<std::uint32_t>(k.kh), static_cast<std::uint32_t>(k.kw),
             static_cast<std::uint32_t>(k.in_channels), static_cast<std::uint32_t>(k.out_channels)},
            k.data};
}

RawTensor to_raw(const Map2& m) {
    return {{static_cast<std::uint32_t>(m.height), static_cast<std::uint32_t>(m.width)}, m.data};
}

RawTensor to_raw(std::span<const float> v) {
    return {{static_cast<std::uint32_t>(v.size())}, {v.begin(), v.end()}};
}

namespace {

void require_rank(const RawTensor& raw, std::size_t rank) {
    if (raw.dims.size() != rank) {
        throw FormatError("tensor has rank " + std::to_string(raw.dims.size()) + ", expected " +
                              std::to_string(rank),
                          4);
    }
}

}  // namespace

Tensor3 tensor3_from_raw(RawTensor raw) {
    require_rank(raw, 3);
    Tensor3 t;
    t.height = raw.dims[0];
    t.width = raw.dims[1];
    t.channels = raw.dims[2];
    t.data = std::move(raw.data);
    return t;
}

Kernel4 kernel4_from_raw(RawTensor raw) {
    require_rank(raw, 4);
    Kernel4 k;
    k.kh = raw.dims[0];
    k.kw = raw.dims[1];
    k.in_channels = raw.dims[2];
    k.out_channels = raw.dims[3];
    k.data = std::move(raw.data);
    return k;
}

Map2 map2_from_raw(RawTensor raw) {
    require_rank(raw, 2);
    Map2 m;
    m.height = raw.dims[0];
    m.width = raw.dims[1];
    m.data = std::move(raw.data);
    return m;
}

std::vector<float> vector_from_raw(RawTensor raw) {
    require_rank(raw, 1);
    return std::move(raw.data);
}

Tensor3 read_tensor3(const std::filesystem::path& path) { return tensor3_from_raw(read_tensor(path, 3)); }
Kernel4 read_kernel4(const std::filesystem::path& path) { return kernel4_from_raw(read_tensor(path, 4)); }
Map2 read_map2(const std::filesystem::path& path) { return map2_from_raw(read_tensor(path, 2)); }
std::vector<float> read_vector(const std::filesystem::path& path) { return vector_from_raw(read_tensor(path, 1)); }

}  // namespace attrigraph
