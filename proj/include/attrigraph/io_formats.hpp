#pragma once

// Binary tensor files ("ATG1"):
//
//   offset 0   4 bytes   magic "ATG1"
//   offset 4   u8        rank, 1..4
//   offset 5   u32 LE    dims[rank], each >= 1
//   then       f32 LE    product(dims) values
//
// Nothing may follow the payload.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attrigraph/tensor.hpp"

namespace attrigraph {

inline constexpr char kTensorMagic[4] = {'A', 'T', 'G', '1'};
inline constexpr std::size_t kMaxTensorRank = 4;

struct RawTensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    friend bool operator==(const RawTensor&, const RawTensor&) = default;
};

std::vector<std::uint8_t> encode_tensor(const RawTensor& t);

/// Parses an in-memory tensor file. Throws FormatError (with the byte offset
/// of the offending field) on bad magic, bad rank, zero dims, or a payload
/// whose length disagrees with the header. When `expected_rank` is set a
/// different rank is rejected too.
RawTensor decode_tensor(std::span<const std::uint8_t> bytes,
                        std::optional<std::size_t> expected_rank = std::nullopt);

void write_tensor(const std::filesystem::path& path, const RawTensor& t);
RawTensor read_tensor(const std::filesystem::path& path,
                      std::optional<std::size_t> expected_rank = std::nullopt);

RawTensor to_raw(const Tensor3& t);
RawTensor to_raw(const Kernel4& k);
RawTensor to_raw(const Map2& m);
RawTensor to_raw(std::span<const float> v);

Tensor3 tensor3_from_raw(RawTensor raw);
Kernel4 kernel4_from_raw(RawTensor raw);
Map2 map2_from_raw(RawTensor raw);
std::vector<float> vector_from_raw(RawTensor raw);

Tensor3 read_tensor3(const std::filesystem::path& path);
Kernel4 read_kernel4(const std::filesystem::path& path);
Map2 read_map2(const std::filesystem::path& path);
std::vector<float> read_vector(const std::filesystem::path& path);

// Whole-file helpers shared by the JSON writers.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_bytes_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace attrigraph
