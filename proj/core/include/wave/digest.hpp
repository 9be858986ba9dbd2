#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wave {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string file_sha256_hex(const std::string& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ArgumentError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Little-endian float64 packing used for feature payloads.
std::string encode_f64_le(std::span<const double> values);
std::vector<double> decode_f64_le(std::string_view text);

}  // namespace wave
