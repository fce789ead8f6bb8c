#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace storyreel {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
std::string sha256_hex(std::span<const std::uint8_t> bytes);

// Raw 32-byte SHA-256 digest.
std::vector<std::uint8_t> sha256_raw(std::string_view bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Lowercase ASCII, runs of anything outside [a-z0-9] collapsed to one '-',
// leading/trailing '-' trimmed. Empty input maps to "style".
std::string slugify(std::string_view text);

}  // namespace storyreel
