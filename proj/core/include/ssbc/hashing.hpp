#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssbc {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::string hex_encode(std::span<const std::byte> bytes);
std::vector<std::byte> hex_decode(std::string_view hex);

}  // namespace ssbc
