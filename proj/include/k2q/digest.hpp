#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace k2q {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// First eight bytes of the SHA-256 of `data`, big-endian.
std::uint64_t hash64(std::string_view data);

}  // namespace k2q
