#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace corrrise {

/// Lowercase hex SHA-256 of a byte range.
std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(const std::string& bytes);

/// SHA-256 of a file's contents. Throws DataError if it cannot be read.
std::string sha256_file(const std::filesystem::path& path);

/// First 8 bytes of SHA-256 as an integer; stable key for caches and seed derivation.
std::uint64_t hash64(const std::string& bytes);

}  // namespace corrrise
