#pragma once

#include <filesystem>
#include <string>

#include "corrrise/types.hpp"

namespace corrrise {

/// Binary saliency file: "SALM", u8 version (1), u32 LE height, u32 LE width,
/// then height*width float32 LE values in row-major order.
std::string encode_saliency(const SaliencyMap& s);
SaliencyMap decode_saliency(const std::string& bytes);

/// Writes via a temporary file in the same directory and renames it into place.
void save_saliency(const SaliencyMap& s, const std::filesystem::path& path);
/// Throws DataError if unreadable, FormatError on bad magic, version or length.
SaliencyMap load_saliency(const std::filesystem::path& path);

/// Atomic write of an arbitrary byte string (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace corrrise
