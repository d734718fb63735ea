#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "corrrise/embedder.hpp"
#include "corrrise/metrics.hpp"
#include "corrrise/types.hpp"

namespace corrrise {

struct PairRecord {
    std::filesystem::path path_a;
    std::filesystem::path path_b;
    bool match = true;
    /// 1-based line in the manifest file.
    std::size_t line = 0;
};

struct Manifest {
    std::vector<PairRecord> records;
    std::filesystem::path base_dir;
};

/// CSV with header `path_a,path_b,label`, labels `match` or `nonmatch`.
/// Relative paths are resolved against the manifest's directory. Fields may be double-quoted.
/// Blank lines are ignored; anything else malformed raises DataError naming the line.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);

/// Decodes a PNG/JPEG into [0,1] floats (RGB order for colour images). When the aspect ratio
/// differs from the target, the centred region with the target's aspect ratio is kept
/// (`center_crop`) before a bilinear resize; images already at the target size are not resampled.
ImageTensor load_image(const std::filesystem::path& path, std::size_t height, std::size_t width,
                       std::size_t channels, bool center_crop = true);

/// Loads every record at the backend's input size. Errors name the manifest line.
std::vector<ImagePair> load_pairs(const Manifest& manifest, const InputSpec& spec, bool center_crop = true);

/// 8-bit PNG of an image (values rounded from [0,1]).
void write_png(const ImageTensor& img, const std::filesystem::path& path);
std::string encode_png(const ImageTensor& img);

/// Mask as an 8-bit grayscale PNG.
void write_mask_png(const Mask& mask, const std::filesystem::path& path);

enum class HeatmapMode { Signed, Positive, Negative };

/// Overlay of `s` on `img`. Values are divided by the map's max |value|; positive values blend
/// towards a warm ramp (red to yellow), negative towards a cool ramp (blue to cyan), with
/// opacity equal to the normalized magnitude. Modes other than Signed drop the other sign.
ImageTensor render_heatmap(const ImageTensor& img, const SaliencyMap& s, HeatmapMode mode);
void write_heatmap(const ImageTensor& img, const SaliencyMap& s, HeatmapMode mode,
                   const std::filesystem::path& path);

}  // namespace corrrise
