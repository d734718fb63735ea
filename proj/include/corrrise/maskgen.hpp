#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "corrrise/rng.hpp"
#include "corrrise/types.hpp"

namespace corrrise {

/// Parameters of the random patch-mask generator.
struct MaskGenConfig {
    std::size_t num_masks = 500;
    std::size_t patches_per_mask = 8;
    /// Side of each square patch in pixels; 0 selects 28 px scaled to min(height, width) / 112.
    std::size_t patch_size = 0;
    std::uint64_t seed = 0;
    /// Optional box-blur radius applied to every finished mask. 0 disables smoothing.
    std::size_t blur_radius = 0;
};

/// Patch side actually used for the given image size.
std::size_t effective_patch_size(const MaskGenConfig& cfg, std::size_t height, std::size_t width);

/// Throws ConfigError if cfg cannot produce masks of the given size.
void validate(const MaskGenConfig& cfg, std::size_t height, std::size_t width);

/// Draws one mask from `rng`.
///
/// Base value 0. Each patch consumes three draws in this order: top row, left column, value.
/// Corners are uniform over positions that keep the patch inside the image; the patch is filled
/// with one value uniform in [0,1); overlapping patches merge by per-pixel maximum.
Mask generate_mask(const MaskGenConfig& cfg, CounterRng& rng, std::size_t height, std::size_t width);

/// N masks from a single stream keyed by cfg.seed, masks drawn in order.
std::vector<Mask> generate_stack(const MaskGenConfig& cfg, std::size_t height, std::size_t width);

}  // namespace corrrise
