#include "corrrise/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "corrrise/errors.hpp"

namespace corrrise {
namespace {

// Separable box blur with clamp-to-edge borders.
void box_blur(Mask& mask, std::size_t radius) {
    const std::size_t h = mask.height();
    const std::size_t w = mask.width();
    const auto r = static_cast<std::ptrdiff_t>(radius);
    const double norm = 1.0 / static_cast<double>(2 * radius + 1);
    std::vector<float> tmp(mask.size());
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t d = -r; d <= r; ++d) {
                const auto xx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(x) + d, 0,
                                                           static_cast<std::ptrdiff_t>(w) - 1);
                acc += mask.at(y, static_cast<std::size_t>(xx));
            }
            tmp[y * w + x] = static_cast<float>(acc * norm);
        }
    }
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t d = -r; d <= r; ++d) {
                const auto yy = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(y) + d, 0,
                                                           static_cast<std::ptrdiff_t>(h) - 1);
                acc += tmp[static_cast<std::size_t>(yy) * w + x];
            }
            mask.at(y, x) = std::clamp(static_cast<float>(acc * norm), 0.0f, 1.0f);
        }
    }
}

}  // namespace

std::size_t effective_patch_size(const MaskGenConfig& cfg, std::size_t height, std::size_t width) {
    if (cfg.patch_size != 0) return cfg.patch_size;
    const double scaled = 28.0 * static_cast<double>(std::min(height, width)) / 112.0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(scaled)));
}

void validate(const MaskGenConfig& cfg, std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) {
        throw ConfigError("mask size must be positive");
    }
    if (cfg.patches_per_mask == 0) {
        throw ConfigError("patches_per_mask must be positive");
    }
    const std::size_t side = effective_patch_size(cfg, height, width);
    if (side > std::min(height, width)) {
        throw ConfigError("patch size " + std::to_string(side) + " exceeds image size " +
                          std::to_string(height) + "x" + std::to_string(width));
    }
}

Mask generate_mask(const MaskGenConfig& cfg, CounterRng& rng, std::size_t height, std::size_t width) {
    validate(cfg, height, width);
    const std::size_t side = effective_patch_size(cfg, height, width);
    Mask mask(height, width, 0.0f);
    for (std::size_t p = 0; p < cfg.patches_per_mask; ++p) {
        const std::size_t top = rng.below(height - side + 1);
        const std::size_t left = rng.below(width - side + 1);
        const auto value = static_cast<float>(rng.uniform01());
        for (std::size_t y = top; y < top + side; ++y) {
            for (std::size_t x = left; x < left + side; ++x) {
                float& px = mask.at(y, x);
                px = std::max(px, value);
            }
        }
    }
    if (cfg.blur_radius > 0) box_blur(mask, cfg.blur_radius);
    return mask;
}

std::vector<Mask> generate_stack(const MaskGenConfig& cfg, std::size_t height, std::size_t width) {
    if (cfg.num_masks < 2) {
        throw ConfigError("num_masks must be at least 2, got " + std::to_string(cfg.num_masks));
    }
    validate(cfg, height, width);
    CounterRng rng(cfg.seed);
    std::vector<Mask> stack;
    stack.reserve(cfg.num_masks);
    for (std::size_t k = 0; k < cfg.num_masks; ++k) {
        stack.push_back(generate_mask(cfg, rng, height, width));
    }
    return stack;
}

}  // namespace corrrise
