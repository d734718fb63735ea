#include "corrrise/toy_suite.hpp"

#include <algorithm>
#include <array>

#include "corrrise/errors.hpp"
#include "corrrise/rng.hpp"

namespace corrrise {
namespace {

struct Spot {
    std::size_t row, col;
    float value;
};

std::vector<Spot> draw_spots(CounterRng& rng, const Region& region, std::size_t count, std::size_t side) {
    std::vector<Spot> spots;
    spots.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t row = region.y0 + rng.below(region.y1 - region.y0 - side + 1);
        const std::size_t col = region.x0 + rng.below(region.x1 - region.x0 - side + 1);
        const auto value = static_cast<float>(0.7 + 0.3 * rng.uniform01());
        spots.push_back({row, col, value});
    }
    return spots;
}

void paint(ImageTensor& img, std::ptrdiff_t row, std::ptrdiff_t col, std::size_t side, float value) {
    const auto h = static_cast<std::ptrdiff_t>(img.height());
    const auto w = static_cast<std::ptrdiff_t>(img.width());
    const auto s = static_cast<std::ptrdiff_t>(side);
    for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(row, 0); y < std::min(row + s, h); ++y) {
        for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(col, 0); x < std::min(col + s, w); ++x) {
            img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = value;
        }
    }
}

ImageTensor render(const ToySuiteConfig& cfg, const std::vector<Spot>& identity, CounterRng& rng) {
    ImageTensor img(cfg.size, cfg.size, 1, 0.0f);
    const auto j = static_cast<std::ptrdiff_t>(cfg.jitter);
    const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(rng.below(2 * cfg.jitter + 1)) - j;
    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(rng.below(2 * cfg.jitter + 1)) - j;
    for (const Spot& s : draw_spots(rng, cfg.region, cfg.nuisance, cfg.nuisance_size)) {
        paint(img, static_cast<std::ptrdiff_t>(s.row), static_cast<std::ptrdiff_t>(s.col), cfg.nuisance_size, s.value);
    }
    for (const Spot& s : identity) {
        paint(img, static_cast<std::ptrdiff_t>(s.row) + dy, static_cast<std::ptrdiff_t>(s.col) + dx, cfg.feature_size,
              s.value);
    }
    for (float& v : img.data()) {
        const double textured = v * (1.0 + cfg.texture * (rng.uniform01() - 0.5));
        v = static_cast<float>(std::clamp(textured + cfg.noise * rng.normal(0.0, 1.0), 0.0, 1.0));
    }
    return img;
}

}  // namespace

ToySuite make_toy_suite(const ToySuiteConfig& cfg) {
    const Region& r = cfg.region;
    if (r.x1 > cfg.size || r.y1 > cfg.size || r.x0 >= r.x1 || r.y0 >= r.y1) {
        throw ConfigError("toy suite region must be a non-empty rectangle inside the image");
    }
    const std::size_t side = std::max(cfg.feature_size, cfg.nuisance_size);
    if (side > r.x1 - r.x0 || side > r.y1 - r.y0) throw ConfigError("toy suite spots do not fit the region");
    if (cfg.pairs == 0) throw ConfigError("toy suite needs at least one pair");

    CounterRng rng(cfg.seed);
    std::vector<std::vector<Spot>> identities;
    for (std::size_t i = 0; i < 2 * cfg.pairs; ++i) identities.push_back(draw_spots(rng, r, cfg.features, cfg.feature_size));

    ToySuite suite;
    for (std::size_t i = 0; i < cfg.pairs; ++i) {
        ImageTensor a = render(cfg, identities[i], rng);
        ImageTensor b = render(cfg, identities[i], rng);
        suite.matching.push_back({std::move(a), std::move(b), true, "match-" + std::to_string(i)});
    }
    for (std::size_t i = 0; i < cfg.pairs; ++i) {
        ImageTensor a = render(cfg, identities[i], rng);
        ImageTensor b = render(cfg, identities[cfg.pairs + i], rng);
        suite.nonmatching.push_back({std::move(a), std::move(b), false, "nonmatch-" + std::to_string(i)});
    }
    return suite;
}

ToyRegionEmbedder toy_suite_embedder(const ToySuiteConfig& cfg) {
    return ToyRegionEmbedder(InputSpec{cfg.size, cfg.size, 1}, cfg.grid, cfg.region);
}

std::vector<ImagePair> make_localization_suite(std::size_t pairs, std::uint64_t seed) {
    std::vector<ImagePair> out;
    out.reserve(pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
        ImageTensor img = blocky_image(CounterRng::derive(seed, i));
        out.push_back({img, img, true, "identical-" + std::to_string(i)});
    }
    return out;
}

ToyRegionEmbedder localization_embedder() { return ToyRegionEmbedder(InputSpec{112, 112, 1}, 8, Region{0, 0, 56, 112}); }

ImageTensor blocky_image(std::uint64_t seed, std::size_t size, std::size_t blocks, double noise) {
    if (blocks == 0 || size % blocks != 0) throw ConfigError("image size must be a multiple of the block count");
    CounterRng rng(seed);
    std::vector<float> tiles(blocks * blocks);
    for (float& t : tiles) t = static_cast<float>(rng.uniform01());
    const std::size_t cell = size / blocks;
    ImageTensor img(size, size, 1, 0.0f);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double v = tiles[(y / cell) * blocks + x / cell] + noise * rng.normal(0.0, 1.0);
            img.at(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return img;
}

ImageTensor uniform_noise_image(std::uint64_t seed, std::size_t height, std::size_t width, std::size_t channels) {
    CounterRng rng(seed);
    ImageTensor img(height, width, channels, 0.0f);
    for (float& v : img.data()) v = static_cast<float>(rng.uniform01());
    return img;
}

}  // namespace corrrise
