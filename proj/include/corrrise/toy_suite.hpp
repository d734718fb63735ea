#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "corrrise/embedder.hpp"
#include "corrrise/metrics.hpp"

namespace corrrise {

/// Synthetic face-like verification set for the toy backend.
///
/// An identity is a set of bright square feature spots inside `region`. Each rendering of an
/// identity shifts all its features by a common random offset, lays random nuisance blobs
/// of its own underneath them, then applies multiplicative texture and additive Gaussian noise.
/// The background is black.
struct ToySuiteConfig {
    std::size_t size = 112;
    std::size_t pairs = 30;
    std::size_t features = 8;
    std::size_t feature_size = 8;
    std::size_t nuisance = 20;
    std::size_t nuisance_size = 8;
    std::size_t jitter = 3;
    double texture = 0.2;
    double noise = 0.02;
    Region region{0, 0, 112, 112};
    std::size_t grid = 28;
    std::uint64_t seed = 7;
};

struct ToySuite {
    /// Two renderings of the same identity.
    std::vector<ImagePair> matching;
    /// Renderings of two different identities.
    std::vector<ImagePair> nonmatching;
};

ToySuite make_toy_suite(const ToySuiteConfig& cfg);

/// The toy backend matching a suite configuration (single channel, grid and region from cfg).
ToyRegionEmbedder toy_suite_embedder(const ToySuiteConfig& cfg);

/// Identical pairs of blocky_image renderings, one seed per pair, for localization and
/// parameter-randomization checks with localization_embedder().
std::vector<ImagePair> make_localization_suite(std::size_t pairs, std::uint64_t seed);

/// Toy backend on 112x112 grayscale, grid 8, sensitive to the left half only.
ToyRegionEmbedder localization_embedder();

/// Grayscale image of blocks x blocks random flat tiles plus Gaussian noise, clipped to [0,1].
ImageTensor blocky_image(std::uint64_t seed, std::size_t size = 112, std::size_t blocks = 14, double noise = 0.05);

/// Every value i.i.d. uniform in [0,1).
ImageTensor uniform_noise_image(std::uint64_t seed, std::size_t height, std::size_t width, std::size_t channels = 1);

}  // namespace corrrise
