#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corrrise/types.hpp"

namespace corrrise {

/// Image geometry a backend accepts.
struct InputSpec {
    std::size_t height = 112;
    std::size_t width = 112;
    std::size_t channels = 3;
    friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

/// Black-box face-recognition model: image -> embedding.
///
/// embed() is const and every shipped backend is safe to call concurrently from several
/// threads; a backend that is not reports thread_safe() == false and callers serialize.
class Embedder {
public:
    virtual ~Embedder() = default;

    virtual InputSpec input_spec() const = 0;
    virtual std::size_t embedding_dim() const = 0;
    virtual bool deterministic() const { return true; }
    virtual bool thread_safe() const { return true; }
    /// Human-readable identity recorded in run metadata.
    virtual std::string id() const = 0;

    /// Validates the image size, runs the backend and checks the output is finite with the
    /// declared dimension. A zero vector is returned as-is; callers decide what it means.
    EmbeddingVector embed(const ImageTensor& img) const;

    /// embed() over a batch; element i equals embed(imgs[i]). On failure the error of the
    /// lowest failing index is rethrown, prefixed with that index.
    std::vector<EmbeddingVector> embed_batch(std::span<const ImageTensor> imgs,
                                             std::size_t workers = 1) const;

    /// A copy with every parameter re-drawn; throws UnsupportedOperation by default.
    virtual std::unique_ptr<Embedder> randomized(std::uint64_t seed) const;

protected:
    virtual EmbeddingVector compute(const ImageTensor& img) const = 0;
};

std::unique_ptr<Embedder> randomize_parameters(const Embedder& backend, std::uint64_t seed);

/// Axis-aligned pixel rectangle [x0, x1) x [y0, y1).
struct Region {
    std::size_t x0 = 0;
    std::size_t y0 = 0;
    std::size_t x1 = 0;
    std::size_t y1 = 0;

    bool contains(std::size_t row, std::size_t col) const {
        return col >= x0 && col < x1 && row >= y0 && row < y1;
    }
    friend bool operator==(const Region&, const Region&) = default;
};

/// Grid average pooler with an analytically known sensitive region.
///
/// The image is split into grid x grid cells; each output component is the mean over one cell
/// and channel of pixel_weight * value, followed by an optional D x D mixing matrix. As built,
/// pixel weights are 1 inside the sensitive region (everywhere when none is set) and 0
/// elsewhere, and mixing is the identity, so the embedding only sees the region.
/// Output order is cell-major (row of cells, column of cells), then channel.
class ToyRegionEmbedder final : public Embedder {
public:
    ToyRegionEmbedder(InputSpec spec, std::size_t grid, std::optional<Region> region = std::nullopt);

    InputSpec input_spec() const override { return spec_; }
    std::size_t embedding_dim() const override { return grid_ * grid_ * spec_.channels; }
    std::string id() const override;
    std::unique_ptr<Embedder> randomized(std::uint64_t seed) const override;

    std::size_t grid() const { return grid_; }
    const std::optional<Region>& region() const { return region_; }
    std::span<const float> pixel_weights() const { return weights_; }
    /// Row-major D x D; empty means identity.
    std::span<const float> mixing() const { return mixing_; }

protected:
    EmbeddingVector compute(const ImageTensor& img) const override;

private:
    InputSpec spec_;
    std::size_t grid_;
    std::optional<Region> region_;
    std::vector<float> weights_;
    std::vector<float> mixing_;
    std::optional<std::uint64_t> randomized_seed_;
};

/// Returns the same vector for every input. Has no parameters to randomize.
class ConstantEmbedder final : public Embedder {
public:
    ConstantEmbedder(InputSpec spec, EmbeddingVector value);

    InputSpec input_spec() const override { return spec_; }
    std::size_t embedding_dim() const override { return value_.size(); }
    std::string id() const override { return "constant(dim=" + std::to_string(value_.size()) + ")"; }

protected:
    EmbeddingVector compute(const ImageTensor&) const override { return value_; }

private:
    InputSpec spec_;
    EmbeddingVector value_;
};

}  // namespace corrrise
