#include "corrrise/embedder.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "corrrise/detail/parallel.hpp"
#include "corrrise/errors.hpp"
#include "corrrise/rng.hpp"

namespace corrrise {
namespace {

std::string shape_str(std::size_t h, std::size_t w, std::size_t c) {
    std::ostringstream os;
    os << h << "x" << w << "x" << c;
    return os.str();
}

// Population mean and standard deviation.
std::pair<double, double> moments(std::span<const float> v) {
    double mean = 0.0;
    for (float x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (float x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return {mean, std::sqrt(var)};
}

}  // namespace

EmbeddingVector Embedder::embed(const ImageTensor& img) const {
    const InputSpec spec = input_spec();
    if (img.height() != spec.height || img.width() != spec.width || img.channels() != spec.channels) {
        throw ContractError("embed: image is " + shape_str(img.height(), img.width(), img.channels()) +
                            " but backend expects " + shape_str(spec.height, spec.width, spec.channels));
    }
    EmbeddingVector out = compute(img);
    if (out.size() != embedding_dim()) {
        throw BackendError("backend " + id() + " returned " + std::to_string(out.size()) +
                           " values, declared " + std::to_string(embedding_dim()));
    }
    for (float v : out) {
        if (!std::isfinite(v)) throw BackendError("backend " + id() + " returned a non-finite value");
    }
    return out;
}

std::vector<EmbeddingVector> Embedder::embed_batch(std::span<const ImageTensor> imgs,
                                                   std::size_t workers) const {
    std::vector<EmbeddingVector> out(imgs.size());
    if (!thread_safe()) workers = 1;
    detail::parallel_for(imgs.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                out[i] = embed(imgs[i]);
            } catch (const ContractError& e) {
                throw ContractError("batch element " + std::to_string(i) + ": " + e.what());
            } catch (const Error& e) {
                throw BackendError("batch element " + std::to_string(i) + ": " + e.what());
            }
        }
    });
    return out;
}

std::unique_ptr<Embedder> Embedder::randomized(std::uint64_t) const {
    throw UnsupportedOperation("backend " + id() + " has no parameters to randomize");
}

std::unique_ptr<Embedder> randomize_parameters(const Embedder& backend, std::uint64_t seed) {
    return backend.randomized(seed);
}

ToyRegionEmbedder::ToyRegionEmbedder(InputSpec spec, std::size_t grid, std::optional<Region> region)
    : spec_(spec), grid_(grid), region_(region) {
    if (spec.channels != 1 && spec.channels != 3) {
        throw ConfigError("toy embedder channels must be 1 or 3");
    }
    if (grid == 0 || grid > spec.height || grid > spec.width) {
        throw ConfigError("toy embedder grid " + std::to_string(grid) + " does not fit " +
                          std::to_string(spec.height) + "x" + std::to_string(spec.width));
    }
    if (region && (region->x0 >= region->x1 || region->y0 >= region->y1 || region->x1 > spec.width ||
                   region->y1 > spec.height)) {
        throw ConfigError("toy embedder region is empty or outside the image");
    }
    weights_.assign(spec.height * spec.width, region ? 0.0f : 1.0f);
    if (region) {
        for (std::size_t y = region->y0; y < region->y1; ++y) {
            for (std::size_t x = region->x0; x < region->x1; ++x) weights_[y * spec.width + x] = 1.0f;
        }
    }
}

std::string ToyRegionEmbedder::id() const {
    std::ostringstream os;
    os << "toy(grid=" << grid_ << ",size=" << spec_.height << "x" << spec_.width
       << ",channels=" << spec_.channels;
    if (region_) {
        os << ",region=" << region_->x0 << "," << region_->y0 << "," << region_->x1 << ","
           << region_->y1;
    }
    os << ")";
    if (randomized_seed_) os << "+randomized(seed=" << *randomized_seed_ << ")";
    return os.str();
}

EmbeddingVector ToyRegionEmbedder::compute(const ImageTensor& img) const {
    const std::size_t h = spec_.height;
    const std::size_t w = spec_.width;
    const std::size_t c = spec_.channels;
    const std::size_t g = grid_;
    std::vector<double> sums(g * g * c, 0.0);
    auto src = img.data();
    for (std::size_t y = 0; y < h; ++y) {
        const std::size_t cy = y * g / h;
        for (std::size_t x = 0; x < w; ++x) {
            const float wt = weights_[y * w + x];
            if (wt == 0.0f) continue;
            const std::size_t cell = (cy * g + x * g / w) * c;
            const float* px = src.data() + (y * w + x) * c;
            for (std::size_t ch = 0; ch < c; ++ch) sums[cell + ch] += static_cast<double>(wt) * px[ch];
        }
    }
    // Pixel y belongs to cell row floor(y * g / h), i.e. rows [ceil(cy*h/g), ceil((cy+1)*h/g)).
    const auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
    std::vector<double> pooled(sums.size());
    for (std::size_t cy = 0; cy < g; ++cy) {
        const std::size_t rows = ceil_div((cy + 1) * h, g) - ceil_div(cy * h, g);
        for (std::size_t cx = 0; cx < g; ++cx) {
            const std::size_t cols = ceil_div((cx + 1) * w, g) - ceil_div(cx * w, g);
            const auto count = static_cast<double>(rows * cols);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t i = (cy * g + cx) * c + ch;
                pooled[i] = sums[i] / count;
            }
        }
    }
    EmbeddingVector out(pooled.size());
    if (mixing_.empty()) {
        for (std::size_t i = 0; i < pooled.size(); ++i) out[i] = static_cast<float>(pooled[i]);
        return out;
    }
    const std::size_t d = pooled.size();
    for (std::size_t r = 0; r < d; ++r) {
        double acc = 0.0;
        const float* row = mixing_.data() + r * d;
        for (std::size_t k = 0; k < d; ++k) acc += static_cast<double>(row[k]) * pooled[k];
        out[r] = static_cast<float>(acc);
    }
    return out;
}

std::unique_ptr<Embedder> ToyRegionEmbedder::randomized(std::uint64_t seed) const {
    auto out = std::make_unique<ToyRegionEmbedder>(*this);
    CounterRng rng(seed);

    const auto [wmean, wstd] = moments(weights_);
    for (float& v : out->weights_) v = static_cast<float>(rng.normal(wmean, wstd));

    const std::size_t d = embedding_dim();
    std::vector<float> current = mixing_;
    if (current.empty()) {
        current.assign(d * d, 0.0f);
        for (std::size_t i = 0; i < d; ++i) current[i * d + i] = 1.0f;
    }
    const auto [mmean, mstd] = moments(current);
    out->mixing_.resize(d * d);
    for (float& v : out->mixing_) v = static_cast<float>(rng.normal(mmean, mstd));

    out->randomized_seed_ = seed;
    return out;
}

ConstantEmbedder::ConstantEmbedder(InputSpec spec, EmbeddingVector value)
    : spec_(spec), value_(std::move(value)) {
    if (value_.empty()) throw ConfigError("constant embedder needs a non-empty vector");
}

}  // namespace corrrise
