#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corrrise/embedder.hpp"
#include "corrrise/maskgen.hpp"
#include "corrrise/types.hpp"

namespace corrrise {

struct ImagePair {
    ImageTensor a;
    ImageTensor b;
    bool match = true;
    /// Names the pair in error messages.
    std::string id;
};

enum class RankingSource { Signed, PositiveOnly };

struct EvalConfig {
    std::size_t steps = 20;
    double threshold = 0.5;
    float deletion_fill = 0.0f;
    float insertion_base = 0.0f;
    RankingSource ranking = RankingSource::Signed;
    std::size_t workers = 1;
};

void validate(const EvalConfig& cfg);

/// True when cos(f(a), f(b)) >= threshold. A zero-norm embedding is a non-match.
bool decide_match(const Embedder& backend, const ImageTensor& a, const ImageTensor& b, double threshold);

/// Fraction of pairs whose decision agrees with the label.
double verification_accuracy(const Embedder& backend, std::span<const ImagePair> pairs, double threshold,
                             std::size_t workers = 1);

/// Row-major pixel indices by saliency, descending; ties keep row-major order.
/// PositiveOnly places every negative pixel after every non-negative one.
std::vector<std::size_t> rank_pixels(const SaliencyMap& s, RankingSource source = RankingSource::Signed);

/// Number of pixels modified at step k of n: k*total/n rounded half up.
std::size_t step_pixel_count(std::size_t k, std::size_t n, std::size_t total);

/// Saliency maps for both images of one pair.
struct PairMaps {
    SaliencyMap a;
    SaliencyMap b;
};

/// Accuracy while the top-ranked pixels of both images are set to cfg.deletion_fill.
/// Point k is at fraction k/n; point 0 is the unmodified accuracy.
EvalCurve deletion_curve(const Embedder& backend, std::span<const ImagePair> pairs,
                         std::span<const PairMaps> maps, const EvalConfig& cfg);

/// Accuracy while the top-ranked pixels are revealed on a constant cfg.insertion_base image.
EvalCurve insertion_curve(const Embedder& backend, std::span<const ImagePair> pairs,
                          std::span<const PairMaps> maps, const EvalConfig& cfg);

enum class BaselineKind { Random, Center };

/// Random: i.i.d. uniform [-1,1] from `seed`. Center: exp(-d^2 / (2 sigma^2)) around
/// ((H-1)/2, (W-1)/2) with sigma = min(H,W)/4, so the peak is 1 at the exact midpoint.
SaliencyMap baseline_saliency(BaselineKind kind, std::size_t height, std::size_t width, std::uint64_t seed = 0);

/// Stable key of a pair's pixel contents.
std::uint64_t pair_key(const ImagePair& pair);

/// Anything that produces one map per image of a pair.
class SaliencyMethod {
public:
    virtual ~SaliencyMethod() = default;
    virtual std::string name() const = 0;
    /// Everything besides the pair that determines the output, for cache keys and metadata.
    virtual std::string config_key() const = 0;
    virtual PairMaps explain(const ImagePair& pair) const = 0;
};

class CorrRiseMethod final : public SaliencyMethod {
public:
    CorrRiseMethod(const Embedder& backend, MaskGenConfig cfg, std::size_t workers = 1);
    std::string name() const override { return "corrrise"; }
    std::string config_key() const override;
    PairMaps explain(const ImagePair& pair) const override;

private:
    const Embedder& backend_;
    MaskGenConfig cfg_;
    std::size_t workers_;
    std::vector<Mask> masks_;
};

/// Random or center-prior control. Random maps are seeded per pair and image slot.
class BaselineMethod final : public SaliencyMethod {
public:
    BaselineMethod(BaselineKind kind, std::uint64_t seed);
    std::string name() const override { return kind_ == BaselineKind::Random ? "random" : "center"; }
    std::string config_key() const override;
    PairMaps explain(const ImagePair& pair) const override;

private:
    BaselineKind kind_;
    std::uint64_t seed_;
};

/// On-disk map store, one SALM file per image, keyed by (method, config, pair contents).
class SaliencyCache {
public:
    explicit SaliencyCache(std::filesystem::path dir);
    std::optional<PairMaps> load(const SaliencyMethod& method, const ImagePair& pair) const;
    void store(const SaliencyMethod& method, const ImagePair& pair, const PairMaps& maps) const;
    /// File paths for the two maps of a pair.
    std::pair<std::filesystem::path, std::filesystem::path> paths(const SaliencyMethod& method,
                                                                  const ImagePair& pair) const;

private:
    std::filesystem::path dir_;
};

/// Maps for every pair, read from `cache` when present and written back otherwise.
std::vector<PairMaps> compute_maps(const SaliencyMethod& method, std::span<const ImagePair> pairs,
                                   const SaliencyCache* cache = nullptr);

/// Threshold maximizing accuracy on `pairs`; ties go to the widest gap between scores.
/// Needs at least one pair whose embeddings are both non-zero.
double calibrate_threshold(const Embedder& backend, std::span<const ImagePair> pairs);

}  // namespace corrrise
