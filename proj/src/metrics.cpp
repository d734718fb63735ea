#include "corrrise/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "corrrise/detail/parallel.hpp"
#include "corrrise/errors.hpp"
#include "corrrise/explain.hpp"
#include "corrrise/hash.hpp"
#include "corrrise/numerics.hpp"
#include "corrrise/rng.hpp"
#include "corrrise/salm.hpp"

namespace corrrise {
namespace {

bool zero_norm(std::span<const float> v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; });
}

std::optional<double> pair_score(const Embedder& backend, const ImageTensor& a, const ImageTensor& b) {
    const EmbeddingVector ea = backend.embed(a);
    const EmbeddingVector eb = backend.embed(b);
    if (zero_norm(ea) || zero_norm(eb)) return std::nullopt;
    return cosine_similarity(ea, eb);
}

std::string pair_name(const ImagePair& p, std::size_t index) {
    return p.id.empty() ? "pair " + std::to_string(index) : "pair " + p.id;
}

void check_maps(std::span<const ImagePair> pairs, std::span<const PairMaps> maps) {
    if (pairs.size() != maps.size()) throw ContractError("one saliency map pair is needed per image pair");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        const auto& m = maps[i];
        if (!p.a.same_shape(p.b)) throw ContractError(pair_name(p, i) + ": images differ in shape");
        if (m.a.height() != p.a.height() || m.a.width() != p.a.width() || m.b.height() != p.b.height() ||
            m.b.width() != p.b.width()) {
            throw ContractError(pair_name(p, i) + ": saliency map size does not match the image");
        }
    }
}

enum class CurveKind { Deletion, Insertion };

ImageTensor modify(const ImageTensor& img, std::span<const std::size_t> order, std::size_t count, CurveKind kind,
                   float constant) {
    const std::size_t c = img.channels();
    if (kind == CurveKind::Deletion) {
        ImageTensor out = img;
        auto dst = out.data();
        for (std::size_t r = 0; r < count; ++r) {
            for (std::size_t ch = 0; ch < c; ++ch) dst[order[r] * c + ch] = constant;
        }
        return out;
    }
    ImageTensor out(img.height(), img.width(), c, constant);
    auto dst = out.data();
    auto src = img.data();
    for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t ch = 0; ch < c; ++ch) dst[order[r] * c + ch] = src[order[r] * c + ch];
    }
    return out;
}

EvalCurve run_curve(const Embedder& backend, std::span<const ImagePair> pairs, std::span<const PairMaps> maps,
                    const EvalConfig& cfg, CurveKind kind) {
    validate(cfg);
    if (pairs.empty()) throw ContractError("evaluation needs at least one pair");
    check_maps(pairs, maps);
    const float constant = kind == CurveKind::Deletion ? cfg.deletion_fill : cfg.insertion_base;

    std::vector<std::vector<std::size_t>> order_a(pairs.size()), order_b(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        order_a[i] = rank_pixels(maps[i].a, cfg.ranking);
        order_b[i] = rank_pixels(maps[i].b, cfg.ranking);
    }

    const std::size_t workers = backend.thread_safe() ? cfg.workers : 1;
    EvalCurve curve;
    for (std::size_t k = 0; k <= cfg.steps; ++k) {
        std::vector<char> correct(pairs.size(), 0);
        try {
            detail::parallel_for(pairs.size(), workers, [&](std::size_t begin, std::size_t end) {
                for (std::size_t i = begin; i < end; ++i) {
                    const ImagePair& p = pairs[i];
                    const std::size_t total = p.a.pixel_count();
                    const std::size_t count = step_pixel_count(k, cfg.steps, total);
                    try {
                        const ImageTensor a = modify(p.a, order_a[i], count, kind, constant);
                        const ImageTensor b = modify(p.b, order_b[i], count, kind, constant);
                        correct[i] = decide_match(backend, a, b, cfg.threshold) == p.match;
                    } catch (const Error& e) {
                        throw BackendError(pair_name(p, i) + ": " + e.what());
                    }
                }
            });
        } catch (const BackendError& e) {
            throw BackendError("step " + std::to_string(k) + ": " + e.what());
        }
        const auto hits = static_cast<double>(std::count(correct.begin(), correct.end(), 1));
        curve.points.push_back({static_cast<double>(k) / static_cast<double>(cfg.steps),
                                hits / static_cast<double>(pairs.size())});
    }
    curve.points.back().fraction = 1.0;
    curve.auc_percent = auc_trapezoid(curve.points);
    return curve;
}

}  // namespace

void validate(const EvalConfig& cfg) {
    if (cfg.steps < 2) throw ConfigError("steps must be at least 2");
    if (!std::isfinite(cfg.threshold)) throw ConfigError("threshold must be finite");
    if (!(cfg.deletion_fill >= 0.0f && cfg.deletion_fill <= 1.0f)) throw ConfigError("deletion fill must be in [0,1]");
    if (!(cfg.insertion_base >= 0.0f && cfg.insertion_base <= 1.0f)) {
        throw ConfigError("insertion base must be in [0,1]");
    }
}

bool decide_match(const Embedder& backend, const ImageTensor& a, const ImageTensor& b, double threshold) {
    const auto score = pair_score(backend, a, b);
    return score && *score >= threshold;
}

double verification_accuracy(const Embedder& backend, std::span<const ImagePair> pairs, double threshold,
                             std::size_t workers) {
    if (pairs.empty()) throw ContractError("verification_accuracy: no pairs");
    std::vector<char> correct(pairs.size(), 0);
    if (!backend.thread_safe()) workers = 1;
    detail::parallel_for(pairs.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                correct[i] = decide_match(backend, pairs[i].a, pairs[i].b, threshold) == pairs[i].match;
            } catch (const ContractError& e) {
                throw ContractError(pair_name(pairs[i], i) + ": " + e.what());
            } catch (const Error& e) {
                throw BackendError(pair_name(pairs[i], i) + ": " + e.what());
            }
        }
    });
    return static_cast<double>(std::count(correct.begin(), correct.end(), 1)) / static_cast<double>(pairs.size());
}

std::vector<std::size_t> rank_pixels(const SaliencyMap& s, RankingSource source) {
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto values = s.data();
    if (source == RankingSource::Signed) {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return values[x] > values[y]; });
    } else {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            const bool nx = values[x] < 0.0f, ny = values[y] < 0.0f;
            if (nx != ny) return ny;
            return values[x] > values[y];
        });
    }
    return order;
}

std::size_t step_pixel_count(std::size_t k, std::size_t n, std::size_t total) {
    if (n == 0 || k > n) throw ContractError("step index out of range");
    return (2 * k * total + n) / (2 * n);
}

EvalCurve deletion_curve(const Embedder& backend, std::span<const ImagePair> pairs, std::span<const PairMaps> maps,
                         const EvalConfig& cfg) {
    return run_curve(backend, pairs, maps, cfg, CurveKind::Deletion);
}

EvalCurve insertion_curve(const Embedder& backend, std::span<const ImagePair> pairs, std::span<const PairMaps> maps,
                          const EvalConfig& cfg) {
    return run_curve(backend, pairs, maps, cfg, CurveKind::Insertion);
}

SaliencyMap baseline_saliency(BaselineKind kind, std::size_t height, std::size_t width, std::uint64_t seed) {
    if (height == 0 || width == 0) throw ContractError("baseline saliency needs positive dimensions");
    SaliencyMap s(height, width, 0.0f);
    if (kind == BaselineKind::Random) {
        CounterRng rng(seed);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(2.0 * rng.uniform01() - 1.0);
        return s;
    }
    const double cy = (static_cast<double>(height) - 1.0) / 2.0;
    const double cx = (static_cast<double>(width) - 1.0) / 2.0;
    const double sigma = static_cast<double>(std::min(height, width)) / 4.0;
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const double dy = static_cast<double>(y) - cy;
            const double dx = static_cast<double>(x) - cx;
            s.at(y, x) = static_cast<float>(std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma)));
        }
    }
    return s;
}

std::uint64_t pair_key(const ImagePair& pair) {
    std::string buf;
    for (const ImageTensor* img : {&pair.a, &pair.b}) {
        buf += std::to_string(img->height()) + "x" + std::to_string(img->width()) + "x" +
               std::to_string(img->channels()) + ";";
        auto d = img->data();
        buf.append(reinterpret_cast<const char*>(d.data()), d.size_bytes());
    }
    return hash64(buf);
}

CorrRiseMethod::CorrRiseMethod(const Embedder& backend, MaskGenConfig cfg, std::size_t workers)
    : backend_(backend), cfg_(cfg), workers_(workers) {
    const InputSpec spec = backend.input_spec();
    masks_ = generate_stack(cfg_, spec.height, spec.width);
}

std::string CorrRiseMethod::config_key() const {
    const InputSpec spec = backend_.input_spec();
    std::ostringstream os;
    os << "backend=" << backend_.id() << ";N=" << cfg_.num_masks << ";patches=" << cfg_.patches_per_mask
       << ";patch=" << effective_patch_size(cfg_, spec.height, spec.width) << ";blur=" << cfg_.blur_radius
       << ";seed=" << cfg_.seed;
    return os.str();
}

PairMaps CorrRiseMethod::explain(const ImagePair& pair) const {
    ExplainResult r = explain_pair(backend_, pair.a, pair.b, masks_, workers_);
    return {std::move(r.s_a), std::move(r.s_b)};
}

BaselineMethod::BaselineMethod(BaselineKind kind, std::uint64_t seed) : kind_(kind), seed_(seed) {}

std::string BaselineMethod::config_key() const {
    return kind_ == BaselineKind::Random ? "seed=" + std::to_string(seed_) : "sigma=min/4";
}

PairMaps BaselineMethod::explain(const ImagePair& pair) const {
    const std::uint64_t key = CounterRng::derive(seed_, pair_key(pair));
    return {baseline_saliency(kind_, pair.a.height(), pair.a.width(), CounterRng::derive(key, 0)),
            baseline_saliency(kind_, pair.b.height(), pair.b.width(), CounterRng::derive(key, 1))};
}

SaliencyCache::SaliencyCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::pair<std::filesystem::path, std::filesystem::path> SaliencyCache::paths(const SaliencyMethod& method,
                                                                             const ImagePair& pair) const {
    const std::uint64_t key = hash64(method.name() + "|" + method.config_key() + "|" + std::to_string(pair_key(pair)));
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(key));
    const std::string stem = method.name() + "_" + hex;
    return {dir_ / (stem + "_a.salm"), dir_ / (stem + "_b.salm")};
}

std::optional<PairMaps> SaliencyCache::load(const SaliencyMethod& method, const ImagePair& pair) const {
    const auto [pa, pb] = paths(method, pair);
    if (!std::filesystem::exists(pa) || !std::filesystem::exists(pb)) return std::nullopt;
    return PairMaps{load_saliency(pa), load_saliency(pb)};
}

void SaliencyCache::store(const SaliencyMethod& method, const ImagePair& pair, const PairMaps& maps) const {
    const auto [pa, pb] = paths(method, pair);
    save_saliency(maps.a, pa);
    save_saliency(maps.b, pb);
}

std::vector<PairMaps> compute_maps(const SaliencyMethod& method, std::span<const ImagePair> pairs,
                                   const SaliencyCache* cache) {
    std::vector<PairMaps> out;
    out.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const ImagePair& p = pairs[i];
        if (cache) {
            if (auto hit = cache->load(method, p)) {
                out.push_back(std::move(*hit));
                continue;
            }
        }
        try {
            out.push_back(method.explain(p));
        } catch (const ContractError& e) {
            throw ContractError(pair_name(p, i) + ": " + e.what());
        } catch (const DegenerateInputError& e) {
            throw DegenerateInputError(pair_name(p, i) + ": " + e.what());
        } catch (const Error& e) {
            throw BackendError(pair_name(p, i) + ": " + e.what());
        }
        if (cache) cache->store(method, p, out.back());
    }
    return out;
}

double calibrate_threshold(const Embedder& backend, std::span<const ImagePair> pairs) {
    std::vector<double> scores;
    std::vector<std::pair<double, bool>> labelled;
    for (const ImagePair& p : pairs) {
        if (const auto s = pair_score(backend, p.a, p.b)) {
            scores.push_back(*s);
            labelled.emplace_back(*s, p.match);
        }
    }
    if (scores.empty()) throw DegenerateInputError("calibrate_threshold: no pair has non-zero embeddings");
    scores.push_back(-1.0);
    scores.push_back(1.0);
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

    double best_t = 0.0, best_gap = -1.0;
    std::size_t best_hits = 0;
    for (std::size_t k = 0; k + 1 < scores.size(); ++k) {
        const double t = 0.5 * (scores[k] + scores[k + 1]);
        const double gap = scores[k + 1] - scores[k];
        std::size_t hits = 0;
        for (const auto& [s, match] : labelled) hits += (s >= t) == match;
        if (hits > best_hits || (hits == best_hits && gap > best_gap)) {
            best_hits = hits;
            best_gap = gap;
            best_t = t;
        }
    }
    return best_t;
}

}  // namespace corrrise
