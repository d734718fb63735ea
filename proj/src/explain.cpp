#include "corrrise/explain.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "corrrise/detail/parallel.hpp"
#include "corrrise/errors.hpp"
#include "corrrise/numerics.hpp"

namespace corrrise {
namespace {

bool zero_norm(std::span<const float> v) {
    for (float x : v) {
        if (x != 0.0f) return false;
    }
    return true;
}

}  // namespace

SingleExplanation explain_image(const Embedder& backend, const ImageTensor& img,
                                std::span<const float> counterpart, std::span<const Mask> masks,
                                std::size_t workers) {
    if (masks.size() < 2) throw ContractError("explain: need at least 2 masks");
    for (const Mask& m : masks) {
        if (m.height() != img.height() || m.width() != img.width()) {
            throw ContractError("explain: mask size does not match the image");
        }
    }
    if (zero_norm(counterpart)) throw DegenerateInputError("explain: counterpart embedding has zero norm");

    std::vector<std::optional<double>> slots(masks.size());
    if (!backend.thread_safe()) workers = 1;
    detail::parallel_for(masks.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            EmbeddingVector e;
            try {
                e = backend.embed(apply_mask(img, masks[k]));
            } catch (const ContractError& err) {
                throw ContractError("iteration " + std::to_string(k) + ": " + err.what());
            } catch (const Error& err) {
                throw BackendError("iteration " + std::to_string(k) + ": " + err.what());
            }
            if (!zero_norm(e)) slots[k] = cosine_similarity(e, counterpart);
        }
    });

    SingleExplanation out;
    out.scores.reserve(masks.size());
    for (std::size_t k = 0; k < slots.size(); ++k) {
        if (slots[k]) out.scores.push_back(*slots[k]);
        else out.skipped.push_back(k);
    }
    if (out.scores.size() < 2) {
        throw DegenerateInputError("explain: fewer than 2 masks produced a usable embedding");
    }
    if (out.skipped.empty()) {
        out.map = correlation_map(out.scores, masks, workers);
    } else {
        std::vector<Mask> kept;
        kept.reserve(out.scores.size());
        for (std::size_t k = 0; k < slots.size(); ++k) {
            if (slots[k]) kept.push_back(masks[k]);
        }
        out.map = correlation_map(out.scores, kept, workers);
    }
    return out;
}

ExplainResult explain_pair(const Embedder& backend, const ImageTensor& a, const ImageTensor& b,
                           std::span<const Mask> masks, std::size_t workers) {
    if (!a.same_shape(b)) throw ContractError("explain: images differ in shape");
    const EmbeddingVector ea = backend.embed(a);
    const EmbeddingVector eb = backend.embed(b);

    ExplainResult r;
    r.score_unperturbed = cosine_similarity(ea, eb);
    SingleExplanation xa = explain_image(backend, a, eb, masks, workers);
    SingleExplanation xb = explain_image(backend, b, ea, masks, workers);
    r.s_a = std::move(xa.map);
    r.s_b = std::move(xb.map);
    r.score_series_a = std::move(xa.scores);
    r.score_series_b = std::move(xb.scores);
    r.skipped_a = std::move(xa.skipped);
    r.skipped_b = std::move(xb.skipped);
    r.num_masks = masks.size();
    r.backend_id = backend.id();
    return r;
}

ExplainResult explain_pair(const Embedder& backend, const ImageTensor& a, const ImageTensor& b,
                           const MaskGenConfig& cfg, std::size_t workers) {
    const InputSpec spec = backend.input_spec();
    const std::vector<Mask> masks = generate_stack(cfg, spec.height, spec.width);
    return explain_pair(backend, a, b, masks, workers);
}

std::pair<SaliencyMap, SaliencyMap> split_signed(const SaliencyMap& s) {
    SaliencyMap pos(s.height(), s.width(), 0.0f);
    SaliencyMap neg(s.height(), s.width(), 0.0f);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] >= 0.0f) pos[i] = s[i];
        else neg[i] = s[i];
    }
    return {std::move(pos), std::move(neg)};
}

double map_correlation(const SaliencyMap& x, const SaliencyMap& y) {
    if (x.height() != y.height() || x.width() != y.width()) {
        throw ContractError("map_correlation: maps differ in size");
    }
    std::vector<double> xs(x.data().begin(), x.data().end());
    std::vector<double> ys(y.data().begin(), y.data().end());
    return pearson_correlation(xs, ys);
}

}  // namespace corrrise
