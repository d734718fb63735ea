#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corrrise/embedder.hpp"
#include "corrrise/maskgen.hpp"
#include "corrrise/types.hpp"

namespace corrrise {

/// Signed saliency for both images of a pair.
struct ExplainResult {
    SaliencyMap s_a;
    SaliencyMap s_b;
    /// Cosine similarity of the unmasked pair.
    double score_unperturbed = 0.0;
    /// SC_A[k] = cos(f(A * M_k), f(B)); iterations listed in skipped_a are absent.
    ScoreSeries score_series_a;
    ScoreSeries score_series_b;
    /// Mask indices whose masked embedding had zero norm and were left out of the correlation.
    std::vector<std::size_t> skipped_a;
    std::vector<std::size_t> skipped_b;
    std::size_t num_masks = 0;
    std::string backend_id;
};

/// Saliency of one image against a fixed counterpart embedding.
struct SingleExplanation {
    SaliencyMap map;
    ScoreSeries scores;
    std::vector<std::size_t> skipped;
};

/// Masks `img` with every mask, scores each masked embedding against `counterpart`, and
/// correlates per-pixel mask values with the scores.
SingleExplanation explain_image(const Embedder& backend, const ImageTensor& img,
                                std::span<const float> counterpart, std::span<const Mask> masks,
                                std::size_t workers = 1);

/// CorrRISE on a pair with an explicit shared mask stack.
ExplainResult explain_pair(const Embedder& backend, const ImageTensor& a, const ImageTensor& b,
                           std::span<const Mask> masks, std::size_t workers = 1);

/// CorrRISE on a pair; the mask stack is generated from `cfg` at the backend's input size.
ExplainResult explain_pair(const Embedder& backend, const ImageTensor& a, const ImageTensor& b,
                           const MaskGenConfig& cfg, std::size_t workers = 1);

/// (positive part, negative part): values >= 0 go to the first, values < 0 to the second.
std::pair<SaliencyMap, SaliencyMap> split_signed(const SaliencyMap& s);

/// Pearson correlation between two maps of equal size, taken over pixels.
double map_correlation(const SaliencyMap& x, const SaliencyMap& y);

}  // namespace corrrise
