#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "corrrise/embedder.hpp"
#include "corrrise/explain.hpp"
#include "corrrise/maskgen.hpp"
#include "corrrise/metrics.hpp"
#include "corrrise/onnx_embedder.hpp"
#include "corrrise/toy_suite.hpp"

namespace corrrise {

/// Builds a backend from a model argument: a path to an .onnx file, or a toy spec
/// `toy[:grid=G][:size=S][:channels=C][:region=x0,y0,x1,y1]` (defaults grid 14, size 112,
/// channels 1, no region).
std::unique_ptr<Embedder> make_backend(const std::string& model, const OnnxPreprocess& prep = {});

/// Content hash recorded in metadata: SHA-256 of the model file, or of the toy spec string.
std::string model_hash(const std::string& model);

struct ExplainOptions {
    std::string model;
    OnnxPreprocess prep;
    std::filesystem::path image_a;
    std::filesystem::path image_b;
    double threshold = 0.5;
    MaskGenConfig masks;
    std::size_t workers = 1;
    bool center_crop = true;
    std::filesystem::path out = "out";
};

struct ExplainOutcome {
    ExplainResult result;
    bool match = false;
};

/// Writes a.salm, b.salm, the four S+/S- heatmaps and metadata.json into opts.out.
ExplainOutcome run_explain(const ExplainOptions& opts);

enum class CurvePairs { Matching, All };

struct EvaluateOptions {
    std::string model;
    OnnxPreprocess prep;
    std::filesystem::path manifest;
    std::vector<std::string> methods{"corrrise"};
    EvalConfig eval;
    /// Unset: calibrated on all manifest pairs before any modification.
    std::optional<double> threshold;
    CurvePairs curve_pairs = CurvePairs::Matching;
    MaskGenConfig masks;
    /// Seed of the random baseline.
    std::uint64_t seed = 0;
    bool center_crop = true;
    std::filesystem::path out = "out";
    /// Defaults to <out>/maps.
    std::optional<std::filesystem::path> cache_dir;
};

struct MethodCurves {
    std::string method;
    EvalCurve deletion;
    EvalCurve insertion;
};

struct EvaluateOutcome {
    double threshold = 0.0;
    double baseline_accuracy = 0.0;
    std::vector<MethodCurves> curves;
};

/// Writes <method>_deletion.csv, <method>_insertion.csv, summary.csv, metadata.json and the
/// saliency cache.
EvaluateOutcome run_evaluate(const EvaluateOptions& opts);
/// Same protocol on pairs already in memory; `backend_hash` goes into the metadata.
EvaluateOutcome run_evaluate(const Embedder& backend, const std::string& backend_hash,
                             const std::vector<ImagePair>& pairs, const EvaluateOptions& opts);

struct SanityOptions {
    std::string model;
    OnnxPreprocess prep;
    std::filesystem::path manifest;
    MaskGenConfig masks;
    std::uint64_t randomize_seed = 1;
    std::size_t workers = 1;
    bool center_crop = true;
    std::filesystem::path out = "out";
};

struct SanityOutcome {
    /// |corr(trained map, randomized map)| per pair, averaged over the two images.
    std::vector<double> abs_correlation;
    double mean_abs_correlation = 0.0;
};

/// Writes trained and randomized SALM files per pair, report.csv and metadata.json.
SanityOutcome run_sanity_check(const SanityOptions& opts);
SanityOutcome run_sanity_check(const Embedder& backend, const std::string& backend_hash,
                               const std::vector<ImagePair>& pairs, const SanityOptions& opts);

struct GenMasksOptions {
    std::size_t height = 112;
    std::size_t width = 112;
    MaskGenConfig masks;
    std::filesystem::path out = "out";
};

/// Writes mask_0000.png ... and metadata.json.
void run_genmasks(const GenMasksOptions& opts);

/// Writes the toy suite as PNG files plus manifest.csv (matching and non-matching pairs).
void write_toy_suite(const ToySuiteConfig& cfg, const std::filesystem::path& out);

/// Writes make_localization_suite(pairs, seed) as PNG files plus manifest.csv.
void write_localization_suite(std::size_t pairs, std::uint64_t seed, const std::filesystem::path& out);

}  // namespace corrrise
