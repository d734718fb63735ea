#include "corrrise/run.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "corrrise/errors.hpp"
#include "corrrise/hash.hpp"
#include "corrrise/io.hpp"
#include "corrrise/numerics.hpp"
#include "corrrise/salm.hpp"
#include "json.hpp"

namespace corrrise {
namespace {

using nlohmann::json;

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("toy model: '" + key + "' expects a non-negative integer, got '" + value + "'");
    }
}

json mask_json(const MaskGenConfig& m, std::size_t h, std::size_t w) {
    return {{"num_masks", m.num_masks},
            {"patches_per_mask", m.patches_per_mask},
            {"patch_size", effective_patch_size(m, h, w)},
            {"blur_radius", m.blur_radius},
            {"seed", m.seed},
            {"rng", "splitmix64-counter; per patch: row, col, value"},
            {"base_value", 0},
            {"merge", "max"}};
}

json backend_json(const Embedder& backend, const std::string& hash) {
    const InputSpec s = backend.input_spec();
    json j = {{"id", backend.id()},
              {"hash", hash},
              {"input", {s.height, s.width, s.channels}},
              {"embedding_dim", backend.embedding_dim()}};
    if (const auto* onnx = dynamic_cast<const OnnxEmbedder*>(&backend)) {
        const auto& p = onnx->preprocess();
        j["preprocess"] = {{"mean", p.mean}, {"std", p.std}, {"channel_order", p.bgr ? "BGR" : "RGB"}};
    }
    return j;
}

void write_metadata(const std::filesystem::path& dir, json record) {
    json doc = {{"record", std::move(record)}, {"timestamp", utc_now()}};
    write_file_atomic(dir / "metadata.json", doc.dump(2) + "\n");
}

std::string curve_csv(const EvalCurve& c) {
    std::string out = "step,fraction,accuracy\n";
    for (std::size_t k = 0; k < c.points.size(); ++k) {
        out += std::to_string(k) + "," + fmt("%.10g", c.points[k].fraction) + "," + fmt("%.10g", c.points[k].accuracy) +
               "\n";
    }
    return out;
}

json curve_json(const EvalCurve& c) {
    json pts = json::array();
    for (const auto& p : c.points) pts.push_back({p.fraction, p.accuracy});
    return {{"points", pts}, {"auc_percent", c.auc_percent}};
}

std::unique_ptr<SaliencyMethod> make_method(const std::string& name, const Embedder& backend,
                                            const EvaluateOptions& opts) {
    if (name == "corrrise") return std::make_unique<CorrRiseMethod>(backend, opts.masks, opts.eval.workers);
    if (name == "random") return std::make_unique<BaselineMethod>(BaselineKind::Random, opts.seed);
    if (name == "center") return std::make_unique<BaselineMethod>(BaselineKind::Center, opts.seed);
    throw ConfigError("unknown saliency method '" + name + "' (expected corrrise, random or center)");
}

std::vector<ImagePair> load_manifest_pairs(const std::filesystem::path& path, const Embedder& backend,
                                           bool center_crop) {
    return load_pairs(load_manifest(path), backend.input_spec(), center_crop);
}

}  // namespace

std::unique_ptr<Embedder> make_backend(const std::string& model, const OnnxPreprocess& prep) {
    if (model == "toy" || model.rfind("toy:", 0) == 0) {
        std::size_t grid = 14, size = 112, channels = 1;
        std::optional<Region> region;
        std::stringstream ss(model.size() > 3 ? model.substr(4) : "");
        std::string part;
        while (std::getline(ss, part, ':')) {
            const auto eq = part.find('=');
            if (eq == std::string::npos) throw ConfigError("toy model: expected key=value, got '" + part + "'");
            const std::string key = part.substr(0, eq), value = part.substr(eq + 1);
            if (key == "grid") grid = parse_size(key, value);
            else if (key == "size") size = parse_size(key, value);
            else if (key == "channels") channels = parse_size(key, value);
            else if (key == "region") {
                std::stringstream rs(value);
                std::string v;
                std::vector<std::size_t> xs;
                while (std::getline(rs, v, ',')) xs.push_back(parse_size(key, v));
                if (xs.size() != 4) throw ConfigError("toy model: region needs x0,y0,x1,y1");
                region = Region{xs[0], xs[1], xs[2], xs[3]};
            } else {
                throw ConfigError("toy model: unknown key '" + key + "'");
            }
        }
        return std::make_unique<ToyRegionEmbedder>(InputSpec{size, size, channels}, grid, region);
    }
    if (!std::filesystem::exists(model)) throw DataError("model file not found: " + model);
    return std::make_unique<OnnxEmbedder>(std::filesystem::path(model), prep);
}

std::string model_hash(const std::string& model) {
    if (model == "toy" || model.rfind("toy:", 0) == 0) return sha256_hex(model);
    return sha256_file(model);
}

ExplainOutcome run_explain(const ExplainOptions& opts) {
    const auto backend = make_backend(opts.model, opts.prep);
    const InputSpec spec = backend->input_spec();
    const ImageTensor a = load_image(opts.image_a, spec.height, spec.width, spec.channels, opts.center_crop);
    const ImageTensor b = load_image(opts.image_b, spec.height, spec.width, spec.channels, opts.center_crop);

    ExplainOutcome out;
    out.result = explain_pair(*backend, a, b, opts.masks, opts.workers);
    out.match = out.result.score_unperturbed >= opts.threshold;

    ensure_dir(opts.out);
    save_saliency(out.result.s_a, opts.out / "a.salm");
    save_saliency(out.result.s_b, opts.out / "b.salm");
    const auto [pa, na] = split_signed(out.result.s_a);
    const auto [pb, nb] = split_signed(out.result.s_b);
    write_heatmap(a, pa, HeatmapMode::Positive, opts.out / "a_positive.png");
    write_heatmap(a, na, HeatmapMode::Negative, opts.out / "a_negative.png");
    write_heatmap(b, pb, HeatmapMode::Positive, opts.out / "b_positive.png");
    write_heatmap(b, nb, HeatmapMode::Negative, opts.out / "b_negative.png");

    json rec = {{"command", "explain"},
                {"backend", backend_json(*backend, model_hash(opts.model))},
                {"image_a", {{"path", opts.image_a.string()}, {"sha256", sha256_file(opts.image_a)}}},
                {"image_b", {{"path", opts.image_b.string()}, {"sha256", sha256_file(opts.image_b)}}},
                {"center_crop", opts.center_crop},
                {"masks", mask_json(opts.masks, spec.height, spec.width)},
                {"threshold", opts.threshold},
                {"score_unperturbed", out.result.score_unperturbed},
                {"decision", out.match ? "match" : "nonmatch"},
                {"skipped_iterations_a", out.result.skipped_a},
                {"skipped_iterations_b", out.result.skipped_b},
                {"heatmap", "warm ramp = positive (similar), cool ramp = negative (dissimilar), opacity = |value| / max|value|"},
                {"zero_routing", "values >= 0 go to the positive map"}};
    write_metadata(opts.out, std::move(rec));
    return out;
}

EvaluateOutcome run_evaluate(const EvaluateOptions& opts) {
    validate(opts.eval);
    if (opts.methods.empty()) throw ConfigError("evaluate: no saliency method selected");
    const auto backend = make_backend(opts.model, opts.prep);
    const auto pairs = load_manifest_pairs(opts.manifest, *backend, opts.center_crop);
    return run_evaluate(*backend, model_hash(opts.model), pairs, opts);
}

EvaluateOutcome run_evaluate(const Embedder& backend, const std::string& backend_hash,
                             const std::vector<ImagePair>& pairs, const EvaluateOptions& opts) {
    if (pairs.empty()) throw DataError("evaluate: manifest has no pairs");
    if (opts.methods.empty()) throw ConfigError("evaluate: no saliency method selected");
    validate(opts.eval);

    EvaluateOutcome out;
    out.threshold = opts.threshold ? *opts.threshold : calibrate_threshold(backend, pairs);
    EvalConfig cfg = opts.eval;
    cfg.threshold = out.threshold;

    std::vector<ImagePair> curve_pairs;
    for (const ImagePair& p : pairs) {
        if (opts.curve_pairs == CurvePairs::All || p.match) curve_pairs.push_back(p);
    }
    if (curve_pairs.empty()) throw DataError("evaluate: manifest has no matching pairs to evaluate");
    out.baseline_accuracy = verification_accuracy(backend, curve_pairs, cfg.threshold, cfg.workers);

    ensure_dir(opts.out);
    const SaliencyCache cache(opts.cache_dir ? *opts.cache_dir : opts.out / "maps");
    std::string summary = "method,deletion_auc,insertion_auc\n";
    json methods = json::array();
    for (const std::string& name : opts.methods) {
        const auto method = make_method(name, backend, opts);
        const auto maps = compute_maps(*method, curve_pairs, &cache);
        MethodCurves mc{name, deletion_curve(backend, curve_pairs, maps, cfg),
                        insertion_curve(backend, curve_pairs, maps, cfg)};
        write_file_atomic(opts.out / (name + "_deletion.csv"), curve_csv(mc.deletion));
        write_file_atomic(opts.out / (name + "_insertion.csv"), curve_csv(mc.insertion));
        summary += name + "," + fmt("%.6f", mc.deletion.auc_percent) + "," + fmt("%.6f", mc.insertion.auc_percent) + "\n";
        methods.push_back({{"method", name},
                           {"config", method->config_key()},
                           {"deletion", curve_json(mc.deletion)},
                           {"insertion", curve_json(mc.insertion)}});
        out.curves.push_back(std::move(mc));
    }
    write_file_atomic(opts.out / "summary.csv", summary);

    const InputSpec spec = backend.input_spec();
    json pair_ids = json::array();
    for (const ImagePair& p : curve_pairs) pair_ids.push_back(p.id);
    json rec = {{"command", "evaluate"},
                {"backend", backend_json(backend, backend_hash)},
                {"manifest", opts.manifest.string()},
                {"pairs_total", pairs.size()},
                {"curve_pairs", opts.curve_pairs == CurvePairs::Matching ? "matching" : "all"},
                {"curve_pair_ids", pair_ids},
                {"center_crop", opts.center_crop},
                {"threshold", out.threshold},
                {"threshold_source", opts.threshold ? "given" : "calibrated: max accuracy on unmodified pairs"},
                {"baseline_accuracy", out.baseline_accuracy},
                {"steps", cfg.steps},
                {"deletion_fill", cfg.deletion_fill},
                {"insertion_base", cfg.insertion_base},
                {"ranking", cfg.ranking == RankingSource::Signed ? "signed" : "positive-only"},
                {"modification", "both images of a pair, each by its own map"},
                {"baseline_seed", opts.seed},
                {"masks", mask_json(opts.masks, spec.height, spec.width)},
                {"methods", methods}};
    if (!opts.manifest.empty() && std::filesystem::exists(opts.manifest)) {
        rec["manifest_sha256"] = sha256_file(opts.manifest);
    }
    write_metadata(opts.out, std::move(rec));
    return out;
}

SanityOutcome run_sanity_check(const SanityOptions& opts) {
    const auto backend = make_backend(opts.model, opts.prep);
    const auto pairs = load_manifest_pairs(opts.manifest, *backend, opts.center_crop);
    return run_sanity_check(*backend, model_hash(opts.model), pairs, opts);
}

SanityOutcome run_sanity_check(const Embedder& backend, const std::string& backend_hash,
                               const std::vector<ImagePair>& pairs, const SanityOptions& opts) {
    if (pairs.empty()) throw DataError("sanity-check: manifest has no pairs");
    const auto randomized = randomize_parameters(backend, opts.randomize_seed);
    const InputSpec spec = backend.input_spec();
    const std::vector<Mask> masks = generate_stack(opts.masks, spec.height, spec.width);

    ensure_dir(opts.out);
    SanityOutcome out;
    std::string report = "pair,corr_a,corr_b,mean_abs\n";
    json rows = json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const ImagePair& p = pairs[i];
        const ExplainResult trained = explain_pair(backend, p.a, p.b, masks, opts.workers);
        const ExplainResult rand = explain_pair(*randomized, p.a, p.b, masks, opts.workers);
        const double ca = map_correlation(trained.s_a, rand.s_a);
        const double cb = map_correlation(trained.s_b, rand.s_b);
        const double m = 0.5 * (std::abs(ca) + std::abs(cb));
        out.abs_correlation.push_back(m);
        const std::string stem = "pair" + std::to_string(i);
        save_saliency(trained.s_a, opts.out / (stem + "_a_trained.salm"));
        save_saliency(trained.s_b, opts.out / (stem + "_b_trained.salm"));
        save_saliency(rand.s_a, opts.out / (stem + "_a_randomized.salm"));
        save_saliency(rand.s_b, opts.out / (stem + "_b_randomized.salm"));
        report += p.id + "," + fmt("%.10g", ca) + "," + fmt("%.10g", cb) + "," + fmt("%.10g", m) + "\n";
        rows.push_back({{"pair", p.id}, {"corr_a", ca}, {"corr_b", cb}});
    }
    double sum = 0.0;
    for (double v : out.abs_correlation) sum += v;
    out.mean_abs_correlation = sum / static_cast<double>(out.abs_correlation.size());
    report += "mean,,," + fmt("%.10g", out.mean_abs_correlation) + "\n";
    write_file_atomic(opts.out / "report.csv", report);

    json rec = {{"command", "sanity-check"},
                {"backend", backend_json(backend, backend_hash)},
                {"randomized_backend", randomized->id()},
                {"randomize_seed", opts.randomize_seed},
                {"randomization", "every parameter re-drawn i.i.d. from its tensor's mean and std"},
                {"manifest", opts.manifest.string()},
                {"masks", mask_json(opts.masks, spec.height, spec.width)},
                {"pairs", rows},
                {"mean_abs_correlation", out.mean_abs_correlation}};
    write_metadata(opts.out, std::move(rec));
    return out;
}

void run_genmasks(const GenMasksOptions& opts) {
    const auto stack = generate_stack(opts.masks, opts.height, opts.width);
    ensure_dir(opts.out);
    for (std::size_t k = 0; k < stack.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "mask_%04zu.png", k);
        write_mask_png(stack[k], opts.out / name);
    }
    write_metadata(opts.out, {{"command", "genmasks"},
                              {"height", opts.height},
                              {"width", opts.width},
                              {"masks", mask_json(opts.masks, opts.height, opts.width)}});
}

void write_toy_suite(const ToySuiteConfig& cfg, const std::filesystem::path& out) {
    const ToySuite suite = make_toy_suite(cfg);
    ensure_dir(out);
    std::string manifest = "path_a,path_b,label\n";
    auto emit = [&](const std::vector<ImagePair>& pairs) {
        for (const ImagePair& p : pairs) {
            const std::string a = p.id + "_a.png", b = p.id + "_b.png";
            write_png(p.a, out / a);
            write_png(p.b, out / b);
            manifest += a + "," + b + "," + (p.match ? "match" : "nonmatch") + "\n";
        }
    };
    emit(suite.matching);
    emit(suite.nonmatching);
    write_file_atomic(out / "manifest.csv", manifest);
    const Region& r = cfg.region;
    std::ostringstream model;
    model << "toy:grid=" << cfg.grid << ":size=" << cfg.size << ":channels=1:region=" << r.x0 << "," << r.y0 << ","
          << r.x1 << "," << r.y1;
    write_metadata(out, {{"command", "toy-suite"},
                         {"kind", "verification"},
                         {"model", model.str()},
                         {"pairs", cfg.pairs},
                         {"seed", cfg.seed},
                         {"features", cfg.features},
                         {"feature_size", cfg.feature_size},
                         {"nuisance", cfg.nuisance},
                         {"nuisance_size", cfg.nuisance_size},
                         {"jitter", cfg.jitter},
                         {"texture", cfg.texture},
                         {"noise", cfg.noise}});
}

void write_localization_suite(std::size_t pairs, std::uint64_t seed, const std::filesystem::path& out) {
    const auto suite = make_localization_suite(pairs, seed);
    ensure_dir(out);
    std::string manifest = "path_a,path_b,label\n";
    for (const ImagePair& p : suite) {
        const std::string a = p.id + "_a.png", b = p.id + "_b.png";
        write_png(p.a, out / a);
        write_png(p.b, out / b);
        manifest += a + "," + b + ",match\n";
    }
    write_file_atomic(out / "manifest.csv", manifest);
    write_metadata(out, {{"command", "toy-suite"},
                         {"kind", "localization"},
                         {"model", "toy:grid=8:size=112:channels=1:region=0,0,56,112"},
                         {"pairs", pairs},
                         {"seed", seed}});
}

}  // namespace corrrise
