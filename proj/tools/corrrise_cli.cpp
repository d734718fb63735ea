#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "corrrise/errors.hpp"
#include "corrrise/run.hpp"

using namespace corrrise;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kBackend = 3 };

struct Preprocess {
    std::vector<float> mean{0.0f, 0.0f, 0.0f};
    std::vector<float> std{1.0f, 1.0f, 1.0f};
    bool bgr = false;

    OnnxPreprocess resolve() const {
        if (mean.size() != 3 || std.size() != 3) throw ConfigError("--mean and --std take 3 values");
        OnnxPreprocess p;
        for (std::size_t c = 0; c < 3; ++c) {
            p.mean[c] = mean[c];
            p.std[c] = std[c];
        }
        p.bgr = bgr;
        return p;
    }
};

void add_model(CLI::App* cmd, std::string& model, Preprocess& prep) {
    cmd->add_option("--model", model, "ONNX file, or toy[:grid=G][:size=S][:channels=C][:region=x0,y0,x1,y1]")
        ->required();
    cmd->add_option("--mean", prep.mean, "Per-channel mean subtracted before an ONNX model")->expected(3);
    cmd->add_option("--std", prep.std, "Per-channel std divided out before an ONNX model")->expected(3);
    cmd->add_flag("--bgr", prep.bgr, "Feed channels to the ONNX model in BGR order");
}

void add_masks(CLI::App* cmd, MaskGenConfig& m) {
    cmd->add_option("--iterations,-N", m.num_masks, "Number of masks")->capture_default_str();
    cmd->add_option("--patches", m.patches_per_mask, "Patches per mask")->capture_default_str();
    cmd->add_option("--patch-size", m.patch_size, "Patch side in pixels (0 = 28 scaled to the image)")
        ->capture_default_str();
    cmd->add_option("--blur", m.blur_radius, "Box-blur radius applied to masks")->capture_default_str();
}

int report(const char* kind, const std::string& msg, int code) {
    std::fprintf(stderr, "error[%s]: %s\n", kind, msg.c_str());
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CorrRISE saliency for face verification, with deletion/insertion evaluation"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI file with one [subcommand] section of flag=value lines; flags win");
    app.fallthrough(false);

    ExplainOptions ex;
    Preprocess ex_prep;
    bool ex_no_crop = false;
    auto* explain = app.add_subcommand("explain", "Signed saliency maps for one image pair");
    add_model(explain, ex.model, ex_prep);
    explain->add_option("--image-a", ex.image_a, "First image")->required();
    explain->add_option("--image-b", ex.image_b, "Second image")->required();
    explain->add_option("--threshold", ex.threshold, "Match threshold on cosine similarity")->capture_default_str();
    add_masks(explain, ex.masks);
    explain->add_option("--seed", ex.masks.seed, "Mask seed")->capture_default_str();
    explain->add_option("--workers", ex.workers, "Worker threads")->capture_default_str();
    explain->add_flag("--no-center-crop", ex_no_crop, "Resize without cropping to the target aspect");
    explain->add_option("--out", ex.out, "Output directory")->capture_default_str();

    EvaluateOptions ev;
    Preprocess ev_prep;
    bool ev_no_crop = false;
    double ev_threshold = 0.0;
    std::string ranking = "signed", curve_pairs = "matching";
    std::string cache_dir;
    auto* evaluate = app.add_subcommand("evaluate", "Deletion and insertion curves over a pair manifest");
    add_model(evaluate, ev.model, ev_prep);
    evaluate->add_option("--manifest", ev.manifest, "CSV with header path_a,path_b,label")->required();
    evaluate->add_option("--method", ev.methods, "corrrise, random or center (repeatable)")
        ->delimiter(',')
        ->check(CLI::IsMember({"corrrise", "random", "center"}));
    evaluate->add_option("--steps", ev.eval.steps, "Curve steps n")->capture_default_str();
    auto* thr = evaluate->add_option("--threshold", ev_threshold,
                                     "Fixed threshold (default: calibrated on the unmodified pairs)");
    evaluate->add_option("--fill", ev.eval.deletion_fill, "Deletion fill value")->capture_default_str();
    evaluate->add_option("--insertion-base", ev.eval.insertion_base, "Insertion base value")->capture_default_str();
    evaluate->add_option("--ranking", ranking, "signed or positive")
        ->check(CLI::IsMember({"signed", "positive"}))
        ->capture_default_str();
    evaluate->add_option("--curve-pairs", curve_pairs, "matching or all")
        ->check(CLI::IsMember({"matching", "all"}))
        ->capture_default_str();
    add_masks(evaluate, ev.masks);
    evaluate->add_option("--seed", ev.masks.seed, "Mask seed")->capture_default_str();
    evaluate->add_option("--baseline-seed", ev.seed, "Random-baseline seed")->capture_default_str();
    evaluate->add_option("--workers", ev.eval.workers, "Worker threads")->capture_default_str();
    evaluate->add_option("--cache", cache_dir, "Saliency cache directory (default <out>/maps)");
    evaluate->add_flag("--no-center-crop", ev_no_crop, "Resize without cropping to the target aspect");
    evaluate->add_option("--out", ev.out, "Output directory")->capture_default_str();

    SanityOptions sc;
    Preprocess sc_prep;
    bool sc_no_crop = false;
    auto* sanity = app.add_subcommand("sanity-check", "Compare maps of the model and a parameter-randomized copy");
    add_model(sanity, sc.model, sc_prep);
    sanity->add_option("--manifest", sc.manifest, "CSV with header path_a,path_b,label")->required();
    add_masks(sanity, sc.masks);
    sanity->add_option("--seed", sc.masks.seed, "Mask seed")->capture_default_str();
    sanity->add_option("--randomize-seed", sc.randomize_seed, "Seed for the parameter re-draw")->capture_default_str();
    sanity->add_option("--workers", sc.workers, "Worker threads")->capture_default_str();
    sanity->add_flag("--no-center-crop", sc_no_crop, "Resize without cropping to the target aspect");
    sanity->add_option("--out", sc.out, "Output directory")->capture_default_str();

    GenMasksOptions gm;
    std::vector<std::size_t> size{112, 112};
    auto* genmasks = app.add_subcommand("genmasks", "Dump a mask stack as grayscale PNG files");
    genmasks->add_option("--size", size, "Height and width")->expected(2)->capture_default_str();
    add_masks(genmasks, gm.masks);
    genmasks->add_option("--seed", gm.masks.seed, "Mask seed")->capture_default_str();
    genmasks->add_option("--out", gm.out, "Output directory")->capture_default_str();

    ToySuiteConfig ts;
    std::filesystem::path ts_out = "toy_suite";
    for (auto* sub : {explain, evaluate, sanity, genmasks}) sub->configurable();

    auto* toy = app.add_subcommand("toy-suite", "Write the synthetic verification set and its manifest");
    std::string ts_kind = "verification";
    toy->add_option("--kind", ts_kind, "verification (matching + non-matching) or localization (identical pairs)")
        ->check(CLI::IsMember({"verification", "localization"}))
        ->capture_default_str();
    toy->add_option("--pairs", ts.pairs, "Matching pairs (and as many non-matching)")->capture_default_str();
    toy->add_option("--seed", ts.seed, "Generator seed")->capture_default_str();
    toy->add_option("--features", ts.features, "Feature spots per identity")->capture_default_str();
    toy->add_option("--feature-size", ts.feature_size, "Feature spot side")->capture_default_str();
    toy->add_option("--nuisance", ts.nuisance, "Nuisance blobs per rendering")->capture_default_str();
    toy->add_option("--nuisance-size", ts.nuisance_size, "Nuisance blob side")->capture_default_str();
    toy->add_option("--jitter", ts.jitter, "Maximum feature offset per rendering")->capture_default_str();
    toy->add_option("--texture", ts.texture, "Multiplicative texture amplitude")->capture_default_str();
    toy->add_option("--noise", ts.noise, "Additive noise standard deviation")->capture_default_str();
    std::vector<std::size_t> ts_region{ts.region.x0, ts.region.y0, ts.region.x1, ts.region.y1};
    toy->add_option("--region", ts_region, "x0 y0 x1 y1 of the area holding features")->expected(4)->capture_default_str();
    toy->add_option("--grid", ts.grid, "Grid of the matching toy model (recorded in metadata)")->capture_default_str();
    toy->add_option("--out", ts_out, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report("usage", e.what(), kUsage);
    }

    try {
        if (*explain) {
            ex.prep = ex_prep.resolve();
            ex.center_crop = !ex_no_crop;
            const ExplainOutcome r = run_explain(ex);
            std::printf("score %.6f threshold %.6f decision %s\n", r.result.score_unperturbed, ex.threshold,
                        r.match ? "match" : "nonmatch");
        } else if (*evaluate) {
            ev.prep = ev_prep.resolve();
            ev.center_crop = !ev_no_crop;
            if (thr->count() > 0) ev.threshold = ev_threshold;
            ev.eval.ranking = ranking == "signed" ? RankingSource::Signed : RankingSource::PositiveOnly;
            ev.curve_pairs = curve_pairs == "all" ? CurvePairs::All : CurvePairs::Matching;
            if (!cache_dir.empty()) ev.cache_dir = cache_dir;
            const EvaluateOutcome r = run_evaluate(ev);
            std::printf("threshold %.6f baseline accuracy %.4f\n", r.threshold, r.baseline_accuracy);
            for (const auto& c : r.curves) {
                std::printf("%-9s deletion %.2f insertion %.2f\n", c.method.c_str(), c.deletion.auc_percent,
                            c.insertion.auc_percent);
            }
        } else if (*sanity) {
            sc.prep = sc_prep.resolve();
            sc.center_crop = !sc_no_crop;
            const SanityOutcome r = run_sanity_check(sc);
            std::printf("mean |correlation| %.4f over %zu pairs\n", r.mean_abs_correlation, r.abs_correlation.size());
        } else if (*genmasks) {
            gm.height = size[0];
            gm.width = size[1];
            run_genmasks(gm);
            std::printf("wrote %zu masks to %s\n", gm.masks.num_masks, gm.out.string().c_str());
        } else if (*toy) {
            ts.region = Region{ts_region[0], ts_region[1], ts_region[2], ts_region[3]};
            if (ts_kind == "localization") {
                write_localization_suite(ts.pairs, ts.seed, ts_out);
                std::printf("wrote %zu pairs to %s\n", ts.pairs, ts_out.string().c_str());
            } else {
                write_toy_suite(ts, ts_out);
                std::printf("wrote %zu pairs to %s\n", 2 * ts.pairs, ts_out.string().c_str());
            }
        }
    } catch (const ConfigError& e) {
        return report("usage", e.what(), kUsage);
    } catch (const BackendError& e) {
        return report("backend", e.what(), kBackend);
    } catch (const DegenerateInputError& e) {
        return report("backend", e.what(), kBackend);
    } catch (const UnsupportedOperation& e) {
        return report("backend", e.what(), kBackend);
    } catch (const Error& e) {
        return report("data", e.what(), kData);
    } catch (const std::exception& e) {
        return report("data", e.what(), kData);
    }
    return kOk;
}
