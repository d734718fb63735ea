// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "corrrise/embedder.hpp"
#include "corrrise/explain.hpp"
#include "corrrise/io.hpp"
#include "corrrise/maskgen.hpp"
#include "corrrise/metrics.hpp"
#include "corrrise/numerics.hpp"
#include "corrrise/run.hpp"
#include "corrrise/toy_suite.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace corrrise;
namespace fs = std::filesystem;

namespace {

constexpr const char* kToyModel = "toy:grid=28:size=112:channels=1";

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path workdir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "corrrise_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

// Fraction of the top 5% pixels with positive saliency that lie in the left half.
double left_half_precision(const SaliencyMap& s) {
    const auto order = rank_pixels(s);
    const std::size_t top = step_pixel_count(1, 20, s.size());
    std::size_t positive = 0, inside = 0;
    for (std::size_t r = 0; r < top; ++r) {
        const std::size_t idx = order[r];
        if (!(s[idx] > 0.0f)) continue;
        ++positive;
        inside += idx % s.width() < s.width() / 2;
    }
    return positive == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(positive);
}

Outcome oracle_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 gen(20240501);
    std::uniform_real_distribution<double> su(-1.0, 1.0);
    double max_corr = 0.0;
    for (std::uint64_t k = 0; k < 50; ++k) {
        MaskGenConfig cfg;
        cfg.num_masks = 16;
        cfg.seed = k;
        const auto masks = generate_stack(cfg, 8, 8);
        std::vector<double> scores(16);
        for (double& s : scores) s = su(gen);
        const auto fast = correlation_values(scores, masks);
        const auto slow = oracle::correlation_map(scores, masks);
        for (std::size_t i = 0; i < fast.size(); ++i) max_corr = std::max(max_corr, std::abs(fast[i] - slow[i]));
    }

    // Cosine: (cos t, sin t) . (r, 0) over norms is cos t; random vectors against the oracle.
    double max_cos = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double t = su(gen) * 3.14159, r = 0.5 + std::abs(su(gen)) * 4.0;
        const std::vector<float> a{static_cast<float>(std::cos(t)), static_cast<float>(std::sin(t))};
        const std::vector<float> b{static_cast<float>(r), 0.0f};
        const double expected = static_cast<double>(a[0]) / std::hypot(static_cast<double>(a[0]), a[1]);
        max_cos = std::max(max_cos, std::abs(cosine_similarity(a, b) - expected));
        std::vector<float> x(64), y(64);
        for (std::size_t i = 0; i < 64; ++i) {
            x[i] = static_cast<float>(su(gen));
            y[i] = static_cast<float>(su(gen));
        }
        const double ref = oracle::cosine(std::vector<double>(x.begin(), x.end()), std::vector<double>(y.begin(), y.end()));
        max_cos = std::max(max_cos, std::abs(cosine_similarity(x, y) - ref));
    }

    // AUC: on a straight line a + b p the trapezoid rule is exact, 100 (a + b / 2).
    double max_auc = 0.0;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const double a = u01(gen), b = u01(gen) - a;
        std::vector<double> fr{0.0, 1.0};
        const int inner = 1 + k % 30;
        for (int i = 0; i < inner; ++i) fr.push_back(u01(gen));
        std::sort(fr.begin(), fr.end());
        fr.erase(std::unique(fr.begin(), fr.end()), fr.end());
        std::vector<CurvePoint> pts;
        for (double f : fr) pts.push_back({f, a + b * f});
        max_auc = std::max(max_auc, std::abs(auc_trapezoid(pts) - 100.0 * (a + b / 2.0)));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {max_corr <= 1e-10 && max_cos <= 1e-12 && max_auc <= 1e-12 && secs < 5.0,
            fmt("max |diff| corr %.2e, cosine %.2e, auc %.2e; %.2f s", max_corr, max_cos, max_auc, secs)};
}

Outcome degenerate_propagation() {
    std::size_t nonzero = 0;
    for (std::uint64_t k = 0; k < 5; ++k) {
        const ConstantEmbedder c({112, 112, 1}, {0.2f, -0.7f, 1.3f, 0.0f});
        MaskGenConfig cfg;
        cfg.seed = k;
        const auto r = explain_pair(c, blocky_image(2 * k + 1), uniform_noise_image(2 * k + 2, 112, 112), cfg);
        for (float v : r.s_a.data()) nonzero += v != 0.0f;
        for (float v : r.s_b.data()) nonzero += v != 0.0f;
    }
    return {nonzero == 0, fmt("%zu non-zero values over 5 pairs, N=500", nonzero)};
}

struct Localization {
    std::vector<ImagePair> pairs;
    std::vector<ExplainResult> trained;
};

Localization& localization() {
    static Localization loc = [] {
        Localization l;
        l.pairs = make_localization_suite(10, 3);
        const auto toy = localization_embedder();
        for (std::size_t i = 0; i < l.pairs.size(); ++i) {
            MaskGenConfig cfg;
            cfg.seed = i;
            l.trained.push_back(explain_pair(toy, l.pairs[i].a, l.pairs[i].b, cfg));
        }
        return l;
    }();
    return loc;
}

Outcome localization_check() {
    const auto t0 = std::chrono::steady_clock::now();
    const Localization& loc = localization();
    const double per_pair = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 10.0;
    double worst = 1.0, mean = 0.0;
    for (const auto& r : loc.trained) {
        const double p = std::min(left_half_precision(r.s_a), left_half_precision(r.s_b));
        worst = std::min(worst, p);
        mean += p / 10.0;
    }
    return {worst >= 0.9 && per_pair < 60.0,
            fmt("min precision %.3f, mean %.3f over 10 seeds; %.2f s per pair", worst, mean, per_pair)};
}

Outcome sanity_check() {
    const Localization& loc = localization();
    const auto toy = localization_embedder();
    SanityOptions opts;
    opts.out = workdir() / "sanity";
    opts.randomize_seed = 1;
    const SanityOutcome s = run_sanity_check(toy, "localization-toy", loc.pairs, opts);

    const auto rnd = toy.randomized(opts.randomize_seed);
    double precision = 0.0;
    for (std::size_t i = 0; i < loc.pairs.size(); ++i) {
        MaskGenConfig cfg;
        cfg.seed = i;
        const auto r = explain_pair(*rnd, loc.pairs[i].a, loc.pairs[i].b, cfg);
        precision += (left_half_precision(r.s_a) + left_half_precision(r.s_b)) / 20.0;
    }
    return {s.mean_abs_correlation <= 0.3 && precision < 0.5,
            fmt("mean |corr| %.3f over %zu pairs, randomized precision %.3f", s.mean_abs_correlation,
                s.abs_correlation.size(), precision)};
}

struct ToyEval {
    fs::path suite_dir;
    std::vector<ImagePair> pairs;
    EvaluateOutcome outcome;
    std::map<std::string, const MethodCurves*> by_method;
};

ToyEval& toy_eval() {
    static ToyEval e = [] {
        ToyEval t;
        const ToySuiteConfig cfg;
        t.suite_dir = workdir() / "toy_suite";
        write_toy_suite(cfg, t.suite_dir);
        const auto backend = make_backend(kToyModel);
        t.pairs = load_pairs(load_manifest(t.suite_dir / "manifest.csv"), backend->input_spec());
        EvaluateOptions opts;
        opts.model = kToyModel;
        opts.methods = {"corrrise", "random", "center"};
        opts.out = workdir() / "toy_eval";
        t.outcome = run_evaluate(*backend, model_hash(kToyModel), t.pairs, opts);
        for (const auto& c : t.outcome.curves) t.by_method[c.method] = &c;
        return t;
    }();
    return e;
}

Outcome metric_ordering() {
    const ToyEval& e = toy_eval();
    const auto& c = *e.by_method.at("corrrise");
    const auto& r = *e.by_method.at("random");
    const auto& z = *e.by_method.at("center");
    const double del_gap = std::min(r.deletion.auc_percent, z.deletion.auc_percent) - c.deletion.auc_percent;
    const double ins_gap = c.insertion.auc_percent - std::max(r.insertion.auc_percent, z.insertion.auc_percent);
    return {del_gap >= 10.0 && ins_gap >= 10.0,
            fmt("deletion corrrise %.2f random %.2f center %.2f; insertion corrrise %.2f random %.2f center %.2f",
                c.deletion.auc_percent, r.deletion.auc_percent, z.deletion.auc_percent, c.insertion.auc_percent,
                r.insertion.auc_percent, z.insertion.auc_percent)};
}

Outcome endpoint_identities() {
    const ToyEval& e = toy_eval();
    std::vector<ImagePair> filled;
    for (const auto& p : e.pairs) {
        if (!p.match) continue;
        filled.push_back({ImageTensor(p.a.height(), p.a.width(), p.a.channels(), 0.0f),
                          ImageTensor(p.b.height(), p.b.width(), p.b.channels(), 0.0f), true, p.id});
    }
    const auto backend = make_backend(kToyModel);
    const double constant_acc = verification_accuracy(*backend, filled, e.outcome.threshold);
    bool ok = true;
    std::string detail;
    for (const auto& c : e.outcome.curves) {
        ok = ok && c.insertion.points.back().accuracy == c.deletion.points.front().accuracy &&
             c.deletion.points.back().accuracy == constant_acc;
        detail += fmt("%s ins(1)=%.4f del(0)=%.4f del(1)=%.4f; ", c.method.c_str(), c.insertion.points.back().accuracy,
                      c.deletion.points.front().accuracy, c.deletion.points.back().accuracy);
    }
    return {ok, detail + fmt("constant-fill accuracy %.4f", constant_acc)};
}

Outcome insertion_efficiency() {
    const ToyEval& e = toy_eval();
    const auto& c = *e.by_method.at("corrrise");
    const CurvePoint& at20 = c.insertion.points.at(4);
    const double base = c.deletion.points.front().accuracy;
    return {std::abs(at20.fraction - 0.2) < 1e-12 && at20.accuracy >= 0.85 * base,
            fmt("insertion accuracy %.4f at p=%.2f vs baseline %.4f (ratio %.3f)", at20.accuracy, at20.fraction, base,
                base > 0 ? at20.accuracy / base : 0.0)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string content = slurp(entry.path());
        if (entry.path().filename() == "metadata.json") {
            auto doc = nlohmann::json::parse(content);
            doc.erase("timestamp");
            content = doc.dump();
        }
        files[fs::relative(entry.path(), dir).string()] = std::move(content);
    }
    return files;
}

Outcome determinism() {
    const ToyEval& e = toy_eval();
    std::vector<std::map<std::string, std::string>> runs;
    for (const char* name : {"det_1", "det_2"}) {
        const fs::path out = workdir() / name;
#ifdef CORRRISE_CLI_PATH
        const std::string cmd = std::string("'") + CORRRISE_CLI_PATH + "' evaluate --model " + kToyModel +
                                " --method corrrise --method random --method center --manifest '" +
                                (e.suite_dir / "manifest.csv").string() + "' --out '" + out.string() + "' >/dev/null";
        const int status = std::system(cmd.c_str());
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "evaluate run failed"};
#else
        EvaluateOptions opts;
        opts.model = kToyModel;
        opts.manifest = e.suite_dir / "manifest.csv";
        opts.methods = {"corrrise", "random", "center"};
        opts.out = out;
        run_evaluate(opts);
#endif
        runs.push_back(snapshot(out));
    }
    std::size_t salm = 0, csv = 0, differing = 0;
    for (const auto& [name, content] : runs[0]) {
        salm += name.ends_with(".salm");
        csv += name.ends_with(".csv");
        const auto it = runs[1].find(name);
        differing += it == runs[1].end() || it->second != content;
    }
    differing += runs[1].size() - std::min(runs[1].size(), runs[0].size());
    const bool ok = differing == 0 && runs[0].size() == runs[1].size() && salm > 0 && csv > 0 &&
                    runs[0].contains("metadata.json");
    return {ok, fmt("%zu files (%zu SALM, %zu CSV), %zu differ", runs[0].size(), salm, csv, differing)};
}

Outcome property_suites() {
#ifdef CORRRISE_PROPERTIES_PATH
    const fs::path log = workdir() / "properties.txt";
    const std::string cmd = std::string("'") + CORRRISE_PROPERTIES_PATH + "' >'" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    const std::string out = slurp(log);
    std::string summary;
    for (const char* key : {"[doctest] test cases:", "[doctest] assertions:"}) {
        const auto pos = out.find(key);
        if (pos == std::string::npos) continue;
        std::string line = out.substr(pos + 10, out.find('\n', pos) - pos - 10);
        line.erase(std::unique(line.begin(), line.end(), [](char x, char y) { return x == ' ' && y == ' '; }),
                   line.end());
        summary += line + "; ";
    }
    const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
    return {ok, summary + "1000 randomized cases per property"};
#else
    return {false, "property test binary not available"};
#endif
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"numeric oracle equivalence", oracle_equivalence},
        {"degenerate propagation", degenerate_propagation},
        {"localization", localization_check},
        {"parameter-randomization sanity check", sanity_check},
        {"metric ordering", metric_ordering},
        {"endpoint identities", endpoint_identities},
        {"insertion efficiency", insertion_efficiency},
        {"determinism", determinism},
        {"property suites", property_suites},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += !o.pass;
        std::printf("%s %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    fs::remove_all(workdir());
    return failures == 0 ? 0 : 1;
}
