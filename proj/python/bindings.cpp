#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "corrrise/embedder.hpp"
#include "corrrise/errors.hpp"
#include "corrrise/explain.hpp"
#include "corrrise/maskgen.hpp"
#include "corrrise/metrics.hpp"
#include "corrrise/numerics.hpp"
#include "corrrise/onnx_embedder.hpp"
#include "corrrise/run.hpp"
#include "corrrise/salm.hpp"
#include "corrrise/toy_suite.hpp"

namespace py = pybind11;
using namespace corrrise;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (H, W) or (H, W, C) float array in [0, 1].
ImageTensor to_image(const FloatArray& arr) {
    if (arr.ndim() != 2 && arr.ndim() != 3) throw py::value_error("image must have shape (H, W) or (H, W, C)");
    const auto h = static_cast<std::size_t>(arr.shape(0));
    const auto w = static_cast<std::size_t>(arr.shape(1));
    const std::size_t c = arr.ndim() == 3 ? static_cast<std::size_t>(arr.shape(2)) : 1;
    std::vector<float> data(arr.data(), arr.data() + arr.size());
    ImageTensor img(h, w, c, std::move(data));
    check_unit_range(img);
    return img;
}

py::array_t<float> from_image(const ImageTensor& img) {
    std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(img.height()), static_cast<py::ssize_t>(img.width())};
    if (img.channels() != 1) shape.push_back(static_cast<py::ssize_t>(img.channels()));
    py::array_t<float> out(shape);
    std::copy(img.data().begin(), img.data().end(), out.mutable_data());
    return out;
}

template <typename Tag>
py::array_t<float> from_field(const Field<Tag>& f) {
    py::array_t<float> out({static_cast<py::ssize_t>(f.height()), static_cast<py::ssize_t>(f.width())});
    std::copy(f.data().begin(), f.data().end(), out.mutable_data());
    return out;
}

SaliencyMap to_map(const FloatArray& arr) {
    if (arr.ndim() != 2) throw py::value_error("saliency map must have shape (H, W)");
    return SaliencyMap(static_cast<std::size_t>(arr.shape(0)), static_cast<std::size_t>(arr.shape(1)),
                       std::vector<float>(arr.data(), arr.data() + arr.size()));
}

std::vector<Mask> to_masks(const FloatArray& arr) {
    if (arr.ndim() != 3) throw py::value_error("masks must have shape (N, H, W)");
    const auto n = static_cast<std::size_t>(arr.shape(0));
    const auto h = static_cast<std::size_t>(arr.shape(1));
    const auto w = static_cast<std::size_t>(arr.shape(2));
    std::vector<Mask> masks;
    masks.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        masks.emplace_back(h, w, std::vector<float>(arr.data() + k * h * w, arr.data() + (k + 1) * h * w));
    }
    return masks;
}

std::vector<float> to_vector(const FloatArray& arr) { return {arr.data(), arr.data() + arr.size()}; }

MaskGenConfig mask_config(std::size_t num_masks, std::uint64_t seed, std::size_t patches, std::size_t patch_size,
                          std::size_t blur) {
    MaskGenConfig cfg;
    cfg.num_masks = num_masks;
    cfg.seed = seed;
    cfg.patches_per_mask = patches;
    cfg.patch_size = patch_size;
    cfg.blur_radius = blur;
    return cfg;
}

OnnxPreprocess preprocess(const std::vector<float>& mean, const std::vector<float>& std, bool bgr) {
    if (mean.size() != 3 || std.size() != 3) throw py::value_error("mean and std take 3 values");
    OnnxPreprocess p;
    for (std::size_t c = 0; c < 3; ++c) {
        p.mean[c] = mean[c];
        p.std[c] = std[c];
    }
    p.bgr = bgr;
    return p;
}

// Python-facing backend handle; shared ownership so maps and curves can keep it alive.
struct Backend {
    std::shared_ptr<const Embedder> impl;
};

std::vector<ImagePair> to_pairs(const py::list& pairs) {
    std::vector<ImagePair> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto t = pairs[i].cast<py::tuple>();
        if (t.size() != 3) throw py::value_error("pairs are (image_a, image_b, match) tuples");
        out.push_back({to_image(t[0].cast<FloatArray>()), to_image(t[1].cast<FloatArray>()), t[2].cast<bool>(),
                       std::to_string(i)});
    }
    return out;
}

py::list from_pairs(const std::vector<ImagePair>& pairs) {
    py::list out;
    for (const auto& p : pairs) out.append(py::make_tuple(from_image(p.a), from_image(p.b), p.match));
    return out;
}

std::vector<PairMaps> to_pair_maps(const py::list& maps) {
    std::vector<PairMaps> out;
    for (const auto& item : maps) {
        const auto t = item.cast<py::tuple>();
        if (t.size() != 2) throw py::value_error("maps are (map_a, map_b) tuples");
        out.push_back({to_map(t[0].cast<FloatArray>()), to_map(t[1].cast<FloatArray>())});
    }
    return out;
}

py::dict curve_dict(const EvalCurve& c) {
    std::vector<double> fr, acc;
    for (const auto& p : c.points) {
        fr.push_back(p.fraction);
        acc.push_back(p.accuracy);
    }
    py::dict d;
    d["fractions"] = py::array_t<double>(fr.size(), fr.data());
    d["accuracy"] = py::array_t<double>(acc.size(), acc.data());
    d["auc"] = c.auc_percent;
    return d;
}

EvalConfig eval_config(std::size_t steps, double threshold, float fill, float base, const std::string& ranking,
                       std::size_t workers) {
    EvalConfig cfg;
    cfg.steps = steps;
    cfg.threshold = threshold;
    cfg.deletion_fill = fill;
    cfg.insertion_base = base;
    if (ranking == "signed") cfg.ranking = RankingSource::Signed;
    else if (ranking == "positive") cfg.ranking = RankingSource::PositiveOnly;
    else throw py::value_error("ranking must be 'signed' or 'positive'");
    cfg.workers = workers;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_corrrise, m) {
    m.doc() = "CorrRISE saliency maps and deletion/insertion metrics for face verification";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ContractError>(m, "ContractError", base.ptr());
    py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<BackendError>(m, "BackendError", base.ptr());
    py::register_exception<UnsupportedOperation>(m, "UnsupportedOperation", base.ptr());

    m.def("cosine_similarity",
          [](const FloatArray& a, const FloatArray& b) { return cosine_similarity(to_vector(a), to_vector(b)); });
    m.def("pearson", [](const DoubleArray& x, const DoubleArray& y) {
        return pearson_correlation(std::span(x.data(), x.size()), std::span(y.data(), y.size()));
    });
    m.def("auc", [](const DoubleArray& fractions, const DoubleArray& accuracy) {
        if (fractions.size() != accuracy.size()) throw py::value_error("fractions and accuracy differ in length");
        std::vector<CurvePoint> pts;
        for (py::ssize_t i = 0; i < fractions.size(); ++i) pts.push_back({fractions.data()[i], accuracy.data()[i]});
        return auc_trapezoid(pts);
    });

    m.def(
        "generate_masks",
        [](std::size_t n, std::size_t height, std::size_t width, std::uint64_t seed, std::size_t patches,
           std::size_t patch_size, std::size_t blur) {
            const auto stack = generate_stack(mask_config(n, seed, patches, patch_size, blur), height, width);
            py::array_t<float> out({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(height),
                                    static_cast<py::ssize_t>(width)});
            float* dst = out.mutable_data();
            for (const Mask& mk : stack) dst = std::copy(mk.data().begin(), mk.data().end(), dst);
            return out;
        },
        py::arg("n"), py::arg("height"), py::arg("width"), py::arg("seed") = 0, py::arg("patches") = 8,
        py::arg("patch_size") = 0, py::arg("blur") = 0, "Mask stack of shape (n, height, width).");

    m.def(
        "correlation_map",
        [](const DoubleArray& scores, const FloatArray& masks) {
            const auto stack = to_masks(masks);
            const auto r = correlation_values(std::span(scores.data(), scores.size()), stack);
            py::array_t<double> out({static_cast<py::ssize_t>(stack[0].height()), static_cast<py::ssize_t>(stack[0].width())});
            std::copy(r.begin(), r.end(), out.mutable_data());
            return out;
        },
        py::arg("scores"), py::arg("masks"), "Per-pixel Pearson correlation of masks (N, H, W) with scores (N,).");

    py::class_<Backend>(m, "Backend")
        .def_property_readonly("input_shape",
                               [](const Backend& b) {
                                   const auto s = b.impl->input_spec();
                                   return py::make_tuple(s.height, s.width, s.channels);
                               })
        .def_property_readonly("embedding_dim", [](const Backend& b) { return b.impl->embedding_dim(); })
        .def_property_readonly("id", [](const Backend& b) { return b.impl->id(); })
        .def("embed",
             [](const Backend& b, const FloatArray& img) {
                 const auto e = b.impl->embed(to_image(img));
                 return py::array_t<float>(e.size(), e.data());
             })
        .def("randomized", [](const Backend& b, std::uint64_t seed) {
            return Backend{std::shared_ptr<const Embedder>(b.impl->randomized(seed))};
        });

    m.def(
        "load_backend",
        [](const std::string& model, const std::vector<float>& mean, const std::vector<float>& std, bool bgr) {
            return Backend{std::shared_ptr<const Embedder>(make_backend(model, preprocess(mean, std, bgr)))};
        },
        py::arg("model"), py::arg("mean") = std::vector<float>{0, 0, 0}, py::arg("std") = std::vector<float>{1, 1, 1},
        py::arg("bgr") = false, "Backend from an ONNX path or a toy spec such as 'toy:grid=8:region=0,0,56,112'.");
    m.def(
        "onnx_backend",
        [](const py::bytes& model, const std::string& label, const std::vector<float>& mean,
           const std::vector<float>& std, bool bgr) {
            return Backend{std::make_shared<OnnxEmbedder>(std::string(model), label, preprocess(mean, std, bgr))};
        },
        py::arg("model"), py::arg("label") = "memory", py::arg("mean") = std::vector<float>{0, 0, 0},
        py::arg("std") = std::vector<float>{1, 1, 1}, py::arg("bgr") = false, "Backend from serialized ONNX bytes.");
    m.def(
        "constant_backend",
        [](const FloatArray& value, std::size_t height, std::size_t width, std::size_t channels) {
            return Backend{std::make_shared<ConstantEmbedder>(InputSpec{height, width, channels}, to_vector(value))};
        },
        py::arg("value"), py::arg("height"), py::arg("width"), py::arg("channels") = 1);

    m.def(
        "explain_pair",
        [](const Backend& b, const FloatArray& a, const FloatArray& img_b, std::size_t num_masks, std::uint64_t seed,
           std::size_t patches, std::size_t patch_size, std::size_t blur, std::size_t workers) {
            const ImageTensor ia = to_image(a), ib = to_image(img_b);
            ExplainResult r;
            {
                py::gil_scoped_release release;
                r = explain_pair(*b.impl, ia, ib, mask_config(num_masks, seed, patches, patch_size, blur), workers);
            }
            py::dict d;
            d["s_a"] = from_field(r.s_a);
            d["s_b"] = from_field(r.s_b);
            d["score"] = r.score_unperturbed;
            d["scores_a"] = py::array_t<double>(r.score_series_a.size(), r.score_series_a.data());
            d["scores_b"] = py::array_t<double>(r.score_series_b.size(), r.score_series_b.data());
            d["skipped_a"] = r.skipped_a;
            d["skipped_b"] = r.skipped_b;
            d["backend"] = r.backend_id;
            return d;
        },
        py::arg("backend"), py::arg("image_a"), py::arg("image_b"), py::arg("num_masks") = 500, py::arg("seed") = 0,
        py::arg("patches") = 8, py::arg("patch_size") = 0, py::arg("blur") = 0, py::arg("workers") = 1,
        "Signed CorrRISE maps for both images of a pair.");

    m.def("split_signed", [](const FloatArray& s) {
        const auto [pos, neg] = split_signed(to_map(s));
        return py::make_tuple(from_field(pos), from_field(neg));
    });

    for (const char* kind : {"deletion_curve", "insertion_curve"}) {
        const bool deletion = std::string(kind) == "deletion_curve";
        m.def(
            kind,
            [deletion](const Backend& b, const py::list& pairs, const py::list& maps, std::size_t steps,
                       double threshold, float fill, float base, const std::string& ranking, std::size_t workers) {
                const auto ps = to_pairs(pairs);
                const auto ms = to_pair_maps(maps);
                const auto cfg = eval_config(steps, threshold, fill, base, ranking, workers);
                EvalCurve c;
                {
                    py::gil_scoped_release release;
                    c = deletion ? deletion_curve(*b.impl, ps, ms, cfg) : insertion_curve(*b.impl, ps, ms, cfg);
                }
                return curve_dict(c);
            },
            py::arg("backend"), py::arg("pairs"), py::arg("maps"), py::arg("steps") = 20, py::arg("threshold") = 0.5,
            py::arg("fill") = 0.0f, py::arg("base") = 0.0f, py::arg("ranking") = "signed", py::arg("workers") = 1);
    }

    m.def("verification_accuracy", [](const Backend& b, const py::list& pairs, double threshold) {
        return verification_accuracy(*b.impl, to_pairs(pairs), threshold);
    });
    m.def("calibrate_threshold",
          [](const Backend& b, const py::list& pairs) { return calibrate_threshold(*b.impl, to_pairs(pairs)); });
    m.def(
        "baseline_saliency",
        [](const std::string& kind, std::size_t height, std::size_t width, std::uint64_t seed) {
            if (kind != "random" && kind != "center") throw py::value_error("kind must be 'random' or 'center'");
            return from_field(baseline_saliency(kind == "random" ? BaselineKind::Random : BaselineKind::Center,
                                                height, width, seed));
        },
        py::arg("kind"), py::arg("height"), py::arg("width"), py::arg("seed") = 0);

    m.def("save_saliency", [](const FloatArray& s, const std::filesystem::path& path) { save_saliency(to_map(s), path); });
    m.def("load_saliency", [](const std::filesystem::path& path) { return from_field(load_saliency(path)); });

    m.def(
        "toy_suite",
        [](std::size_t pairs, std::uint64_t seed) {
            ToySuiteConfig cfg;
            cfg.pairs = pairs;
            cfg.seed = seed;
            const ToySuite s = make_toy_suite(cfg);
            return py::make_tuple(from_pairs(s.matching), from_pairs(s.nonmatching));
        },
        py::arg("pairs") = 30, py::arg("seed") = 7,
        "(matching, nonmatching) lists of (a, b, match); use with load_backend('toy:grid=28').");
    m.def(
        "localization_suite",
        [](std::size_t pairs, std::uint64_t seed) { return from_pairs(make_localization_suite(pairs, seed)); },
        py::arg("pairs") = 10, py::arg("seed") = 3,
        "Identical pairs for load_backend('toy:grid=8:region=0,0,56,112').");
}
