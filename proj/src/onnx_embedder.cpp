#include "corrrise/onnx_embedder.hpp"

#include <fstream>
#include <sstream>

#include "corrrise/errors.hpp"
#include "corrrise/hash.hpp"

namespace corrrise {
namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BackendError("cannot open onnx model " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

OnnxEmbedder::OnnxEmbedder(const std::filesystem::path& model, OnnxPreprocess prep)
    : OnnxEmbedder(read_file(model), model.filename().string(), prep) {}

OnnxEmbedder::OnnxEmbedder(const std::string& model_bytes, std::string label, OnnxPreprocess prep)
    : graph_(std::make_shared<onnx::Graph>(onnx::Graph::parse(model_bytes))),
      prep_(prep),
      label_(std::move(label)),
      sha256_(sha256_hex(model_bytes)) {
    init();
}

void OnnxEmbedder::init() {
    for (std::size_t c = 0; c < 3; ++c) {
        if (!(prep_.std[c] > 0.0f)) throw ConfigError("onnx preprocessing std must be positive");
    }
    const auto& shape = graph_->input_shape();
    if (shape.size() != 4) {
        throw BackendError("onnx model input must be 4-D NCHW, got rank " + std::to_string(shape.size()));
    }
    if (shape[0] > 1) throw BackendError("onnx model input batch dimension must be 1 or symbolic");
    if (shape[1] != 1 && shape[1] != 3) throw BackendError("onnx model input must have 1 or 3 channels");
    spec_.channels = static_cast<std::size_t>(shape[1]);
    spec_.height = shape[2] > 0 ? static_cast<std::size_t>(shape[2]) : prep_.fallback_height;
    spec_.width = shape[3] > 0 ? static_cast<std::size_t>(shape[3]) : prep_.fallback_width;

    // Probe once with a mid-gray image to learn the embedding size.
    const ImageTensor probe(spec_.height, spec_.width, spec_.channels, 0.5f);
    dim_ = compute(probe).size();
    if (dim_ == 0) throw BackendError("onnx model produced an empty output");
}

std::string OnnxEmbedder::id() const {
    std::ostringstream os;
    os << "onnx(" << label_ << ",sha256=" << sha256_ << ")";
    if (randomized_seed_) os << "+randomized(seed=" << *randomized_seed_ << ",scope=all-initializers)";
    return os.str();
}

EmbeddingVector OnnxEmbedder::compute(const ImageTensor& img) const {
    const std::size_t h = spec_.height, w = spec_.width, c = spec_.channels;
    std::vector<float> chw(c * h * w);
    auto src = img.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t from = (prep_.bgr && c == 3) ? 2 - ch : ch;
        const float mean = prep_.mean[ch];
        const float inv = 1.0f / prep_.std[ch];
        float* dst = chw.data() + ch * h * w;
        for (std::size_t p = 0; p < h * w; ++p) dst[p] = (src[p * c + from] - mean) * inv;
    }
    onnx::Tensor input = onnx::Tensor::floats(
        {1, static_cast<std::int64_t>(c), static_cast<std::int64_t>(h), static_cast<std::int64_t>(w)},
        std::move(chw));
    onnx::Tensor out = graph_->run(input);
    if (!out.is_float()) throw BackendError("onnx model output is not a float tensor");
    return std::move(out.f);
}

std::unique_ptr<Embedder> OnnxEmbedder::randomized(std::uint64_t seed) const {
    auto out = std::make_unique<OnnxEmbedder>(*this);
    out->graph_ = std::make_shared<onnx::Graph>(graph_->randomized(seed));
    out->randomized_seed_ = seed;
    return out;
}

}  // namespace corrrise
