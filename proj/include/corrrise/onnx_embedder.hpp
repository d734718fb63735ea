#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "corrrise/embedder.hpp"
#include "corrrise/onnx_graph.hpp"

namespace corrrise {

/// Preprocessing applied before the image is handed to the network.
/// Pixel values in [0,1] become (v - mean[c]) / std[c], in RGB or BGR channel order.
struct OnnxPreprocess {
    std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
    std::array<float, 3> std{1.0f, 1.0f, 1.0f};
    bool bgr = false;
    /// Used only when the model declares a symbolic spatial size.
    std::size_t fallback_height = 112;
    std::size_t fallback_width = 112;
};

/// Backend running an ONNX model with one 1xCxHxW float input and one embedding output.
class OnnxEmbedder final : public Embedder {
public:
    OnnxEmbedder(const std::filesystem::path& model, OnnxPreprocess prep = {});
    /// From serialized model bytes; `label` names the model in id().
    OnnxEmbedder(const std::string& model_bytes, std::string label, OnnxPreprocess prep = {});

    InputSpec input_spec() const override { return spec_; }
    std::size_t embedding_dim() const override { return dim_; }
    std::string id() const override;
    std::unique_ptr<Embedder> randomized(std::uint64_t seed) const override;

    const std::string& model_sha256() const { return sha256_; }
    const OnnxPreprocess& preprocess() const { return prep_; }

protected:
    EmbeddingVector compute(const ImageTensor& img) const override;

private:
    void init();

    std::shared_ptr<const onnx::Graph> graph_;
    OnnxPreprocess prep_;
    std::string label_;
    std::string sha256_;
    InputSpec spec_;
    std::size_t dim_ = 0;
    std::optional<std::uint64_t> randomized_seed_;
};

}  // namespace corrrise
