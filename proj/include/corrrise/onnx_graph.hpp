#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace corrrise::onnx {

/// Dense tensor as seen by the interpreter. Float tensors use `f`, integer tensors use `i`.
struct Tensor {
    enum class Type { Float, Int64 };

    Type type = Type::Float;
    std::vector<std::int64_t> shape;
    std::vector<float> f;
    std::vector<std::int64_t> i;

    std::size_t numel() const;
    bool is_float() const { return type == Type::Float; }

    static Tensor floats(std::vector<std::int64_t> shape, std::vector<float> data);
    static Tensor ints(std::vector<std::int64_t> shape, std::vector<std::int64_t> data);
};

struct Attribute {
    enum class Kind { Float, Int, String, Tensor, Floats, Ints, Strings, Other };
    Kind kind = Kind::Other;
    float f = 0.0f;
    std::int64_t i = 0;
    std::string s;
    std::shared_ptr<Tensor> t;
    std::vector<float> floats;
    std::vector<std::int64_t> ints;
};

struct Node {
    std::string op_type;
    std::string name;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::unordered_map<std::string, Attribute> attributes;
};

/// Minimal CPU interpreter for inference-only ONNX graphs with one image input and one output.
///
/// Supported operators cover the usual CNN face-embedding exports: Conv, BatchNormalization,
/// Relu, LeakyRelu, PRelu, Sigmoid, Tanh, Clip, Add, Sub, Mul, Div, Pow, Sqrt, Exp, Neg, MatMul,
/// Gemm, Flatten, Reshape, Transpose, Concat, Squeeze, Unsqueeze, Shape, Gather, Cast, MaxPool,
/// AveragePool, GlobalAveragePool, ReduceMean, ReduceSum, ReduceL2, Softmax, Identity, Dropout,
/// Constant. Anything else is rejected at load time.
class Graph {
public:
    static Graph load(const std::filesystem::path& path);
    static Graph parse(const std::string& bytes);

    /// Runs the graph on one input tensor and returns the first graph output.
    Tensor run(const Tensor& input) const;

    /// Declared input shape; symbolic dimensions are reported as -1.
    const std::vector<std::int64_t>& input_shape() const { return input_shape_; }
    const std::string& input_name() const { return input_name_; }

    /// A copy whose float initializers are re-drawn i.i.d. from a normal distribution with the
    /// tensor's own mean and standard deviation. Tensors whose values are all non-negative
    /// (variances, for example) keep that property by folding draws to absolute values.
    Graph randomized(std::uint64_t seed) const;

    std::size_t initializer_count() const { return initializers_.size(); }
    const std::unordered_map<std::string, Tensor>& initializers() const { return initializers_; }

private:
    std::vector<Node> nodes_;
    std::unordered_map<std::string, Tensor> initializers_;
    std::vector<std::string> initializer_order_;
    std::string input_name_;
    std::vector<std::int64_t> input_shape_;
    std::string output_name_;
    // Index of the last node reading each intermediate value, for early release.
    std::unordered_map<std::string, std::size_t> last_use_;
};

}  // namespace corrrise::onnx
