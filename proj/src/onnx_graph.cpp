#include "corrrise/onnx_graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "corrrise/errors.hpp"
#include "corrrise/rng.hpp"
#include "onnx.pb.h"

namespace corrrise::onnx {
namespace {

using Shape = std::vector<std::int64_t>;
using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t product(const Shape& s, std::size_t from = 0, std::size_t to = SIZE_MAX) {
    to = std::min(to, s.size());
    std::size_t n = 1;
    for (std::size_t k = from; k < to; ++k) n *= static_cast<std::size_t>(s[k]);
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t k = 0; k < s.size(); ++k) os << (k ? "," : "") << s[k];
    os << "]";
    return os.str();
}

[[noreturn]] void fail(const Node& node, const std::string& msg) {
    throw BackendError("onnx node '" + node.name + "' (" + node.op_type + "): " + msg);
}

// ---------------------------------------------------------------------------------------------
// Protobuf conversion

template <typename T>
std::vector<T> read_raw(const std::string& raw, std::size_t count) {
    static_assert(std::endian::native == std::endian::little, "raw tensor data is little-endian");
    if (raw.size() != count * sizeof(T)) {
        throw BackendError("onnx tensor raw_data has " + std::to_string(raw.size()) +
                           " bytes, expected " + std::to_string(count * sizeof(T)));
    }
    std::vector<T> out(count);
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

Tensor from_proto(const ::onnx::TensorProto& tp) {
    if (tp.data_location() == ::onnx::TensorProto::EXTERNAL) {
        throw BackendError("onnx tensor '" + tp.name() + "' uses external data, which is unsupported");
    }
    Tensor t;
    t.shape.assign(tp.dims().begin(), tp.dims().end());
    const std::size_t count = product(t.shape);
    const bool raw = tp.has_raw_data();
    switch (tp.data_type()) {
        case ::onnx::TensorProto::FLOAT:
            t.type = Tensor::Type::Float;
            t.f = raw ? read_raw<float>(tp.raw_data(), count)
                      : std::vector<float>(tp.float_data().begin(), tp.float_data().end());
            break;
        case ::onnx::TensorProto::DOUBLE: {
            t.type = Tensor::Type::Float;
            const auto d = raw ? read_raw<double>(tp.raw_data(), count)
                               : std::vector<double>(tp.double_data().begin(), tp.double_data().end());
            t.f.assign(d.begin(), d.end());
            break;
        }
        case ::onnx::TensorProto::INT64:
            t.type = Tensor::Type::Int64;
            t.i = raw ? read_raw<std::int64_t>(tp.raw_data(), count)
                      : std::vector<std::int64_t>(tp.int64_data().begin(), tp.int64_data().end());
            break;
        case ::onnx::TensorProto::INT32: {
            t.type = Tensor::Type::Int64;
            const auto d = raw ? read_raw<std::int32_t>(tp.raw_data(), count)
                               : std::vector<std::int32_t>(tp.int32_data().begin(), tp.int32_data().end());
            t.i.assign(d.begin(), d.end());
            break;
        }
        default:
            throw BackendError("onnx tensor '" + tp.name() + "' has unsupported data type " +
                               std::to_string(tp.data_type()));
    }
    if ((t.is_float() ? t.f.size() : t.i.size()) != count) {
        throw BackendError("onnx tensor '" + tp.name() + "' holds the wrong number of elements for shape " +
                           shape_str(t.shape));
    }
    return t;
}

Attribute from_proto(const ::onnx::AttributeProto& ap) {
    Attribute a;
    switch (ap.type()) {
        case ::onnx::AttributeProto::FLOAT:
            a.kind = Attribute::Kind::Float;
            a.f = ap.f();
            break;
        case ::onnx::AttributeProto::INT:
            a.kind = Attribute::Kind::Int;
            a.i = ap.i();
            break;
        case ::onnx::AttributeProto::STRING:
            a.kind = Attribute::Kind::String;
            a.s = ap.s();
            break;
        case ::onnx::AttributeProto::TENSOR:
            a.kind = Attribute::Kind::Tensor;
            a.t = std::make_shared<Tensor>(from_proto(ap.t()));
            break;
        case ::onnx::AttributeProto::FLOATS:
            a.kind = Attribute::Kind::Floats;
            a.floats.assign(ap.floats().begin(), ap.floats().end());
            break;
        case ::onnx::AttributeProto::INTS:
            a.kind = Attribute::Kind::Ints;
            a.ints.assign(ap.ints().begin(), ap.ints().end());
            break;
        default:
            a.kind = Attribute::Kind::Other;
            break;
    }
    return a;
}

// ---------------------------------------------------------------------------------------------
// Attribute helpers

std::int64_t attr_int(const Node& n, const std::string& key, std::int64_t fallback) {
    const auto it = n.attributes.find(key);
    return it == n.attributes.end() ? fallback : it->second.i;
}

float attr_float(const Node& n, const std::string& key, float fallback) {
    const auto it = n.attributes.find(key);
    return it == n.attributes.end() ? fallback : it->second.f;
}

std::string attr_string(const Node& n, const std::string& key, const std::string& fallback) {
    const auto it = n.attributes.find(key);
    return it == n.attributes.end() ? fallback : it->second.s;
}

Shape attr_ints(const Node& n, const std::string& key, Shape fallback = {}) {
    const auto it = n.attributes.find(key);
    return it == n.attributes.end() ? fallback : it->second.ints;
}

std::int64_t normalize_axis(const Node& n, std::int64_t axis, std::size_t rank) {
    const auto r = static_cast<std::int64_t>(rank);
    if (axis < -r || axis >= r) fail(n, "axis " + std::to_string(axis) + " out of range");
    return axis < 0 ? axis + r : axis;
}

// ---------------------------------------------------------------------------------------------
// Kernels

const std::set<std::string>& supported_ops() {
    static const std::set<std::string> ops = {
        "Conv",      "BatchNormalization", "Relu",        "LeakyRelu", "PRelu",   "Sigmoid",
        "Tanh",      "Clip",               "Add",         "Sub",       "Mul",     "Div",
        "Pow",       "Sqrt",               "Exp",         "Neg",       "MatMul",  "Gemm",
        "Flatten",   "Reshape",            "Transpose",   "Concat",    "Squeeze", "Unsqueeze",
        "Shape",     "Gather",             "Cast",        "MaxPool",   "AveragePool",
        "GlobalAveragePool", "ReduceMean", "ReduceSum",   "ReduceL2",  "Softmax", "Identity",
        "Dropout",   "Constant"};
    return ops;
}

const Tensor& require_float(const Node& n, const Tensor& t, const char* what) {
    if (!t.is_float()) fail(n, std::string(what) + " must be a float tensor");
    return t;
}

Shape broadcast_shape(const Node& n, const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        const std::int64_t da = k < rank - a.size() ? 1 : a[k - (rank - a.size())];
        const std::int64_t db = k < rank - b.size() ? 1 : b[k - (rank - b.size())];
        if (da != db && da != 1 && db != 1) {
            fail(n, "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
        out[k] = std::max(da, db);
    }
    return out;
}

// Element strides of `s` aligned to an output of rank `rank`; broadcast dimensions get stride 0.
std::vector<std::size_t> broadcast_strides(const Shape& s, std::size_t rank) {
    std::vector<std::size_t> strides(rank, 0);
    std::size_t step = 1;
    for (std::size_t k = s.size(); k-- > 0;) {
        const std::size_t ok = k + (rank - s.size());
        strides[ok] = s[k] == 1 ? 0 : step;
        step *= static_cast<std::size_t>(s[k]);
    }
    return strides;
}

template <typename T, typename Op>
std::vector<T> broadcast_apply(const Shape& out_shape, const Shape& as, const std::vector<T>& a,
                               const Shape& bs, const std::vector<T>& b, Op op) {
    const std::size_t rank = out_shape.size();
    const std::size_t total = product(out_shape);
    std::vector<T> out(total);
    if (as == bs) {
        for (std::size_t k = 0; k < total; ++k) out[k] = op(a[k], b[k]);
        return out;
    }
    if (b.size() == 1) {
        for (std::size_t k = 0; k < total; ++k) out[k] = op(a[k % a.size()], b[0]);
        if (a.size() == total) return out;
    }
    const auto sa = broadcast_strides(as, rank);
    const auto sb = broadcast_strides(bs, rank);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t k = 0; k < total; ++k) {
        out[k] = op(a[ia], b[ib]);
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            ia += sa[d];
            ib += sb[d];
            if (idx[d] < static_cast<std::size_t>(out_shape[d])) break;
            ia -= sa[d] * idx[d];
            ib -= sb[d] * idx[d];
            idx[d] = 0;
        }
    }
    return out;
}

Tensor binary(const Node& n, const Tensor& a, const Tensor& b) {
    const Shape out_shape = broadcast_shape(n, a.shape, b.shape);
    const std::string& op = n.op_type;
    if (a.is_float() != b.is_float()) fail(n, "mixed float/integer operands");
    if (!a.is_float()) {
        std::function<std::int64_t(std::int64_t, std::int64_t)> f;
        if (op == "Add") f = std::plus<>();
        else if (op == "Sub") f = std::minus<>();
        else if (op == "Mul") f = std::multiplies<>();
        else if (op == "Div") f = [&](std::int64_t x, std::int64_t y) {
            if (y == 0) fail(n, "integer division by zero");
            return x / y;
        };
        else fail(n, "integer operands unsupported");
        return Tensor::ints(out_shape, broadcast_apply(out_shape, a.shape, a.i, b.shape, b.i, f));
    }
    std::vector<float> out;
    if (op == "Add") out = broadcast_apply(out_shape, a.shape, a.f, b.shape, b.f, std::plus<float>());
    else if (op == "Sub") out = broadcast_apply(out_shape, a.shape, a.f, b.shape, b.f, std::minus<float>());
    else if (op == "Mul") out = broadcast_apply(out_shape, a.shape, a.f, b.shape, b.f, std::multiplies<float>());
    else if (op == "Div") out = broadcast_apply(out_shape, a.shape, a.f, b.shape, b.f, std::divides<float>());
    else if (op == "Pow") out = broadcast_apply(out_shape, a.shape, a.f, b.shape, b.f, [](float x, float y) { return std::pow(x, y); });
    else if (op == "PRelu") out = broadcast_apply(out_shape, a.shape, a.f, b.shape, b.f, [](float x, float s) { return x >= 0.0f ? x : x * s; });
    else fail(n, "not a binary operator");
    return Tensor::floats(out_shape, std::move(out));
}

template <typename F>
Tensor unary(const Node& n, const Tensor& x, F f) {
    require_float(n, x, "input");
    Tensor out = x;
    for (float& v : out.f) v = f(v);
    return out;
}

struct Window {
    Shape kernel, strides, dilations, pads;  // pads: begins then ends
};

Window window_params(const Node& n, const Shape& in_spatial, const Shape& kernel) {
    const std::size_t d = kernel.size();
    Window w;
    w.kernel = kernel;
    w.strides = attr_ints(n, "strides", Shape(d, 1));
    w.dilations = attr_ints(n, "dilations", Shape(d, 1));
    w.pads = attr_ints(n, "pads", Shape(2 * d, 0));
    if (w.strides.size() != d || w.dilations.size() != d || w.pads.size() != 2 * d) {
        fail(n, "strides/dilations/pads do not match the kernel rank");
    }
    const std::string auto_pad = attr_string(n, "auto_pad", "NOTSET");
    if (auto_pad == "SAME_UPPER" || auto_pad == "SAME_LOWER") {
        for (std::size_t k = 0; k < d; ++k) {
            const std::int64_t out = (in_spatial[k] + w.strides[k] - 1) / w.strides[k];
            const std::int64_t extent = (kernel[k] - 1) * w.dilations[k] + 1;
            const std::int64_t total = std::max<std::int64_t>(0, (out - 1) * w.strides[k] + extent - in_spatial[k]);
            const std::int64_t small = total / 2;
            w.pads[k] = auto_pad == "SAME_UPPER" ? small : total - small;
            w.pads[k + d] = total - w.pads[k];
        }
    } else if (auto_pad == "VALID") {
        std::fill(w.pads.begin(), w.pads.end(), 0);
    } else if (auto_pad != "NOTSET") {
        fail(n, "unsupported auto_pad " + auto_pad);
    }
    return w;
}

std::int64_t window_out(const Window& w, std::int64_t in, std::size_t k, bool ceil_mode) {
    const std::int64_t extent = (w.kernel[k] - 1) * w.dilations[k] + 1;
    const std::int64_t span = in + w.pads[k] + w.pads[k + w.kernel.size()] - extent;
    if (span < 0) return 0;
    return (ceil_mode ? (span + w.strides[k] - 1) / w.strides[k] : span / w.strides[k]) + 1;
}

Tensor conv(const Node& n, const Tensor& x, const Tensor& weight, const Tensor* bias) {
    require_float(n, x, "X");
    require_float(n, weight, "W");
    if (x.shape.size() != 4 || weight.shape.size() != 4) fail(n, "only 2-D convolution is supported");
    const std::int64_t batch = x.shape[0], channels = x.shape[1], in_h = x.shape[2], in_w = x.shape[3];
    const std::int64_t out_c = weight.shape[0], kh = weight.shape[2], kw = weight.shape[3];
    const std::int64_t group = attr_int(n, "group", 1);
    if (group <= 0 || channels % group != 0 || out_c % group != 0 || weight.shape[1] != channels / group) {
        fail(n, "channel/group mismatch: X " + shape_str(x.shape) + ", W " + shape_str(weight.shape));
    }
    const Window w = window_params(n, {in_h, in_w}, {kh, kw});
    const std::int64_t out_h = window_out(w, in_h, 0, false);
    const std::int64_t out_w = window_out(w, in_w, 1, false);
    const std::int64_t cg = channels / group, mg = out_c / group;
    const std::int64_t patch = cg * kh * kw, cols = out_h * out_w;

    Tensor out = Tensor::floats({batch, out_c, out_h, out_w}, std::vector<float>(product({batch, out_c, out_h, out_w}), 0.0f));
    RowMajor col(patch, cols);
    for (std::int64_t b = 0; b < batch; ++b) {
        for (std::int64_t g = 0; g < group; ++g) {
            const float* src = x.f.data() + (b * channels + g * cg) * in_h * in_w;
            for (std::int64_t c = 0; c < cg; ++c) {
                for (std::int64_t ky = 0; ky < kh; ++ky) {
                    for (std::int64_t kx = 0; kx < kw; ++kx) {
                        float* dst = col.data() + ((c * kh + ky) * kw + kx) * cols;
                        for (std::int64_t oy = 0; oy < out_h; ++oy) {
                            const std::int64_t iy = oy * w.strides[0] - w.pads[0] + ky * w.dilations[0];
                            for (std::int64_t ox = 0; ox < out_w; ++ox) {
                                const std::int64_t ix = ox * w.strides[1] - w.pads[1] + kx * w.dilations[1];
                                dst[oy * out_w + ox] = (iy >= 0 && iy < in_h && ix >= 0 && ix < in_w)
                                                           ? src[(c * in_h + iy) * in_w + ix]
                                                           : 0.0f;
                            }
                        }
                    }
                }
            }
            Eigen::Map<const RowMajor> wmat(weight.f.data() + g * mg * patch, mg, patch);
            Eigen::Map<RowMajor> omat(out.f.data() + (b * out_c + g * mg) * cols, mg, cols);
            omat.noalias() = wmat * col;
        }
        if (bias) {
            for (std::int64_t m = 0; m < out_c; ++m) {
                float* dst = out.f.data() + (b * out_c + m) * cols;
                for (std::int64_t k = 0; k < cols; ++k) dst[k] += bias->f[static_cast<std::size_t>(m)];
            }
        }
    }
    return out;
}

Tensor pool(const Node& n, const Tensor& x, bool is_max) {
    require_float(n, x, "X");
    if (x.shape.size() != 4) fail(n, "only 2-D pooling is supported");
    const Shape kernel = attr_ints(n, "kernel_shape");
    if (kernel.size() != 2) fail(n, "kernel_shape must have 2 entries");
    const std::int64_t batch = x.shape[0], channels = x.shape[1], in_h = x.shape[2], in_w = x.shape[3];
    const Window w = window_params(n, {in_h, in_w}, kernel);
    const bool ceil_mode = attr_int(n, "ceil_mode", 0) != 0;
    const bool include_pad = attr_int(n, "count_include_pad", 0) != 0;
    const std::int64_t out_h = window_out(w, in_h, 0, ceil_mode);
    const std::int64_t out_w = window_out(w, in_w, 1, ceil_mode);
    Tensor out = Tensor::floats({batch, channels, out_h, out_w},
                                std::vector<float>(product({batch, channels, out_h, out_w})));
    for (std::int64_t bc = 0; bc < batch * channels; ++bc) {
        const float* src = x.f.data() + bc * in_h * in_w;
        float* dst = out.f.data() + bc * out_h * out_w;
        for (std::int64_t oy = 0; oy < out_h; ++oy) {
            for (std::int64_t ox = 0; ox < out_w; ++ox) {
                float best = -std::numeric_limits<float>::infinity();
                double sum = 0.0;
                std::int64_t count = 0, padded = 0;
                for (std::int64_t ky = 0; ky < kernel[0]; ++ky) {
                    const std::int64_t iy = oy * w.strides[0] - w.pads[0] + ky * w.dilations[0];
                    for (std::int64_t kx = 0; kx < kernel[1]; ++kx) {
                        const std::int64_t ix = ox * w.strides[1] - w.pads[1] + kx * w.dilations[1];
                        const bool inside_padded = iy < in_h + w.pads[2] && ix < in_w + w.pads[3];
                        if (iy < 0 || iy >= in_h || ix < 0 || ix >= in_w) {
                            if (inside_padded) ++padded;
                            continue;
                        }
                        const float v = src[iy * in_w + ix];
                        best = std::max(best, v);
                        sum += v;
                        ++count;
                    }
                }
                const std::int64_t denom = include_pad ? count + padded : count;
                dst[oy * out_w + ox] = is_max ? best : (denom ? static_cast<float>(sum / static_cast<double>(denom)) : 0.0f);
            }
        }
    }
    return out;
}

Tensor matmul(const Node& n, const Tensor& a, const Tensor& b) {
    require_float(n, a, "A");
    require_float(n, b, "B");
    if (a.shape.size() < 2 || b.shape.size() < 2) fail(n, "operands must have rank >= 2");
    const std::int64_t m = a.shape[a.shape.size() - 2], k = a.shape.back();
    const std::int64_t kb = b.shape[b.shape.size() - 2], nn = b.shape.back();
    if (k != kb) fail(n, "inner dimensions differ: " + shape_str(a.shape) + " x " + shape_str(b.shape));
    const std::size_t batch_a = product(a.shape, 0, a.shape.size() - 2);
    const std::size_t batch_b = product(b.shape, 0, b.shape.size() - 2);
    if (batch_b != 1 && batch_b != batch_a) fail(n, "unsupported batch broadcast");
    Shape out_shape(a.shape.begin(), a.shape.end() - 2);
    out_shape.push_back(m);
    out_shape.push_back(nn);
    std::vector<float> out(product(out_shape));
    for (std::size_t bi = 0; bi < batch_a; ++bi) {
        Eigen::Map<const RowMajor> am(a.f.data() + bi * m * k, m, k);
        Eigen::Map<const RowMajor> bm(b.f.data() + (batch_b == 1 ? 0 : bi) * k * nn, k, nn);
        Eigen::Map<RowMajor> om(out.data() + bi * m * nn, m, nn);
        om.noalias() = am * bm;
    }
    return Tensor::floats(out_shape, std::move(out));
}

Tensor gemm(const Node& n, const Tensor& a, const Tensor& b, const Tensor* c) {
    require_float(n, a, "A");
    require_float(n, b, "B");
    if (a.shape.size() != 2 || b.shape.size() != 2) fail(n, "Gemm operands must be 2-D");
    const bool ta = attr_int(n, "transA", 0) != 0;
    const bool tb = attr_int(n, "transB", 0) != 0;
    const float alpha = attr_float(n, "alpha", 1.0f);
    const float beta = attr_float(n, "beta", 1.0f);
    Eigen::Map<const RowMajor> am(a.f.data(), a.shape[0], a.shape[1]);
    Eigen::Map<const RowMajor> bm(b.f.data(), b.shape[0], b.shape[1]);
    RowMajor lhs = ta ? RowMajor(am.transpose()) : RowMajor(am);
    RowMajor rhs = tb ? RowMajor(bm.transpose()) : RowMajor(bm);
    if (lhs.cols() != rhs.rows()) fail(n, "inner dimensions differ");
    RowMajor prod = alpha * (lhs * rhs);
    Tensor out = Tensor::floats({prod.rows(), prod.cols()},
                                std::vector<float>(prod.data(), prod.data() + prod.size()));
    if (c) {
        require_float(n, *c, "C");
        Tensor scaled = *c;
        for (float& v : scaled.f) v *= beta;
        Node add = n;
        add.op_type = "Add";
        out = binary(add, out, scaled);
    }
    return out;
}

Tensor transpose(const Node& n, const Tensor& x) {
    const std::size_t rank = x.shape.size();
    Shape perm = attr_ints(n, "perm");
    if (perm.empty()) {
        perm.resize(rank);
        for (std::size_t k = 0; k < rank; ++k) perm[k] = static_cast<std::int64_t>(rank - 1 - k);
    }
    if (perm.size() != rank) fail(n, "perm rank mismatch");
    Shape out_shape(rank);
    for (std::size_t k = 0; k < rank; ++k) out_shape[k] = x.shape[static_cast<std::size_t>(perm[k])];
    std::vector<std::size_t> in_strides(rank, 1);
    for (std::size_t k = rank; k-- > 1;) in_strides[k - 1] = in_strides[k] * static_cast<std::size_t>(x.shape[k]);
    const std::size_t total = x.numel();
    std::vector<std::size_t> src_index(total);
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t o = 0; o < total; ++o) {
        std::size_t s = 0;
        for (std::size_t k = 0; k < rank; ++k) s += idx[k] * in_strides[static_cast<std::size_t>(perm[k])];
        src_index[o] = s;
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < static_cast<std::size_t>(out_shape[d])) break;
            idx[d] = 0;
        }
    }
    Tensor out;
    out.type = x.type;
    out.shape = out_shape;
    if (x.is_float()) {
        out.f.resize(total);
        for (std::size_t o = 0; o < total; ++o) out.f[o] = x.f[src_index[o]];
    } else {
        out.i.resize(total);
        for (std::size_t o = 0; o < total; ++o) out.i[o] = x.i[src_index[o]];
    }
    return out;
}

Tensor concat(const Node& n, const std::vector<const Tensor*>& xs) {
    if (xs.empty()) fail(n, "no inputs");
    const std::size_t rank = xs.front()->shape.size();
    const auto axis = static_cast<std::size_t>(normalize_axis(n, attr_int(n, "axis", 0), rank));
    Shape out_shape = xs.front()->shape;
    out_shape[axis] = 0;
    for (const Tensor* t : xs) {
        if (t->shape.size() != rank || t->type != xs.front()->type) fail(n, "inputs differ in rank or type");
        out_shape[axis] += t->shape[axis];
    }
    const std::size_t outer = product(out_shape, 0, axis);
    Tensor out;
    out.type = xs.front()->type;
    out.shape = out_shape;
    for (std::size_t o = 0; o < outer; ++o) {
        for (const Tensor* t : xs) {
            const std::size_t block = product(t->shape, axis);
            if (t->is_float()) out.f.insert(out.f.end(), t->f.begin() + o * block, t->f.begin() + (o + 1) * block);
            else out.i.insert(out.i.end(), t->i.begin() + o * block, t->i.begin() + (o + 1) * block);
        }
    }
    return out;
}

Tensor gather(const Node& n, const Tensor& data, const Tensor& indices) {
    if (indices.is_float()) fail(n, "indices must be integers");
    const std::size_t rank = data.shape.size();
    const auto axis = static_cast<std::size_t>(normalize_axis(n, attr_int(n, "axis", 0), rank));
    const std::size_t outer = product(data.shape, 0, axis);
    const std::size_t inner = product(data.shape, axis + 1);
    const std::int64_t dim = data.shape[axis];
    Shape out_shape(data.shape.begin(), data.shape.begin() + static_cast<std::ptrdiff_t>(axis));
    out_shape.insert(out_shape.end(), indices.shape.begin(), indices.shape.end());
    out_shape.insert(out_shape.end(), data.shape.begin() + static_cast<std::ptrdiff_t>(axis) + 1, data.shape.end());
    Tensor out;
    out.type = data.type;
    out.shape = out_shape;
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::int64_t raw : indices.i) {
            const std::int64_t idx = raw < 0 ? raw + dim : raw;
            if (idx < 0 || idx >= dim) fail(n, "index out of range");
            const std::size_t from = (o * static_cast<std::size_t>(dim) + static_cast<std::size_t>(idx)) * inner;
            if (data.is_float()) out.f.insert(out.f.end(), data.f.begin() + from, data.f.begin() + from + inner);
            else out.i.insert(out.i.end(), data.i.begin() + from, data.i.begin() + from + inner);
        }
    }
    return out;
}

Tensor reduce(const Node& n, const Tensor& x, const Tensor* axes_input) {
    require_float(n, x, "data");
    const std::size_t rank = x.shape.size();
    Shape axes = axes_input ? axes_input->i : attr_ints(n, "axes");
    const bool keepdims = attr_int(n, "keepdims", 1) != 0;
    std::vector<bool> reduced(rank, axes.empty());
    for (std::int64_t a : axes) reduced[static_cast<std::size_t>(normalize_axis(n, a, rank))] = true;
    Shape out_shape, kept_shape(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        kept_shape[k] = reduced[k] ? 1 : x.shape[k];
        if (!reduced[k] || keepdims) out_shape.push_back(kept_shape[k]);
    }
    const auto out_strides = broadcast_strides(kept_shape, rank);
    std::vector<double> acc(product(kept_shape), 0.0);
    std::vector<std::size_t> idx(rank, 0);
    const bool l2 = n.op_type == "ReduceL2";
    for (std::size_t k = 0; k < x.numel(); ++k) {
        std::size_t o = 0;
        for (std::size_t d = 0; d < rank; ++d) o += idx[d] * out_strides[d];
        const double v = x.f[k];
        acc[o] += l2 ? v * v : v;
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < static_cast<std::size_t>(x.shape[d])) break;
            idx[d] = 0;
        }
    }
    const double count = static_cast<double>(x.numel()) / static_cast<double>(acc.size());
    std::vector<float> out(acc.size());
    for (std::size_t k = 0; k < acc.size(); ++k) {
        double v = acc[k];
        if (n.op_type == "ReduceMean") v /= count;
        if (l2) v = std::sqrt(v);
        out[k] = static_cast<float>(v);
    }
    return Tensor::floats(out_shape, std::move(out));
}

Tensor softmax(const Node& n, const Tensor& x) {
    require_float(n, x, "input");
    const auto axis = static_cast<std::size_t>(normalize_axis(n, attr_int(n, "axis", -1), x.shape.size()));
    const std::size_t outer = product(x.shape, 0, axis);
    const std::size_t dim = static_cast<std::size_t>(x.shape[axis]);
    const std::size_t inner = product(x.shape, axis + 1);
    Tensor out = x;
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            float mx = -std::numeric_limits<float>::infinity();
            for (std::size_t d = 0; d < dim; ++d) mx = std::max(mx, x.f[(o * dim + d) * inner + i]);
            double sum = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                float& v = out.f[(o * dim + d) * inner + i];
                v = std::exp(v - mx);
                sum += v;
            }
            for (std::size_t d = 0; d < dim; ++d) out.f[(o * dim + d) * inner + i] /= static_cast<float>(sum);
        }
    }
    return out;
}

Tensor reshape(const Node& n, const Tensor& x, const Tensor& shape_t) {
    if (shape_t.is_float()) fail(n, "shape must be int64");
    Shape target = shape_t.i;
    const bool allow_zero = attr_int(n, "allowzero", 0) != 0;
    std::int64_t known = 1;
    std::ptrdiff_t infer = -1;
    for (std::size_t k = 0; k < target.size(); ++k) {
        if (target[k] == 0 && !allow_zero) {
            if (k >= x.shape.size()) fail(n, "0 in shape refers past the input rank");
            target[k] = x.shape[k];
        }
        if (target[k] == -1) {
            if (infer >= 0) fail(n, "more than one -1 in shape");
            infer = static_cast<std::ptrdiff_t>(k);
        } else {
            known *= target[k];
        }
    }
    if (infer >= 0) {
        if (known == 0) fail(n, "cannot infer dimension");
        target[static_cast<std::size_t>(infer)] = static_cast<std::int64_t>(x.numel()) / known;
    }
    if (product(target) != x.numel()) fail(n, "cannot reshape " + shape_str(x.shape) + " to " + shape_str(target));
    Tensor out = x;
    out.shape = target;
    return out;
}

Shape axes_of(const Node& n, const std::vector<const Tensor*>& in) {
    if (in.size() > 1 && in[1]) return in[1]->i;
    return attr_ints(n, "axes");
}

}  // namespace

// ---------------------------------------------------------------------------------------------

std::size_t Tensor::numel() const { return product(shape); }

Tensor Tensor::floats(std::vector<std::int64_t> shape, std::vector<float> data) {
    Tensor t;
    t.type = Type::Float;
    t.shape = std::move(shape);
    t.f = std::move(data);
    return t;
}

Tensor Tensor::ints(std::vector<std::int64_t> shape, std::vector<std::int64_t> data) {
    Tensor t;
    t.type = Type::Int64;
    t.shape = std::move(shape);
    t.i = std::move(data);
    return t;
}

Graph Graph::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BackendError("cannot open onnx model " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse(buf.str());
    } catch (const BackendError& e) {
        throw BackendError(path.string() + ": " + e.what());
    }
}

Graph Graph::parse(const std::string& bytes) {
    ::onnx::ModelProto model;
    if (!model.ParseFromString(bytes)) throw BackendError("not a valid onnx model (protobuf parse failed)");
    const auto& gp = model.graph();
    Graph g;
    for (const auto& init : gp.initializer()) {
        g.initializers_.emplace(init.name(), from_proto(init));
        g.initializer_order_.push_back(init.name());
    }
    for (const auto& input : gp.input()) {
        if (g.initializers_.contains(input.name())) continue;
        if (!g.input_name_.empty()) throw BackendError("onnx model has more than one non-initializer input");
        g.input_name_ = input.name();
        for (const auto& dim : input.type().tensor_type().shape().dim()) {
            g.input_shape_.push_back(dim.has_dim_value() ? dim.dim_value() : -1);
        }
    }
    if (g.input_name_.empty()) throw BackendError("onnx model declares no input");
    if (gp.output_size() < 1) throw BackendError("onnx model declares no output");
    g.output_name_ = gp.output(0).name();

    for (const auto& np : gp.node()) {
        if (!np.domain().empty() && np.domain() != "ai.onnx") {
            throw BackendError("onnx operator domain '" + np.domain() + "' is unsupported");
        }
        Node node;
        node.op_type = np.op_type();
        node.name = np.name().empty() ? np.op_type() + "_" + std::to_string(g.nodes_.size()) : np.name();
        node.inputs.assign(np.input().begin(), np.input().end());
        node.outputs.assign(np.output().begin(), np.output().end());
        for (const auto& ap : np.attribute()) node.attributes.emplace(ap.name(), from_proto(ap));
        if (!supported_ops().contains(node.op_type)) {
            throw BackendError("onnx operator '" + node.op_type + "' is unsupported (node " + node.name + ")");
        }
        g.nodes_.push_back(std::move(node));
    }
    for (std::size_t k = 0; k < g.nodes_.size(); ++k) {
        for (const auto& name : g.nodes_[k].inputs) {
            if (!name.empty()) g.last_use_[name] = k;
        }
    }
    return g;
}

Tensor Graph::run(const Tensor& input) const {
    std::unordered_map<std::string, Tensor> values;
    values.emplace(input_name_, input);

    auto lookup = [&](const Node& n, const std::string& name) -> const Tensor* {
        if (name.empty()) return nullptr;
        if (auto it = values.find(name); it != values.end()) return &it->second;
        if (auto it = initializers_.find(name); it != initializers_.end()) return &it->second;
        fail(n, "missing input value '" + name + "'");
    };

    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const Node& n = nodes_[k];
        std::vector<const Tensor*> in;
        in.reserve(n.inputs.size());
        for (const auto& name : n.inputs) in.push_back(lookup(n, name));
        auto arg = [&](std::size_t i) -> const Tensor& {
            if (i >= in.size() || !in[i]) fail(n, "missing required input " + std::to_string(i));
            return *in[i];
        };
        auto opt = [&](std::size_t i) -> const Tensor* { return i < in.size() ? in[i] : nullptr; };

        const std::string& op = n.op_type;
        Tensor out;
        if (op == "Conv") {
            out = conv(n, arg(0), arg(1), opt(2));
        } else if (op == "BatchNormalization") {
            const Tensor& x = require_float(n, arg(0), "X");
            const Tensor &scale = arg(1), &bias = arg(2), &mean = arg(3), &var = arg(4);
            const float eps = attr_float(n, "epsilon", 1e-5f);
            const std::size_t channels = static_cast<std::size_t>(x.shape.at(1));
            const std::size_t inner = product(x.shape, 2);
            out = x;
            for (std::size_t b = 0; b < static_cast<std::size_t>(x.shape[0]); ++b) {
                for (std::size_t c = 0; c < channels; ++c) {
                    const float a = scale.f[c] / std::sqrt(var.f[c] + eps);
                    const float s = bias.f[c] - a * mean.f[c];
                    float* p = out.f.data() + (b * channels + c) * inner;
                    for (std::size_t i = 0; i < inner; ++i) p[i] = p[i] * a + s;
                }
            }
        } else if (op == "Relu") {
            out = unary(n, arg(0), [](float v) { return v > 0.0f ? v : 0.0f; });
        } else if (op == "LeakyRelu") {
            const float alpha = attr_float(n, "alpha", 0.01f);
            out = unary(n, arg(0), [alpha](float v) { return v >= 0.0f ? v : v * alpha; });
        } else if (op == "Sigmoid") {
            out = unary(n, arg(0), [](float v) { return 1.0f / (1.0f + std::exp(-v)); });
        } else if (op == "Tanh") {
            out = unary(n, arg(0), [](float v) { return std::tanh(v); });
        } else if (op == "Sqrt") {
            out = unary(n, arg(0), [](float v) { return std::sqrt(v); });
        } else if (op == "Exp") {
            out = unary(n, arg(0), [](float v) { return std::exp(v); });
        } else if (op == "Neg") {
            out = unary(n, arg(0), [](float v) { return -v; });
        } else if (op == "Clip") {
            float lo = attr_float(n, "min", -std::numeric_limits<float>::infinity());
            float hi = attr_float(n, "max", std::numeric_limits<float>::infinity());
            if (const Tensor* t = opt(1)) lo = t->f.at(0);
            if (const Tensor* t = opt(2)) hi = t->f.at(0);
            out = unary(n, arg(0), [lo, hi](float v) { return std::clamp(v, lo, hi); });
        } else if (op == "Add" || op == "Sub" || op == "Mul" || op == "Div" || op == "Pow" || op == "PRelu") {
            out = binary(n, arg(0), arg(1));
        } else if (op == "MatMul") {
            out = matmul(n, arg(0), arg(1));
        } else if (op == "Gemm") {
            out = gemm(n, arg(0), arg(1), opt(2));
        } else if (op == "Flatten") {
            const Tensor& x = arg(0);
            const std::int64_t axis = attr_int(n, "axis", 1);
            const auto a = static_cast<std::size_t>(axis < 0 ? axis + static_cast<std::int64_t>(x.shape.size()) : axis);
            out = x;
            out.shape = {static_cast<std::int64_t>(product(x.shape, 0, a)),
                         static_cast<std::int64_t>(product(x.shape, a))};
        } else if (op == "Reshape") {
            out = reshape(n, arg(0), arg(1));
        } else if (op == "Transpose") {
            out = transpose(n, arg(0));
        } else if (op == "Concat") {
            out = concat(n, in);
        } else if (op == "Squeeze") {
            const Tensor& x = arg(0);
            const Shape axes = axes_of(n, in);
            std::vector<bool> drop(x.shape.size(), false);
            for (std::int64_t a : axes) drop[static_cast<std::size_t>(normalize_axis(n, a, x.shape.size()))] = true;
            out = x;
            out.shape.clear();
            for (std::size_t d = 0; d < x.shape.size(); ++d) {
                const bool squeeze = axes.empty() ? x.shape[d] == 1 : drop[d];
                if (squeeze && x.shape[d] != 1) fail(n, "cannot squeeze a dimension that is not 1");
                if (!squeeze) out.shape.push_back(x.shape[d]);
            }
        } else if (op == "Unsqueeze") {
            const Tensor& x = arg(0);
            const Shape axes = axes_of(n, in);
            const std::size_t rank = x.shape.size() + axes.size();
            std::vector<bool> add(rank, false);
            for (std::int64_t a : axes) add[static_cast<std::size_t>(normalize_axis(n, a, rank))] = true;
            out = x;
            out.shape.clear();
            std::size_t src = 0;
            for (std::size_t d = 0; d < rank; ++d) out.shape.push_back(add[d] ? 1 : x.shape[src++]);
        } else if (op == "Shape") {
            const Tensor& x = arg(0);
            out = Tensor::ints({static_cast<std::int64_t>(x.shape.size())}, x.shape);
        } else if (op == "Gather") {
            out = gather(n, arg(0), arg(1));
        } else if (op == "Cast") {
            const Tensor& x = arg(0);
            const std::int64_t to = attr_int(n, "to", ::onnx::TensorProto::FLOAT);
            if (to == ::onnx::TensorProto::FLOAT || to == ::onnx::TensorProto::DOUBLE) {
                out = x.is_float() ? x : Tensor::floats(x.shape, std::vector<float>(x.i.begin(), x.i.end()));
            } else if (to == ::onnx::TensorProto::INT64 || to == ::onnx::TensorProto::INT32) {
                if (x.is_float()) {
                    std::vector<std::int64_t> v(x.f.size());
                    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::int64_t>(x.f[i]);
                    out = Tensor::ints(x.shape, std::move(v));
                } else {
                    out = x;
                }
            } else {
                fail(n, "unsupported cast target " + std::to_string(to));
            }
        } else if (op == "MaxPool" || op == "AveragePool") {
            out = pool(n, arg(0), op == "MaxPool");
        } else if (op == "GlobalAveragePool") {
            const Tensor& x = require_float(n, arg(0), "X");
            const std::size_t outer = product(x.shape, 0, 2);
            const std::size_t inner = product(x.shape, 2);
            Shape s = {x.shape[0], x.shape[1]};
            for (std::size_t d = 2; d < x.shape.size(); ++d) s.push_back(1);
            std::vector<float> v(outer);
            for (std::size_t o = 0; o < outer; ++o) {
                double sum = 0.0;
                for (std::size_t i = 0; i < inner; ++i) sum += x.f[o * inner + i];
                v[o] = static_cast<float>(sum / static_cast<double>(inner));
            }
            out = Tensor::floats(s, std::move(v));
        } else if (op == "ReduceMean" || op == "ReduceSum" || op == "ReduceL2") {
            out = reduce(n, arg(0), opt(1));
        } else if (op == "Softmax") {
            out = softmax(n, arg(0));
        } else if (op == "Identity" || op == "Dropout") {
            out = arg(0);
        } else if (op == "Constant") {
            const auto it = n.attributes.find("value");
            if (it != n.attributes.end() && it->second.t) {
                out = *it->second.t;
            } else if (auto f = n.attributes.find("value_float"); f != n.attributes.end()) {
                out = Tensor::floats({}, {f->second.f});
            } else if (auto i = n.attributes.find("value_int"); i != n.attributes.end()) {
                out = Tensor::ints({}, {i->second.i});
            } else if (auto fs = n.attributes.find("value_floats"); fs != n.attributes.end()) {
                out = Tensor::floats({static_cast<std::int64_t>(fs->second.floats.size())}, fs->second.floats);
            } else if (auto is = n.attributes.find("value_ints"); is != n.attributes.end()) {
                out = Tensor::ints({static_cast<std::int64_t>(is->second.ints.size())}, is->second.ints);
            } else {
                fail(n, "unsupported constant attribute");
            }
        } else {
            fail(n, "operator not implemented");
        }

        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
            const auto& name = n.inputs[i];
            if (name.empty() || name == output_name_ || name == input_name_) continue;
            auto it = last_use_.find(name);
            if (it != last_use_.end() && it->second == k) values.erase(name);
        }
        if (!n.outputs.empty() && !n.outputs[0].empty()) values.insert_or_assign(n.outputs[0], std::move(out));
    }
    auto it = values.find(output_name_);
    if (it == values.end()) {
        if (auto init = initializers_.find(output_name_); init != initializers_.end()) return init->second;
        throw BackendError("onnx graph never produced output '" + output_name_ + "'");
    }
    return it->second;
}

Graph Graph::randomized(std::uint64_t seed) const {
    Graph g = *this;
    for (std::size_t k = 0; k < initializer_order_.size(); ++k) {
        Tensor& t = g.initializers_.at(initializer_order_[k]);
        if (!t.is_float() || t.f.empty()) continue;
        double mean = 0.0;
        bool non_negative = true;
        for (float v : t.f) {
            mean += v;
            non_negative = non_negative && v >= 0.0f;
        }
        mean /= static_cast<double>(t.f.size());
        double var = 0.0;
        for (float v : t.f) var += (v - mean) * (v - mean);
        const double stddev = std::sqrt(var / static_cast<double>(t.f.size()));
        CounterRng rng(CounterRng::derive(seed, k));
        for (float& v : t.f) {
            double draw = rng.normal(mean, stddev);
            if (non_negative) draw = std::abs(draw);
            v = static_cast<float>(draw);
        }
    }
    return g;
}

}  // namespace corrrise::onnx
