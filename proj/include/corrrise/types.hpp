#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corrrise/errors.hpp"

namespace corrrise {

/// Decoded image, row-major, channel-interleaved, values in [0,1].
class ImageTensor {
public:
    ImageTensor() = default;
    ImageTensor(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f);
    ImageTensor(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> data);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t channels() const { return channels_; }
    std::size_t pixel_count() const { return height_ * width_; }
    bool empty() const { return data_.empty(); }

    float& at(std::size_t row, std::size_t col, std::size_t ch = 0) {
        return data_[(row * width_ + col) * channels_ + ch];
    }
    float at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
        return data_[(row * width_ + col) * channels_ + ch];
    }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    bool same_shape(const ImageTensor& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t channels_ = 0;
    std::vector<float> data_;
};

/// Single-channel H x W field. Used both for masks ([0,1]) and saliency maps ([-1,1]).
template <typename Tag>
class Field {
public:
    Field() = default;
    Field(std::size_t height, std::size_t width, float fill = 0.0f)
        : height_(height), width_(width), data_(height * width, fill) {}
    Field(std::size_t height, std::size_t width, std::vector<float> data);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return data_.size(); }

    float& at(std::size_t row, std::size_t col) { return data_[row * width_ + col]; }
    float at(std::size_t row, std::size_t col) const { return data_[row * width_ + col]; }
    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    friend bool operator==(const Field&, const Field&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<float> data_;
};

struct MaskTag {};
struct SaliencyTag {};

/// Multiplicative visibility field, values in [0,1].
using Mask = Field<MaskTag>;
/// Signed per-pixel Pearson coefficients, values in [-1,1].
using SaliencyMap = Field<SaliencyTag>;

/// Output of a face-recognition backend.
using EmbeddingVector = std::vector<float>;

/// One similarity score per mask iteration.
using ScoreSeries = std::vector<double>;

struct CurvePoint {
    double fraction = 0.0;
    double accuracy = 0.0;
    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// Accuracy versus fraction of modified pixels, with its trapezoidal AUC in percent.
struct EvalCurve {
    std::vector<CurvePoint> points;
    double auc_percent = 0.0;
};

// Template definitions.

template <typename Tag>
Field<Tag>::Field(std::size_t height, std::size_t width, std::vector<float> data)
    : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != height_ * width_) {
        throw ContractError("field data length " + std::to_string(data_.size()) + " does not match " +
                            std::to_string(height_) + "x" + std::to_string(width_));
    }
}

}  // namespace corrrise
