#include "corrrise/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "corrrise/detail/parallel.hpp"
#include "corrrise/errors.hpp"

namespace corrrise {

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels, float fill)
    : height_(height), width_(width), channels_(channels), data_(height * width * channels, fill) {
    if (channels != 1 && channels != 3) {
        throw ContractError("image channels must be 1 or 3, got " + std::to_string(channels));
    }
}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (channels != 1 && channels != 3) {
        throw ContractError("image channels must be 1 or 3, got " + std::to_string(channels));
    }
    if (data_.size() != height * width * channels) {
        throw ContractError("image data length " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(height) + "x" +
                            std::to_string(width) + "x" + std::to_string(channels));
    }
}

void check_unit_range(const ImageTensor& img, const char* what) {
    for (float v : img.data()) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw ContractError(std::string(what) + " has a value outside [0,1]");
        }
    }
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw ContractError("cosine_similarity: dimension mismatch " + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        const double y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) {
        throw DegenerateInputError("cosine_similarity: zero-norm embedding");
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw ContractError("pearson_correlation: length mismatch " + std::to_string(x.size()) +
                            " vs " + std::to_string(y.size()));
    }
    if (x.size() < 2) {
        throw ContractError("pearson_correlation: need at least 2 samples");
    }
    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
    if (*xmin == *xmax || *ymin == *ymax) return 0.0;

    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ImageTensor apply_mask(const ImageTensor& img, const Mask& mask) {
    if (img.height() != mask.height() || img.width() != mask.width()) {
        throw ContractError("apply_mask: image is " + std::to_string(img.height()) + "x" +
                            std::to_string(img.width()) + " but mask is " +
                            std::to_string(mask.height()) + "x" + std::to_string(mask.width()));
    }
    ImageTensor out = img;
    const std::size_t c = img.channels();
    auto dst = out.data();
    for (std::size_t p = 0; p < mask.size(); ++p) {
        const float m = mask[p];
        for (std::size_t ch = 0; ch < c; ++ch) dst[p * c + ch] *= m;
    }
    return out;
}

std::vector<double> correlation_values(std::span<const double> scores, std::span<const Mask> masks,
                                       std::size_t workers) {
    if (scores.size() != masks.size()) {
        throw ContractError("correlation_map: " + std::to_string(scores.size()) + " scores for " +
                            std::to_string(masks.size()) + " masks");
    }
    if (masks.size() < 2) {
        throw ContractError("correlation_map: need at least 2 masks");
    }
    const std::size_t height = masks.front().height();
    const std::size_t width = masks.front().width();
    for (const Mask& m : masks) {
        if (m.height() != height || m.width() != width) {
            throw ContractError("correlation_map: masks differ in size");
        }
    }
    std::vector<double> out(height * width, 0.0);

    const auto [smin, smax] = std::minmax_element(scores.begin(), scores.end());
    if (*smin == *smax) return out;

    const std::size_t n = scores.size();
    double mean_s = 0.0;
    for (double s : scores) mean_s += s;
    mean_s /= static_cast<double>(n);
    std::vector<double> centered(n);
    double var_s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        centered[k] = scores[k] - mean_s;
        var_s += centered[k] * centered[k];
    }
    if (var_s == 0.0) return out;

    detail::parallel_for(height, workers, [&](std::size_t row_begin, std::size_t row_end) {
        const std::size_t begin = row_begin * width;
        const std::size_t len = (row_end - row_begin) * width;
        std::vector<double> mean(len, 0.0), cov(len, 0.0), var(len, 0.0);
        std::vector<float> lo(len), hi(len);
        {
            const auto first = masks[0].data().subspan(begin, len);
            std::copy(first.begin(), first.end(), lo.begin());
            std::copy(first.begin(), first.end(), hi.begin());
        }
        for (std::size_t k = 0; k < n; ++k) {
            const float* m = masks[k].data().data() + begin;
            for (std::size_t i = 0; i < len; ++i) {
                mean[i] += m[i];
                lo[i] = std::min(lo[i], m[i]);
                hi[i] = std::max(hi[i], m[i]);
            }
        }
        for (double& v : mean) v /= static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            const float* m = masks[k].data().data() + begin;
            const double s = centered[k];
            for (std::size_t i = 0; i < len; ++i) {
                const double d = m[i] - mean[i];
                cov[i] += d * s;
                var[i] += d * d;
            }
        }
        double* dst = out.data() + begin;
        for (std::size_t i = 0; i < len; ++i) {
            if (lo[i] == hi[i] || var[i] == 0.0) {
                dst[i] = 0.0;
                continue;
            }
            dst[i] = std::clamp(cov[i] / std::sqrt(var[i] * var_s), -1.0, 1.0);
        }
    });
    return out;
}

SaliencyMap correlation_map(std::span<const double> scores, std::span<const Mask> masks,
                            std::size_t workers) {
    const std::vector<double> r = correlation_values(scores, masks, workers);
    std::vector<float> data(r.begin(), r.end());
    return SaliencyMap(masks.front().height(), masks.front().width(), std::move(data));
}

double auc_trapezoid(std::span<const CurvePoint> points) {
    if (points.size() < 2) {
        throw ContractError("auc_trapezoid: need at least 2 points");
    }
    if (points.front().fraction != 0.0 || points.back().fraction != 1.0) {
        throw ContractError("auc_trapezoid: fractions must span [0,1]");
    }
    double area = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (!(p.accuracy >= 0.0 && p.accuracy <= 1.0)) {
            throw ContractError("auc_trapezoid: accuracy outside [0,1] at point " + std::to_string(i));
        }
        if (i == 0) continue;
        const auto& q = points[i - 1];
        if (!(p.fraction > q.fraction)) {
            throw ContractError("auc_trapezoid: fractions not strictly increasing at point " +
                                std::to_string(i));
        }
        area += (p.fraction - q.fraction) * (p.accuracy + q.accuracy) * 0.5;
    }
    return area * 100.0;
}

}  // namespace corrrise
