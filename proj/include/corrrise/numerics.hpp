#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "corrrise/types.hpp"

namespace corrrise {

/// dot(a,b) / (|a| |b|), accumulated in double and clamped to [-1,1].
/// Throws DegenerateInputError when either vector has zero norm.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Sample Pearson coefficient of two equal-length series (length >= 2).
/// A series with zero variance yields 0.0: it carries no evidence either way.
double pearson_correlation(std::span<const double> x, std::span<const double> y);

/// Element-wise product, mask value broadcast over channels.
ImageTensor apply_mask(const ImageTensor& img, const Mask& mask);

/// Pearson coefficient between `scores` and the value of every pixel across `masks`.
///
/// Equivalent to calling pearson_correlation(scores, {masks[k][p] for k}) for each pixel p,
/// but streams over the mask stack twice instead of gathering per-pixel columns. Rows of the
/// output are split over `workers` threads; the result does not depend on the worker count.
SaliencyMap correlation_map(std::span<const double> scores, std::span<const Mask> masks,
                            std::size_t workers = 1);

/// correlation_map before rounding to float storage, row-major.
std::vector<double> correlation_values(std::span<const double> scores, std::span<const Mask> masks,
                                       std::size_t workers = 1);

/// Trapezoidal area under (fraction, accuracy) points, in percent.
/// Points must start at fraction 0, end at 1, be strictly increasing, with accuracies in [0,1].
double auc_trapezoid(std::span<const CurvePoint> points);

/// Throws ContractError unless every element is finite and within [0,1].
void check_unit_range(const ImageTensor& img, const char* what = "image");

}  // namespace corrrise
