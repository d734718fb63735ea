#include "doctest.h"

#include <random>

#include "corrrise/errors.hpp"
#include "corrrise/numerics.hpp"
#include "oracles.hpp"

using namespace corrrise;

TEST_CASE("cosine similarity on simple vectors") {
    const std::vector<float> e1{1, 0}, e2{0, 1}, neg{-1, 0};
    CHECK(cosine_similarity(e1, e2) == doctest::Approx(0.0));
    CHECK(cosine_similarity(std::vector<float>{1, 2, 3}, std::vector<float>{2, 4, 6}) == doctest::Approx(1.0));
    CHECK(cosine_similarity(e1, neg) == doctest::Approx(-1.0));
}

TEST_CASE("cosine similarity rejects zero vectors and dimension mismatch") {
    const std::vector<float> zero{0, 0}, one{1, 0}, three{1, 2, 3};
    CHECK_THROWS_AS(cosine_similarity(zero, one), DegenerateInputError);
    CHECK_THROWS_AS(cosine_similarity(one, zero), DegenerateInputError);
    CHECK_THROWS_AS(cosine_similarity(one, three), ContractError);
}

TEST_CASE("pearson on simple series") {
    const std::vector<double> x{1, 2, 3}, y{2, 4, 6}, c{5, 5, 5};
    CHECK(pearson_correlation(x, y) == doctest::Approx(1.0));
    CHECK(pearson_correlation(x, c) == 0.0);
    CHECK(pearson_correlation(c, x) == 0.0);
    // Covariance sum 4, sqrt(5 * 5) = 5.
    CHECK(pearson_correlation(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}) ==
          doctest::Approx(0.8).epsilon(1e-14));
}

TEST_CASE("pearson contract errors") {
    const std::vector<double> one{1.0}, two{1.0, 2.0}, three{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(pearson_correlation(one, one), ContractError);
    CHECK_THROWS_AS(pearson_correlation(two, three), ContractError);
}

TEST_CASE("apply_mask identity, annihilation and scaling") {
    ImageTensor img(2, 2, 3, 0.8f);
    CHECK(apply_mask(img, Mask(2, 2, 1.0f)) == img);
    const ImageTensor zero = apply_mask(img, Mask(2, 2, 0.0f));
    for (float v : zero.data()) CHECK(v == 0.0f);
    Mask half(2, 2, 1.0f);
    half.at(1, 0) = 0.5f;
    const ImageTensor out = apply_mask(img, half);
    for (std::size_t ch = 0; ch < 3; ++ch) {
        CHECK(out.at(1, 0, ch) == doctest::Approx(0.4f));
        CHECK(out.at(0, 0, ch) == doctest::Approx(0.8f));
    }
    CHECK_THROWS_AS(apply_mask(img, Mask(3, 2, 1.0f)), ContractError);
}

TEST_CASE("auc of flat, triangular and step curves") {
    const std::vector<CurvePoint> flat{{0.0, 0.5}, {1.0, 0.5}};
    const std::vector<CurvePoint> tri{{0.0, 1.0}, {1.0, 0.0}};
    const std::vector<CurvePoint> step{{0.0, 1.0}, {0.5, 1.0}, {1.0, 0.0}};
    CHECK(auc_trapezoid(flat) == doctest::Approx(50.0));
    CHECK(auc_trapezoid(tri) == doctest::Approx(50.0));
    CHECK(auc_trapezoid(step) == doctest::Approx(75.0));
}

TEST_CASE("auc rejects malformed curves") {
    CHECK_THROWS_AS(auc_trapezoid(std::vector<CurvePoint>{{0.0, 1.0}}), ContractError);
    CHECK_THROWS_AS(auc_trapezoid(std::vector<CurvePoint>{{0.1, 1.0}, {1.0, 1.0}}), ContractError);
    CHECK_THROWS_AS(auc_trapezoid(std::vector<CurvePoint>{{0.0, 1.0}, {0.9, 1.0}}), ContractError);
    CHECK_THROWS_AS(auc_trapezoid(std::vector<CurvePoint>{{0.0, 1.0}, {0.5, 1.0}, {0.5, 1.0}, {1.0, 0.0}}),
                    ContractError);
    CHECK_THROWS_AS(auc_trapezoid(std::vector<CurvePoint>{{0.0, 1.0}, {0.6, 0.5}, {0.4, 0.5}, {1.0, 0.0}}),
                    ContractError);
    CHECK_THROWS_AS(auc_trapezoid(std::vector<CurvePoint>{{0.0, 1.5}, {1.0, 0.0}}), ContractError);
}

TEST_CASE("correlation map on a 2x2 stack of 3 masks, by hand") {
    // Score deviations are -0.4, 0, 0.4.
    // (0,0) rises with the score, (0,1) falls, (1,1) is constant.
    // (1,0) = 0, 0, 1: cov 0.4, mask variance 2/3, score variance 0.32.
    std::vector<Mask> masks{Mask(2, 2, std::vector<float>{0.0f, 1.0f, 0.0f, 0.3f}),
                            Mask(2, 2, std::vector<float>{0.5f, 0.5f, 0.0f, 0.3f}),
                            Mask(2, 2, std::vector<float>{1.0f, 0.0f, 1.0f, 0.3f})};
    const std::vector<double> scores{0.1, 0.5, 0.9};
    const auto r = correlation_values(scores, masks);
    CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(r[2] == doctest::Approx(0.8660254037844386).epsilon(1e-12));
    CHECK(r[3] == 0.0);

    std::vector<Mask> flat{Mask(2, 2, std::vector<float>{0.2f, 0.2f, 0.2f, 0.2f}),
                           Mask(2, 2, std::vector<float>{0.9f, 0.9f, 0.9f, 0.9f}),
                           Mask(2, 2, std::vector<float>{0.2f, 0.2f, 0.2f, 0.2f})};
    for (double v : correlation_values(scores, flat)) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("correlation map matches the naive oracle on random stacks") {
    std::mt19937_64 gen(42);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::uniform_real_distribution<double> su(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Mask> masks;
        for (int k = 0; k < 16; ++k) {
            Mask m(8, 8);
            for (std::size_t i = 0; i < m.size(); ++i) m[i] = u(gen) < 0.3f ? 0.0f : u(gen);
            masks.push_back(m);
        }
        std::vector<double> scores(16);
        for (double& s : scores) s = su(gen);
        const auto fast = correlation_values(scores, masks, 3);
        const auto slow = oracle::correlation_map(scores, masks);
        for (std::size_t i = 0; i < fast.size(); ++i) CHECK(std::abs(fast[i] - slow[i]) <= 1e-10);
    }
}

TEST_CASE("correlation map is zero for constant scores and independent of worker count") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<Mask> masks;
    for (int k = 0; k < 10; ++k) {
        Mask m(13, 7);
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = u(gen);
        masks.push_back(m);
    }
    const std::vector<double> constant(10, 0.25);
    const SaliencyMap flat = correlation_map(constant, masks);
    for (float v : flat.data()) CHECK(v == 0.0f);

    std::vector<double> scores(10);
    for (std::size_t k = 0; k < scores.size(); ++k) scores[k] = std::sin(static_cast<double>(k));
    CHECK(correlation_map(scores, masks, 1) == correlation_map(scores, masks, 4));
    CHECK_THROWS_AS(correlation_map(std::vector<double>{1.0}, std::vector<Mask>{masks[0]}), ContractError);
    CHECK_THROWS_AS(correlation_map(std::vector<double>(9, 1.0), masks), ContractError);
}

TEST_CASE("image constructor validates channels and length") {
    CHECK_THROWS_AS(ImageTensor(2, 2, 2), ContractError);
    CHECK_THROWS_AS(ImageTensor(2, 2, 1, std::vector<float>(3)), ContractError);
    CHECK_THROWS_AS(Mask(2, 2, std::vector<float>(5)), ContractError);
    ImageTensor bad(1, 1, 1, 1.5f);
    CHECK_THROWS_AS(check_unit_range(bad), ContractError);
}
