#include "doctest.h"

#include <cmath>
#include <random>

#include "corrrise/embedder.hpp"
#include "corrrise/errors.hpp"
#include "corrrise/numerics.hpp"
#include "corrrise/toy_suite.hpp"
#include "oracles.hpp"

using namespace corrrise;

namespace {

ImageTensor random_image(std::mt19937_64& gen, std::size_t h, std::size_t w, std::size_t c) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    ImageTensor img(h, w, c);
    for (float& v : img.data()) v = u(gen);
    return img;
}

}  // namespace

TEST_CASE("toy embedder averages each grid cell") {
    ToyRegionEmbedder toy({8, 8, 1}, 2);
    CHECK(toy.embedding_dim() == 4);
    const auto e = toy.embed(ImageTensor(8, 8, 1, 0.5f));
    REQUIRE(e.size() == 4);
    for (float v : e) CHECK(v == doctest::Approx(0.5f));

    ImageTensor img(8, 8, 1, 0.0f);
    for (std::size_t y = 0; y < 4; ++y) {
        for (std::size_t x = 4; x < 8; ++x) img.at(y, x) = 1.0f;
    }
    img.at(7, 0) = 1.0f;
    const auto f = toy.embed(img);
    CHECK(f[0] == doctest::Approx(0.0f));
    CHECK(f[1] == doctest::Approx(1.0f));
    CHECK(f[2] == doctest::Approx(1.0f / 16.0f));
    CHECK(f[3] == doctest::Approx(0.0f));
}

TEST_CASE("toy embedder handles uneven cells and colour channels") {
    ToyRegionEmbedder toy({5, 7, 3}, 3);
    CHECK(toy.embedding_dim() == 27);
    ImageTensor img(5, 7, 3);
    for (std::size_t y = 0; y < 5; ++y) {
        for (std::size_t x = 0; x < 7; ++x) {
            img.at(y, x, 0) = 0.2f;
            img.at(y, x, 1) = 0.4f;
            img.at(y, x, 2) = 0.6f;
        }
    }
    const auto e = toy.embed(img);
    for (std::size_t i = 0; i < e.size(); ++i) {
        CHECK(e[i] == doctest::Approx(0.2f * static_cast<float>(i % 3 + 1)));
    }
}

TEST_CASE("pixels outside the sensitive region do not change the embedding") {
    const Region left{0, 0, 16, 32};
    ToyRegionEmbedder toy({32, 32, 1}, 4, left);
    std::mt19937_64 gen(1);
    const ImageTensor base = random_image(gen, 32, 32, 1);
    ImageTensor outside = base;
    for (std::size_t y = 0; y < 32; ++y) {
        for (std::size_t x = 16; x < 32; ++x) outside.at(y, x) = 1.0f - outside.at(y, x);
    }
    CHECK(toy.embed(base) == toy.embed(outside));
    ImageTensor inside = base;
    inside.at(5, 3) = 1.0f - inside.at(5, 3);
    CHECK(toy.embed(base) != toy.embed(inside));
}

TEST_CASE("toy embedder rejects bad configurations and inputs") {
    CHECK_THROWS_AS(ToyRegionEmbedder({8, 8, 2}, 2), ConfigError);
    CHECK_THROWS_AS(ToyRegionEmbedder({8, 8, 1}, 0), ConfigError);
    CHECK_THROWS_AS(ToyRegionEmbedder({8, 8, 1}, 9), ConfigError);
    CHECK_THROWS_AS(ToyRegionEmbedder({8, 8, 1}, 2, Region{0, 0, 9, 8}), ConfigError);
    CHECK_THROWS_AS(ToyRegionEmbedder({8, 8, 1}, 2, Region{3, 0, 3, 8}), ConfigError);
    ToyRegionEmbedder toy({8, 8, 1}, 2);
    CHECK_THROWS_AS(toy.embed(ImageTensor(8, 9, 1)), ContractError);
    CHECK_THROWS_AS(toy.embed(ImageTensor(8, 8, 3)), ContractError);
}

TEST_CASE("batch embedding matches single calls in order") {
    ToyRegionEmbedder toy({16, 16, 3}, 4);
    CHECK(toy.embed_batch({}).empty());
    std::mt19937_64 gen(2);
    std::vector<ImageTensor> imgs;
    for (int i = 0; i < 7; ++i) imgs.push_back(random_image(gen, 16, 16, 3));
    const auto one = toy.embed_batch(std::span(imgs.data(), 1));
    REQUIRE(one.size() == 1);
    CHECK(one[0] == toy.embed(imgs[0]));
    const auto all = toy.embed_batch(imgs, 3);
    REQUIRE(all.size() == imgs.size());
    for (std::size_t i = 0; i < imgs.size(); ++i) CHECK(all[i] == toy.embed(imgs[i]));

    imgs[4] = ImageTensor(15, 16, 3);
    try {
        toy.embed_batch(imgs);
        FAIL("expected an error");
    } catch (const ContractError& e) {
        CHECK(std::string(e.what()).find("batch element 4") != std::string::npos);
    }
}

TEST_CASE("constant embedder has nothing to randomize") {
    ConstantEmbedder c({4, 4, 1}, {1.0f, 2.0f});
    CHECK(c.embed(ImageTensor(4, 4, 1)) == EmbeddingVector{1.0f, 2.0f});
    CHECK_THROWS_AS(c.randomized(1), UnsupportedOperation);
    CHECK_THROWS_AS(randomize_parameters(c, 1), UnsupportedOperation);
    CHECK_THROWS_AS(ConstantEmbedder({4, 4, 1}, {}), ConfigError);
}

TEST_CASE("randomized toy keeps the interface and is seeded") {
    ToyRegionEmbedder toy({32, 32, 1}, 4, Region{0, 0, 16, 32});
    const auto r1 = toy.randomized(5);
    const auto r2 = toy.randomized(5);
    const auto r3 = toy.randomized(6);
    CHECK(r1->embedding_dim() == toy.embedding_dim());
    CHECK(r1->input_spec() == toy.input_spec());
    CHECK(r1->id().find("randomized(seed=5)") != std::string::npos);
    std::mt19937_64 gen(4);
    const ImageTensor img = random_image(gen, 32, 32, 1);
    CHECK(r1->embed(img) == r2->embed(img));
    CHECK(r1->embed(img) != r3->embed(img));
    CHECK(r1->embed(img) != toy.embed(img));
}

TEST_CASE("randomized similarity is decorrelated from the original on noise images") {
    const ToyRegionEmbedder toy = localization_embedder();
    std::mt19937_64 gen(8);
    std::vector<ImageTensor> a, b;
    for (int i = 0; i < 100; ++i) {
        a.push_back(random_image(gen, 112, 112, 1));
        b.push_back(random_image(gen, 112, 112, 1));
    }
    std::vector<double> sim;
    for (int i = 0; i < 100; ++i) sim.push_back(cosine_similarity(toy.embed(a[i]), toy.embed(b[i])));
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const auto rnd = toy.randomized(seed);
        std::vector<double> rsim;
        for (int i = 0; i < 100; ++i) rsim.push_back(cosine_similarity(rnd->embed(a[i]), rnd->embed(b[i])));
        total += std::abs(oracle::pearson(sim, rsim));
    }
    CHECK(total / 8.0 <= 0.3);
}
