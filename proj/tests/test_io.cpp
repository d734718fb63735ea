#include "doctest.h"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

#include "corrrise/errors.hpp"
#include "corrrise/io.hpp"
#include "corrrise/salm.hpp"

using namespace corrrise;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("corrrise_test_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::uint32_t crc32(const std::string& s) {
    std::uint32_t c = 0xFFFFFFFFu;
    for (unsigned char b : s) {
        c ^= b;
        for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0xEDB88320u & (0u - (c & 1u)));
    }
    return ~c;
}

void put_be32(std::string& out, std::uint32_t v) {
    for (int k = 3; k >= 0; --k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

void chunk(std::string& png, const std::string& type, const std::string& data) {
    put_be32(png, static_cast<std::uint32_t>(data.size()));
    const std::string body = type + data;
    png += body;
    put_be32(png, crc32(body));
}

// Uncompressed 8-bit PNG (zlib stored blocks), independent of the library's encoder.
// rows[y][x*c + ch], c = 1 (gray) or 3 (RGB).
void write_raw_png(const fs::path& path, const std::vector<std::vector<std::uint8_t>>& rows, int c) {
    const auto h = static_cast<std::uint32_t>(rows.size());
    const auto w = static_cast<std::uint32_t>(rows[0].size() / c);
    std::string raw;
    for (const auto& r : rows) {
        raw.push_back('\0');
        raw.append(r.begin(), r.end());
    }
    std::string z{'\x78', '\x01'};
    for (std::size_t pos = 0; pos < raw.size() || pos == 0; pos += 65535) {
        const std::size_t len = std::min<std::size_t>(65535, raw.size() - pos);
        z.push_back(pos + len >= raw.size() ? '\x01' : '\x00');
        z.push_back(static_cast<char>(len & 0xFF));
        z.push_back(static_cast<char>(len >> 8));
        z.push_back(static_cast<char>(~len & 0xFF));
        z.push_back(static_cast<char>((~len >> 8) & 0xFF));
        z.append(raw, pos, len);
        if (pos + len >= raw.size()) break;
    }
    std::uint32_t a = 1, b = 0;
    for (unsigned char ch : raw) {
        a = (a + ch) % 65521;
        b = (b + a) % 65521;
    }
    put_be32(z, (b << 16) | a);

    std::string png("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_be32(ihdr, w);
    put_be32(ihdr, h);
    ihdr += std::string{'\x08', static_cast<char>(c == 3 ? 2 : 0), '\0', '\0', '\0'};
    chunk(png, "IHDR", ihdr);
    chunk(png, "IDAT", z);
    chunk(png, "IEND", "");
    std::ofstream(path, std::ios::binary) << png;
}

std::vector<std::vector<std::uint8_t>> solid(std::size_t h, std::size_t w, std::vector<std::uint8_t> px) {
    std::vector<std::uint8_t> row;
    for (std::size_t x = 0; x < w; ++x) row.insert(row.end(), px.begin(), px.end());
    return std::vector<std::vector<std::uint8_t>>(h, row);
}

}  // namespace

TEST_CASE("manifest with only a header has no records") {
    const auto m = parse_manifest("path_a,path_b,label\n", "/data");
    CHECK(m.records.empty());
}

TEST_CASE("manifest rows resolve relative paths and parse labels") {
    const auto m = parse_manifest(
        "\xEF\xBB\xBFpath_a,path_b,label\r\n\r\na.png, \"b, c.png\" ,nonmatch\r\n/abs/x.png,y.png,match\n", "/data");
    REQUIRE(m.records.size() == 2);
    CHECK(m.records[0].path_a == fs::path("/data/a.png"));
    CHECK(m.records[0].path_b == fs::path("/data/b, c.png"));
    CHECK_FALSE(m.records[0].match);
    CHECK(m.records[0].line == 3);
    CHECK(m.records[1].path_a == fs::path("/abs/x.png"));
    CHECK(m.records[1].match);
}

TEST_CASE("malformed manifests name the offending line") {
    auto message = [](const std::string& text) {
        try {
            parse_manifest(text, ".");
        } catch (const DataError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message("path_a,path_b,label\na.png,b.png,maybe\n").find("line 2") != std::string::npos);
    CHECK(message("path_a,path_b,label\na.png,b.png,match\na.png,b.png,match\n").find("line 3") !=
          std::string::npos);
    CHECK(message("path_a,path_b,label\na.png,b.png\n").find("line 2") != std::string::npos);
    CHECK(message("a,b,c\n").find("line 1") != std::string::npos);
    CHECK(message("path_a,path_b,label\n\"a.png,b.png,match\n").find("line 2") != std::string::npos);
    CHECK(message("") != "no error");
    CHECK_THROWS_AS(load_manifest("/nonexistent/manifest.csv"), DataError);
}

TEST_CASE("image loaded at its own size keeps its pixels") {
    const fs::path dir = scratch("identity");
    std::vector<std::vector<std::uint8_t>> rows(4, std::vector<std::uint8_t>(6));
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 6; ++x) rows[y][x] = static_cast<std::uint8_t>(y * 60 + x * 7);
    }
    write_raw_png(dir / "g.png", rows, 1);
    const auto img = load_image(dir / "g.png", 4, 6, 1);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 6; ++x) CHECK(img.at(y, x) == doctest::Approx(rows[y][x] / 255.0f));
    }
    fs::remove_all(dir);
}

TEST_CASE("colour images come back in RGB order and resize keeps solid colours") {
    const fs::path dir = scratch("solid");
    write_raw_png(dir / "c.png", solid(50, 50, {255, 0, 51}), 3);
    const auto img = load_image(dir / "c.png", 112, 112, 3);
    CHECK(img.height() == 112);
    for (std::size_t y = 0; y < 112; y += 13) {
        for (std::size_t x = 0; x < 112; x += 11) {
            CHECK(img.at(y, x, 0) == doctest::Approx(1.0f));
            CHECK(img.at(y, x, 1) == doctest::Approx(0.0f));
            CHECK(img.at(y, x, 2) == doctest::Approx(0.2f));
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("tall images are centre-cropped before resizing") {
    const fs::path dir = scratch("crop");
    auto rows = solid(224, 112, {0});
    for (std::size_t y = 56; y < 168; ++y) std::fill(rows[y].begin(), rows[y].end(), 255);
    write_raw_png(dir / "t.png", rows, 1);
    const auto cropped = load_image(dir / "t.png", 112, 112, 1, true);
    for (float v : cropped.data()) CHECK(v == 1.0f);
    const auto squashed = load_image(dir / "t.png", 112, 112, 1, false);
    CHECK(squashed.at(0, 0) == 0.0f);
    CHECK(squashed.at(56, 56) == 1.0f);
    fs::remove_all(dir);
}

TEST_CASE("unreadable images raise data errors") {
    const fs::path dir = scratch("bad");
    std::ofstream(dir / "junk.png") << "not an image";
    CHECK_THROWS_AS(load_image(dir / "junk.png", 8, 8, 1), DataError);
    CHECK_THROWS_AS(load_image(dir / "missing.png", 8, 8, 1), DataError);
    Manifest m;
    m.records.push_back({dir / "missing.png", dir / "missing.png", true, 7});
    try {
        load_pairs(m, {8, 8, 1});
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 7") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("png writer round trips through the loader") {
    const fs::path dir = scratch("png");
    ImageTensor img(9, 7, 3);
    std::mt19937_64 gen(1);
    std::uniform_int_distribution<int> u(0, 255);
    for (float& v : img.data()) v = static_cast<float>(u(gen)) / 255.0f;
    write_png(img, dir / "x.png");
    const auto back = load_image(dir / "x.png", 9, 7, 3);
    for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(back.data()[i] == doctest::Approx(img.data()[i]));
    fs::remove_all(dir);
}

TEST_CASE("saliency files round trip and have the documented size") {
    const fs::path dir = scratch("salm");
    SaliencyMap s(3, 5);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(i) / 7.0f - 1.0f;
    const std::string bytes = encode_saliency(s);
    CHECK(bytes.size() == 13 + 4 * 15);
    CHECK(bytes.substr(0, 4) == "SALM");
    CHECK(bytes[4] == 1);
    CHECK(bytes[5] == 3);
    CHECK(bytes[9] == 5);
    save_saliency(s, dir / "s.salm");
    CHECK(fs::file_size(dir / "s.salm") == bytes.size());
    CHECK(load_saliency(dir / "s.salm") == s);

    CHECK_THROWS_AS(decode_saliency(bytes.substr(0, bytes.size() - 1)), FormatError);
    CHECK_THROWS_AS(decode_saliency(bytes.substr(0, 8)), FormatError);
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_saliency(bad), FormatError);
    bad = bytes;
    bad[4] = 2;
    CHECK_THROWS_AS(decode_saliency(bad), FormatError);
    CHECK_THROWS_AS(load_saliency(dir / "missing.salm"), DataError);
    fs::remove_all(dir);
}

TEST_CASE("heatmap of a zero map is the image itself") {
    ImageTensor img(4, 4, 3);
    for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = static_cast<float>(i % 5) / 5.0f;
    CHECK(render_heatmap(img, SaliencyMap(4, 4), HeatmapMode::Signed) == img);
    ImageTensor gray(4, 4, 1, 0.25f);
    const auto out = render_heatmap(gray, SaliencyMap(4, 4), HeatmapMode::Signed);
    CHECK(out.channels() == 3);
    for (float v : out.data()) CHECK(v == 0.25f);
}

TEST_CASE("heatmap colours follow the sign and mode") {
    const ImageTensor gray(2, 2, 1, 0.5f);
    const SaliencyMap s(2, 2, std::vector<float>{1.0f, 0.5f, -1.0f, 0.0f});
    const auto signed_map = render_heatmap(gray, s, HeatmapMode::Signed);
    CHECK(signed_map.at(0, 0, 0) == 1.0f);
    CHECK(signed_map.at(0, 0, 1) == 1.0f);
    CHECK(signed_map.at(0, 0, 2) == 0.0f);
    CHECK(signed_map.at(1, 0, 0) == 0.0f);
    CHECK(signed_map.at(1, 0, 2) == 1.0f);
    CHECK(signed_map.at(0, 1, 0) == doctest::Approx(0.75f));
    CHECK(signed_map.at(1, 1, 0) == 0.5f);

    const auto positive = render_heatmap(gray, s, HeatmapMode::Positive);
    CHECK(positive.at(1, 0, 0) == 0.5f);
    CHECK(positive.at(1, 0, 2) == 0.5f);
    const auto negative = render_heatmap(gray, s, HeatmapMode::Negative);
    CHECK(negative.at(0, 0, 0) == 0.5f);
    CHECK(negative.at(1, 0, 2) == 1.0f);

    CHECK(render_heatmap(gray, s, HeatmapMode::Signed) == signed_map);
    CHECK(encode_png(signed_map) == encode_png(render_heatmap(gray, s, HeatmapMode::Signed)));
    CHECK_THROWS_AS(render_heatmap(gray, SaliencyMap(3, 2), HeatmapMode::Signed), ContractError);
}
