#include "corrrise/io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "corrrise/errors.hpp"
#include "corrrise/numerics.hpp"
#include "corrrise/salm.hpp"

namespace corrrise {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line, std::size_t lineno) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false, was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            if (!trim(cur).empty()) throw DataError("line " + std::to_string(lineno) + ": stray quote");
            cur.clear();
            quoted = was_quoted = true;
        } else if (ch == ',') {
            fields.push_back(was_quoted ? cur : trim(cur));
            cur.clear();
            was_quoted = false;
        } else if (was_quoted) {
            if (ch != ' ' && ch != '\t' && ch != '\r') {
                throw DataError("line " + std::to_string(lineno) + ": text after closing quote");
            }
        } else {
            cur.push_back(ch);
        }
    }
    if (quoted) throw DataError("line " + std::to_string(lineno) + ": unterminated quote");
    fields.push_back(was_quoted ? cur : trim(cur));
    return fields;
}

cv::Mat to_mat(const ImageTensor& img) {
    const int type = img.channels() == 3 ? CV_8UC3 : CV_8UC1;
    cv::Mat m(static_cast<int>(img.height()), static_cast<int>(img.width()), type);
    auto src = img.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        m.data[i] = static_cast<unsigned char>(std::lround(std::clamp(src[i], 0.0f, 1.0f) * 255.0f));
    }
    if (img.channels() == 3) cv::cvtColor(m, m, cv::COLOR_RGB2BGR);
    return m;
}

std::string encode_mat(const cv::Mat& m) {
    std::vector<unsigned char> buf;
    if (!cv::imencode(".png", m, buf)) throw DataError("PNG encoding failed");
    return std::string(buf.begin(), buf.end());
}

}  // namespace

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
    Manifest m;
    m.base_dir = base_dir;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    std::map<std::pair<std::string, std::string>, std::size_t> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        const auto fields = split_csv(line, lineno);
        if (!header_seen) {
            if (fields != std::vector<std::string>{"path_a", "path_b", "label"}) {
                throw DataError("line " + std::to_string(lineno) + ": expected header path_a,path_b,label");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 3) {
            throw DataError("line " + std::to_string(lineno) + ": expected 3 fields, found " +
                            std::to_string(fields.size()));
        }
        if (fields[0].empty() || fields[1].empty()) throw DataError("line " + std::to_string(lineno) + ": empty path");
        PairRecord r;
        if (fields[2] == "match") r.match = true;
        else if (fields[2] == "nonmatch") r.match = false;
        else {
            throw DataError("line " + std::to_string(lineno) + ": label '" + fields[2] +
                            "' is not 'match' or 'nonmatch'");
        }
        const auto [it, inserted] = seen.emplace(std::make_pair(fields[0], fields[1]), lineno);
        if (!inserted) {
            throw DataError("line " + std::to_string(lineno) + ": duplicate pair (first seen on line " +
                            std::to_string(it->second) + ")");
        }
        r.path_a = std::filesystem::path(fields[0]);
        r.path_b = std::filesystem::path(fields[1]);
        if (r.path_a.is_relative()) r.path_a = base_dir / r.path_a;
        if (r.path_b.is_relative()) r.path_b = base_dir / r.path_b;
        r.line = lineno;
        m.records.push_back(std::move(r));
    }
    if (!header_seen) throw DataError("manifest is empty (missing header path_a,path_b,label)");
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read manifest " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_manifest(buf.str(), path.parent_path());
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

ImageTensor load_image(const std::filesystem::path& path, std::size_t height, std::size_t width,
                       std::size_t channels, bool center_crop) {
    if (channels != 1 && channels != 3) throw ContractError("load_image: channels must be 1 or 3");
    if (height == 0 || width == 0) throw ContractError("load_image: target size must be positive");
    const int flags = cv::IMREAD_ANYDEPTH | (channels == 3 ? cv::IMREAD_COLOR : cv::IMREAD_GRAYSCALE);
    cv::Mat m = cv::imread(path.string(), flags);
    if (m.empty()) throw DataError("cannot decode image " + path.string());
    double scale = 1.0 / 255.0;
    if (m.depth() == CV_16U) scale = 1.0 / 65535.0;
    else if (m.depth() != CV_8U) throw DataError("unsupported pixel depth in " + path.string());
    if (channels == 3) cv::cvtColor(m, m, cv::COLOR_BGR2RGB);

    if (center_crop) {
        // Largest centred window with the target aspect ratio.
        const double target = static_cast<double>(width) / static_cast<double>(height);
        int cw = m.cols, ch = m.rows;
        if (static_cast<double>(m.cols) / m.rows > target) cw = static_cast<int>(std::lround(m.rows * target));
        else ch = static_cast<int>(std::lround(m.cols / target));
        cw = std::clamp(cw, 1, m.cols);
        ch = std::clamp(ch, 1, m.rows);
        m = m(cv::Rect((m.cols - cw) / 2, (m.rows - ch) / 2, cw, ch)).clone();
    }
    cv::Mat f;
    m.convertTo(f, channels == 3 ? CV_32FC3 : CV_32FC1, scale);
    if (f.rows != static_cast<int>(height) || f.cols != static_cast<int>(width)) {
        cv::resize(f, f, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0, cv::INTER_LINEAR);
    }
    f = f.reshape(1, 1).clone();
    std::vector<float> data(f.begin<float>(), f.end<float>());
    for (float& v : data) v = std::clamp(v, 0.0f, 1.0f);
    return ImageTensor(height, width, channels, std::move(data));
}

std::vector<ImagePair> load_pairs(const Manifest& manifest, const InputSpec& spec, bool center_crop) {
    std::vector<ImagePair> pairs;
    pairs.reserve(manifest.records.size());
    for (const PairRecord& r : manifest.records) {
        const std::string id = "line " + std::to_string(r.line);
        try {
            pairs.push_back({load_image(r.path_a, spec.height, spec.width, spec.channels, center_crop),
                             load_image(r.path_b, spec.height, spec.width, spec.channels, center_crop), r.match,
                             id});
        } catch (const Error& e) {
            throw DataError("manifest " + id + ": " + e.what());
        }
    }
    return pairs;
}

std::string encode_png(const ImageTensor& img) { return encode_mat(to_mat(img)); }

void write_png(const ImageTensor& img, const std::filesystem::path& path) {
    write_file_atomic(path, encode_png(img));
}

void write_mask_png(const Mask& mask, const std::filesystem::path& path) {
    ImageTensor img(mask.height(), mask.width(), 1, std::vector<float>(mask.data().begin(), mask.data().end()));
    write_png(img, path);
}

ImageTensor render_heatmap(const ImageTensor& img, const SaliencyMap& s, HeatmapMode mode) {
    if (img.height() != s.height() || img.width() != s.width()) {
        throw ContractError("render_heatmap: map size does not match the image");
    }
    float peak = 0.0f;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const float v = s[i];
        if (mode == HeatmapMode::Positive && v <= 0.0f) continue;
        if (mode == HeatmapMode::Negative && v >= 0.0f) continue;
        peak = std::max(peak, std::abs(v));
    }
    ImageTensor out(img.height(), img.width(), 3, 0.0f);
    const std::size_t c = img.channels();
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::array<float, 3> base{};
        for (std::size_t k = 0; k < 3; ++k) base[k] = img.data()[i * c + (c == 3 ? k : 0)];
        float v = s[i];
        if ((mode == HeatmapMode::Positive && v < 0.0f) || (mode == HeatmapMode::Negative && v > 0.0f)) v = 0.0f;
        const float a = peak > 0.0f ? std::abs(v) / peak : 0.0f;
        std::array<float, 3> colour{};
        if (v > 0.0f) colour = {1.0f, a, 0.0f};
        else colour = {0.0f, a, 1.0f};
        for (std::size_t k = 0; k < 3; ++k) out.data()[i * 3 + k] = (1.0f - a) * base[k] + a * colour[k];
    }
    return out;
}

void write_heatmap(const ImageTensor& img, const SaliencyMap& s, HeatmapMode mode, const std::filesystem::path& path) {
    write_png(render_heatmap(img, s, mode), path);
}

}  // namespace corrrise
