#include "corrrise/salm.hpp"

#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "corrrise/errors.hpp"

namespace corrrise {
namespace {

constexpr char kMagic[4] = {'S', 'A', 'L', 'M'};
constexpr unsigned char kVersion = 1;
constexpr std::size_t kHeader = 4 + 1 + 4 + 4;

void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + k])) << (8 * k);
    return v;
}

}  // namespace

std::string encode_saliency(const SaliencyMap& s) {
    if (s.height() > UINT32_MAX || s.width() > UINT32_MAX) throw ContractError("saliency map too large");
    std::string out;
    out.reserve(kHeader + 4 * s.size());
    out.append(kMagic, 4);
    out.push_back(static_cast<char>(kVersion));
    put_u32(out, static_cast<std::uint32_t>(s.height()));
    put_u32(out, static_cast<std::uint32_t>(s.width()));
    for (float v : s.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

SaliencyMap decode_saliency(const std::string& bytes) {
    if (bytes.size() < kHeader) throw FormatError("SALM: file shorter than header");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("SALM: bad magic");
    if (static_cast<unsigned char>(bytes[4]) != kVersion) {
        throw FormatError("SALM: unsupported version " + std::to_string(static_cast<unsigned char>(bytes[4])));
    }
    const std::uint64_t h = get_u32(bytes, 5);
    const std::uint64_t w = get_u32(bytes, 9);
    const std::uint64_t expected = kHeader + 4 * h * w;
    if (bytes.size() != expected) {
        throw FormatError("SALM: expected " + std::to_string(expected) + " bytes for " + std::to_string(h) + "x" +
                          std::to_string(w) + ", got " + std::to_string(bytes.size()));
    }
    std::vector<float> data(h * w);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::bit_cast<float>(get_u32(bytes, kHeader + 4 * i));
    return SaliencyMap(h, w, std::move(data));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    static std::atomic<std::uint64_t> counter{0};
    const std::size_t tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(tid) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("error while writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw DataError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

void save_saliency(const SaliencyMap& s, const std::filesystem::path& path) {
    write_file_atomic(path, encode_saliency(s));
}

SaliencyMap load_saliency(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read saliency file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return decode_saliency(buf.str());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace corrrise
