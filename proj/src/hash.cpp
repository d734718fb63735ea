#include "corrrise/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include "corrrise/errors.hpp"

namespace corrrise {
namespace {

struct CtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using Ctx = std::unique_ptr<EVP_MD_CTX, CtxDeleter>;

Ctx new_ctx() {
    Ctx ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw Error("sha256: digest initialisation failed");
    }
    return ctx;
}

std::array<unsigned char, 32> finish(EVP_MD_CTX* ctx) {
    std::array<unsigned char, 32> out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != out.size()) {
        throw Error("sha256: digest finalisation failed");
    }
    return out;
}

std::string to_hex(const std::array<unsigned char, 32>& digest) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (unsigned char b : digest) {
        s.push_back(kHex[b >> 4]);
        s.push_back(kHex[b & 0xF]);
    }
    return s;
}

std::array<unsigned char, 32> digest(const void* data, std::size_t size) {
    Ctx ctx = new_ctx();
    EVP_DigestUpdate(ctx.get(), data, size);
    return finish(ctx.get());
}

}  // namespace

std::string sha256_hex(std::span<const std::byte> bytes) { return to_hex(digest(bytes.data(), bytes.size())); }

std::string sha256_hex(const std::string& bytes) { return to_hex(digest(bytes.data(), bytes.size())); }

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    Ctx ctx = new_ctx();
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    if (in.bad()) throw DataError("error while reading " + path.string());
    return to_hex(finish(ctx.get()));
}

std::uint64_t hash64(const std::string& bytes) {
    const auto d = digest(bytes.data(), bytes.size());
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v = (v << 8) | d[static_cast<std::size_t>(k)];
    return v;
}

}  // namespace corrrise
