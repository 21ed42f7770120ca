#include "binary_io.hpp"

#include "meshvae/error.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <stdexcept>

namespace meshvae::io {

namespace {

template <typename U>
void put_le(std::ostream& out, U v)
{
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i)
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, sizeof(U));
}

template <typename U>
U get_le(const unsigned char* buf)
{
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
}

} // namespace

void BinaryWriter::u32(std::uint32_t v) { put_le(out_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(out_, v); }
void BinaryWriter::f64(double v) { put_le(out_, std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::bytes(std::span<const std::uint8_t> data)
{
    out_.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

void BinaryWriter::string(std::string_view s)
{
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryReader::read_raw(char* dst, std::size_t n)
{
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
        throw InputError(what_ + ": file truncated");
}

void BinaryReader::expect_magic(std::string_view tag)
{
    std::string got(tag.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(tag.size()));
    if (static_cast<std::size_t>(in_.gcount()) != tag.size() || got != tag)
        throw InputError(what_ + ": bad magic, expected \"" + std::string(tag) + "\"");
}

std::uint32_t BinaryReader::u32()
{
    unsigned char buf[4];
    read_raw(reinterpret_cast<char*>(buf), 4);
    return get_le<std::uint32_t>(buf);
}

std::uint64_t BinaryReader::u64()
{
    unsigned char buf[8];
    read_raw(reinterpret_cast<char*>(buf), 8);
    return get_le<std::uint64_t>(buf);
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

void BinaryReader::bytes(std::span<std::uint8_t> out) { read_raw(reinterpret_cast<char*>(out.data()), out.size()); }

std::string BinaryReader::string(std::uint32_t max_length)
{
    const auto n = u32();
    if (n > max_length)
        throw InputError(what_ + ": string length " + std::to_string(n) + " exceeds limit");
    std::string s(n, '\0');
    read_raw(s.data(), n);
    return s;
}

void BinaryReader::expect_end()
{
    if (in_.peek() != std::char_traits<char>::eof())
        throw InputError(what_ + ": trailing bytes after payload");
}

Sha256::Sha256() : ctx_(EVP_MD_CTX_new())
{
    if (ctx_ == nullptr || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest initialization failed");
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Sha256::update(std::span<const std::uint8_t> data)
{
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size());
}

void Sha256::update(std::string_view text) { EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), text.data(), text.size()); }

Digest Sha256::finish()
{
    Digest d{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), d.data(), &len);
    return d;
}

std::string to_hex(const Digest& d)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (auto b : d) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

} // namespace meshvae::io
