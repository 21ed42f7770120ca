#pragma once

// Little-endian binary helpers shared by the hierarchy, feature and
// checkpoint formats.

#include <array>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

namespace meshvae::io {

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void magic(std::string_view tag) { out_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void bytes(std::span<const std::uint8_t> data);
    void string(std::string_view s); // u32 length prefix

private:
    std::ostream& out_;
};

class BinaryReader {
public:
    BinaryReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

    // Throws InputError when the next bytes are not `tag`.
    void expect_magic(std::string_view tag);
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    void bytes(std::span<std::uint8_t> out);
    std::string string(std::uint32_t max_length = 1u << 20);
    // Throws InputError unless the stream is exhausted.
    void expect_end();

private:
    void read_raw(char* dst, std::size_t n);

    std::istream& in_;
    std::string what_;
};

using Digest = std::array<std::uint8_t, 32>;

/// Incremental SHA-256.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::span<const std::uint8_t> data);
    void update(std::string_view text);
    Digest finish();

private:
    void* ctx_;
};

std::string to_hex(const Digest& d);

} // namespace meshvae::io
