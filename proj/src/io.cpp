#include "ncood/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>

#include "ncood/errors.hpp"

namespace ncood {

void append_u8(std::string& buf, std::uint8_t v) {
    buf.push_back(static_cast<char>(v));
}

void append_u32le(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64le(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64le(std::string& buf, double v) {
    append_u64le(buf, std::bit_cast<std::uint64_t>(v));
}

std::uint8_t ByteReader::read_u8() {
    if (pos_ + 1 > data_.size()) throw InvalidInputError("unexpected end of data");
    return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t ByteReader::read_u32le() {
    if (pos_ + 4 > data_.size()) throw InvalidInputError("unexpected end of data");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::read_u64le() {
    if (pos_ + 8 > data_.size()) throw InvalidInputError("unexpected end of data");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
}

double ByteReader::read_f64le() {
    return std::bit_cast<double>(read_u64le());
}

void ByteReader::expect_magic(std::string_view magic, const char* format_name) {
    if (pos_ + magic.size() > data_.size() ||
        data_.substr(pos_, magic.size()) != magic) {
        throw InvalidInputError(std::string(format_name) + ": bad magic bytes");
    }
    pos_ += magic.size();
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on " + path);
    return bytes;
}

void write_file_bytes(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failure on " + path);
}

std::string encode_ncfb(const FeatureBank& bank) {
    std::string buf;
    buf.reserve(13 + static_cast<std::size_t>(bank.size()) *
                         (static_cast<std::size_t>(bank.dim()) * 8 + 4));
    buf += "NCFB";
    append_u8(buf, 1);
    append_u32le(buf, static_cast<std::uint32_t>(bank.size()));
    append_u32le(buf, static_cast<std::uint32_t>(bank.dim()));
    append_u32le(buf, static_cast<std::uint32_t>(bank.num_classes));
    for (Eigen::Index i = 0; i < bank.size(); ++i) {
        for (Eigen::Index j = 0; j < bank.dim(); ++j) append_f64le(buf, bank.features(i, j));
    }
    for (int label : bank.labels) append_u32le(buf, static_cast<std::uint32_t>(label));
    return buf;
}

FeatureBank decode_ncfb(std::string_view bytes) {
    ByteReader reader(bytes);
    reader.expect_magic("NCFB", "NCFB");
    const std::uint8_t version = reader.read_u8();
    if (version != 1) throw InvalidInputError("NCFB: unsupported version " + std::to_string(version));
    const std::uint32_t n = reader.read_u32le();
    const std::uint32_t d = reader.read_u32le();
    const std::uint32_t c = reader.read_u32le();

    Matrix features(n, d);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < d; ++j) features(i, j) = reader.read_f64le();
    }
    std::vector<int> labels(n);
    for (std::uint32_t i = 0; i < n; ++i) labels[i] = static_cast<int>(reader.read_u32le());
    if (reader.remaining() != 0) throw InvalidInputError("NCFB: trailing bytes");
    return FeatureBank(std::move(features), std::move(labels), static_cast<int>(c));
}

void write_ncfb(const std::string& path, const FeatureBank& bank) {
    write_file_bytes(path, encode_ncfb(bank));
}

FeatureBank read_ncfb(const std::string& path) {
    return decode_ncfb(read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// SHA-256 (FIPS 180-4), dependency-free.

namespace {

constexpr std::array<std::uint32_t, 64> kSha256K = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
    0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
    0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
    0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
    0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
    0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
    0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
    0xc67178f2};

inline std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

void sha256_block(std::array<std::uint32_t, 8>& state, const unsigned char* block) {
    std::array<std::uint32_t, 64> w;
    for (int t = 0; t < 16; ++t) {
        w[t] = (static_cast<std::uint32_t>(block[4 * t]) << 24) |
               (static_cast<std::uint32_t>(block[4 * t + 1]) << 16) |
               (static_cast<std::uint32_t>(block[4 * t + 2]) << 8) |
               static_cast<std::uint32_t>(block[4 * t + 3]);
    }
    for (int t = 16; t < 64; ++t) {
        const std::uint32_t s0 = rotr(w[t - 15], 7) ^ rotr(w[t - 15], 18) ^ (w[t - 15] >> 3);
        const std::uint32_t s1 = rotr(w[t - 2], 17) ^ rotr(w[t - 2], 19) ^ (w[t - 2] >> 10);
        w[t] = w[t - 16] + s0 + w[t - 7] + s1;
    }
    auto [a, b, c, d, e, f, g, h] = state;
    for (int t = 0; t < 64; ++t) {
        const std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
        const std::uint32_t ch = (e & f) ^ (~e & g);
        const std::uint32_t t1 = h + s1 + ch + kSha256K[t] + w[t];
        const std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
        const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
        const std::uint32_t t2 = s0 + maj;
        h = g;
        g = f;
        f = e;
        e = d + t1;
        d = c;
        c = b;
        b = a;
        a = t1 + t2;
    }
    state[0] += a;
    state[1] += b;
    state[2] += c;
    state[3] += d;
    state[4] += e;
    state[5] += f;
    state[6] += g;
    state[7] += h;
}

} // namespace

std::string sha256_hex(std::string_view bytes) {
    std::array<std::uint32_t, 8> state = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                                          0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
    std::size_t full_blocks = bytes.size() / 64;
    for (std::size_t i = 0; i < full_blocks; ++i) sha256_block(state, data + 64 * i);

    // Final block(s): 0x80 pad, zeros, 64-bit big-endian bit length.
    std::array<unsigned char, 128> tail{};
    const std::size_t rem = bytes.size() - 64 * full_blocks;
    std::memcpy(tail.data(), data + 64 * full_blocks, rem);
    tail[rem] = 0x80;
    const std::size_t tail_len = rem + 9 <= 64 ? 64 : 128;
    const std::uint64_t bit_len = static_cast<std::uint64_t>(bytes.size()) * 8;
    for (int i = 0; i < 8; ++i) {
        tail[tail_len - 1 - static_cast<std::size_t>(i)] =
            static_cast<unsigned char>((bit_len >> (8 * i)) & 0xff);
    }
    sha256_block(state, tail.data());
    if (tail_len == 128) sha256_block(state, tail.data() + 64);

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (std::uint32_t word : state) {
        for (int shift = 28; shift >= 0; shift -= 4) out.push_back(hex[(word >> shift) & 0xf]);
    }
    return out;
}

std::string format_double(double v) {
    std::array<char, 40> buf;
    const auto result = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), result.ptr);
}

std::string csv_field(std::string_view text) {
    const bool needs_quoting = text.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs_quoting) return std::string(text);
    std::string out;
    out.reserve(text.size() + 2);
    out.push_back('"');
    for (char ch : text) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

} // namespace ncood
