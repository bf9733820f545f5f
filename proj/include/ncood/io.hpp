#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "ncood/feature_stats.hpp"

namespace ncood {

// Explicit little-endian encoding so file formats do not depend on host
// byte order.
void append_u8(std::string& buf, std::uint8_t v);
void append_u32le(std::string& buf, std::uint32_t v);
void append_u64le(std::string& buf, std::uint64_t v);
void append_f64le(std::string& buf, double v);

class ByteReader {
  public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    std::uint8_t read_u8();
    std::uint32_t read_u32le();
    std::uint64_t read_u64le();
    double read_f64le();
    void expect_magic(std::string_view magic, const char* format_name);
    std::size_t remaining() const { return data_.size() - pos_; }

  private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

std::string read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::string_view bytes);

// Labeled feature dump: "NCFB", version byte, u32 N/d/C, N*d doubles
// row-major, N u32 labels. All little-endian; round-trip is bit-exact.
std::string encode_ncfb(const FeatureBank& bank);
FeatureBank decode_ncfb(std::string_view bytes);
void write_ncfb(const std::string& path, const FeatureBank& bank);
FeatureBank read_ncfb(const std::string& path);

std::string sha256_hex(std::string_view bytes);

// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

// RFC 4180 quoting: fields with comma, quote or newline get quoted,
// embedded quotes doubled.
std::string csv_field(std::string_view text);

} // namespace ncood
