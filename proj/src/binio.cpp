#include "featcomp/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "featcomp/error.hpp"

namespace featcomp::binio {
namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void Writer::magic(std::string_view tag) { buf_.insert(buf_.end(), tag.begin(), tag.end()); }
void Writer::u8(std::uint8_t v) { buf_.push_back(v); }
void Writer::u32(std::uint32_t v) { put_le(buf_, v); }
void Writer::u64(std::uint64_t v) { put_le(buf_, v); }
void Writer::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }

void Writer::f64s(std::span<const double> values) {
  buf_.reserve(buf_.size() + 8 * values.size());
  for (double v : values) f64(v);
}

void Writer::bytes(std::span<const std::uint8_t> values) {
  buf_.insert(buf_.end(), values.begin(), values.end());
}

void Writer::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void Reader::fail(const std::string& what) const { throw FormatError(what, pos_); }

void Reader::need(std::size_t n, const char* what) const {
  if (remaining() < n) {
    fail(std::string("truncated file: expected ") + std::to_string(n) + " more bytes for " + what);
  }
}

void Reader::magic(std::string_view tag) {
  need(tag.size(), "magic");
  if (std::memcmp(data_.data() + pos_, tag.data(), tag.size()) != 0) {
    fail("bad magic, expected \"" + std::string(tag) + "\"");
  }
  pos_ += tag.size();
}

std::uint8_t Reader::u8() {
  need(1, "u8");
  return data_[pos_++];
}

std::uint32_t Reader::u32() {
  need(4, "u32");
  const auto v = get_le<std::uint32_t>(data_.data() + pos_);
  pos_ += 4;
  return v;
}

std::uint64_t Reader::u64() {
  need(8, "u64");
  const auto v = get_le<std::uint64_t>(data_.data() + pos_);
  pos_ += 8;
  return v;
}

double Reader::f64() {
  need(8, "f64");
  const auto v = std::bit_cast<double>(get_le<std::uint64_t>(data_.data() + pos_));
  pos_ += 8;
  return v;
}

std::vector<double> Reader::f64s(std::size_t n) {
  if (n > remaining() / 8) need(n * 8, "f64 array");
  std::vector<double> out(n);
  for (auto& v : out) v = f64();
  return out;
}

std::vector<std::uint8_t> Reader::bytes(std::size_t n) {
  need(n, "byte array");
  std::vector<std::uint8_t> out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return out;
}

std::string Reader::str() {
  const std::uint32_t n = u32();
  need(n, "string");
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

void Reader::expect_end() const {
  if (remaining() != 0) fail(std::to_string(remaining()) + " trailing bytes");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace featcomp::binio
