#include "stas/core/serialize.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "stas/core/errors.hpp"

namespace stas {

static_assert(std::endian::native == std::endian::little, "serialization assumes little-endian");

void BinaryWriter::raw(const void* data, std::size_t bytes) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out_) throw FormatError("write failed");
}

void BinaryWriter::u64(std::uint64_t v) { raw(&v, sizeof v); }
void BinaryWriter::i64(std::int64_t v) { raw(&v, sizeof v); }
void BinaryWriter::f64(double v) { raw(&v, sizeof v); }

void BinaryWriter::str(const std::string& s) {
  u64(s.size());
  raw(s.data(), s.size());
}

void BinaryWriter::f64s(std::span<const double> values) {
  u64(values.size());
  raw(values.data(), values.size() * sizeof(double));
}

void BinaryReader::raw(void* data, std::size_t bytes) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in_.gcount()) != bytes) throw FormatError("unexpected end of file");
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  raw(&v, sizeof v);
  return v;
}

std::int64_t BinaryReader::i64() {
  std::int64_t v;
  raw(&v, sizeof v);
  return v;
}

double BinaryReader::f64() {
  double v;
  raw(&v, sizeof v);
  return v;
}

std::string BinaryReader::str() {
  const std::uint64_t n = u64();
  if (n > (1ull << 32)) throw FormatError("string length out of range");
  std::string s(n, '\0');
  raw(s.data(), n);
  return s;
}

std::vector<double> BinaryReader::f64s() {
  const std::uint64_t n = u64();
  if (n > (1ull << 34)) throw FormatError("array length out of range");
  std::vector<double> v(n);
  raw(v.data(), n * sizeof(double));
  return v;
}

void BinaryReader::expect(const std::string& magic) {
  std::string got(magic.size(), '\0');
  raw(got.data(), got.size());
  if (got != magic) throw FormatError("bad magic: expected '" + magic + "'");
}

}  // namespace stas
