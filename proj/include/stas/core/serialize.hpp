#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace stas {

// Little-endian binary primitives for checkpoints and run state. Doubles
// are stored as their IEEE-754 bit patterns, so round trips are exact.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void str(const std::string& s);
  void f64s(std::span<const double> values);
  void raw(const void* data, std::size_t bytes);

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  std::string str();
  std::vector<double> f64s();
  void raw(void* data, std::size_t bytes);
  // Reads exactly `magic.size()` bytes and throws FormatError on mismatch.
  void expect(const std::string& magic);

 private:
  std::istream& in_;
};

}  // namespace stas
