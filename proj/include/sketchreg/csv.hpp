#pragma once

// Minimal CSV writing: header row, ',' separator, '.' decimal point,
// shortest round-trip representation for reals, empty field for NaN.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace sketchreg::csv {

inline std::string format_real(double v) {
  if (std::isnan(v)) return {};
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc{}) throw std::runtime_error("failed to format real");
  return std::string(buf, res.ptr);
}

inline std::string format_int(long long v) { return std::to_string(v); }
inline std::string format_uint(std::uint64_t v) { return std::to_string(v); }

class Writer {
 public:
  Writer(const std::string& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary), columns_(header.size()) {
    if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_row(header);
  }

  void write_row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw std::logic_error("CSV row has the wrong number of fields");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
    if (!out_) throw std::runtime_error("CSV write failed");
  }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace sketchreg::csv
