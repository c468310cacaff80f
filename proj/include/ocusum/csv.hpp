#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <system_error>

#include "ocusum/errors.hpp"

namespace ocusum {

/// Locale-independent shortest round-trip formatting; CSV files must be
/// byte-identical across reruns.
inline std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

/// Minimal CSV emitter: comma separator, '.' decimal point, LF line
/// endings, one header row.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot open " + path + " for writing");
  }

  CsvWriter& field(const std::string& v) { return raw(v); }
  CsvWriter& field(const char* v) { return raw(v); }
  CsvWriter& field(double v) { return raw(format_double(v)); }
  CsvWriter& field(int v) { return raw(std::to_string(v)); }
  CsvWriter& field(std::int64_t v) { return raw(std::to_string(v)); }
  CsvWriter& field(std::uint64_t v) { return raw(std::to_string(v)); }
  CsvWriter& field(bool v) { return raw(v ? "1" : "0"); }

  void end_row() {
    out_ << '\n';
    first_in_row_ = true;
  }

  template <typename... Ts>
  void row(const Ts&... values) {
    (field(values), ...);
    end_row();
  }

 private:
  CsvWriter& raw(const std::string& v) {
    if (!first_in_row_) out_ << ',';
    out_ << v;
    first_in_row_ = false;
    return *this;
  }

  std::ofstream out_;
  bool first_in_row_ = true;
};

}  // namespace ocusum
