#pragma once
/**
 * csv.hpp — deterministic CSV / table output helpers.
 *
 * Every file the CLI emits goes through this writer so that reruns with the
 * same config produce byte-identical artifacts:
 *   - RFC 4180 quoting (element keys contain commas and '|'),
 *   - rationals rendered canonically as "p/q",
 *   - doubles rendered with a fixed "%.12g" format, locale-independent,
 *   - '\n' line endings on every platform.
 */

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "coarselab/rational.hpp"
#include "coarselab/surd.hpp"

namespace coarse {
namespace csv {

/** Quote a cell iff it contains a comma, quote, or newline. */
inline std::string cell(const std::string& raw) {
  bool needs = false;
  for (char c : raw)
    if (c == ',' || c == '"' || c == '\n' || c == '\r') { needs = true; break; }
  if (!needs) return raw;
  std::string out = "\"";
  for (char c : raw) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

/** Fixed-format double: enough digits to round-trip visually, no locale. */
inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::string(buf);
}

inline std::string num(const Rat& v) { return v.str(); }
inline std::string num(const Surd& v) { return v.str(); }
inline std::string num(long long v) { return std::to_string(v); }
inline std::string num(std::size_t v) { return std::to_string(v); }

/** Line-buffered CSV file writer; one header row, then data rows. */
class Writer {
 public:
  Writer(const std::string& path, std::initializer_list<std::string> header)
      : out_(path, std::ios::binary) {
    if (!out_) throw ConfigError("cannot open output file: " + path);
    std::vector<std::string> cells(header);
    emit(cells);
  }

  void row(const std::vector<std::string>& cells) { emit(cells); }

  void close() { out_.close(); }

 private:
  void emit(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      line += cell(cells[i]);
    }
    line += '\n';
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  }

  std::ofstream out_;
};

}  // namespace csv
}  // namespace coarse
