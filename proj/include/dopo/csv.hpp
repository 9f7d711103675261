#pragma once
// ============================================================================
// CSV output: comma-separated, '.' decimal, 17 significant digits, with
// '#'-prefixed metadata header lines.  Formatting goes through snprintf %.17g
// so equal inputs always produce byte-identical files.
// ============================================================================

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dopo/core.hpp"

namespace dopo {

/// One double at full round-trip precision.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Streamed CSV file with metadata header support.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw invalid_argument("cannot open output file: " + path);
  }

  /// One '#'-prefixed metadata line.
  void meta(const std::string& line) { out_ << "# " << line << "\n"; }

  /// Echo a whole key-value map (sorted by key) into the header.
  void meta(const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) out_ << "# " << k << " = " << v << "\n";
  }

  /// Column-name line.
  void columns(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i)
      out_ << (i ? "," : "") << names[i];
    out_ << "\n";
  }

  /// One data row of doubles.
  void row(const std::vector<double>& vals) {
    for (std::size_t i = 0; i < vals.size(); ++i)
      out_ << (i ? "," : "") << format_full(vals[i]);
    out_ << "\n";
  }

  /// One data row of preformatted cells (for mixed numeric/text rows).
  void row_raw(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

}  // namespace dopo
