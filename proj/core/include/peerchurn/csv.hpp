#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace peerchurn {

// Minimal comma-separated reader for the pipeline's file formats: no quoting
// or escaping (identifiers and numbers never contain commas), one header row.
class CsvReader {
 public:
  // Throws Error when the file is missing or the header differs from
  // `expected_header` (exact match, in order).
  CsvReader(const std::string& path, const std::vector<std::string>& expected_header);

  // Accepts any header row; callers inspect header() themselves. For files
  // whose column set is data-dependent (panel covariates).
  explicit CsvReader(const std::string& path);
  const std::vector<std::string>& header() const { return header_; }

  // Reads the next row into `fields` (cleared first). Returns false at EOF.
  // Blank lines are skipped. Field count mismatches are NOT detected here;
  // callers check fields.size() so they can reject per-record.
  bool next(std::vector<std::string>& fields);

  long line_number() const { return line_; }
  const std::string& path() const { return path_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::string buf_;
  std::vector<std::string> header_;
  long line_ = 1;  // header consumed in ctor
};

void split_csv(std::string_view line, std::vector<std::string>& out);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void raw_row(const std::string& joined);  // pre-joined, no trailing newline
  void close();
  ~CsvWriter();

 private:
  std::ofstream out_;
  std::string path_;
};

// Fixed numeric formats so artifact bytes are reproducible.
std::string fmt_double(double v);          // shortest round-trip-ish, %.12g
std::string fmt_fixed(double v, int prec); // %.*f
// Minutes with exactly 2 decimals from integral seconds, rounding half-up.
std::string fmt_minutes_2dp(int64_t seconds);

// FNV-1a 64 over a file's bytes; used for artifact staleness manifests.
uint64_t fnv1a_file(const std::string& path);
uint64_t fnv1a_bytes(const void* data, std::size_t n, uint64_t h = 0xcbf29ce484222325ULL);
std::string hex_u64(uint64_t v);

bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);  // mkdir -p

}  // namespace peerchurn
