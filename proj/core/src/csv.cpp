#include "peerchurn/csv.hpp"

#include <cstdio>
#include <filesystem>

#include "peerchurn/error.hpp"

namespace peerchurn {

void split_csv(std::string_view line, std::vector<std::string>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

namespace {
std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += v[i];
  }
  return s;
}
}  // namespace

CsvReader::CsvReader(const std::string& path, const std::vector<std::string>& expected_header)
    : in_(path), path_(path) {
  if (!in_) throw Error("cannot open file: " + path);
  std::string header;
  if (!std::getline(in_, header)) throw Error("empty file: " + path);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header != join(expected_header))
    throw Error("schema mismatch in " + path + ": expected header '" + join(expected_header) +
                "', got '" + header + "'");
}

CsvReader::CsvReader(const std::string& path) : in_(path), path_(path) {
  if (!in_) throw Error("cannot open file: " + path);
  std::string header;
  if (!std::getline(in_, header)) throw Error("empty file: " + path);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  split_csv(header, header_);
}

bool CsvReader::next(std::vector<std::string>& fields) {
  while (std::getline(in_, buf_)) {
    ++line_;
    if (!buf_.empty() && buf_.back() == '\r') buf_.pop_back();
    if (buf_.empty()) continue;
    split_csv(buf_, fields);
    return true;
  }
  return false;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path), path_(path) {
  if (!out_) throw Error("cannot create file: " + path);
  out_ << join(header) << '\n';
}

void CsvWriter::raw_row(const std::string& joined) { out_ << joined << '\n'; }

void CsvWriter::close() {
  if (out_.is_open()) {
    out_.close();
    if (out_.fail()) throw Error("write failed: " + path_);
  }
}

CsvWriter::~CsvWriter() {
  if (out_.is_open()) out_.close();
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string fmt_fixed(double v, int prec) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::string fmt_minutes_2dp(int64_t seconds) {
  // hundredths of a minute = seconds*5/3, rounded half-up; the fractional
  // part of seconds*5/3 is always in {0, 1/3, 2/3} so half-up == nearest.
  int64_t hundredths = (seconds * 10 + 3) / 6;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld.%02lld", static_cast<long long>(hundredths / 100),
                static_cast<long long>(hundredths % 100));
  return buf;
}

uint64_t fnv1a_bytes(const void* data, std::size_t n, uint64_t h) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file for hashing: " + path);
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a_bytes(buf, static_cast<std::size_t>(in.gcount()), h);
  return h;
}

std::string hex_u64(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::exists(path, ec);
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw Error("cannot create directory " + path + ": " + ec.message());
}

}  // namespace peerchurn
