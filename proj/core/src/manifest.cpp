#include "peerchurn/manifest.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "peerchurn/csv.hpp"
#include "peerchurn/error.hpp"

namespace peerchurn {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

KvFile KvFile::parse_text(const std::string& text, const std::string& origin) {
  KvFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(origin + ":" + std::to_string(lineno) + ": expected key=value, got '" +
                  line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw Error(origin + ":" + std::to_string(lineno) + ": empty key");
    kv.set(key, value);
  }
  return kv;
}

KvFile KvFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

void KvFile::set(const std::string& key, const std::string& value) {
  auto it = index_.find(key);
  if (it != index_.end()) {
    items_[it->second].second = value;
    return;
  }
  index_.emplace(key, items_.size());
  items_.emplace_back(key, value);
}

void KvFile::erase(const std::string& key) {
  auto it = index_.find(key);
  if (it == index_.end()) return;
  std::size_t pos = it->second;
  items_.erase(items_.begin() + static_cast<std::ptrdiff_t>(pos));
  index_.erase(it);
  for (auto& [k, idx] : index_)
    if (idx > pos) --idx;
}

const std::string* KvFile::find(const std::string& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &items_[it->second].second;
}

std::string KvFile::str(const std::string& key, const std::string& fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

double KvFile::num(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  char* end = nullptr;
  double d = std::strtod(v->c_str(), &end);
  if (end == v->c_str() || *end != '\0')
    throw Error(origin_ + ": key '" + key + "' is not a number: '" + *v + "'");
  return d;
}

int64_t KvFile::integer(const std::string& key, int64_t fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  char* end = nullptr;
  long long d = std::strtoll(v->c_str(), &end, 10);
  if (end == v->c_str() || *end != '\0')
    throw Error(origin_ + ": key '" + key + "' is not an integer: '" + *v + "'");
  return d;
}

uint64_t KvFile::uinteger(const std::string& key, uint64_t fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  char* end = nullptr;
  unsigned long long d = std::strtoull(v->c_str(), &end, 10);
  if (end == v->c_str() || *end != '\0' || v->front() == '-')
    throw Error(origin_ + ": key '" + key + "' is not a non-negative integer: '" + *v + "'");
  return d;
}

bool KvFile::flag(const std::string& key, bool fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true") return true;
  if (*v == "0" || *v == "false") return false;
  throw Error(origin_ + ": key '" + key + "' is not a flag (1/0/true/false): '" + *v + "'");
}

std::vector<int> KvFile::int_list(const std::string& key,
                                  const std::vector<int>& fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= v->size()) {
    std::size_t pos = v->find(',', start);
    std::string part = trim(v->substr(start, pos == std::string::npos ? std::string::npos
                                                                      : pos - start));
    if (!part.empty()) {
      char* end = nullptr;
      long d = std::strtol(part.c_str(), &end, 10);
      if (end == part.c_str() || *end != '\0')
        throw Error(origin_ + ": key '" + key + "' has a non-integer entry: '" + part + "'");
      out.push_back(static_cast<int>(d));
    }
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (out.empty())
    throw Error(origin_ + ": key '" + key + "' is an empty list");
  return out;
}

void KvFile::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot create file: " + path);
  for (const auto& [k, v] : items_) out << k << '=' << v << '\n';
  if (!out) throw Error("write failed: " + path);
}

namespace {
// Entries are usually outdir-relative; absolute paths (external inputs)
// stand on their own.
std::string join_path(const std::string& dir, const std::string& name) {
  return !name.empty() && name.front() == '/' ? name : dir + "/" + name;
}
}  // namespace

void ArtifactManifest::record(const std::string& kind, const std::string& dir,
                              const std::string& name) {
  entries.push_back(Entry{kind, name, fnv1a_file(join_path(dir, name))});
}

void ArtifactManifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot create manifest: " + path);
  for (const auto& e : entries) out << e.kind << ' ' << e.path << ' ' << hex_u64(e.hash) << '\n';
  if (!out) throw Error("write failed: " + path);
}

ArtifactManifest ArtifactManifest::load(const std::string& path) {
  ArtifactManifest m;
  std::ifstream in(path);
  if (!in) return m;
  std::string kind, rel, hex;
  while (in >> kind >> rel >> hex) {
    Entry e;
    e.kind = kind;
    e.path = rel;
    e.hash = std::strtoull(hex.c_str(), nullptr, 16);
    m.entries.push_back(e);
  }
  return m;
}

bool ArtifactManifest::current(const std::string& dir) const {
  if (entries.empty()) return false;
  for (const auto& e : entries) {
    std::string full = join_path(dir, e.path);
    if (!file_exists(full) || fnv1a_file(full) != e.hash) return false;
  }
  return true;
}

}  // namespace peerchurn
