#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace peerchurn {

// Flat key=value file: one pair per line, '#' starts a comment, blank lines
// ignored, whitespace around key and value trimmed. A repeated key overrides
// the earlier value. Typed getters throw with the key and file named, so a
// bad config line fails loudly instead of silently falling back.
class KvFile {
 public:
  KvFile() = default;
  static KvFile parse_file(const std::string& path);
  static KvFile parse_text(const std::string& text, const std::string& origin = "<text>");

  void set(const std::string& key, const std::string& value);
  void erase(const std::string& key);
  const std::string* find(const std::string& key) const;
  bool has(const std::string& key) const { return find(key) != nullptr; }

  std::string str(const std::string& key, const std::string& fallback) const;
  double num(const std::string& key, double fallback) const;
  int64_t integer(const std::string& key, int64_t fallback) const;
  uint64_t uinteger(const std::string& key, uint64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;  // 1/0/true/false
  // Comma-separated integers, e.g. "1,3,5".
  std::vector<int> int_list(const std::string& key, const std::vector<int>& fallback) const;

  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }
  const std::string& origin() const { return origin_; }
  void write(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> items_;  // file order, unique keys
  std::unordered_map<std::string, std::size_t> index_;
  std::string origin_ = "<empty>";
};

// Records content hashes of the files a pipeline stage read and wrote, so a
// later invocation can tell whether the stage is still current without
// trusting timestamps.
struct ArtifactManifest {
  struct Entry {
    std::string kind;  // "in" or "out"
    std::string path;  // relative to the manifest's directory
    uint64_t hash = 0;
  };
  std::vector<Entry> entries;

  // Hashes dir/name now and appends it.
  void record(const std::string& kind, const std::string& dir, const std::string& name);
  void save(const std::string& path) const;
  static ArtifactManifest load(const std::string& path);  // empty when absent
  // True when every recorded file still exists under `dir` with the same hash.
  bool current(const std::string& dir) const;
};

}  // namespace peerchurn
