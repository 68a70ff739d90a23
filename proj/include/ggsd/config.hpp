#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ggsd {

struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every recognised key with its default. The CLI derives one flag per entry.
const std::vector<ConfigKey>& config_schema();

/// Flat `key = value` configuration. Unknown keys are rejected.
class Config {
 public:
  Config();

  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  /// Sets only the keys present in `text`, leaving the rest untouched.
  void apply(std::string_view text);
  void apply_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  bool is_default(const std::string& key) const;

  const std::string& get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// All keys in schema order, `key = value` per line.
  std::string to_text() const;
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ggsd
