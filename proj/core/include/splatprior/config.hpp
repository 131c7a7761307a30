#pragma once

#include "splatprior/core.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace splatprior {

/// INI-style key-value configuration. Keys are addressed as "section.key".
class Config {
 public:
  Config() = default;

  /// Throws IoError if the file cannot be read, InvalidInput on a syntax error.
  static Config load(const std::filesystem::path& path);
  static Config parse(std::string_view text);

  [[nodiscard]] bool has(const std::string& key) const { return entries_.count(key) > 0; }
  [[nodiscard]] std::optional<std::string> raw(const std::string& key) const;
  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }

  [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] double get_double(const std::string& key, double fallback) const;
  [[nodiscard]] int get_int(const std::string& key, int fallback) const;
  [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const;
  /// Whitespace- or comma-separated numbers.
  [[nodiscard]] std::vector<double> get_list(const std::string& key,
                                             const std::vector<double>& fallback) const;
  [[nodiscard]] Vec3 get_vec3(const std::string& key, const Vec3& fallback) const;

  [[nodiscard]] const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace splatprior
