#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dlgnet/dataset.hpp"
#include "dlgnet/model.hpp"

DLGNET_NAMESPACE_BEGIN

/// Bad key, bad value or unreadable config file.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Flat key=value settings. Every key has a default; unknown keys are rejected.
class RunConfig {
 public:
  RunConfig();

  /// Lines "key=value"; '#' starts a comment. Later lines win.
  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  /// Parses "key=value".
  void apply(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Sorted key=value lines.
  std::string dump() const;
  void write(const std::filesystem::path& path) const;
  /// Keys whose values differ, as (key, "mine -> theirs").
  std::vector<std::pair<std::string, std::string>> diff(const RunConfig& other) const;

  static const std::vector<std::pair<std::string, std::string>>& defaults();

 private:
  std::map<std::string, std::string> values_;
};

ModelConfig model_config(const RunConfig& cfg);
SceneRanges scene_ranges(const RunConfig& cfg);
GenerateOptions generate_options(const RunConfig& cfg);
AugmentOptions augment_options(const RunConfig& cfg);

DLGNET_NAMESPACE_END
