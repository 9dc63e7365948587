#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include "camel/meta.hpp"

namespace camel::cli {

/// Bad config file, bad flag value, or a config that fails validation. Maps to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` text grouped under `[section]` headers. `#` and `;`
/// start comments. Keys are addressed as "section.key".
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<config>");
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  template <typename T>
  void read(const std::string& key, T& target) const;

  /// Keys that were present but never read.
  std::set<std::string> unused() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  std::string origin_;
  mutable std::set<std::string> read_;

  const std::string* lookup(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& why) const;
};

template <> void KeyValueFile::read(const std::string&, std::string&) const;
template <> void KeyValueFile::read(const std::string&, std::filesystem::path&) const;
template <> void KeyValueFile::read(const std::string&, bool&) const;
template <> void KeyValueFile::read(const std::string&, double&) const;
template <> void KeyValueFile::read(const std::string&, std::size_t&) const;

struct DataConfig {
  std::size_t identities = 50;
  std::size_t images_per_identity = 4;
  std::string train_style = "synthetic";
  std::string eval_style = "realistic";
  std::filesystem::path train_dir;  // empty: generate in memory from the seed
  std::filesystem::path eval_dir;
};

struct EvalConfig {
  std::size_t max_mask = 5;
  bool per_epoch = true;  // log validation metrics after every epoch
};

struct AblateConfig {
  std::string sweep = "components";  // components | memory | k
  std::size_t seeds = 10;
};

struct RunConfig {
  std::uint64_t seed = 0;
  TrainConfig train;
  DataConfig data;
  EvalConfig eval;
  AblateConfig ablate;
  std::filesystem::path out = "runs/default";

  void validate() const;
};

RunConfig parse_run_config(const KeyValueFile& file);
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies "st=on,adsu=off,cmml=on"; unspecified components keep their value.
void apply_toggles(Toggles& toggles, const std::string& spec);

/// The config in canonical file form; parse_run_config(dump) reproduces it.
std::string dump_run_config(const RunConfig& cfg);

}  // namespace camel::cli
