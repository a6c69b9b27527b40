#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mapnet/dataset.hpp"
#include "mapnet/model.hpp"
#include "mapnet/train.hpp"

namespace mapnet::cli {

// Everything a command may need, filled from a `key = value` file and then
// from command-line overrides. One master seed feeds data generation,
// weight initialisation and training through derived streams.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DatasetSpec data;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  std::string data_root;
  std::string checkpoint;
  std::string out;

  RunConfig();

  // Applies one key; throws ConfigError on an unknown key or bad value.
  // `where` prefixes the message (file:line or flag name).
  void set(const std::string& key, const std::string& value, const std::string& where);
  [[nodiscard]] std::string get(const std::string& key) const;

  // Sorted key list, used for the echo and for error hints.
  static const std::vector<std::string>& keys();

  // Fully resolved configuration in file syntax, one key per line.
  [[nodiscard]] std::string echo() const;
  void write_echo(const std::filesystem::path& dir) const;

  [[nodiscard]] std::uint64_t init_seed() const;
  [[nodiscard]] std::uint64_t train_seed() const;
  [[nodiscard]] TrainConfig resolved_train() const;
  [[nodiscard]] DatasetSpec resolved_data() const;
};

// Parses file text; unknown keys and malformed lines report their line number.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

}  // namespace mapnet::cli
