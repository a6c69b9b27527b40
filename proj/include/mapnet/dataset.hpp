#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mapnet/scene.hpp"
#include "mapnet/tiling.hpp"

namespace mapnet {

struct DatasetSpec {
  SceneSpec scene;  // seed and id are overridden per scene
  int n_scenes = 10;
  int tile_h = 64;
  int tile_w = 64;
  std::array<double, 3> ratios{6.0, 1.0, 3.0};
  std::uint64_t seed = 0;

  void validate() const;
};

struct ManifestRow {
  std::string id;
  std::string split;
  int height = 0;
  int width = 0;
  double fg_fraction = 0.0;
};

// Scene i is "scene<iii>" seeded from derive_seed(seed, id); all scene
// tiles are pooled and split with the dataset seed.
Split<Sample> generate_dataset(const DatasetSpec& spec);

// Layout <root>/{train,val,test}/<id>.ppm and <id>_mask.pgm plus
// <root>/index.csv. root itself is created; its parent must already exist.
void write_dataset(const std::filesystem::path& root, const Split<Sample>& data);

std::vector<ManifestRow> read_manifest(const std::filesystem::path& root);
// Loads every sample of one split in manifest order.
std::vector<Sample> read_split(const std::filesystem::path& root, const std::string& split);

// Image plus mask pair for one sample id inside a split directory.
Sample read_sample(const std::filesystem::path& dir, const std::string& id);
void write_sample(const std::filesystem::path& dir, const Sample& s);

}  // namespace mapnet
