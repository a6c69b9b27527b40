#include "mapnet/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mapnet/errors.hpp"
#include "mapnet/image_io.hpp"
#include "mapnet/rng.hpp"

namespace fs = std::filesystem;

namespace mapnet {

void DatasetSpec::validate() const {
  scene.validate();
  if (n_scenes < 1) throw ConfigError("n_scenes must be positive, got " + std::to_string(n_scenes));
  if (tile_h < 1 || tile_h > scene.height) throw ConfigError("tile_h must lie in [1, scene height]");
  if (tile_w < 1 || tile_w > scene.width) throw ConfigError("tile_w must lie in [1, scene width]");
  for (double r : ratios) {
    if (!(r > 0)) throw ConfigError("split ratios must be positive");
  }
}

Split<Sample> generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  std::vector<Sample> tiles;
  for (int i = 0; i < spec.n_scenes; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "scene%03d", i);
    SceneSpec s = spec.scene;
    s.id = id;
    s.seed = derive_seed(spec.seed, std::string_view(id));
    for (Sample& t : tile(generate_scene(s), spec.tile_h, spec.tile_w)) tiles.push_back(std::move(t));
  }
  return split(tiles, spec.ratios, derive_seed(spec.seed, std::string_view("split")));
}

void write_sample(const fs::path& dir, const Sample& s) {
  write_pnm(dir / (s.id + ".ppm"), to_raw(s.image));
  write_pnm(dir / (s.id + "_mask.pgm"), mask_to_raw(s.mask));
}

Sample read_sample(const fs::path& dir, const std::string& id) {
  Sample s;
  s.id = id;
  const RawImage img = read_pnm(dir / (id + ".ppm"));
  if (img.channels != 3) throw FormatError(id + ".ppm is not an RGB image");
  s.image = from_raw(img);
  s.mask = mask_from_raw(read_pnm(dir / (id + "_mask.pgm")));
  if (s.mask.h() != s.image.h() || s.mask.w() != s.image.w()) {
    throw DataError("mask of " + id + " does not match its image size");
  }
  return s;
}

void write_dataset(const fs::path& root, const Split<Sample>& data) {
  const fs::path parent = fs::absolute(root).parent_path();
  if (!fs::is_directory(parent)) throw IoError("output parent directory does not exist: " + parent.string());
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  std::ostringstream manifest;
  manifest << "id,split,h,w,fg_fraction\n";
  const std::pair<const char*, const std::vector<Sample>*> parts[] = {
      {"train", &data.train}, {"val", &data.val}, {"test", &data.test}};
  for (const auto& [name, samples] : parts) {
    const fs::path dir = root / name;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (const Sample& s : *samples) {
      write_sample(dir, s);
      char frac[32];
      std::snprintf(frac, sizeof frac, "%.6f", s.foreground_fraction());
      manifest << s.id << ',' << name << ',' << s.height() << ',' << s.width() << ',' << frac << '\n';
    }
  }
  std::ofstream out(root / "index.csv", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (root / "index.csv").string());
  out << manifest.str();
}

std::vector<ManifestRow> read_manifest(const fs::path& root) {
  const fs::path path = root / "index.csv";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "id,split,h,w,fg_fraction") {
    throw FormatError(path.string() + ": unexpected manifest header");
  }
  std::vector<ManifestRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestRow r;
    std::string h, w, f;
    if (!std::getline(ss, r.id, ',') || !std::getline(ss, r.split, ',') || !std::getline(ss, h, ',') ||
        !std::getline(ss, w, ',') || !std::getline(ss, f)) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
    }
    try {
      r.height = std::stoi(h);
      r.width = std::stoi(w);
      r.fg_fraction = std::stod(f);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<Sample> read_split(const fs::path& root, const std::string& split) {
  std::vector<Sample> out;
  for (const ManifestRow& r : read_manifest(root)) {
    if (r.split == split) out.push_back(read_sample(root / split, r.id));
  }
  return out;
}

}  // namespace mapnet
