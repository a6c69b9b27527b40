#include "run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mapnet/errors.hpp"
#include "mapnet/rng.hpp"

namespace mapnet::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename I>
I parse_int(const std::string& v, const std::string& key) {
  I out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError(key + " expects an integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + " expects a number, got '" + v + "'");
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + " expects true or false, got '" + v + "'");
}

std::string fmt_real(double d) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename M>
Field int_field(M member) {
  return {[member](RunConfig& c, const std::string& v, const std::string& k) {
            auto& ref = member(c);
            ref = parse_int<std::remove_reference_t<decltype(ref)>>(v, k);
          },
          [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <typename M>
Field real_field(M member) {
  return {[member](RunConfig& c, const std::string& v, const std::string& k) { member(c) = parse_real(v, k); },
          [member](const RunConfig& c) { return fmt_real(member(c)); }};
}

template <typename M>
Field bool_field(M member) {
  return {[member](RunConfig& c, const std::string& v, const std::string& k) { member(c) = parse_bool(v, k); },
          [member](const RunConfig& c) { return std::string(member(c) ? "true" : "false"); }};
}

template <typename M>
Field string_field(M member) {
  return {[member](RunConfig& c, const std::string& v, const std::string&) { member(c) = v; },
          [member](const RunConfig& c) { return member(c); }};
}

#define MEMBER(expr) [](auto& c) -> auto& { return c.expr; }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["n_paths"] = int_field(MEMBER(model.n_paths));
    t["n_blocks"] = int_field(MEMBER(model.n_blocks));
    t["base_channels"] = int_field(MEMBER(model.base_channels));
    t["input_h"] = int_field(MEMBER(model.input_h));
    t["input_w"] = int_field(MEMBER(model.input_w));
    t["variant"] = {[](RunConfig& c, const std::string& v, const std::string&) { c.model.variant = parse_variant(v); },
                    [](const RunConfig& c) { return to_string(c.model.variant); }};
    t["precision"] = {
        [](RunConfig& c, const std::string& v, const std::string&) { c.model.precision = parse_precision(v); },
        [](const RunConfig& c) { return to_string(c.model.precision); }};

    t["batch_size"] = int_field(MEMBER(train.batch_size));
    t["epochs"] = int_field(MEMBER(train.epochs));
    t["max_steps"] = int_field(MEMBER(train.max_steps));
    t["augment"] = bool_field(MEMBER(train.augment));
    t["checkpoint_every"] = int_field(MEMBER(train.checkpoint_every));
    t["lr"] = real_field(MEMBER(train.lr));

    t["n_scenes"] = int_field(MEMBER(data.n_scenes));
    t["tile_h"] = int_field(MEMBER(data.tile_h));
    t["tile_w"] = int_field(MEMBER(data.tile_w));
    t["split"] = {[](RunConfig& c, const std::string& v, const std::string& k) {
                    std::array<double, 3> r{};
                    std::istringstream ss(v);
                    std::string part;
                    int i = 0;
                    while (std::getline(ss, part, ':')) {
                      if (i == 3) break;
                      r[i++] = parse_real(trim(part), k);
                    }
                    if (i != 3 || std::getline(ss, part)) throw ConfigError(k + " expects train:val:test, got '" + v + "'");
                    c.data.ratios = r;
                  },
                  [](const RunConfig& c) {
                    return fmt_real(c.data.ratios[0]) + ":" + fmt_real(c.data.ratios[1]) + ":" +
                           fmt_real(c.data.ratios[2]);
                  }};
    t["scene_h"] = int_field(MEMBER(data.scene.height));
    t["scene_w"] = int_field(MEMBER(data.scene.width));
    t["min_buildings"] = int_field(MEMBER(data.scene.min_buildings));
    t["max_buildings"] = int_field(MEMBER(data.scene.max_buildings));
    t["min_scale"] = int_field(MEMBER(data.scene.min_scale));
    t["max_scale"] = int_field(MEMBER(data.scene.max_scale));
    t["mix_rectangle"] = real_field(MEMBER(data.scene.shape_mix[0]));
    t["mix_rotated"] = real_field(MEMBER(data.scene.shape_mix[1]));
    t["mix_l_shape"] = real_field(MEMBER(data.scene.shape_mix[2]));
    t["bg_low"] = real_field(MEMBER(data.scene.bg_low));
    t["bg_high"] = real_field(MEMBER(data.scene.bg_high));
    t["bg_cell"] = int_field(MEMBER(data.scene.bg_cell));
    t["fg_low"] = real_field(MEMBER(data.scene.fg_low));
    t["fg_high"] = real_field(MEMBER(data.scene.fg_high));
    t["noise"] = real_field(MEMBER(data.scene.noise));
    t["min_fg_fraction"] = real_field(MEMBER(data.scene.min_fg_fraction));
    t["max_fg_fraction"] = real_field(MEMBER(data.scene.max_fg_fraction));
    t["max_retries"] = int_field(MEMBER(data.scene.max_retries));

    t["seed"] = int_field(MEMBER(seed));
    t["threshold"] = real_field(MEMBER(threshold));
    t["data"] = string_field(MEMBER(data_root));
    t["checkpoint"] = string_field(MEMBER(checkpoint));
    t["out"] = string_field(MEMBER(out));
    return t;
  }();
  return table;
}

#undef MEMBER

}  // namespace

RunConfig::RunConfig() {
  model.input_h = data.tile_h;
  model.input_w = data.tile_w;
}

void RunConfig::set(const std::string& key, const std::string& value, const std::string& where) {
  const auto& table = fields();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError(where + ": unknown key '" + key + "'");
  try {
    it->second.set(*this, value, key);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

std::string RunConfig::get(const std::string& key) const {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown key '" + key + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return k;
}

std::string RunConfig::echo() const {
  std::string out = "# resolved configuration\n";
  for (const auto& k : keys()) out += k + " = " + get(k) + "\n";
  return out;
}

void RunConfig::write_echo(const std::filesystem::path& dir) const {
  const auto path = dir / "resolved_config.txt";
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << echo();
}

std::uint64_t RunConfig::init_seed() const { return derive_seed(seed, std::string_view("init")); }
std::uint64_t RunConfig::train_seed() const { return derive_seed(seed, std::string_view("train")); }

TrainConfig RunConfig::resolved_train() const {
  TrainConfig t = train;
  t.seed = train_seed();
  return t;
}

DatasetSpec RunConfig::resolved_data() const {
  DatasetSpec d = data;
  d.seed = seed;
  return d;
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key");
    cfg.set(key, value, where);
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

}  // namespace mapnet::cli
