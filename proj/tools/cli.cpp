#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mapnet/checkpoint.hpp"
#include "mapnet/dataset.hpp"
#include "mapnet/errors.hpp"
#include "mapnet/image_io.hpp"
#include "mapnet/metrics.hpp"
#include "mapnet/train.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;

namespace mapnet::cli {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const FormatError*>(&e)) return checkpoint;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const DataError*>(&e)) return io;
  if (dynamic_cast<const NumericError*>(&e)) return numeric;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UsageError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const GenerationError*>(&e)) {
    return config;
  }
  return internal;
}

namespace {

// Flags shared by every subcommand; each maps onto one RunConfig key and
// is applied after the config file.
struct Overrides {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key = value configuration file");
    static const std::pair<const char*, const char*> flags[] = {
        {"--seed", "seed"},           {"--variant", "variant"},
        {"--epochs", "epochs"},       {"--max-steps", "max_steps"},
        {"--batch-size", "batch_size"}, {"--base-channels", "base_channels"},
        {"--n-paths", "n_paths"},     {"--n-blocks", "n_blocks"},
        {"--lr", "lr"},               {"--threshold", "threshold"},
        {"--precision", "precision"}, {"--input-size", ""},
    };
    for (const auto& [flag, key] : flags) {
      cmd->add_option_function<std::string>(
          flag, [this, flag = std::string(flag)](const std::string& v) { values[flag] = v; },
          std::string("override ") + (*key ? key : "input_h and input_w"));
    }
    cmd->add_option("--set", sets, "override any config key: --set key=value")->take_all();
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    static const std::map<std::string, std::string> key_of = {
        {"--seed", "seed"},         {"--variant", "variant"},       {"--epochs", "epochs"},
        {"--max-steps", "max_steps"}, {"--batch-size", "batch_size"}, {"--base-channels", "base_channels"},
        {"--n-paths", "n_paths"},   {"--n-blocks", "n_blocks"},     {"--lr", "lr"},
        {"--threshold", "threshold"}, {"--precision", "precision"},
    };
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1), "--set");
    }
    for (const auto& [flag, v] : values) {
      if (flag == "--input-size") {
        cfg.set("input_h", v, flag);
        cfg.set("input_w", v, flag);
      } else {
        cfg.set(key_of.at(flag), v, flag);
      }
    }
    return cfg;
  }
};

fs::path require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " is required");
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec || !fs::is_directory(path)) throw IoError("cannot create " + std::string(what) + " directory " + path);
  return path;
}

Checkpoint load_checked(const std::string& path) {
  if (path.empty()) throw ConfigError("--checkpoint is required");
  try {
    return load_checkpoint(path);
  } catch (const IoError& e) {
    throw FormatError(e.what());
  }
}

// Image reads are I/O failures whatever the cause.
RawImage read_image(const std::string& path) {
  try {
    return read_pnm(path);
  } catch (const FormatError& e) {
    throw IoError(path + ": " + e.what());
  }
}

std::vector<Sample> read_data(const fs::path& root, const std::string& split) {
  try {
    return read_split(root, split);
  } catch (const FormatError& e) {
    throw IoError(e.what());
  }
}

// Runs f with a Model of the precision named by cfg.
template <typename F>
auto with_precision(Precision p, F&& f) {
  if (p == Precision::dbl) return f(double{});
  return f(float{});
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

std::string fmt(const char* spec, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

int cmd_generate(const RunConfig& cfg, const std::string& out_dir, std::ostream& out) {
  if (out_dir.empty()) throw ConfigError("--out is required");
  const fs::path root(out_dir);
  const fs::path parent = fs::absolute(root).parent_path();
  if (!fs::is_directory(parent)) throw IoError("parent of output directory does not exist: " + parent.string());
  const auto data = generate_dataset(cfg.resolved_data());
  write_dataset(root, data);
  cfg.write_echo(root);
  out << "train " << data.train.size() << " val " << data.val.size() << " test " << data.test.size() << "\n";
  return ok;
}

int cmd_train(RunConfig cfg, std::ostream& out) {
  if (cfg.data_root.empty()) throw ConfigError("--data is required");
  const auto data = read_data(cfg.data_root, "train");
  if (data.empty()) throw IoError("no train samples under " + cfg.data_root);
  const fs::path dir = require_dir(cfg.out, "--out");
  cfg.model.validate();
  const TrainConfig tc = cfg.resolved_train();
  tc.validate();
  cfg.write_echo(dir);
  return with_precision(cfg.model.precision, [&](auto tag) {
    using T = decltype(tag);
    Model<T> model(cfg.model, cfg.init_seed());
    const auto result = train(model, data, tc, [&](const Checkpoint& ck, std::uint64_t step) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint_step%06llu.mapn", static_cast<unsigned long long>(step));
      save_checkpoint(ck, dir / name);
    });
    std::string log = "step,epoch,loss,seconds\n";
    for (const auto& r : result.log) {
      log += std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + fmt("%.9g", r.loss) + "," +
             fmt("%.3f", r.seconds) + "\n";
    }
    write_text(dir / "train_log.csv", log);
    save_checkpoint(result.checkpoint, dir / "checkpoint.mapn");
    out << "steps " << result.log.size();
    if (!result.log.empty()) out << " final_loss " << fmt("%.6f", result.log.back().loss);
    out << "\n";
    return static_cast<int>(ok);
  });
}

int cmd_evaluate(const RunConfig& cfg, const std::string& split, std::ostream& out) {
  const Checkpoint ck = load_checked(cfg.checkpoint);
  if (cfg.data_root.empty()) throw ConfigError("--data is required");
  const auto tiles = read_data(cfg.data_root, split);
  if (tiles.empty()) throw UsageError("split '" + split + "' under " + cfg.data_root + " holds no tiles");
  const std::string row = with_precision(ck.config.precision, [&](auto tag) {
    using T = decltype(tag);
    Model<T> model(ck.config, 0);
    restore(ck, model);
    return report_row(to_string(ck.config.variant), cfg.threshold, evaluate_dataset(model, tiles, cfg.threshold));
  });
  const std::string csv = report_header() + "\n" + row + "\n";
  out << csv;
  if (!cfg.out.empty()) {
    const fs::path dir = require_dir(cfg.out, "--out");
    write_text(dir / "metrics.csv", csv);
    cfg.write_echo(dir);
  }
  return ok;
}

int cmd_predict(const RunConfig& cfg, const std::string& image_path, std::ostream& out) {
  const Checkpoint ck = load_checked(cfg.checkpoint);
  if (image_path.empty()) throw ConfigError("--image is required");
  const RawImage raw = read_image(image_path);
  if (raw.channels != 3) throw IoError(image_path + " is not an RGB PPM image");
  const fs::path dir = require_dir(cfg.out, "--out");
  if (!(cfg.threshold > 0 && cfg.threshold < 1)) throw ConfigError("threshold must lie strictly inside (0,1)");

  Sample full;
  full.id = fs::path(image_path).stem().string();
  full.image = from_raw(raw);
  full.mask = Tensor<float>({1, 1, raw.height, raw.width});
  const int th = ck.config.input_h, tw = ck.config.input_w;
  if (raw.height < th || raw.width < tw) {
    throw ConfigError("image " + std::to_string(raw.height) + "x" + std::to_string(raw.width) +
                      " is smaller than the model input " + std::to_string(th) + "x" + std::to_string(tw));
  }
  auto tiles = tile(full, th, tw);
  with_precision(ck.config.precision, [&](auto tag) {
    using T = decltype(tag);
    Model<T> model(ck.config, 0);
    restore(ck, model);
    for (Sample& t : tiles) {
      const Tensor<T> prob = model.predict(tensor_cast<T>(t.image));
      t.image = tensor_cast<float>(prob);
    }
    return 0;
  });
  const Sample stitched = stitch(tiles, full.id, raw.height, raw.width);
  RawImage prob = to_raw(stitched.image);
  RawImage mask = prob;
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
    mask.pixels[i] = static_cast<double>(stitched.image[i]) > cfg.threshold ? 255 : 0;
  }
  write_pnm(dir / (full.id + "_prob.pgm"), prob);
  write_pnm(dir / (full.id + "_mask.pgm"), mask);
  cfg.write_echo(dir);
  out << "tiles " << tiles.size() << "\n";
  return ok;
}

std::string inspect_table(const ModelConfig& mc) {
  return with_precision(Precision::single, [&](auto tag) {
    using T = decltype(tag);
    Model<T> model(mc, 0);
    const Accounting p = model.count_params();
    const Accounting m = model.count_macs(mc.input_h, mc.input_w);
    std::string s = "module,params,macs\n";
    for (const auto& [mod, n] : p.per_module) {
      const auto it = m.per_module.find(mod);
      s += mod + "," + std::to_string(n) + "," + std::to_string(it == m.per_module.end() ? 0 : it->second) + "\n";
    }
    s += "total," + std::to_string(p.total) + "," + std::to_string(m.total) + "\n";
    s += "macs_per_pixel," + fmt("%.3f", m.per_pixel) + "\n";
    return s;
  });
}

int cmd_inspect(const RunConfig& cfg, std::ostream& out) {
  ModelConfig mc = cfg.model;
  if (!cfg.checkpoint.empty()) mc = load_checked(cfg.checkpoint).config;
  mc.validate();
  const std::string table = inspect_table(mc);
  out << "variant " << to_string(mc.variant) << " n_paths " << mc.n_paths << " n_blocks " << mc.n_blocks
      << " base_channels " << mc.base_channels << " input " << mc.input_h << "x" << mc.input_w << "\n"
      << table;
  if (!cfg.out.empty()) {
    const fs::path dir = require_dir(cfg.out, "--out");
    write_text(dir / "inspect.csv", table);
    cfg.write_echo(dir);
  }
  return ok;
}

std::pair<int, int> parse_range(const std::string& s, const char* what) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used == s.size()) return {v, v};
    } else {
      std::size_t u1 = 0, u2 = 0;
      const std::string a = s.substr(0, dots), b = s.substr(dots + 2);
      const int lo = std::stoi(a, &u1), hi = std::stoi(b, &u2);
      if (u1 == a.size() && u2 == b.size() && lo <= hi) return {lo, hi};
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string(what) + " expects N or LO..HI, got '" + s + "'");
}

int cmd_sweep(const RunConfig& cfg, const std::string& blocks, const std::string& paths, std::ostream& out) {
  const auto [b_lo, b_hi] = parse_range(blocks, "--blocks");
  const auto [p_lo, p_hi] = parse_range(paths, "--paths");
  std::string csv = "n_paths,n_blocks,params,macs\n";
  for (int p = p_lo; p <= p_hi; ++p) {
    for (int b = b_lo; b <= b_hi; ++b) {
      ModelConfig mc = cfg.model;
      mc.n_paths = p;
      mc.n_blocks = b;
      Model<float> model(mc, 0);
      csv += std::to_string(p) + "," + std::to_string(b) + "," + std::to_string(model.count_params().total) + "," +
             std::to_string(model.count_macs(mc.input_h, mc.input_w).total) + "\n";
    }
  }
  out << csv;
  if (!cfg.out.empty()) {
    const fs::path dir = require_dir(cfg.out, "--out");
    write_text(dir / "sweep.csv", csv);
    cfg.write_echo(dir);
  }
  return ok;
}

FeatureSelector parse_selector(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon != std::string::npos) {
      std::size_t u1 = 0, u2 = 0;
      const std::string a = s.substr(0, colon), b = s.substr(colon + 1);
      FeatureSelector sel{std::stoi(a, &u1), std::stoi(b, &u2)};
      if (u1 == a.size() && u2 == b.size()) return sel;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("--select expects path:stage, got '" + s + "'");
}

int cmd_visualize(const RunConfig& cfg, const std::string& image_path, const std::vector<std::string>& selects,
                  std::ostream& out) {
  const Checkpoint ck = load_checked(cfg.checkpoint);
  if (selects.empty()) throw ConfigError("--select needs at least one path:stage");
  std::vector<FeatureSelector> sels;
  for (const auto& s : selects) sels.push_back(parse_selector(s));
  for (const auto& sel : sels) {
    if (sel.path < 1 || sel.path > ck.config.n_paths || sel.stage < sel.path || sel.stage > ck.config.n_paths) {
      throw UsageError("selector " + std::to_string(sel.path) + ":" + std::to_string(sel.stage) +
                       " does not exist with " + std::to_string(ck.config.n_paths) + " paths");
    }
  }
  if (image_path.empty()) throw ConfigError("--image is required");
  const RawImage raw = read_image(image_path);
  if (raw.channels != 3) throw IoError(image_path + " is not an RGB PPM image");
  if (raw.height != ck.config.input_h || raw.width != ck.config.input_w) {
    throw ConfigError("feature export needs an image of the model input size " + std::to_string(ck.config.input_h) +
                      "x" + std::to_string(ck.config.input_w));
  }
  const fs::path dir = require_dir(cfg.out, "--out");
  const std::string stem = fs::path(image_path).stem().string();
  const auto images = with_precision(ck.config.precision, [&](auto tag) {
    using T = decltype(tag);
    Model<T> model(ck.config, 0);
    restore(ck, model);
    return model.export_features(tensor_cast<T>(from_raw(raw)), sels);
  });
  for (const auto& f : images) {
    const std::string name = stem + "_P" + std::to_string(f.selector.path) + "_S" + std::to_string(f.selector.stage) +
                             "_R" + std::to_string(f.stride) + ".pgm";
    write_pnm(dir / name, RawImage{f.width, f.height, 1, f.pixels});
    out << name << " " << f.height << "x" << f.width << "\n";
  }
  cfg.write_echo(dir);
  return ok;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-path building footprint segmentation"};
  app.require_subcommand(1);

  Overrides gen_o, train_o, eval_o, pred_o, insp_o, sweep_o, vis_o;
  std::string gen_out, data, out_dir, ckpt, image, split = "test", blocks = "3..6", paths = "2..4";
  std::vector<std::string> selects;

  auto* gen = app.add_subcommand("generate-data", "generate, tile and split synthetic scenes");
  gen_o.attach(gen);
  gen->add_option("--out", gen_out, "dataset root")->required();

  auto* tr = app.add_subcommand("train", "train a model on the train split");
  train_o.attach(tr);
  tr->add_option("--data", data, "dataset root");
  tr->add_option("--out", out_dir, "run directory");

  auto* ev = app.add_subcommand("evaluate", "pixel metrics of a checkpoint on one split");
  eval_o.attach(ev);
  ev->add_option("--checkpoint", ckpt, "checkpoint file");
  ev->add_option("--data", data, "dataset root");
  ev->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--out", out_dir, "directory for metrics.csv");

  auto* pr = app.add_subcommand("predict", "probability map and mask of one image");
  pred_o.attach(pr);
  pr->add_option("--checkpoint", ckpt, "checkpoint file");
  pr->add_option("--image", image, "RGB PPM image")->required();
  pr->add_option("--out", out_dir, "output directory");

  auto* in = app.add_subcommand("inspect", "per-module parameter and MAC counts");
  insp_o.attach(in);
  in->add_option("--checkpoint", ckpt, "checkpoint file (instead of --config)");
  in->add_option("--out", out_dir, "directory for inspect.csv");

  auto* sw = app.add_subcommand("sweep", "accounting over path and block counts");
  sweep_o.attach(sw);
  sw->add_option("--blocks", blocks, "N or LO..HI");
  sw->add_option("--paths", paths, "N or LO..HI");
  sw->add_option("--out", out_dir, "directory for sweep.csv");

  auto* vis = app.add_subcommand("visualize-features", "channel-mean feature maps as PGM");
  vis_o.attach(vis);
  vis->add_option("--checkpoint", ckpt, "checkpoint file");
  vis->add_option("--image", image, "RGB PPM image")->required();
  vis->add_option("--select", selects, "path:stage selectors")->required()->take_all();
  vis->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return config;
  }

  auto finish = [&](RunConfig cfg) {
    if (!data.empty()) cfg.data_root = data;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (!ckpt.empty()) cfg.checkpoint = ckpt;
    return cfg;
  };

  try {
    if (gen->parsed()) return cmd_generate(finish(gen_o.resolve()), gen_out, out);
    if (tr->parsed()) return cmd_train(finish(train_o.resolve()), out);
    if (ev->parsed()) return cmd_evaluate(finish(eval_o.resolve()), split, out);
    if (pr->parsed()) return cmd_predict(finish(pred_o.resolve()), image, out);
    if (in->parsed()) return cmd_inspect(finish(insp_o.resolve()), out);
    if (sw->parsed()) return cmd_sweep(finish(sweep_o.resolve()), blocks, paths, out);
    if (vis->parsed()) return cmd_visualize(finish(vis_o.resolve()), image, selects, out);
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    err << "error: " << e.what() << "\n";
    return code;
  }
  return internal;
}

}  // namespace mapnet::cli
