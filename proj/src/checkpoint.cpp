#include "mapnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mapnet/errors.hpp"

namespace mapnet {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

CheckpointEntry::DType CheckpointEntry::dtype() const {
  return static_cast<DType>(data.index() + 1);
}

std::size_t CheckpointEntry::count() const {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    raw(&v, sizeof v, what);
    return v;
  }
  void raw(void* p, std::size_t n, const char* what) {
    if (n > bytes_.size() - pos_) {
      throw CorruptionError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                            std::to_string(pos_));
    }
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }
  [[nodiscard]] std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

constexpr char magic[4] = {'M', 'A', 'P', 'N'};

std::vector<std::uint32_t> trimmed_dims(const Shape& s) {
  std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                                  static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
  while (dims.size() > 1 && dims.back() == 1) dims.pop_back();
  return dims;
}

template <typename T>
CheckpointEntry tensor_entry(const Tensor<T>& t) {
  return {trimmed_dims(t.shape()), std::vector<T>(t.data().begin(), t.data().end())};
}

template <typename T>
void load_into(const CheckpointEntry& e, const std::string& key, Tensor<T>& dst) {
  const auto* values = std::get_if<std::vector<T>>(&e.data);
  if (values == nullptr) {
    throw FormatError("checkpoint entry '" + key + "' has dtype " +
                      std::to_string(static_cast<int>(e.dtype())) + ", model precision differs");
  }
  if (e.dims != trimmed_dims(dst.shape())) {
    throw FormatError("checkpoint entry '" + key + "' does not match model shape " + dst.shape().str());
  }
  std::copy(values->begin(), values->end(), dst.data().begin());
}

const CheckpointEntry& lookup(const Checkpoint& ckpt, const std::string& key) {
  auto it = ckpt.entries.find(key);
  if (it == ckpt.entries.end()) throw FormatError("checkpoint is missing entry '" + key + "'");
  return it->second;
}

template <typename V>
const V& typed(const Checkpoint& ckpt, const std::string& key, std::size_t count) {
  const auto* v = std::get_if<V>(&lookup(ckpt, key).data);
  if (v == nullptr || v->size() != count) throw FormatError("checkpoint entry '" + key + "' is malformed");
  return *v;
}

}  // namespace

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
  Writer w;
  w.raw(magic, 4);
  w.u32(Checkpoint::current_version);
  const ModelConfig& c = ckpt.config;
  for (int v : {c.n_paths, c.n_blocks, c.base_channels, static_cast<int>(c.variant), c.input_h, c.input_w,
                static_cast<int>(c.precision)}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& [key, e] : ckpt.entries) {
    std::size_t expect = 1;
    for (auto d : e.dims) expect *= d;
    if (e.dims.empty() || expect != e.count()) {
      throw UsageError("checkpoint entry '" + key + "' dims disagree with its element count");
    }
    w.u32(static_cast<std::uint32_t>(key.size()));
    w.raw(key.data(), key.size());
    w.u32(static_cast<std::uint32_t>(e.dtype()));
    w.u32(static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) w.u32(d);
    std::visit([&w](const auto& v) { w.raw(v.data(), v.size() * sizeof(v[0])); }, e.data);
  }
  return std::move(w.out);
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char m[4];
  if (bytes.size() < 4) throw FormatError("not a checkpoint: file shorter than the magic bytes");
  r.raw(m, 4, "magic");
  if (std::memcmp(m, magic, 4) != 0) throw FormatError("not a checkpoint: bad magic bytes");
  const std::uint32_t version = r.u32("version");
  if (version != Checkpoint::current_version) {
    throw VersionError("checkpoint format version " + std::to_string(version) + ", expected " +
                       std::to_string(Checkpoint::current_version));
  }
  Checkpoint ckpt;
  ModelConfig& c = ckpt.config;
  c.n_paths = static_cast<int>(r.u32("config"));
  c.n_blocks = static_cast<int>(r.u32("config"));
  c.base_channels = static_cast<int>(r.u32("config"));
  const std::uint32_t variant = r.u32("config");
  c.input_h = static_cast<int>(r.u32("config"));
  c.input_w = static_cast<int>(r.u32("config"));
  const std::uint32_t precision = r.u32("config");
  if (variant > static_cast<std::uint32_t>(Variant::full_f) || precision > 1) {
    throw CorruptionError("checkpoint model configuration holds an unknown variant or precision code");
  }
  c.variant = static_cast<Variant>(variant);
  c.precision = static_cast<Precision>(precision);

  const std::uint32_t n_entries = r.u32("entry count");
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    const std::uint32_t key_len = r.u32("key length");
    if (key_len > r.remaining()) throw CorruptionError("checkpoint truncated inside entry " + std::to_string(i));
    std::string key(key_len, '\0');
    r.raw(key.data(), key_len, "key");
    const std::uint32_t dtype = r.u32("dtype");
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 4) throw CorruptionError("checkpoint entry '" + key + "' has rank " + std::to_string(rank));
    CheckpointEntry e;
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      e.dims.push_back(r.u32("dims"));
      count *= e.dims.back();
    }
    auto read_payload = [&](auto&& vec) {
      using V = std::decay_t<decltype(vec)>;
      const std::size_t nbytes = count * sizeof(typename V::value_type);
      if (nbytes > r.remaining()) throw CorruptionError("checkpoint truncated inside entry '" + key + "'");
      V out(count);
      r.raw(out.data(), nbytes, "payload");
      e.data = std::move(out);
    };
    switch (dtype) {
      case 1:
        read_payload(std::vector<float>{});
        break;
      case 2:
        read_payload(std::vector<double>{});
        break;
      case 3:
        read_payload(std::vector<std::uint64_t>{});
        break;
      default:
        throw CorruptionError("checkpoint entry '" + key + "' has unknown dtype " + std::to_string(dtype));
    }
    if (!ckpt.entries.emplace(std::move(key), std::move(e)).second) {
      throw CorruptionError("checkpoint holds a duplicate entry");
    }
  }
  if (r.remaining() != 0) {
    throw CorruptionError("checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

template <typename T>
Checkpoint make_checkpoint(const Model<T>& model, const AdamState<T>& adam, std::uint64_t rng_state) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  for (const auto& [key, t] : model.params().params()) {
    ckpt.entries.emplace("param/" + key, tensor_entry(t));
    auto m = adam.m.find(key);
    auto v = adam.v.find(key);
    ckpt.entries.emplace("adam/m/" + key, tensor_entry(m != adam.m.end() ? m->second : Tensor<T>(t.shape())));
    ckpt.entries.emplace("adam/v/" + key, tensor_entry(v != adam.v.end() ? v->second : Tensor<T>(t.shape())));
  }
  for (const auto& [key, t] : model.params().buffers()) ckpt.entries.emplace("buffer/" + key, tensor_entry(t));
  ckpt.entries.emplace("state/timestep", CheckpointEntry{{1}, std::vector<std::uint64_t>{adam.t}});
  ckpt.entries.emplace("state/rng", CheckpointEntry{{1}, std::vector<std::uint64_t>{rng_state}});
  ckpt.entries.emplace("state/adam",
                       CheckpointEntry{{4}, std::vector<double>{adam.lr, adam.beta1, adam.beta2, adam.eps}});
  return ckpt;
}

template <typename T>
AdamState<T> restore(const Checkpoint& ckpt, Model<T>& model, std::uint64_t* rng_state) {
  if (!(ckpt.config == model.config())) {
    throw FormatError("checkpoint model configuration differs from the target model");
  }
  AdamState<T> adam;
  for (auto& [key, t] : model.params().params()) {
    load_into(lookup(ckpt, "param/" + key), "param/" + key, t);
    Tensor<T> m(t.shape()), v(t.shape());
    load_into(lookup(ckpt, "adam/m/" + key), "adam/m/" + key, m);
    load_into(lookup(ckpt, "adam/v/" + key), "adam/v/" + key, v);
    adam.m.emplace(key, std::move(m));
    adam.v.emplace(key, std::move(v));
  }
  for (auto& [key, t] : model.params().buffers()) load_into(lookup(ckpt, "buffer/" + key), "buffer/" + key, t);
  adam.t = typed<std::vector<std::uint64_t>>(ckpt, "state/timestep", 1)[0];
  const auto& hyper = typed<std::vector<double>>(ckpt, "state/adam", 4);
  adam.lr = hyper[0];
  adam.beta1 = hyper[1];
  adam.beta2 = hyper[2];
  adam.eps = hyper[3];
  if (rng_state != nullptr) *rng_state = typed<std::vector<std::uint64_t>>(ckpt, "state/rng", 1)[0];
  return adam;
}

template Checkpoint make_checkpoint(const Model<float>&, const AdamState<float>&, std::uint64_t);
template Checkpoint make_checkpoint(const Model<double>&, const AdamState<double>&, std::uint64_t);
template AdamState<float> restore(const Checkpoint&, Model<float>&, std::uint64_t*);
template AdamState<double> restore(const Checkpoint&, Model<double>&, std::uint64_t*);

}  // namespace mapnet
