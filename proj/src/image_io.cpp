#include "mapnet/image_io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "mapnet/errors.hpp"

namespace mapnet {

std::vector<std::uint8_t> encode_pnm(const RawImage& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw UsageError("PNM images carry 1 or 3 channels, got " + std::to_string(img.channels));
  }
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * img.channels) {
    throw UsageError("raw image payload does not match its dimensions");
  }
  const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width) +
                             " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

namespace {

class HeaderParser {
 public:
  explicit HeaderParser(const std::vector<std::uint8_t>& b) : b_(b) {}

  int number(const char* field) {
    skip_space();
    if (pos_ >= b_.size() || !std::isdigit(b_[pos_])) {
      throw FormatError(std::string("PNM header: expected ") + field);
    }
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > 1 << 24) throw FormatError(std::string("PNM header: ") + field + " is too large");
    }
    return static_cast<int>(v);
  }
  void single_space() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) {
      throw FormatError("PNM header: maxval must be followed by one whitespace byte");
    }
    ++pos_;
  }
  [[nodiscard]] std::size_t pos() const { return pos_; }

 private:
  void skip_space() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 2;
};

}  // namespace

RawImage decode_pnm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("not a binary PGM/PPM file (magic must be P5 or P6)");
  }
  RawImage img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  HeaderParser p(bytes);
  img.width = p.number("width");
  img.height = p.number("height");
  const int maxval = p.number("maxval");
  if (maxval != 255) throw FormatError("PNM maxval must be 255, got " + std::to_string(maxval));
  if (img.width < 1 || img.height < 1) throw FormatError("PNM dimensions must be positive");
  p.single_space();
  const std::size_t expect = static_cast<std::size_t>(img.width) * img.height * img.channels;
  const std::size_t have = bytes.size() - p.pos();
  if (have != expect) {
    throw CorruptionError("PNM payload holds " + std::to_string(have) + " bytes, header implies " +
                          std::to_string(expect));
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(p.pos()), bytes.end());
  return img;
}

void write_pnm(const std::filesystem::path& path, const RawImage& img) {
  const auto bytes = encode_pnm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

RawImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pnm(bytes);
}

RawImage to_raw(const Tensor<float>& t) {
  if (t.n() != 1 || (t.c() != 1 && t.c() != 3)) {
    throw ShapeError("image export expects (1,1|3,h,w), got " + t.shape().str());
  }
  RawImage img{t.w(), t.h(), t.c(), {}};
  img.pixels.resize(t.size());
  for (int y = 0; y < t.h(); ++y)
    for (int x = 0; x < t.w(); ++x)
      for (int c = 0; c < t.c(); ++c) {
        const double v = std::clamp(static_cast<double>(t(0, c, y, x)), 0.0, 1.0);
        img.pixels[(static_cast<std::size_t>(y) * t.w() + x) * t.c() + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  return img;
}

Tensor<float> from_raw(const RawImage& img) {
  Tensor<float> t({1, img.channels, img.height, img.width});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        const auto b = img.pixels[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c];
        t(0, c, y, x) = static_cast<float>(b / 255.0);
      }
  return t;
}

RawImage mask_to_raw(const Tensor<float>& mask) {
  if (mask.n() != 1 || mask.c() != 1) throw ShapeError("mask export expects (1,1,h,w), got " + mask.shape().str());
  RawImage img{mask.w(), mask.h(), 1, {}};
  img.pixels.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask[i] > 0.5f ? 255 : 0;
  return img;
}

Tensor<float> mask_from_raw(const RawImage& img) {
  if (img.channels != 1) throw FormatError("masks must be single-channel PGM files");
  Tensor<float> t({1, 1, img.height, img.width});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const auto b = img.pixels[i];
    if (b != 0 && b != 255) {
      throw DataError("mask byte " + std::to_string(b) + " at pixel " + std::to_string(i) + " is neither 0 nor 255");
    }
    t[i] = b == 255 ? 1.0f : 0.0f;
  }
  return t;
}

}  // namespace mapnet
