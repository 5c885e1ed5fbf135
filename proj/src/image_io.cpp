#include "gsgs/image_io.hpp"

#include "gsgs/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace gsgs {

namespace {

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
}

void check_shape(GridShape shape, const Vector& pixels) {
  if (shape.rows < 1 || shape.cols < 1 || shape.size() != pixels.size()) {
    throw DimensionError("image: shape " + std::to_string(shape.rows) + "x" +
                         std::to_string(shape.cols) + " does not match " +
                         std::to_string(pixels.size()) + " pixels");
  }
}

}  // namespace

void write_raw_image(const std::filesystem::path& path, GridShape shape, const Vector& pixels) {
  check_shape(shape, pixels);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "GSGS-IMG " << shape.rows << ' ' << shape.cols << '\n';
  for (Index k = 0; k < pixels.size(); ++k) {
    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(pixels[k]));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw Error("write failed: " + path.string());
}

RawImage read_raw_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw Error(path.string() + ": missing header");
  std::istringstream hs(header);
  std::string magic;
  RawImage img;
  if (!(hs >> magic >> img.shape.rows >> img.shape.cols) || magic != "GSGS-IMG" ||
      img.shape.rows < 1 || img.shape.cols < 1) {
    throw Error(path.string() + ": bad header '" + header + "'");
  }
  img.pixels.resize(img.shape.size());
  for (Index k = 0; k < img.pixels.size(); ++k) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
      throw Error(path.string() + ": truncated after " + std::to_string(k) + " pixels");
    }
    img.pixels[k] = std::bit_cast<double>(to_little_endian(bits));
  }
  return img;
}

void write_pgm16(const std::filesystem::path& path, GridShape shape, const Vector& pixels,
                 double lo, double hi) {
  check_shape(shape, pixels);
  if (lo == hi) {
    lo = pixels.minCoeff();
    hi = pixels.maxCoeff();
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "P5\n" << shape.cols << ' ' << shape.rows << "\n65535\n";
  for (Index k = 0; k < pixels.size(); ++k) {
    const double u = std::clamp((pixels[k] - lo) / span, 0.0, 1.0);
    const auto v = static_cast<std::uint16_t>(std::lround(u * 65535.0));
    const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(bytes, 2);
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace gsgs
