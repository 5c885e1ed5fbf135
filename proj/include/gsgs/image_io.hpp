#pragma once

#include "gsgs/operators.hpp"

#include <filesystem>

namespace gsgs {

struct RawImage {
  GridShape shape;
  Vector pixels;
};

// Exact round-trip format: the ASCII line "GSGS-IMG rows cols\n" followed by
// rows * cols little-endian IEEE-754 doubles in row-major order.
void write_raw_image(const std::filesystem::path& path, GridShape shape, const Vector& pixels);
RawImage read_raw_image(const std::filesystem::path& path);

// Binary 16-bit PGM (P5, maxval 65535, big-endian samples). Pixels are mapped
// linearly from [lo, hi] to [0, 65535]; with lo == hi the range of the data
// is used.
void write_pgm16(const std::filesystem::path& path, GridShape shape, const Vector& pixels,
                 double lo = 0.0, double hi = 0.0);

}  // namespace gsgs
