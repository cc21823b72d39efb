#include "pathcaps/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pathcaps/errors.hpp"

namespace pathcaps {

void write_pgm(const std::string& path, int64_t width, int64_t height,
               const std::vector<uint8_t>& pixels) {
  if (static_cast<int64_t>(pixels.size()) != width * height)
    throw ContractError("write_pgm: pixel buffer does not match " + std::to_string(width) +
                        "x" + std::to_string(height));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

uint8_t quantize_pixel(double v) {
  double c = std::clamp(v, 0.0, 1.0);
  return static_cast<uint8_t>(std::lround(c * 255.0));
}

namespace {

constexpr int64_t kSide = 28;

void blit_cell(GridImage& img, int64_t row, int64_t col, const Tensor& cell) {
  const auto& v = cell.values();
  for (int64_t y = 0; y < kSide; ++y)
    for (int64_t x = 0; x < kSide; ++x)
      img.pixels[static_cast<size_t>((row * kSide + y) * img.width + col * kSide + x)] =
          quantize_pixel(v[static_cast<size_t>(y * kSide + x)]);
}

}  // namespace

GridImage render_perturbation_grid(const PerturbationGrid& grid) {
  int64_t cols = std::max<int64_t>(2, static_cast<int64_t>(grid.values.size()));
  int64_t rows = 1 + static_cast<int64_t>(grid.dims.size());
  GridImage img;
  img.width = cols * kSide;
  img.height = rows * kSide;
  img.pixels.assign(static_cast<size_t>(img.width * img.height), 0);

  blit_cell(img, 0, 0, grid.input);
  blit_cell(img, 0, 1, grid.unperturbed);
  int64_t n_values = static_cast<int64_t>(grid.values.size());
  for (int64_t r = 0; r < static_cast<int64_t>(grid.dims.size()); ++r)
    for (int64_t c = 0; c < n_values; ++c)
      blit_cell(img, r + 1, c, grid.cells[static_cast<size_t>(r * n_values + c)]);
  return img;
}

}  // namespace pathcaps
