#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pathcaps/model.hpp"

namespace pathcaps {

// Binary 8-bit grayscale PGM (P5, maxval 255).
void write_pgm(const std::string& path, int64_t width, int64_t height,
               const std::vector<uint8_t>& pixels);

// Rounds [0,1] intensities to bytes, clamping out-of-range values.
uint8_t quantize_pixel(double v);

// Tiles a perturbation grid into one image: row 0 holds the input and the
// unperturbed reconstruction, each following row is one swept dimension.
struct GridImage {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> pixels;
};

GridImage render_perturbation_grid(const PerturbationGrid& grid);

}  // namespace pathcaps
