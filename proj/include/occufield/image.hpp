// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "occufield/core.hpp"

namespace occufield {

// Row-major RGB float image, channels nominally in [0, 1]; quantized to
// 8-bit only at file boundaries.
struct ImageBuffer {
    int width = 0, height = 0;
    std::vector<Vec3> pixels;

    ImageBuffer() = default;
    ImageBuffer(int w, int h) : width(w), height(h), pixels(std::size_t(w) * std::size_t(h)) {}

    Vec3& at(int x, int y) { return pixels[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
    const Vec3& at(int x, int y) const {
        return pixels[std::size_t(y) * std::size_t(width) + std::size_t(x)];
    }
};

// Binary PPM (P6, maxval 255). Round-half-up quantization, bit-exact across
// platforms.
void write_ppm(const std::string& path, const ImageBuffer& img);
ImageBuffer read_ppm(const std::string& path);

// 8-bit truecolor PNG (one IDAT, filter 0 scanlines).
void write_png(const std::string& path, const ImageBuffer& img);

}  // namespace occufield
