// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include "occufield/image.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <fstream>

namespace occufield {
namespace {

unsigned char quantize(Real v) {
    return static_cast<unsigned char>(std::lround(clamp(v, Real(0), Real(1)) * Real(255)));
}

std::vector<unsigned char> to_bytes(const ImageBuffer& img) {
    std::vector<unsigned char> bytes;
    bytes.reserve(img.pixels.size() * 3);
    for (const Vec3& p : img.pixels) {
        bytes.push_back(quantize(p.x));
        bytes.push_back(quantize(p.y));
        bytes.push_back(quantize(p.z));
    }
    return bytes;
}

void put_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back((v >> 24) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back(v & 0xff);
}

void put_chunk(std::ofstream& out, const char type[4], const std::vector<unsigned char>& data) {
    std::vector<unsigned char> head;
    put_u32_be(head, std::uint32_t(data.size()));
    out.write(reinterpret_cast<const char*>(head.data()), 4);
    out.write(type, 4);
    if (!data.empty()) out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
    std::uint32_t crc = ::crc32(0, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = ::crc32(crc, data.data(), uInt(data.size()));
    std::vector<unsigned char> tail;
    put_u32_be(tail, crc);
    out.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

void write_ppm(const std::string& path, const ImageBuffer& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open image for writing: " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    const auto bytes = to_bytes(img);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw ConfigError("image write failed: " + path);
}

ImageBuffer read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open image: " + path);
    auto next_token = [&in, &path]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw ConfigError("truncated PPM header: " + path);
    };
    if (next_token() != "P6") throw ConfigError("not a binary PPM: " + path);
    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (w <= 0 || h <= 0 || maxval != 255) throw ConfigError("unsupported PPM layout: " + path);
    in.get();  // single whitespace byte before the raster
    ImageBuffer img(w, h);
    std::vector<unsigned char> bytes(std::size_t(w) * std::size_t(h) * 3);
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!in) throw ConfigError("truncated PPM raster: " + path);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        img.pixels[i] = Vec3{Real(bytes[i * 3 + 0]), Real(bytes[i * 3 + 1]), Real(bytes[i * 3 + 2])} /
                        Real(255);
    }
    return img;
}

void write_png(const std::string& path, const ImageBuffer& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open image for writing: " + path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<unsigned char> ihdr;
    put_u32_be(ihdr, std::uint32_t(img.width));
    put_u32_be(ihdr, std::uint32_t(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // truecolor
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // adaptive filtering
    ihdr.push_back(0);  // no interlace
    put_chunk(out, "IHDR", ihdr);

    const auto bytes = to_bytes(img);
    std::vector<unsigned char> raw;
    raw.reserve(bytes.size() + std::size_t(img.height));
    const std::size_t stride = std::size_t(img.width) * 3;
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter type none
        raw.insert(raw.end(), bytes.begin() + std::ptrdiff_t(std::size_t(y) * stride),
                   bytes.begin() + std::ptrdiff_t((std::size_t(y) + 1) * stride));
    }
    uLongf bound = ::compressBound(uLong(raw.size()));
    std::vector<unsigned char> idat(bound);
    if (::compress2(idat.data(), &bound, raw.data(), uLong(raw.size()), 9) != Z_OK)
        throw NumericError("png deflate failed");
    idat.resize(bound);
    put_chunk(out, "IDAT", idat);
    put_chunk(out, "IEND", {});
    if (!out) throw ConfigError("image write failed: " + path);
}

}  // namespace occufield
