#pragma once

#include <filesystem>
#include <string>

#include "camo/image.hpp"

namespace camo::io {

/// Decodes PNG/JPEG (anything OpenCV reads) to 8-bit RGB. Throws IoError.
ImageU8 read_image(const std::filesystem::path& path);

/// Lossless PNG, fixed compression settings so output bytes are reproducible.
void write_png(const std::filesystem::path& path, const ImageU8& img);
void write_png(const std::filesystem::path& path, const BinaryMask& mask);

/// Bilinear resize (half-pixel centers).
ImageU8 resize_bilinear(const ImageU8& img, int height, int width);

/// Baseline JPEG encode then decode through libjpeg (via OpenCV).
ImageF jpeg_roundtrip(const ImageF& img, int quality);

/// Identity of the JPEG codec, recorded in reports.
std::string jpeg_encoder_tag();

}  // namespace camo::io
