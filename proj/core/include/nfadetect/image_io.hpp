#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nfadetect/grid.hpp"
#include "nfadetect/image.hpp"

namespace nfadetect {

/// Arbitrary C×H×W float tensor, channel-major row-major. On-disk form is
/// the NFAT container (see read_nfat).
struct FloatTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;
};

/// Loads an 8/16-bit grayscale or RGB PNG and rescales intensities to
/// [0,1]. Palette images expand to RGB, alpha is stripped. Throws io_error
/// for unreadable/truncated files, format_error for non-PNG content or
/// unsupported layouts.
ImageStack load_image(const std::string& path);

/// 8-bit grayscale PNG writer; pixels row-major, size w*h.
void save_png_gray8(const std::string& path, const std::vector<std::uint8_t>& pixels, int width,
                    int height);

/// 8-bit RGB PNG writer; pixels interleaved row-major, size w*h*3.
void save_png_rgb8(const std::string& path, const std::vector<std::uint8_t>& pixels, int width,
                   int height);

/// Reads only the IHDR dimensions (width, height) of a PNG, without
/// decoding the pixel data.
std::pair<int, int> png_dimensions(const std::string& path);

/// NFAT tensor container: magic "NFAT", then little-endian uint32 fields
/// version=1, C, H, W, then C*H*W IEEE-754 float32 little-endian values in
/// channel-major row-major order.
FloatTensor read_nfat(const std::string& path);
void write_nfat(const std::string& path, const FloatTensor& tensor);
void write_nfat(const std::string& path, const ImageStack& stack);
void write_nfat(const std::string& path, const GridD& grid);

}  // namespace nfadetect
