#include "nfadetect/image_io.hpp"

#include <png.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <vector>

#include "nfadetect/errors.hpp"

namespace nfadetect {

namespace {

struct FileCloser {
  std::FILE* f = nullptr;
  ~FileCloser() {
    if (f) std::fclose(f);
  }
};

struct PngReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadGuard() {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
  }
};

struct PngWriteGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteGuard() {
    if (png) png_destroy_write_struct(&png, &info);
  }
};

void put_u32le(std::FILE* f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  if (std::fwrite(b, 1, 4, f) != 4) throw io_error("NFAT write failed");
}

std::uint32_t get_u32le(std::FILE* f, const std::string& path) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4) throw io_error("truncated NFAT header: " + path);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_nfat_raw(const std::string& path, int channels, int height, int width,
                    const float* data) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw io_error("cannot open for writing: " + path);
  FileCloser closer{fp};
  if (std::fwrite("NFAT", 1, 4, fp) != 4) throw io_error("NFAT write failed: " + path);
  put_u32le(fp, 1u);
  put_u32le(fp, static_cast<std::uint32_t>(channels));
  put_u32le(fp, static_cast<std::uint32_t>(height));
  put_u32le(fp, static_cast<std::uint32_t>(width));
  const std::size_t count = static_cast<std::size_t>(channels) * height * width;
  if constexpr (std::endian::native == std::endian::little) {
    if (std::fwrite(data, sizeof(float), count, fp) != count)
      throw io_error("NFAT write failed: " + path);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, &data[i], 4);
      put_u32le(fp, bits);
    }
  }
}

}  // namespace

ImageStack load_image(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw io_error("cannot open: " + path);
  FileCloser closer{fp};

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp) != 8) throw io_error("short read: " + path);
  if (png_sig_cmp(sig, 0, 8) != 0) throw format_error("not a PNG file: " + path);

  PngReadGuard g;
  g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (g.png) g.info = png_create_info_struct(g.png);
  if (!g.png || !g.info) throw io_error("libpng initialization failed");

  std::vector<png_byte> raster;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(g.png))) throw io_error("failed to decode PNG: " + path);

  png_init_io(g.png, fp);
  png_set_sig_bytes(g.png, 8);
  png_read_info(g.png, g.info);

  const png_byte color = png_get_color_type(g.png, g.info);
  const png_byte depth = png_get_bit_depth(g.png, g.info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(g.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(g.png);
  if (png_get_valid(g.png, g.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(g.png);
  if ((color & PNG_COLOR_MASK_ALPHA) || png_get_valid(g.png, g.info, PNG_INFO_tRNS))
    png_set_strip_alpha(g.png);
  if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(g.png);
  png_read_update_info(g.png, g.info);

  const int width = static_cast<int>(png_get_image_width(g.png, g.info));
  const int height = static_cast<int>(png_get_image_height(g.png, g.info));
  const int channels = png_get_channels(g.png, g.info);
  const int out_depth = png_get_bit_depth(g.png, g.info);
  if (out_depth != 8 && out_depth != 16)
    throw format_error("unsupported bit depth in " + path);
  if (channels != 1 && channels != 3)
    throw format_error("unsupported channel layout in " + path);

  const std::size_t rowbytes = png_get_rowbytes(g.png, g.info);
  raster.resize(rowbytes * height);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = raster.data() + rowbytes * y;
  png_read_image(g.png, rows.data());

  ImageStack out(width, height, channels);
  const float scale = out_depth == 8 ? 1.0f / 255.0f : 1.0f / 65535.0f;
  for (int y = 0; y < height; ++y) {
    const png_byte* row = rows[y];
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        unsigned value;
        if (out_depth == 8) {
          value = row[x * channels + c];
        } else {
          const png_byte* b = row + 2 * (x * channels + c);
          value = std::endian::native == std::endian::little
                      ? static_cast<unsigned>(b[0]) | (static_cast<unsigned>(b[1]) << 8)
                      : static_cast<unsigned>(b[1]) | (static_cast<unsigned>(b[0]) << 8);
        }
        out.at(c, x, y) = static_cast<float>(value) * scale;
      }
    }
  }
  return out;
}

namespace {

void save_png8(const std::string& path, const std::vector<std::uint8_t>& pixels, int width,
               int height, int color_type, int samples_per_pixel) {
  if (width < 1 || height < 1 ||
      pixels.size() != static_cast<std::size_t>(width) * height * samples_per_pixel)
    throw std::invalid_argument("save_png: pixel buffer does not match dimensions");
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw io_error("cannot open for writing: " + path);
  FileCloser closer{fp};

  PngWriteGuard g;
  g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (g.png) g.info = png_create_info_struct(g.png);
  if (!g.png || !g.info) throw io_error("libpng initialization failed");

  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(g.png))) throw io_error("failed to write PNG: " + path);

  png_init_io(g.png, fp);
  png_set_IHDR(g.png, g.info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(g.png, g.info);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * samples_per_pixel;
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(pixels.data() + rowbytes * y);
  png_write_image(g.png, rows.data());
  png_write_end(g.png, nullptr);
}

}  // namespace

void save_png_gray8(const std::string& path, const std::vector<std::uint8_t>& pixels, int width,
                    int height) {
  save_png8(path, pixels, width, height, PNG_COLOR_TYPE_GRAY, 1);
}

void save_png_rgb8(const std::string& path, const std::vector<std::uint8_t>& pixels, int width,
                   int height) {
  save_png8(path, pixels, width, height, PNG_COLOR_TYPE_RGB, 3);
}

std::pair<int, int> png_dimensions(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw io_error("cannot open: " + path);
  FileCloser closer{fp};
  // 8-byte signature, 4-byte length, "IHDR", then width/height big-endian.
  unsigned char head[24];
  if (std::fread(head, 1, 24, fp) != 24) throw io_error("short read: " + path);
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (std::memcmp(head, sig, 8) != 0 || std::memcmp(head + 12, "IHDR", 4) != 0)
    throw format_error("not a PNG file: " + path);
  auto be32 = [&](int off) {
    return (static_cast<int>(head[off]) << 24) | (static_cast<int>(head[off + 1]) << 16) |
           (static_cast<int>(head[off + 2]) << 8) | static_cast<int>(head[off + 3]);
  };
  return {be32(16), be32(20)};
}

FloatTensor read_nfat(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw io_error("cannot open: " + path);
  FileCloser closer{fp};

  char magic[4];
  if (std::fread(magic, 1, 4, fp) != 4) throw io_error("truncated NFAT header: " + path);
  if (std::memcmp(magic, "NFAT", 4) != 0) throw format_error("bad NFAT magic in " + path);
  const std::uint32_t version = get_u32le(fp, path);
  if (version != 1) throw format_error("unsupported NFAT version in " + path);
  const std::uint32_t c = get_u32le(fp, path);
  const std::uint32_t h = get_u32le(fp, path);
  const std::uint32_t w = get_u32le(fp, path);
  if (c < 1 || h < 1 || w < 1) throw format_error("degenerate NFAT dimensions in " + path);
  const std::uint64_t count = static_cast<std::uint64_t>(c) * h * w;
  if (count > (1ull << 31)) throw format_error("NFAT tensor too large in " + path);

  FloatTensor t;
  t.channels = static_cast<int>(c);
  t.height = static_cast<int>(h);
  t.width = static_cast<int>(w);
  t.data.resize(count);
  if constexpr (std::endian::native == std::endian::little) {
    if (std::fread(t.data.data(), sizeof(float), count, fp) != count)
      throw io_error("truncated NFAT payload: " + path);
  } else {
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::uint32_t bits = get_u32le(fp, path);
      std::memcpy(&t.data[i], &bits, 4);
    }
  }
  return t;
}

void write_nfat(const std::string& path, const FloatTensor& tensor) {
  write_nfat_raw(path, tensor.channels, tensor.height, tensor.width, tensor.data.data());
}

void write_nfat(const std::string& path, const ImageStack& stack) {
  write_nfat_raw(path, stack.channels(), stack.height(), stack.width(), stack.data().data());
}

void write_nfat(const std::string& path, const GridD& grid) {
  std::vector<float> narrow(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) narrow[i] = static_cast<float>(grid.v[i]);
  write_nfat_raw(path, 1, grid.height, grid.width, narrow.data());
}

}  // namespace nfadetect
