#include "polypnet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "polypnet/errors.hpp"

namespace polypnet {

namespace {

Tensor planes_from_interleaved(const std::vector<unsigned char>& px, std::size_t channels,
                               std::size_t h, std::size_t w) {
  std::vector<double> data(channels * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        data[(c * h + y) * w + x] = static_cast<double>(px[(y * w + x) * channels + c]);
      }
    }
  }
  return unchecked_tensor({channels, h, w}, std::move(data));
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

// Decodes any PNG into interleaved 8-bit samples (gray -> 1, everything else
// expanded to RGB, alpha stripped).
Tensor read_png(const std::filesystem::path& path) {
  PngReader r;
  r.fp = std::fopen(path.string().c_str(), "rb");
  if (!r.fp) throw IoError("cannot open " + path.string());

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, r.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path.string() + " is not a PNG file");
  }
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  r.info = png_create_info_struct(r.png);
  if (!r.png || !r.info) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(r.png))) {
    throw FormatError("corrupt PNG: " + path.string());
  }
  png_init_io(r.png, r.fp);
  png_set_sig_bytes(r.png, 8);
  png_read_info(r.png, r.info);

  const png_uint_32 w = png_get_image_width(r.png, r.info);
  const png_uint_32 h = png_get_image_height(r.png, r.info);
  const png_byte color = png_get_color_type(r.png, r.info);
  const png_byte depth = png_get_bit_depth(r.png, r.info);

  if (depth == 16) png_set_strip_16(r.png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
  png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);

  const std::size_t channels = png_get_channels(r.png, r.info);
  const std::size_t rowbytes = png_get_rowbytes(r.png, r.info);
  std::vector<unsigned char> px(static_cast<std::size_t>(h) * rowbytes);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = px.data() + y * rowbytes;
  png_read_image(r.png, rows.data());
  return planes_from_interleaved(px, channels, h, w);
}

// Binary PNM (P5 gray / P6 rgb), 8-bit maxval.
Tensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6") {
    throw FormatError(path.string() + ": expected binary PGM/PPM (P5/P6), got '" + magic + "'");
  }
  const std::size_t channels = magic == "P6" ? 3 : 1;

  auto next_int = [&in, &path]() {
    // Skip whitespace and '#' comments between header fields.
    int c = in.peek();
    while (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') {
      if (c == '#') {
        std::string comment;
        std::getline(in, comment);
      } else {
        in.get();
      }
      c = in.peek();
    }
    long v = -1;
    in >> v;
    if (!in || v < 0) throw FormatError("bad PNM header in " + path.string());
    return static_cast<std::size_t>(v);
  };
  const std::size_t w = next_int();
  const std::size_t h = next_int();
  const std::size_t maxval = next_int();
  if (maxval != 255) throw FormatError(path.string() + ": only 8-bit PNM supported");
  in.get();  // single whitespace before raster

  std::vector<unsigned char> px(channels * w * h);
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (static_cast<std::size_t>(in.gcount()) != px.size()) {
    throw FormatError("truncated PNM raster in " + path.string());
  }
  return planes_from_interleaved(px, channels, h, w);
}

Tensor read_any(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".png" || ext == ".PNG") return read_png(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return read_pnm(path);
  throw FormatError("unsupported image extension: " + path.string());
}

}  // namespace

bool supported_image_extension(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  return ext == ".png" || ext == ".PNG" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

Tensor read_image(const std::filesystem::path& path) { return read_any(path); }

Tensor read_mask(const std::filesystem::path& path) {
  Tensor t = read_any(path);
  const std::size_t h = t.shape()[1], w = t.shape()[2];
  std::vector<double> data(h * w);
  // Multi-channel mask files must agree across channels; values are 0/255 or 0/1.
  const std::size_t channels = t.shape()[0];
  for (std::size_t i = 0; i < h * w; ++i) {
    const double v = t[i];
    for (std::size_t c = 1; c < channels; ++c) {
      if (t[c * h * w + i] != v) {
        throw ValueError("mask channels disagree in " + path.string());
      }
    }
    if (v == 0.0) {
      data[i] = 0.0;
    } else if (v == 255.0 || v == 1.0) {
      data[i] = 1.0;
    } else {
      throw ValueError("mask " + path.string() + " is not binary (pixel value " +
                       std::to_string(v) + ")");
    }
  }
  return unchecked_tensor({h, w}, std::move(data));
}

namespace {

unsigned char to_byte(double v) {
  const double c = std::clamp(v, 0.0, 255.0);
  return static_cast<unsigned char>(c + 0.5);
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.shape()[0] != 3) {
    throw ShapeError("write_ppm expects a [3,H,W] image");
  }
  const std::size_t h = image.shape()[1], w = image.shape()[2];
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(3 * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) row[x * 3 + c] = to_byte(image[(c * h + y) * w + x]);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_pgm(const std::filesystem::path& path, const Tensor& gray) {
  if (gray.rank() != 2) throw ShapeError("write_pgm expects a [H,W] image");
  const std::size_t h = gray.shape()[0], w = gray.shape()[1];
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) row[x] = to_byte(gray[y * w + x]);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace polypnet
