#include "zoomin/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>

#include <jpeglib.h>
#include <png.h>

#include "zoomin/util.hpp"

namespace zoomin::imaging {

RasterImage RasterImage::blank(int w, int h, std::uint8_t r, std::uint8_t g,
                               std::uint8_t b) {
  RasterImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<size_t>(w) * h * 3);
  for (size_t i = 0; i < img.pixels.size(); i += 3) {
    img.pixels[i] = r;
    img.pixels[i + 1] = g;
    img.pixels[i + 2] = b;
  }
  return img;
}

namespace {

bool is_png(std::span<const std::uint8_t> bytes) {
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), sig, 8) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8;
}

// ---- PNG ----

struct PngReadState {
  const std::uint8_t* data;
  size_t size;
  size_t offset;
};

extern "C" void png_mem_read(png_structp png, png_bytep out, png_size_t count) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->offset + count > st->size) png_error(png, "unexpected end of PNG stream");
  std::memcpy(out, st->data + st->offset, count);
  st->offset += count;
}

extern "C" void png_vec_write(png_structp png, png_bytep data, png_size_t count) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + count);
}

extern "C" void png_vec_flush(png_structp) {}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DecodeError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DecodeError("libpng info init failed");
  }

  RasterImage img;
  std::vector<png_bytep> rows;
  PngReadState state{bytes.data(), bytes.size(), 0};

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("corrupt or truncated PNG");
  }

  png_set_read_fn(png, &state, png_mem_read);
  png_read_info(png, info);

  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.pixels.resize(static_cast<size_t>(w) * h * 3);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = img.pixels.data() + static_cast<size_t>(y) * w * 3;

  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

// ---- JPEG ----

struct JpegErrorMgr {
  jpeg_error_mgr mgr;
  std::jmp_buf jb;
};

extern "C" void jpeg_error_exit_throw(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jb, 1);
}

RasterImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.mgr);
  jerr.mgr.error_exit = jpeg_error_exit_throw;

  RasterImage img;
  jpeg_create_decompress(&cinfo);
  if (setjmp(jerr.jb)) {
    jpeg_destroy_decompress(&cinfo);
    throw DecodeError("corrupt or truncated JPEG");
  }

  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  img.width = static_cast<int>(cinfo.output_width);
  img.height = static_cast<int>(cinfo.output_height);
  img.pixels.resize(static_cast<size_t>(img.width) * img.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.pixels.data() +
                   static_cast<size_t>(cinfo.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

void check_nonempty(const RasterImage& img) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != static_cast<size_t>(img.width) * img.height * 3)
    throw std::invalid_argument("raster image has inconsistent dimensions");
}

}  // namespace

RasterImage decode(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw DecodeError("unsupported image payload (expected PNG or JPEG)");
}

RasterImage load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open image file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode(bytes);
}

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  check_nonempty(img);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DecodeError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DecodeError("libpng info init failed");
  }

  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(img.height);

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DecodeError("PNG encode failed");
  }

  png_set_write_fn(png, &out, png_vec_write, png_vec_flush);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.at(0, y));
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<std::uint8_t> encode_jpeg(const RasterImage& img, int quality) {
  check_nonempty(img);
  if (quality < 1 || quality > 100)
    throw InvalidSpec("JPEG quality must be in 1..100");

  jpeg_compress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.mgr);
  jerr.mgr.error_exit = jpeg_error_exit_throw;

  unsigned char* buf = nullptr;
  unsigned long buf_size = 0;
  jpeg_create_compress(&cinfo);
  if (setjmp(jerr.jb)) {
    jpeg_destroy_compress(&cinfo);
    if (buf) free(buf);
    throw DecodeError("JPEG encode failed");
  }

  jpeg_mem_dest(&cinfo, &buf, &buf_size);
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(
        img.at(0, static_cast<int>(cinfo.next_scanline)));
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);

  std::vector<std::uint8_t> out(buf, buf + buf_size);
  free(buf);
  return out;
}

void save_file(const RasterImage& img, const std::string& path, int jpeg_quality) {
  std::vector<std::uint8_t> bytes;
  std::string lower = util::to_lower_ascii(path);
  if (lower.ends_with(".png"))
    bytes = encode_png(img);
  else if (lower.ends_with(".jpg") || lower.ends_with(".jpeg"))
    bytes = encode_jpeg(img, jpeg_quality);
  else
    throw InvalidSpec("unsupported image extension (use .png/.jpg): " + path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write: " + path);
}

RasterImage crop(const RasterImage& img, const geometry::BBox& box) {
  check_nonempty(img);
  if (!box.valid() || box.x2 > img.width || box.y2 > img.height)
    throw DegenerateBox("crop box must be non-degenerate and inside the image");
  RasterImage out;
  out.width = box.width();
  out.height = box.height();
  out.pixels.resize(static_cast<size_t>(out.width) * out.height * 3);
  for (int y = 0; y < out.height; ++y) {
    std::memcpy(out.at(0, y), img.at(box.x1, box.y1 + y),
                static_cast<size_t>(out.width) * 3);
  }
  return out;
}

RasterImage resize_bilinear(const RasterImage& img, int out_width, int out_height) {
  check_nonempty(img);
  if (out_width < 1 || out_height < 1)
    throw std::invalid_argument("resize target must be at least 1x1");
  if (out_width == img.width && out_height == img.height) return img;

  RasterImage out;
  out.width = out_width;
  out.height = out_height;
  out.pixels.resize(static_cast<size_t>(out_width) * out_height * 3);

  const double sx = static_cast<double>(img.width) / out_width;
  const double sy = static_cast<double>(img.height) / out_height;
  for (int y = 0; y < out_height; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double ty = fy - y0;
    int ya = std::clamp(y0, 0, img.height - 1);
    int yb = std::clamp(y0 + 1, 0, img.height - 1);
    for (int x = 0; x < out_width; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double tx = fx - x0;
      int xa = std::clamp(x0, 0, img.width - 1);
      int xb = std::clamp(x0 + 1, 0, img.width - 1);
      const std::uint8_t* p00 = img.at(xa, ya);
      const std::uint8_t* p10 = img.at(xb, ya);
      const std::uint8_t* p01 = img.at(xa, yb);
      const std::uint8_t* p11 = img.at(xb, yb);
      std::uint8_t* dst = out.at(x, y);
      for (int ch = 0; ch < 3; ++ch) {
        double top = (1.0 - tx) * p00[ch] + tx * p10[ch];
        double bot = (1.0 - tx) * p01[ch] + tx * p11[ch];
        double v = (1.0 - ty) * top + ty * bot;
        dst[ch] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
      }
    }
  }
  return out;
}

RasterImage center_crop_resize(const RasterImage& img, int side) {
  check_nonempty(img);
  if (side < 1) throw std::invalid_argument("side must be >= 1");
  const int s = std::min(img.width, img.height);
  const int ox = (img.width - s) / 2;
  const int oy = (img.height - s) / 2;
  if (s == side && img.width == img.height) return img;
  RasterImage square =
      (s == img.width && s == img.height) ? img : crop(img, {ox, oy, ox + s, oy + s});
  return resize_bilinear(square, side, side);
}

std::optional<DegradationSpec> DegradationSpec::parse(std::string_view token,
                                                      std::uint64_t seed) {
  auto parts = util::split(token, ':');
  if (parts.size() != 2) return std::nullopt;
  DegradationSpec spec;
  spec.seed = seed;
  try {
    if (parts[0] == "jpeg") {
      spec.kind = Kind::JpegQuality;
      spec.jpeg_quality = std::stoi(parts[1]);
    } else if (parts[0] == "crop") {
      spec.kind = Kind::RandomCrop;
      spec.fraction = std::stod(parts[1]);
    } else if (parts[0] == "down") {
      spec.kind = Kind::Downsample;
      spec.fraction = std::stod(parts[1]);
    } else {
      return std::nullopt;
    }
    spec.validate();
  } catch (const std::exception&) {
    return std::nullopt;
  }
  return spec;
}

std::string DegradationSpec::label() const {
  switch (kind) {
    case Kind::JpegQuality:
      return "jpeg:" + std::to_string(jpeg_quality);
    case Kind::RandomCrop:
      return "crop:" + util::format_double(fraction);
    case Kind::Downsample:
      return "down:" + util::format_double(fraction);
  }
  return "?";
}

void DegradationSpec::validate() const {
  switch (kind) {
    case Kind::JpegQuality:
      if (jpeg_quality < 1 || jpeg_quality > 100)
        throw InvalidSpec("JPEG quality must be in 1..100");
      break;
    case Kind::RandomCrop:
      if (!(fraction > 0.0 && fraction <= 1.0))
        throw InvalidSpec("crop fraction must be in (0,1]");
      break;
    case Kind::Downsample:
      if (!(fraction > 0.0 && fraction < 1.0))
        throw InvalidSpec("downsample factor must be in (0,1)");
      break;
  }
}

RasterImage degrade(const RasterImage& img, const DegradationSpec& spec) {
  check_nonempty(img);
  spec.validate();
  switch (spec.kind) {
    case DegradationSpec::Kind::JpegQuality:
      return decode(encode_jpeg(img, spec.jpeg_quality));
    case DegradationSpec::Kind::Downsample: {
      int w = std::max(1, static_cast<int>(std::floor(img.width * spec.fraction)));
      int h = std::max(1, static_cast<int>(std::floor(img.height * spec.fraction)));
      return resize_bilinear(img, w, h);
    }
    case DegradationSpec::Kind::RandomCrop: {
      int cw = std::max(1, static_cast<int>(std::floor(img.width * spec.fraction)));
      int ch = std::max(1, static_cast<int>(std::floor(img.height * spec.fraction)));
      std::mt19937_64 eng(spec.seed);
      int ox = img.width > cw ? static_cast<int>(eng() % (img.width - cw + 1)) : 0;
      int oy = img.height > ch ? static_cast<int>(eng() % (img.height - ch + 1)) : 0;
      return crop(img, {ox, oy, ox + cw, oy + ch});
    }
  }
  throw InvalidSpec("unknown degradation kind");
}

void draw_box(RasterImage& img, const geometry::BBox& box, std::uint8_t r,
              std::uint8_t g, std::uint8_t b, int thickness) {
  auto clamped = geometry::clamp_box(box, img.dims());
  if (!clamped) return;
  const geometry::BBox& c = *clamped;
  auto paint = [&](int x, int y) {
    std::uint8_t* p = img.at(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  };
  for (int t = 0; t < thickness; ++t) {
    int top = c.y1 + t, bottom = c.y2 - 1 - t;
    int left = c.x1 + t, right = c.x2 - 1 - t;
    if (top > bottom || left > right) break;
    for (int x = left; x <= right; ++x) {
      paint(x, top);
      paint(x, bottom);
    }
    for (int y = top; y <= bottom; ++y) {
      paint(left, y);
      paint(right, y);
    }
  }
}

}  // namespace zoomin::imaging
