#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "zoomin/geometry.hpp"

namespace zoomin::imaging {

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateBox : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InvalidSpec : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// 8-bit RGB, row-major, exactly width*height*3 bytes.
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  static RasterImage blank(int w, int h, std::uint8_t r = 0, std::uint8_t g = 0,
                           std::uint8_t b = 0);

  geometry::ImageDims dims() const { return {width, height}; }
  std::uint8_t* at(int x, int y) {
    return pixels.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<size_t>(y) * width + x) * 3;
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

/// PNG or JPEG by magic bytes; grayscale/palette/alpha converted to RGB.
RasterImage decode(std::span<const std::uint8_t> bytes);
RasterImage load_file(const std::string& path);

std::vector<std::uint8_t> encode_png(const RasterImage& img);
/// libjpeg quality scale, 1..100.
std::vector<std::uint8_t> encode_jpeg(const RasterImage& img, int quality);
/// Dispatches on extension: .png, or .jpg/.jpeg with the given quality.
void save_file(const RasterImage& img, const std::string& path, int jpeg_quality = 95);

/// Sub-image of exactly (x2-x1) x (y2-y1) pixels, copied verbatim.
/// The box must be valid and inside the image; throws DegenerateBox otherwise.
RasterImage crop(const RasterImage& img, const geometry::BBox& box);

RasterImage resize_bilinear(const RasterImage& img, int out_width, int out_height);

/// Centered square crop of side min(width, height), then bilinear resize.
/// Identity for an input already side x side.
RasterImage center_crop_resize(const RasterImage& img, int side = 512);

struct DegradationSpec {
  enum class Kind { JpegQuality, RandomCrop, Downsample };
  Kind kind = Kind::JpegQuality;
  int jpeg_quality = 80;     // 1..100
  double fraction = 0.8;     // RandomCrop side fraction (0,1]; Downsample factor (0,1)
  std::uint64_t seed = 0;    // RandomCrop offset seed

  /// Parses "jpeg:80", "crop:0.8", "down:0.5"; the seed applies to crops.
  static std::optional<DegradationSpec> parse(std::string_view token,
                                              std::uint64_t seed = 0);
  std::string label() const;
  void validate() const;  // throws InvalidSpec

  friend bool operator==(const DegradationSpec&, const DegradationSpec&) = default;
};

/// JpegQuality: encode/decode round trip at the given quality (dims unchanged).
/// Downsample(f): bilinear resize to (floor(W*f), floor(H*f)), min 1.
/// RandomCrop(fraction, seed): floor-sized crop at a seed-deterministic offset.
RasterImage degrade(const RasterImage& img, const DegradationSpec& spec);

/// Rectangle outline drawn inward, clipped to the image.
void draw_box(RasterImage& img, const geometry::BBox& box, std::uint8_t r,
              std::uint8_t g, std::uint8_t b, int thickness = 2);

}  // namespace zoomin::imaging
