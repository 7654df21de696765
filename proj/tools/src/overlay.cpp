#include "osteoforge_cli/overlay.hpp"

#include <cmath>
#include <cstdio>
#include <memory>

#include <fmt/format.h>
#include <png.h>

namespace osteoforge::cli {

namespace {

template <typename Pred>
bool on_contour(const Image2D<std::uint8_t>& labels, std::size_t x, std::size_t y, Pred in) {
  if (!in(labels(x, y))) return false;
  if (x == 0 || y == 0 || x + 1 == labels.width() || y + 1 == labels.height()) return true;
  return !in(labels(x - 1, y)) || !in(labels(x + 1, y)) || !in(labels(x, y - 1)) ||
         !in(labels(x, y + 1));
}

void draw_line(RgbImage& img, Point2 a, Point2 b, Rgb color) {
  long x0 = std::lround(a.x), y0 = std::lround(a.y);
  const long x1 = std::lround(b.x), y1 = std::lround(b.y);
  const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  long err = dx + dy;
  const auto w = static_cast<long>(img.width()), h = static_cast<long>(img.height());
  for (;;) {
    if (x0 >= 0 && y0 >= 0 && x0 < w && y0 < h) {
      img(static_cast<std::size_t>(x0), static_cast<std::size_t>(y0)) = color;
    }
    if (x0 == x1 && y0 == y1) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

Rgb blend_half(Rgb base, Rgb over) {
  Rgb out{};
  for (std::size_t c = 0; c < 3; ++c) {
    out[c] = static_cast<std::uint8_t>((base[c] + over[c] + 1) / 2);
  }
  return out;
}

RgbImage render_overlay(const GrayImage& gray, const Image2D<std::uint8_t>& labels,
                        const std::vector<RecistMeasurement>& recist) {
  if (gray.width() != labels.width() || gray.height() != labels.height()) {
    throw GeometryError("overlay: label slice and image differ in size");
  }
  RgbImage img(gray.width(), gray.height());
  for (std::size_t i = 0; i < gray.size(); ++i) img[i] = {gray[i], gray[i], gray[i]};

  auto body = [](std::uint8_t v) { return v >= label::kBody; };
  auto skeleton = [](std::uint8_t v) { return v == label::kSkeleton || v == label::kLesion; };
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      if (on_contour(labels, x, y, body)) img(x, y) = kBodyColor;
    }
  }
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      if (on_contour(labels, x, y, skeleton)) img(x, y) = kSkeletonColor;
    }
  }
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (labels[i] == label::kLesion) img[i] = blend_half(img[i], kLesionColor);
  }
  for (const RecistMeasurement& m : recist) {
    draw_line(img, m.long_axis.a, m.long_axis.b, kRecistColor);
    draw_line(img, m.short_axis.a, m.short_axis.b, kRecistColor);
  }
  return img;
}

std::vector<std::size_t> slices_with_labels(const LabelVolume& labels) {
  std::vector<std::size_t> out;
  const Dims3& d = labels.dims();
  for (std::size_t z = 0; z < d.nz; ++z) {
    if (count_nonzero(labels.values().subspan(z * d.plane(), d.plane())) > 0) out.push_back(z);
  }
  return out;
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_byte> row(image.width() * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(fmt::format("failed writing {}", path.string()));
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) {
      const Rgb& p = image(x, y);
      row[3 * x] = p[0];
      row[3 * x + 1] = p[1];
      row[3 * x + 2] = p[2];
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw IoError(fmt::format("failed writing {}", path.string()));
}

RgbImage read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError(fmt::format("cannot open {}", path.string()));
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed");
  }
  RgbImage image;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(fmt::format("failed reading {}", path.string()));
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError(fmt::format("{}: expected 8-bit RGB", path.string()));
  }
  const std::size_t w = png_get_image_width(png, info);
  const std::size_t h = png_get_image_height(png, info);
  image = RgbImage(w, h);
  row.resize(w * 3);
  for (std::size_t y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (std::size_t x = 0; x < w; ++x) image(x, y) = {row[3 * x], row[3 * x + 1], row[3 * x + 2]};
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

}  // namespace osteoforge::cli
