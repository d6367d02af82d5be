#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace nsdx {

// Grayscale image with pixels in [0,1], row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }

  double at(int x, int y) const { return pixels_[index(x, y)]; }
  void set(int x, int y, double v);

  std::span<const double> pixels() const noexcept { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int x, int y) const;

  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

// ASCII portable graymap ("P2", maxval 255). Values are written as
// round(v * 255) and read back as level / maxval.
void write_pgm(std::ostream& out, int width, int height, std::span<const double> values);
void write_pgm(std::ostream& out, const GrayImage& img);
std::string to_pgm(const GrayImage& img);
GrayImage read_pgm(std::istream& in);
GrayImage read_pgm_file(const std::string& path);

// Round every pixel onto the 8-bit grid so a PGM round trip is lossless.
GrayImage quantize(const GrayImage& img);

}  // namespace nsdx
