#include "nsdx/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "nsdx/errors.hpp"

namespace nsdx {

namespace {

void check_dims(int width, int height) {
  if (width <= 0 || height <= 0)
    throw ValueError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                     std::to_string(height));
}

void check_pixel(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValueError("pixel value out of [0,1]: " + std::to_string(v));
}

int to_level(double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

// Next whitespace-delimited token, skipping '#' comments.
bool next_token(std::istream& in, std::string& tok) {
  tok.clear();
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      if (!tok.empty()) return true;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return true;
      continue;
    }
    tok.push_back(c);
  }
  return !tok.empty();
}

int read_int(std::istream& in, const char* what) {
  std::string tok;
  if (!next_token(in, tok)) throw ParseError(0, std::string("PGM: missing ") + what);
  try {
    std::size_t used = 0;
    int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(0, std::string("PGM: bad ") + what + " '" + tok + "'");
  }
}

}  // namespace

GrayImage::GrayImage(int width, int height, double fill)
    : width_(width), height_(height) {
  check_dims(width, height);
  check_pixel(fill);
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dims(width, height);
  if (pixels_.size() != static_cast<std::size_t>(width) * height)
    throw ValueError("pixel count " + std::to_string(pixels_.size()) + " does not match " +
                     std::to_string(width) + "x" + std::to_string(height));
  for (double v : pixels_) check_pixel(v);
}

void GrayImage::set(int x, int y, double v) {
  check_pixel(v);
  pixels_[index(x, y)] = v;
}

std::size_t GrayImage::index(int x, int y) const {
  if (x < 0 || y < 0 || x >= width_ || y >= height_)
    throw std::out_of_range("pixel (" + std::to_string(x) + "," + std::to_string(y) + ")");
  return static_cast<std::size_t>(y) * width_ + x;
}

void write_pgm(std::ostream& out, int width, int height, std::span<const double> values) {
  check_dims(width, height);
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw ValueError("PGM: value count does not match dimensions");
  out << "P2\n" << width << ' ' << height << "\n255\n";
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (x) out << ' ';
      out << to_level(values[static_cast<std::size_t>(y) * width + x]);
    }
    out << '\n';
  }
}

void write_pgm(std::ostream& out, const GrayImage& img) {
  write_pgm(out, img.width(), img.height(), img.pixels());
}

std::string to_pgm(const GrayImage& img) {
  std::ostringstream os;
  write_pgm(os, img);
  return os.str();
}

GrayImage read_pgm(std::istream& in) {
  std::string magic;
  if (!next_token(in, magic) || magic != "P2") throw ParseError(1, "PGM: expected magic 'P2'");
  int w = read_int(in, "width");
  int h = read_int(in, "height");
  int maxval = read_int(in, "maxval");
  if (w <= 0 || h <= 0) throw ParseError(0, "PGM: non-positive dimensions");
  if (maxval <= 0 || maxval > 65535) throw ParseError(0, "PGM: maxval out of range");
  std::vector<double> px(static_cast<std::size_t>(w) * h);
  for (auto& p : px) {
    int level = read_int(in, "pixel");
    if (level < 0 || level > maxval) throw ParseError(0, "PGM: pixel exceeds maxval");
    p = static_cast<double>(level) / maxval;
  }
  return GrayImage(w, h, std::move(px));
}

GrayImage read_pgm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_pgm(in);
}

GrayImage quantize(const GrayImage& img) {
  std::vector<double> px(img.pixels().begin(), img.pixels().end());
  for (auto& p : px) p = to_level(p) / 255.0;
  return GrayImage(img.width(), img.height(), std::move(px));
}

}  // namespace nsdx
