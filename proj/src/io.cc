#include "dpe_mvs/io.h"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace dpe {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary writers assume a little-endian host");

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("Cannot open for writing: " + path);
  }
  return out;
}

std::ifstream OpenIn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("Cannot open for reading: " + path);
  }
  return in;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string HeaderToken(std::istream& in) {
  std::string token;
  while (in >> token) {
    if (token[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return token;
  }
  throw std::runtime_error("Truncated image header");
}

void WritePfmRaw(const std::string& path, int width, int height, int channels,
                 const float* data) {
  std::ofstream out = OpenOut(path);
  out << (channels == 3 ? "PF" : "Pf") << "\n"
      << width << " " << height << "\n-1.0\n";
  const size_t row = static_cast<size_t>(width) * channels;
  for (int y = height - 1; y >= 0; --y) {
    out.write(reinterpret_cast<const char*>(data + row * y),
              static_cast<std::streamsize>(row * sizeof(float)));
  }
}

std::vector<float> ReadPfmRaw(const std::string& path, int* width,
                              int* height, int* channels) {
  std::ifstream in = OpenIn(path);
  const std::string magic = HeaderToken(in);
  if (magic == "PF") {
    *channels = 3;
  } else if (magic == "Pf") {
    *channels = 1;
  } else {
    throw std::runtime_error("Not a PFM file: " + path);
  }
  *width = std::stoi(HeaderToken(in));
  *height = std::stoi(HeaderToken(in));
  const double scale = std::stod(HeaderToken(in));
  in.get();
  if (scale > 0) {
    throw std::runtime_error("Big-endian PFM not supported: " + path);
  }
  const size_t row = static_cast<size_t>(*width) * *channels;
  std::vector<float> data(row * *height);
  for (int y = *height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(data.data() + row * y),
            static_cast<std::streamsize>(row * sizeof(float)));
  }
  if (!in) {
    throw std::runtime_error("Truncated PFM: " + path);
  }
  return data;
}

void ReadPgmHeader(std::istream& in, const std::string& path, int* width,
                   int* height, int* maxval) {
  if (HeaderToken(in) != "P5") {
    throw std::runtime_error("Not a binary PGM: " + path);
  }
  *width = std::stoi(HeaderToken(in));
  *height = std::stoi(HeaderToken(in));
  *maxval = std::stoi(HeaderToken(in));
  in.get();
}

}  // namespace

void WritePfm(const std::string& path, const Grid<float>& image) {
  WritePfmRaw(path, image.width(), image.height(), 1, image.data().data());
}

void WritePfm(const std::string& path, const DepthMap& image) {
  Grid<float> out(image.width(), image.height());
  for (size_t i = 0; i < image.size(); ++i) {
    out.data()[i] = static_cast<float>(image.data()[i]);
  }
  WritePfm(path, out);
}

void WritePfm(const std::string& path, const NormalMap& normals) {
  std::vector<float> data(normals.size() * 3);
  for (size_t i = 0; i < normals.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      data[3 * i + c] = static_cast<float>(normals.data()[i][c]);
    }
  }
  WritePfmRaw(path, normals.width(), normals.height(), 3, data.data());
}

Grid<float> ReadPfm(const std::string& path) {
  int width, height, channels;
  std::vector<float> data = ReadPfmRaw(path, &width, &height, &channels);
  if (channels != 1) {
    throw std::runtime_error("Expected single-channel PFM: " + path);
  }
  Grid<float> image(width, height);
  std::copy(data.begin(), data.end(), image.data().begin());
  return image;
}

NormalMap ReadPfm3(const std::string& path) {
  int width, height, channels;
  std::vector<float> data = ReadPfmRaw(path, &width, &height, &channels);
  if (channels != 3) {
    throw std::runtime_error("Expected three-channel PFM: " + path);
  }
  NormalMap normals(width, height);
  for (size_t i = 0; i < normals.size(); ++i) {
    normals.data()[i] = Eigen::Vector3d(data[3 * i], data[3 * i + 1],
                                        data[3 * i + 2]);
  }
  return normals;
}

void WritePgm(const std::string& path, const Mask& mask) {
  std::ofstream out = OpenOut(path);
  out << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
  std::vector<uint8_t> bytes(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) {
    bytes[i] = mask.data()[i] ? 255 : 0;
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void WritePgm16(const std::string& path, const Grid<int>& labels) {
  std::ofstream out = OpenOut(path);
  out << "P5\n" << labels.width() << " " << labels.height() << "\n65535\n";
  std::vector<uint8_t> bytes(labels.size() * 2);
  for (size_t i = 0; i < labels.size(); ++i) {
    const int v = std::clamp(labels.data()[i], 0, 65535);
    bytes[2 * i] = static_cast<uint8_t>(v >> 8);
    bytes[2 * i + 1] = static_cast<uint8_t>(v & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Mask ReadPgmMask(const std::string& path) {
  std::ifstream in = OpenIn(path);
  int width, height, maxval;
  ReadPgmHeader(in, path, &width, &height, &maxval);
  if (maxval > 255) {
    throw std::runtime_error("Expected 8-bit PGM: " + path);
  }
  Mask mask(width, height);
  in.read(reinterpret_cast<char*>(mask.data().data()),
          static_cast<std::streamsize>(mask.size()));
  for (uint8_t& v : mask.data()) {
    v = v ? 1 : 0;
  }
  return mask;
}

Grid<int> ReadPgm16(const std::string& path) {
  std::ifstream in = OpenIn(path);
  int width, height, maxval;
  ReadPgmHeader(in, path, &width, &height, &maxval);
  Grid<int> labels(width, height);
  if (maxval <= 255) {
    std::vector<uint8_t> bytes(labels.size());
    in.read(reinterpret_cast<char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    for (size_t i = 0; i < labels.size(); ++i) labels.data()[i] = bytes[i];
    return labels;
  }
  std::vector<uint8_t> bytes(labels.size() * 2);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  for (size_t i = 0; i < labels.size(); ++i) {
    labels.data()[i] = (bytes[2 * i] << 8) | bytes[2 * i + 1];
  }
  return labels;
}

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};

void WritePngBytes(const std::string& path, int width, int height,
                   const std::vector<uint8_t>& bytes) {
  std::unique_ptr<FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) {
    throw std::runtime_error("Cannot open for writing: " + path);
  }
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG write failed: " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, bytes.data() + static_cast<size_t>(y) * width);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void WritePng(const std::string& path, const GrayImage& image) {
  std::vector<uint8_t> bytes(image.size());
  for (size_t i = 0; i < image.size(); ++i) {
    bytes[i] = static_cast<uint8_t>(
        std::clamp(std::lround(image.data()[i]), 0L, 255L));
  }
  WritePngBytes(path, image.width(), image.height(), bytes);
}

void WritePngMask(const std::string& path, const Mask& mask) {
  std::vector<uint8_t> bytes(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) {
    bytes[i] = mask.data()[i] ? 255 : 0;
  }
  WritePngBytes(path, mask.width(), mask.height(), bytes);
}

GrayImage ReadPng(const std::string& path) {
  std::unique_ptr<FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) {
    throw std::runtime_error("Cannot open for reading: " + path);
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("PNG read failed: " + path);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<uint8_t> row(rowbytes);
  GrayImage image(width, height);
  for (int y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < width; ++x) {
      image(x, y) = row[x];
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void WritePly(const std::string& path, const PointCloud& cloud) {
  std::ofstream out = OpenOut(path);
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property float nx\nproperty float ny\nproperty float nz\n"
      << "property uchar gray\nend_header\n";
  for (size_t i = 0; i < cloud.size(); ++i) {
    float values[6];
    for (int c = 0; c < 3; ++c) {
      values[c] = static_cast<float>(cloud.positions[i][c]);
      values[3 + c] = i < cloud.normals.size()
                          ? static_cast<float>(cloud.normals[i][c])
                          : 0.0f;
    }
    const uint8_t gray = i < cloud.gray.size() ? cloud.gray[i] : 0;
    out.write(reinterpret_cast<const char*>(values), sizeof(values));
    out.write(reinterpret_cast<const char*>(&gray), 1);
  }
}

PointCloud ReadPly(const std::string& path) {
  std::ifstream in = OpenIn(path);
  std::string line;
  size_t count = 0;
  std::vector<std::string> properties;
  bool binary = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream tokens(line);
    std::string word;
    tokens >> word;
    if (word == "format") {
      std::string format;
      tokens >> format;
      binary = format == "binary_little_endian";
      if (!binary && format != "ascii") {
        throw std::runtime_error("Unsupported PLY format in " + path);
      }
    } else if (word == "element") {
      std::string name;
      tokens >> name >> count;
    } else if (word == "property") {
      std::string type, name;
      tokens >> type >> name;
      properties.push_back(type + " " + name);
    } else if (word == "end_header") {
      break;
    }
  }
  const std::vector<std::string> expected = {
      "float x", "float y", "float z", "float nx", "float ny", "float nz",
      "uchar gray"};
  const bool full = properties == expected;
  const bool xyz_only =
      properties.size() == 3 &&
      std::equal(properties.begin(), properties.end(), expected.begin());
  if (!full && !xyz_only) {
    throw std::runtime_error("Unsupported PLY vertex layout in " + path);
  }
  PointCloud cloud;
  cloud.positions.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    float values[6] = {0, 0, 0, 0, 0, 0};
    int gray = 0;
    const int n = full ? 6 : 3;
    if (binary) {
      in.read(reinterpret_cast<char*>(values), n * sizeof(float));
      if (full) {
        uint8_t g = 0;
        in.read(reinterpret_cast<char*>(&g), 1);
        gray = g;
      }
    } else {
      for (int c = 0; c < n; ++c) in >> values[c];
      if (full) in >> gray;
    }
    if (!in) {
      throw std::runtime_error("Truncated PLY: " + path);
    }
    cloud.positions.emplace_back(values[0], values[1], values[2]);
    cloud.normals.emplace_back(values[3], values[4], values[5]);
    cloud.gray.push_back(static_cast<uint8_t>(gray));
  }
  return cloud;
}

}  // namespace dpe
