#pragma once

#include <string>

#include "dpe_mvs/image.h"
#include "dpe_mvs/point_cloud.h"

namespace dpe {

// PFM: little-endian floats, bottom-up scanlines ("Pf" = 1 channel,
// "PF" = 3 channels).
void WritePfm(const std::string& path, const Grid<float>& image);
void WritePfm(const std::string& path, const DepthMap& image);
void WritePfm(const std::string& path, const NormalMap& normals);
Grid<float> ReadPfm(const std::string& path);
NormalMap ReadPfm3(const std::string& path);

// Binary PGM. 8-bit masks are written as 0/255; 16-bit labels big-endian
// per the netpbm convention.
void WritePgm(const std::string& path, const Mask& mask);
void WritePgm16(const std::string& path, const Grid<int>& labels);
Mask ReadPgmMask(const std::string& path);
Grid<int> ReadPgm16(const std::string& path);

// 8-bit grayscale PNG. Color inputs are converted to luma on read.
void WritePng(const std::string& path, const GrayImage& image);
void WritePngMask(const std::string& path, const Mask& mask);
GrayImage ReadPng(const std::string& path);

// Binary little-endian PLY with float x y z nx ny nz and uchar gray.
void WritePly(const std::string& path, const PointCloud& cloud);
PointCloud ReadPly(const std::string& path);

}  // namespace dpe
