// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// Radiance RGBE (.hdr) reader/writer with new-style RLE scanlines.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "retrace/image.hpp"

namespace retrace::hdr {

namespace detail {

inline void float_to_rgbe(const Vec3& c, uint8_t out[4]) {
  double m = std::max(c.x, std::max(c.y, c.z));
  if (m <= 1e-32) {
    out[0] = out[1] = out[2] = out[3] = 0;
    return;
  }
  int e;
  double scale = std::frexp(m, &e) * 256.0 / m;
  out[0] = uint8_t(std::min(255.0, c.x * scale));
  out[1] = uint8_t(std::min(255.0, c.y * scale));
  out[2] = uint8_t(std::min(255.0, c.z * scale));
  out[3] = uint8_t(e + 128);
}

inline Vec3 rgbe_to_float(const uint8_t rgbe[4]) {
  if (rgbe[3] == 0) return {0, 0, 0};
  double f = std::ldexp(1.0, int(rgbe[3]) - (128 + 8));
  return {rgbe[0] * f, rgbe[1] * f, rgbe[2] * f};
}

}  // namespace detail

inline void write(const std::string& path, const Image& img) {
  const int w = img.width(), h = img.height();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot open for writing");
  out << "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " << h << " +X " << w << "\n";

  std::vector<uint8_t> rgbe(size_t(w) * 4);
  const bool rle = w >= 8 && w <= 32767;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) detail::float_to_rgbe(img.at(x, y), &rgbe[size_t(x) * 4]);
    if (!rle) {
      out.write(reinterpret_cast<const char*>(rgbe.data()), std::streamsize(rgbe.size()));
      continue;
    }
    uint8_t head[4] = {2, 2, uint8_t(w >> 8), uint8_t(w & 0xFF)};
    out.write(reinterpret_cast<const char*>(head), 4);
    for (int c = 0; c < 4; ++c) {
      int x = 0;
      while (x < w) {
        // find a run of >= 4 equal bytes
        int run_start = x;
        int run_len = 0;
        while (run_start < w) {
          run_len = 1;
          while (run_start + run_len < w && run_len < 127 &&
                 rgbe[size_t(run_start + run_len) * 4 + c] == rgbe[size_t(run_start) * 4 + c])
            ++run_len;
          if (run_len >= 4) break;
          run_start += run_len;
        }
        // literals before the run
        while (x < run_start || (run_len < 4 && x < w)) {
          int n = std::min(run_len >= 4 ? run_start - x : w - x, 128);
          out.put(char(n));
          for (int i = 0; i < n; ++i) out.put(char(rgbe[size_t(x + i) * 4 + c]));
          x += n;
        }
        if (run_len >= 4 && x < w) {
          out.put(char(128 + run_len));
          out.put(char(rgbe[size_t(x) * 4 + c]));
          x += run_len;
        }
      }
    }
  }
  if (!out) throw Error(path + ": write failed");
}

inline Image read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path + ": cannot open");

  std::string line;
  if (!std::getline(in, line) || line.rfind("#?", 0) != 0)
    throw Error(path + ": not a Radiance HDR file");
  bool format_ok = false;
  while (std::getline(in, line)) {
    if (line.empty()) break;
    if (line.rfind("FORMAT=32-bit_rle_rgbe", 0) == 0) format_ok = true;
  }
  if (!format_ok) throw Error(path + ": unsupported HDR format");
  if (!std::getline(in, line)) throw Error(path + ": missing resolution line");
  int w = 0, h = 0;
  {
    std::istringstream ss(line);
    std::string ny, px;
    ss >> ny >> h >> px >> w;
    if (ny != "-Y" || px != "+X" || w <= 0 || h <= 0)
      throw Error(path + ": unsupported resolution line '" + line + "'");
  }

  Image img(w, h);
  std::vector<uint8_t> rgbe(size_t(w) * 4);
  for (int y = 0; y < h; ++y) {
    uint8_t head[4];
    if (!in.read(reinterpret_cast<char*>(head), 4)) throw Error(path + ": truncated scanline");
    if (head[0] == 2 && head[1] == 2 && ((head[2] << 8) | head[3]) == w) {
      for (int c = 0; c < 4; ++c) {
        int x = 0;
        while (x < w) {
          int code = in.get();
          if (code == EOF) throw Error(path + ": truncated RLE data");
          if (code > 128) {
            int n = code - 128;
            int v = in.get();
            if (v == EOF || x + n > w) throw Error(path + ": bad RLE run");
            for (int i = 0; i < n; ++i) rgbe[size_t(x + i) * 4 + c] = uint8_t(v);
            x += n;
          } else {
            int n = code;
            if (x + n > w) throw Error(path + ": bad RLE literal");
            for (int i = 0; i < n; ++i) {
              int v = in.get();
              if (v == EOF) throw Error(path + ": truncated RLE literal");
              rgbe[size_t(x + i) * 4 + c] = uint8_t(v);
            }
            x += n;
          }
        }
      }
    } else {
      // flat scanline; the 4 bytes already read are the first pixel
      std::memcpy(rgbe.data(), head, 4);
      if (w > 1 &&
          !in.read(reinterpret_cast<char*>(rgbe.data() + 4), std::streamsize(size_t(w - 1) * 4)))
        throw Error(path + ": truncated flat scanline");
    }
    for (int x = 0; x < w; ++x) img.at(x, y) = detail::rgbe_to_float(&rgbe[size_t(x) * 4]);
  }
  return img;
}

}  // namespace retrace::hdr
