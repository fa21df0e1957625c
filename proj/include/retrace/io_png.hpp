// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// PNG preview output: 8-bit RGB, gamma 2.2 after a simple exposure scale.
// Write-only; linear data lives in EXR.

#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "retrace/image.hpp"

namespace retrace::png {

namespace detail {

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

inline void put_chunk(std::ofstream& out, const char type[4], const std::vector<uint8_t>& payload) {
  std::vector<uint8_t> buf;
  put_u32(buf, uint32_t(payload.size()));
  buf.insert(buf.end(), type, type + 4);
  buf.insert(buf.end(), payload.begin(), payload.end());
  uint32_t crc = uint32_t(crc32(0, buf.data() + 4, uInt(buf.size() - 4)));
  put_u32(buf, crc);
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
}

}  // namespace detail

inline uint8_t tonemap_channel(double linear, double exposure) {
  double v = clamp(linear * exposure, 0.0, 1.0);
  return uint8_t(clamp(std::pow(v, 1.0 / 2.2) * 255.0 + 0.5, 0.0, 255.0));
}

inline void write(const std::string& path, const Image& img, double exposure = 1.0) {
  const int w = img.width(), h = img.height();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot open for writing");

  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<uint8_t> ihdr;
  detail::put_u32(ihdr, uint32_t(w));
  detail::put_u32(ihdr, uint32_t(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  detail::put_chunk(out, "IHDR", ihdr);

  std::vector<uint8_t> raw;
  raw.reserve(size_t(h) * (1 + size_t(w) * 3));
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);  // filter: none
    for (int x = 0; x < w; ++x) {
      const Vec3& c = img.at(x, y);
      raw.push_back(tonemap_channel(c.x, exposure));
      raw.push_back(tonemap_channel(c.y, exposure));
      raw.push_back(tonemap_channel(c.z, exposure));
    }
  }
  uLongf zlen = compressBound(uLong(raw.size()));
  std::vector<uint8_t> zdata(zlen);
  if (compress2(zdata.data(), &zlen, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw Error(path + ": deflate failed");
  zdata.resize(zlen);
  detail::put_chunk(out, "IDAT", zdata);
  detail::put_chunk(out, "IEND", {});
  if (!out) throw Error(path + ": write failed");
}

}  // namespace retrace::png
