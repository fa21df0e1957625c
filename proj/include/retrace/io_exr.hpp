// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal OpenEXR 2.0 scanline codec. Writes uncompressed FLOAT RGB;
// reads NONE/ZIPS/ZIP-compressed HALF or FLOAT images carrying R,G,B
// channels. Deep, tiled and multi-part files are out of scope.

#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "retrace/image.hpp"

namespace retrace::exr {

namespace detail {

inline void put_bytes(std::string& out, const void* p, size_t n) {
  out.append(reinterpret_cast<const char*>(p), n);
}
template <typename T>
void put(std::string& out, T v) {
  put_bytes(out, &v, sizeof(T));  // little-endian hosts only
}
inline void put_str(std::string& out, const std::string& s) {
  out.append(s);
  out.push_back('\0');
}

inline void put_attr(std::string& out, const std::string& name, const std::string& type,
                     const std::string& payload) {
  put_str(out, name);
  put_str(out, type);
  put<int32_t>(out, int32_t(payload.size()));
  out.append(payload);
}

inline float half_to_float(uint16_t h) {
  uint32_t sign = (h >> 15) & 1u;
  uint32_t exp = (h >> 10) & 0x1Fu;
  uint32_t mant = h & 0x3FFu;
  uint32_t f;
  if (exp == 0) {
    if (mant == 0) {
      f = sign << 31;
    } else {
      // subnormal half -> normalized float
      exp = 127 - 15 + 1;
      while ((mant & 0x400u) == 0) {
        mant <<= 1;
        exp--;
      }
      mant &= 0x3FFu;
      f = (sign << 31) | (exp << 23) | (mant << 13);
    }
  } else if (exp == 31) {
    f = (sign << 31) | 0x7F800000u | (mant << 13);
  } else {
    f = (sign << 31) | ((exp - 15 + 127) << 23) | (mant << 13);
  }
  float out;
  std::memcpy(&out, &f, 4);
  return out;
}

struct Reader {
  const uint8_t* p;
  const uint8_t* end;
  std::string path;

  void need(size_t n) const {
    if (size_t(end - p) < n) throw Error(path + ": truncated EXR data");
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, p, sizeof(T));
    p += sizeof(T);
    return v;
  }
  std::string get_str() {
    const uint8_t* s = p;
    while (p < end && *p != 0) ++p;
    need(1);
    std::string out(reinterpret_cast<const char*>(s), size_t(p - s));
    ++p;
    return out;
  }
  void skip(size_t n) {
    need(n);
    p += n;
  }
};

// EXR zip payloads are delta-coded and de-interleaved after deflate.
inline void unpredict(std::vector<uint8_t>& buf) {
  for (size_t i = 1; i < buf.size(); ++i) buf[i] = uint8_t(buf[i] + buf[i - 1] - 128);
  std::vector<uint8_t> out(buf.size());
  size_t half = (buf.size() + 1) / 2;
  const uint8_t* a = buf.data();
  const uint8_t* b = buf.data() + half;
  for (size_t i = 0; i < buf.size(); ++i) out[i] = (i & 1) ? *b++ : *a++;
  buf.swap(out);
}

inline std::vector<uint8_t> inflate_chunk(const uint8_t* src, size_t n, size_t expected) {
  std::vector<uint8_t> out(expected);
  uLongf dst_len = uLongf(expected);
  if (uncompress(out.data(), &dst_len, src, uLong(n)) != Z_OK || dst_len != expected)
    throw Error("EXR: zip chunk decompression failed");
  return out;
}

}  // namespace detail

// Writes a linear RGB image as scanline FLOAT channels, no compression.
inline void write(const std::string& path, const Image& img) {
  using namespace detail;
  const int w = img.width(), h = img.height();
  if (w <= 0 || h <= 0) throw Error(path + ": cannot write empty image");

  std::string hdr;
  put<uint32_t>(hdr, 20000630u);  // magic
  put<uint32_t>(hdr, 2u);        // version 2, scanline, no flags

  std::string chlist;
  for (const char* name : {"B", "G", "R"}) {
    put_str(chlist, name);
    put<int32_t>(chlist, 2);  // FLOAT
    put<uint32_t>(chlist, 0);
    put<int32_t>(chlist, 1);
    put<int32_t>(chlist, 1);
  }
  chlist.push_back('\0');
  put_attr(hdr, "channels", "chlist", chlist);

  std::string comp(1, char(0));  // NONE
  put_attr(hdr, "compression", "compression", comp);

  std::string box;
  put<int32_t>(box, 0);
  put<int32_t>(box, 0);
  put<int32_t>(box, w - 1);
  put<int32_t>(box, h - 1);
  put_attr(hdr, "dataWindow", "box2i", box);
  put_attr(hdr, "displayWindow", "box2i", box);

  std::string line_order(1, char(0));  // increasing Y
  put_attr(hdr, "lineOrder", "lineOrder", line_order);

  std::string f1;
  put<float>(f1, 1.0f);
  put_attr(hdr, "pixelAspectRatio", "float", f1);

  std::string swc;
  put<float>(swc, 0.0f);
  put<float>(swc, 0.0f);
  put_attr(hdr, "screenWindowCenter", "v2f", swc);
  put_attr(hdr, "screenWindowWidth", "float", f1);
  hdr.push_back('\0');  // end of header

  const uint64_t table_start = hdr.size();
  const uint64_t chunk_bytes = 8 + size_t(w) * 3 * 4;
  std::string table;
  for (int y = 0; y < h; ++y)
    put<uint64_t>(table, table_start + uint64_t(h) * 8 + uint64_t(y) * chunk_bytes);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot open for writing");
  out << hdr << table;

  std::vector<float> row(size_t(w) * 3);
  for (int y = 0; y < h; ++y) {
    std::string chunk;
    put<int32_t>(chunk, y);
    put<int32_t>(chunk, int32_t(size_t(w) * 3 * 4));
    for (int x = 0; x < w; ++x) row[x] = float(img.at(x, y).z);               // B
    for (int x = 0; x < w; ++x) row[size_t(w) + x] = float(img.at(x, y).y);   // G
    for (int x = 0; x < w; ++x) row[2 * size_t(w) + x] = float(img.at(x, y).x);  // R
    put_bytes(chunk, row.data(), row.size() * 4);
    out << chunk;
  }
  if (!out) throw Error(path + ": write failed");
}

inline Image read(const std::string& path) {
  using namespace detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path + ": cannot open");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{bytes.data(), bytes.data() + bytes.size(), path};

  if (r.get<uint32_t>() != 20000630u) throw Error(path + ": not an EXR file");
  uint32_t version = r.get<uint32_t>();
  if ((version & 0x200u) || (version & 0x800u) || (version & 0x1000u))
    throw Error(path + ": tiled/deep/multi-part EXR is not supported");

  struct Channel {
    std::string name;
    int type;  // 0 uint, 1 half, 2 float
  };
  std::vector<Channel> channels;
  uint8_t compression = 0;
  int32_t xmin = 0, ymin = 0, xmax = -1, ymax = -1;

  for (;;) {
    std::string name = r.get_str();
    if (name.empty()) break;
    std::string type = r.get_str();
    int32_t size = r.get<int32_t>();
    if (size < 0) throw Error(path + ": bad attribute size");
    if (name == "channels" && type == "chlist") {
      const uint8_t* attr_end = r.p + size;
      for (;;) {
        std::string cname = r.get_str();
        if (cname.empty()) break;
        Channel c;
        c.name = cname;
        c.type = int(r.get<int32_t>());
        r.skip(4 + 4 + 4);  // pLinear+pad, xSampling, ySampling
        channels.push_back(c);
      }
      if (r.p != attr_end) throw Error(path + ": malformed channel list");
    } else if (name == "compression" && type == "compression") {
      compression = r.get<uint8_t>();
      r.skip(size_t(size) - 1);
    } else if (name == "dataWindow" && type == "box2i") {
      xmin = r.get<int32_t>();
      ymin = r.get<int32_t>();
      xmax = r.get<int32_t>();
      ymax = r.get<int32_t>();
    } else {
      r.skip(size_t(size));
    }
  }

  const int w = xmax - xmin + 1;
  const int h = ymax - ymin + 1;
  if (w <= 0 || h <= 0) throw Error(path + ": bad data window");
  if (channels.empty()) throw Error(path + ": no channels");
  if (compression != 0 && compression != 2 && compression != 3)
    throw Error(path + ": unsupported compression (only NONE/ZIPS/ZIP)");

  int idx_r = -1, idx_g = -1, idx_b = -1;
  size_t bytes_per_scanline = 0;
  for (size_t i = 0; i < channels.size(); ++i) {
    if (channels[i].type != 1 && channels[i].type != 2)
      throw Error(path + ": unsupported channel type");
    if (channels[i].name == "R") idx_r = int(i);
    if (channels[i].name == "G") idx_g = int(i);
    if (channels[i].name == "B") idx_b = int(i);
    bytes_per_scanline += size_t(w) * (channels[i].type == 1 ? 2 : 4);
  }
  if (idx_r < 0 || idx_g < 0 || idx_b < 0) throw Error(path + ": needs R, G and B channels");

  const int rows_per_chunk = compression == 3 ? 16 : 1;
  const int n_chunks = (h + rows_per_chunk - 1) / rows_per_chunk;
  std::vector<uint64_t> offsets(n_chunks);
  for (int i = 0; i < n_chunks; ++i) offsets[i] = r.get<uint64_t>();

  Image img(w, h);
  for (int c = 0; c < n_chunks; ++c) {
    if (offsets[c] + 8 > bytes.size()) throw Error(path + ": chunk offset out of range");
    Reader cr{bytes.data() + offsets[c], bytes.data() + bytes.size(), path};
    int32_t y0 = cr.get<int32_t>() - ymin;
    int32_t data_size = cr.get<int32_t>();
    cr.need(size_t(data_size));
    int rows = std::min(rows_per_chunk, h - y0);
    size_t raw_size = bytes_per_scanline * size_t(rows);

    std::vector<uint8_t> raw;
    if (compression == 0) {
      raw.assign(cr.p, cr.p + raw_size);
    } else {
      if (size_t(data_size) >= raw_size) {
        raw.assign(cr.p, cr.p + raw_size);  // stored uncompressed
      } else {
        raw = inflate_chunk(cr.p, size_t(data_size), raw_size);
        unpredict(raw);
      }
    }

    for (int row = 0; row < rows; ++row) {
      const uint8_t* line = raw.data() + bytes_per_scanline * size_t(row);
      size_t off = 0;
      for (size_t ci = 0; ci < channels.size(); ++ci) {
        const int type = channels[ci].type;
        const size_t stride = type == 1 ? 2 : 4;
        int target = ci == size_t(idx_r) ? 0 : ci == size_t(idx_g) ? 1 : ci == size_t(idx_b) ? 2 : -1;
        if (target >= 0) {
          for (int x = 0; x < w; ++x) {
            double v;
            if (type == 1) {
              uint16_t hbits;
              std::memcpy(&hbits, line + off + stride * x, 2);
              v = half_to_float(hbits);
            } else {
              float f;
              std::memcpy(&f, line + off + stride * x, 4);
              v = f;
            }
            img.at(x, y0 + row)[target] = v;
          }
        }
        off += stride * size_t(w);
      }
    }
  }
  return img;
}

}  // namespace retrace::exr
