// Copyright 2026 The resunet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "resunet/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace resunet {

namespace {

std::string next_token(std::istream& is) {
  std::string tok;
  char c;
  while (is.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(is, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

struct Header {
  std::size_t width, height;
};

Header read_header(std::istream& is, const std::string& magic, const std::filesystem::path& path) {
  if (next_token(is) != magic) throw DataError(path.string() + ": expected " + magic + " image");
  try {
    const auto w = std::stoul(next_token(is));
    const auto h = std::stoul(next_token(is));
    const auto maxval = std::stoul(next_token(is));
    if (maxval != 255 || w == 0 || h == 0) throw DataError(path.string() + ": unsupported header");
    return {w, h};
  } catch (const std::logic_error&) {
    throw DataError(path.string() + ": malformed header");
  }
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const LabelPlane& plane) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << "P5\n" << plane.width << ' ' << plane.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(plane.data.data()), static_cast<std::streamsize>(plane.data.size()));
}

LabelPlane read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  const Header h = read_header(is, "P5", path);
  LabelPlane plane(h.height, h.width);
  if (!is.read(reinterpret_cast<char*>(plane.data.data()), static_cast<std::streamsize>(plane.data.size())))
    throw DataError(path.string() + ": truncated pixel data");
  return plane;
}

void write_ppm(const std::filesystem::path& path, const Tensor<float>& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) throw ShapeError("write_ppm: expected [3,H,W], got " + to_string(rgb.shape()));
  const std::size_t h = rgb.dim(1), w = rgb.dim(2);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << "P6\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> buf(h * w * 3);
  for (std::size_t i = 0; i < h * w; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = std::clamp(rgb[c * h * w + i], 0.0f, 1.0f);
      buf[i * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Tensor<float> read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  const Header h = read_header(is, "P6", path);
  std::vector<unsigned char> buf(h.height * h.width * 3);
  if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw DataError(path.string() + ": truncated pixel data");
  Tensor<float> out(Shape{3, h.height, h.width});
  const std::size_t plane = h.height * h.width;
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c) out[c * plane + i] = static_cast<float>(buf[i * 3 + c]) / 255.0f;
  return out;
}

}  // namespace resunet
