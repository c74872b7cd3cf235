// Copyright 2026 The panfuse Authors.
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

#include <png.h>

#include <cstring>

#include "panfuse/errors.hpp"
#include "panfuse/format.hpp"

namespace panfuse {

namespace {

png_image blank_image() {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  return image;
}

void check_for_write(const IdImage& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.rgb.size() != static_cast<std::size_t>(image.width * image.height * 3)) {
    throw InvalidInputError("write_png: image buffer does not match its dimensions");
  }
}

}  // namespace

IdImage read_png(const std::filesystem::path& path) {
  png_image image = blank_image();
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  IdImage out;
  out.width = image.width;
  out.height = image.height;
  out.rgb.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.rgb.data(), 0, nullptr)) {
    std::string message = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + message);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const IdImage& image) {
  check_for_write(image);
  png_image desc = blank_image();
  desc.width = static_cast<png_uint_32>(image.width);
  desc.height = static_cast<png_uint_32>(image.height);
  desc.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&desc, path.c_str(), 0, image.rgb.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + desc.message);
  }
}

std::vector<std::uint8_t> encode_png(const IdImage& image) {
  check_for_write(image);
  png_image desc = blank_image();
  desc.width = static_cast<png_uint_32>(image.width);
  desc.height = static_cast<png_uint_32>(image.height);
  desc.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0, image.rgb.data(), 0, nullptr)) {
    throw IoError(std::string("cannot size PNG: ") + desc.message);
  }
  std::vector<std::uint8_t> bytes(size);
  if (!png_image_write_to_memory(&desc, bytes.data(), &size, 0, image.rgb.data(), 0, nullptr)) {
    throw IoError(std::string("cannot encode PNG: ") + desc.message);
  }
  bytes.resize(size);
  return bytes;
}

}  // namespace panfuse
