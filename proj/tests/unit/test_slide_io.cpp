// Copyright 2026 The wsinuc Authors. All Rights Reserved.
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

#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "wsinuc/errors.hpp"
#include "wsinuc/raster.hpp"
#include "wsinuc/slide_io.hpp"

using namespace wsinuc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "wsinuc_unit_slide_io";
  fs::create_directories(dir);
  return dir / name;
}

RasterImage noise_image(int w, int h, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<uint8_t> px(static_cast<size_t>(w) * h * 3);
  for (auto& b : px) b = static_cast<uint8_t>(rng() & 0xff);
  return RasterImage(w, h, std::move(px));
}

}  // namespace

TEST_CASE("crop pads with white outside the image") {
  const RasterImage img = noise_image(4, 4, 1);
  const RasterImage c = img.crop(-1, -1, 3, 3);
  CHECK(c.width() == 3);
  CHECK(c.at(0, 0)[0] == 255);
  CHECK(c.at(1, 1)[0] == img.at(0, 0)[0]);
  CHECK(c.at(2, 2)[2] == img.at(1, 1)[2]);
}

TEST_CASE("resize_area is an exact copy at the same size and averages blocks") {
  const RasterImage img = noise_image(8, 6, 2);
  CHECK(resize_area(img, 8, 6) == img);
  RasterImage checker(2, 2, 0);
  checker.at(0, 0)[0] = 200;
  checker.at(1, 1)[0] = 100;
  const RasterImage one = resize_area(checker, 1, 1);
  CHECK(one.at(0, 0)[0] == 75);
}

TEST_CASE("PNG round trip keeps pixels and resolution") {
  const RasterImage img = noise_image(37, 21, 3);
  const fs::path p = scratch("rt.png");
  write_png(p, img, 0.25);
  CHECK(read_png(p) == img);
  REQUIRE(read_png_mpp(p).has_value());
  CHECK(*read_png_mpp(p) == doctest::Approx(0.25).epsilon(1e-3));
  const SlideSource s = SlideSource::open(p);
  CHECK(s.width() == 37);
  CHECK(s.height() == 21);
  CHECK(s.mpp() == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("pyramidal TIFF round trip") {
  const RasterImage img = noise_image(600, 333, 4);
  const fs::path p = scratch("rt.tif");
  write_pyramidal_tiff(p, img, 0.5);
  const SlideSource s = SlideSource::open(p);
  CHECK(s.mpp() == doctest::Approx(0.5).epsilon(1e-6));
  REQUIRE(s.levels().size() == 3);
  CHECK(s.levels()[1].width == 150);
  CHECK(s.levels()[1].height == 84);
  CHECK(s.levels()[2].width == 38);
  CHECK(s.read_region(0, 0, 600, 333) == img);
  // Off-slide reads are white.
  const RasterImage edge = s.read_region(590, 330, 20, 10);
  CHECK(edge.at(0, 0)[1] == img.at(590, 330)[1]);
  CHECK(edge.at(15, 5)[0] == 255);
  // Independent handles read the same pixels.
  const SlideSource s2 = s.reopen();
  CHECK(s2.read_region(100, 100, 50, 50) == img.crop(100, 100, 50, 50));
  CHECK(s.content_hash() == s2.content_hash());
  CHECK(s.content_hash().size() == 64);
}

TEST_CASE("scaled reads and thumbnails") {
  const RasterImage img(1024, 512, 200);
  const SlideSource s = SlideSource::from_raster(img, 0.25);
  const Thumbnail t = thumbnail(s, 256);
  CHECK(t.image.width() == 256);
  CHECK(t.image.height() == 128);
  CHECK(t.scale == doctest::Approx(4.0));
  const RasterImage r = s.read_region_scaled({0, 0, 512, 512}, 256, 256);
  CHECK(r.at(17, 200)[0] == 200);
  CHECK_THROWS_AS(thumbnail(s, 8), UsageError);
}

TEST_CASE("pyramid validation") {
  CHECK_NOTHROW(validate_pyramid({{1, 100, 50}, {4, 25, 13}}));
  CHECK_THROWS_AS(validate_pyramid({{1, 100, 50}, {4, 25, 12}}), IoError);
  CHECK_THROWS_AS(validate_pyramid({{2, 50, 25}}), IoError);
  CHECK_THROWS_AS(validate_pyramid({{1, 100, 50}, {1, 100, 50}}), IoError);
}

TEST_CASE("unreadable inputs are I/O errors") {
  CHECK_THROWS_AS(SlideSource::open(scratch("missing.tif")), IoError);
  const fs::path junk = scratch("junk.png");
  std::ofstream(junk) << "not an image";
  CHECK_THROWS_AS(SlideSource::open(junk), IoError);
  const fs::path other = scratch("file.bmp");
  std::ofstream(other) << "BM";
  CHECK_THROWS_AS(SlideSource::open(other), IoError);
}

TEST_CASE("slides without a resolution need an override") {
  const fs::path p = scratch("nompp.png");
  write_png(p, noise_image(8, 8, 5));
  CHECK_THROWS_AS(SlideSource::open(p), IoError);
  CHECK(SlideSource::open(p, 0.5).mpp() == 0.5);
}

TEST_CASE("slide area") {
  CHECK(slide_area_mm2(4000, 4000, 0.25) == doctest::Approx(1.0));
}
