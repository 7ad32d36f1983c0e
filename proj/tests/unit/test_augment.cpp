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

#include <random>

#include "doctest.h"
#include "wsinuc/augment.hpp"
#include "wsinuc/errors.hpp"

using namespace wsinuc;

namespace {

RasterImage random_image(int w, int h, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<uint8_t> px(static_cast<size_t>(w) * h * 3);
  for (auto& b : px) b = static_cast<uint8_t>(rng() & 0xff);
  return RasterImage(w, h, std::move(px));
}

// Image that is white except for one marked pixel.
RasterImage marked(int w, int h, int x, int y) {
  RasterImage img(w, h, 255);
  img.at(x, y)[0] = 0;
  return img;
}

std::pair<int, int> find_mark(const RasterImage& img) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (img.at(x, y)[0] == 0) return {x, y};
    }
  }
  return {-1, -1};
}

}  // namespace

TEST_CASE("hflip example") {
  const AugBox box{10, 20, 4, 6, 2};
  const Augmented out = hflip(RasterImage(256, 256), std::span(&box, 1));
  CHECK(out.boxes[0] == AugBox{246, 20, 4, 6, 2});
}

TEST_CASE("flips and rotations move boxes with pixels") {
  const int w = 40, h = 24, x = 7, y = 3;
  const AugBox box{x + 0.5, y + 0.5, 2, 4, 1};
  for (int turns = 0; turns < 4; ++turns) {
    CAPTURE(turns);
    const Augmented r = rotate90(marked(w, h, x, y), std::span(&box, 1), turns);
    const auto [mx, my] = find_mark(r.image);
    CHECK(r.boxes[0].cx == mx + 0.5);
    CHECK(r.boxes[0].cy == my + 0.5);
    CHECK(r.boxes[0].w == (turns % 2 ? 4 : 2));
  }
  const Augmented v = vflip(marked(w, h, x, y), std::span(&box, 1));
  CHECK(find_mark(v.image) == std::pair{x, h - 1 - y});
  CHECK(v.boxes[0].cy == h - 1 - y + 0.5);
}

TEST_CASE("four quarter turns are the identity") {
  const RasterImage img = random_image(31, 17, 1);
  const std::vector<AugBox> boxes{{3.25, 4.5, 2, 3, 0}, {30, 16.875, 1, 1, 4}};
  const Augmented r = rotate90(img, boxes, 4);
  CHECK(r.image == img);
  CHECK(r.boxes == boxes);
  Augmented cur{img, boxes};
  for (int i = 0; i < 4; ++i) cur = rotate90(cur.image, cur.boxes, 1);
  CHECK(cur.image == img);
  CHECK(cur.boxes == boxes);
}

TEST_CASE("resized_crop") {
  const RasterImage img = random_image(64, 64, 2);
  const std::vector<AugBox> boxes{{10, 10, 4, 4, 0}, {60, 3, 2, 2, 1}};
  SUBCASE("full size at scale 1 is the identity") {
    const Augmented out = resized_crop(img, boxes, 0, 0, 64, 64, 64);
    CHECK(out.image == img);
    CHECK(out.boxes == boxes);
  }
  SUBCASE("boxes outside are dropped, straddling boxes clipped") {
    const Augmented out = resized_crop(img, boxes, 10, 0, 32, 32, 64);
    REQUIRE(out.boxes.size() == 1);
    // [8, 12) clipped to [10, 12), then scaled by 2.
    CHECK(out.boxes[0] == AugBox{2, 20, 4, 8, 0});
  }
  CHECK_THROWS_AS(resized_crop(img, boxes, 0, 0, 0, 10, 8), UsageError);
}

TEST_CASE("gaussian taps") {
  const auto taps = gaussian_taps(9, 1.0);
  REQUIRE(taps.size() == 9);
  double sum = 0;
  for (float t : taps) sum += t;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(taps[4] > taps[3]);
  CHECK(taps[0] == taps[8]);
  CHECK_THROWS_AS(gaussian_taps(4, 1.0), UsageError);
  const RasterImage flat(16, 16, 90);
  CHECK(gaussian_blur(flat, 9, 1.0) == flat);
}

TEST_CASE("elastic keeps boxes inside the image and sizes unchanged") {
  const RasterImage img = random_image(64, 64, 3);
  const std::vector<AugBox> boxes{{1, 1, 3, 5, 0}, {32, 32, 6, 6, 1}, {63.5, 10, 2, 2, 2}};
  std::mt19937_64 rng(4);
  const Augmented out = elastic(img, boxes, 0.5, 0.25, rng);
  REQUIRE(out.boxes.size() == boxes.size());
  for (size_t i = 0; i < boxes.size(); ++i) {
    CHECK(out.boxes[i].w == boxes[i].w);
    CHECK(out.boxes[i].h == boxes[i].h);
    CHECK(out.boxes[i].cx >= 0);
    CHECK(out.boxes[i].cx < 64);
  }
}

TEST_CASE("apply_augmentations") {
  const RasterImage img = random_image(64, 64, 5);
  const std::vector<AugBox> boxes{{10, 12, 4, 4, 0}, {40, 50, 8, 6, 3}};
  SUBCASE("all probabilities zero is the identity") {
    std::mt19937_64 rng(1);
    const Augmented out = apply_augmentations(img, boxes, AugmentationParams::disabled(), rng);
    CHECK(out.image == img);
    CHECK(out.boxes == boxes);
  }
  SUBCASE("deterministic in the seed") {
    AugmentationParams p;
    p.resized_crop.size = 64;
    std::mt19937_64 a(9), b(9);
    const Augmented x = apply_augmentations(img, boxes, p, a);
    const Augmented y = apply_augmentations(img, boxes, p, b);
    CHECK(x.image == y.image);
    CHECK(x.boxes == y.boxes);
  }
  SUBCASE("photometric ops leave boxes unchanged") {
    AugmentationParams p = AugmentationParams::disabled();
    p.blur.p = 1;
    p.hed.p = 1;
    std::mt19937_64 rng(2);
    CHECK(apply_augmentations(img, boxes, p, rng).boxes == boxes);
  }
  SUBCASE("validation") {
    AugmentationParams p;
    p.hflip_p = 1.5;
    std::mt19937_64 rng(2);
    CHECK_THROWS_AS(apply_augmentations(img, boxes, p, rng), UsageError);
    const AugBox outside{70, 10, 2, 2, 0};
    CHECK_THROWS_AS(apply_augmentations(img, std::span(&outside, 1), AugmentationParams{}, rng), UsageError);
  }
  SUBCASE("defaults") {
    const AugmentationParams p;
    CHECK(p.elastic.p == 0.2);
    CHECK(p.blur.kernel_size == 9);
    CHECK(p.hed.alpha == 0.04);
    CHECK(p.resized_crop.scale_min == 0.8);
    CHECK(p.rotate.angles == std::vector<int>{0, 90, 180, 270});
  }
}
