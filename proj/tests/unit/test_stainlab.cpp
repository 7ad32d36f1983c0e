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

#include <cmath>
#include <random>

#include "doctest.h"
#include "wsinuc/errors.hpp"
#include "wsinuc/stainlab.hpp"
#include "wsinuc/synthetic.hpp"

using namespace wsinuc;

namespace {

RasterImage random_image(int w, int h, int lo, int hi, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(lo, hi);
  std::vector<uint8_t> px(static_cast<size_t>(w) * h * 3);
  for (auto& b : px) b = static_cast<uint8_t>(u(rng));
  return RasterImage(w, h, std::move(px));
}

int max_abs_diff(const RasterImage& a, const RasterImage& b) {
  int worst = 0;
  for (size_t i = 0; i < a.pixels().size(); ++i) {
    worst = std::max(worst, std::abs(int(a.pixels()[i]) - int(b.pixels()[i])));
  }
  return worst;
}

}  // namespace

TEST_CASE("stain rows are unit norm and invertible") {
  const StainMatrix m = StainMatrix::ruifrok_johnson();
  for (const auto& row : m.rows()) {
    CHECK(std::hypot(row[0], row[1], row[2]) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(m.condition_number() < 1e6);
  const Mat3& a = m.rows();
  const Mat3& inv = m.inverse();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += a[i][k] * inv[k][j];
      CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(StainMatrix::from_rows({{{0, 0, 0}, {0, 1, 0}, {0, 0, 1}}}), UsageError);
  CHECK_THROWS_AS(StainMatrix::from_rows({{{1, 0, 0}, {1, 1e-9, 0}, {0, 0, 1}}}), UsageError);
}

TEST_CASE("rgb_to_hed examples") {
  const StainMatrix m = StainMatrix::ruifrok_johnson();
  SUBCASE("white is zero density") {
    const HedImage hed = rgb_to_hed(RasterImage(2, 2, 255), m);
    for (float v : hed.at(1, 1)) CHECK(std::abs(v) < 5e-3);
  }
  SUBCASE("black stays finite") {
    const HedImage hed = rgb_to_hed(RasterImage(1, 1, 0), m);
    for (float v : hed.at(0, 0)) CHECK(std::isfinite(v));
  }
  SUBCASE("pure hematoxylin") {
    const auto& h = m.rows()[0];
    RasterImage px(1, 1);
    for (int c = 0; c < 3; ++c) px.at(0, 0)[c] = static_cast<uint8_t>(std::lround(channel_from_od(h[c])));
    const auto d = rgb_to_hed(px, m).at(0, 0);
    CHECK(d[0] == doctest::Approx(1.0).epsilon(0.03));
    CHECK(std::abs(d[1]) < 0.03);
    CHECK(std::abs(d[2]) < 0.03);

    HedImage unit(1, 1);
    unit.h[0] = 1.0f;
    const RasterImage back = hed_to_rgb(unit, m);
    CHECK(max_abs_diff(back, px) <= 1);
  }
  SUBCASE("zero densities map to 254") {
    const RasterImage img = hed_to_rgb(HedImage(3, 2), m);
    for (uint8_t v : img.pixels()) CHECK(v == 254);
  }
}

TEST_CASE("OD-space linearity") {
  const StainMatrix m = StainMatrix::ruifrok_johnson();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1.5);
  for (int t = 0; t < 100; ++t) {
    const Vec3 a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
    const Vec3 s{a[0] + b[0], a[1] + b[1], a[2] + b[2]};
    const Vec3 da = m.densities_from_od(a), db = m.densities_from_od(b), ds = m.densities_from_od(s);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(da[k] + db[k] - ds[k]) < 1e-6);
  }
}

TEST_CASE("round trip within two levels away from clipping") {
  const StainMatrix m = StainMatrix::ruifrok_johnson();
  const RasterImage img = random_image(100, 100, 8, 247, 12);
  CHECK(max_abs_diff(hed_to_rgb(rgb_to_hed(img, m), m), img) <= 2);
}

TEST_CASE("hed_augment") {
  const StainMatrix m = StainMatrix::ruifrok_johnson();
  const RasterImage img = random_image(64, 64, 8, 247, 13);
  const RasterImage rt = hed_to_rgb(rgb_to_hed(img, m), m);

  SUBCASE("zero perturbation is the round trip") {
    std::mt19937_64 rng(1);
    CHECK(hed_augment(img, 0, 0, rng, m) == rt);
  }
  SUBCASE("deterministic in the seed") {
    std::mt19937_64 a(5), b(5);
    CHECK(hed_augment(img, 0.04, 0.04, a, m) == hed_augment(img, 0.04, 0.04, b, m));
  }
  SUBCASE("bounded by the analytic worst case") {
    const double alpha = 0.04, beta = 0.04;
    std::mt19937_64 rng(6);
    const RasterImage out = hed_augment(img, alpha, beta, rng, m);
    const HedImage hed = rgb_to_hed(img, m);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const auto c = hed.at(x, y);
        for (int j = 0; j < 3; ++j) {
          // |dOD_j| <= sum_k (alpha |c_k| + beta) |m_kj|
          double dod = 0;
          for (int k = 0; k < 3; ++k) dod += (alpha * std::abs(c[k]) + beta) * std::abs(m.rows()[k][j]);
          const double v = rt.at(x, y)[j] + 1.0;
          const double bound = v * (std::pow(10.0, dod) - 1.0) + 1.0;
          CHECK(std::abs(int(out.at(x, y)[j]) - int(rt.at(x, y)[j])) <= bound);
        }
      }
    }
  }
}

TEST_CASE("draw_hed_perturbation ranges") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const HedPerturbation p = draw_hed_perturbation(0.04, 0.1, rng);
    for (int k = 0; k < 3; ++k) {
      CHECK(std::abs(p.scale[k] - 1) <= 0.04);
      CHECK(std::abs(p.shift[k]) <= 0.1);
    }
  }
}

TEST_CASE("tissue masks") {
  const StainMatrix m = StainMatrix::ruifrok_johnson();
  SUBCASE("white is background") {
    const TissueMask mask = compute_tissue_mask(RasterImage(32, 16, 255), 1, 1, m, {});
    CHECK(mask.count() == 0);
    CHECK(mask.width == 32);
    CHECK(mask.height == 16);
  }
  SUBCASE("zero thresholds select everything") {
    TissueThresholds t;
    t.density = {0, 0, 0};
    const TissueMask mask = compute_tissue_mask(RasterImage(32, 16, 255), 1, 1, m, t);
    CHECK(mask.fraction() == 1.0);
  }
  SUBCASE("raising a threshold never adds pixels") {
    const HedImage hed = rgb_to_hed(random_image(50, 50, 100, 255, 3), m);
    const TissueMask lo = threshold_tissue(hed, {0.05, 0.05, 0.05});
    const TissueMask hi = threshold_tissue(hed, {0.2, 0.05, 0.3});
    for (size_t i = 0; i < lo.bits.size(); ++i) CHECK(hi.bits[i] <= lo.bits[i]);
  }
  SUBCASE("synthetic slide nuclei fall inside the mask") {
    SyntheticSlideSpec spec;
    spec.width = 1024;
    spec.height = 1024;
    spec.nucleus_count = 300;
    spec.rng_seed = 4;
    spec.tissue_inset = 64;
    const SyntheticSlide s = generate_synthetic_slide(spec);
    const TissueMask mask = compute_tissue_mask(resize_area(s.image, 256, 256), 4, 4, m, {});
    size_t inside = 0;
    for (const auto& a : s.annotations.records) {
      inside += mask.at(static_cast<int>(a.cx / 4), static_cast<int>(a.cy / 4));
    }
    CHECK(inside >= 0.95 * s.annotations.records.size());
    CHECK(!mask.at(2, 2));  // inset border is white
  }
}

TEST_CASE("morphology") {
  std::vector<uint8_t> bits(9 * 9, 0);
  bits[4 * 9 + 4] = 1;
  const auto grown = dilate(bits, 9, 9, 1);
  CHECK(grown[3 * 9 + 4] == 1);
  CHECK(grown[3 * 9 + 3] == 0);  // disk of radius 1 excludes diagonals
  CHECK(erode(grown, 9, 9, 1) == bits);
  std::vector<uint8_t> full(9 * 9, 1);
  CHECK(erode(full, 9, 9, 3) == full);
}
