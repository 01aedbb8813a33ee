// Copyright 2026, The desnow Authors
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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "desnow/geom.hpp"
#include "desnow/random.hpp"

using namespace desnow;

namespace {

SensorConfig flat_sensor(int rows, int cols) {
  SensorConfig cfg;
  cfg.n_rows = rows;
  cfg.delta_h = 2.0 * std::numbers::pi / cols;
  cfg.max_range = 120.0;
  return cfg;
}

}  // namespace

TEST(RangeOf, KnownPoints) {
  EXPECT_EQ(range_of({0, 0, 0, 0, 0}), 0.0);
  EXPECT_EQ(range_of({3, 4, 0, 0, 0}), 5.0);
  EXPECT_NEAR(range_of({1, 1, 1, 0, 0}), 1.7320508, 1e-7);
}

TEST(Project, PythagoreanRange) {
  const auto img = project({{3, 4, 0, 0.5, 0}}, flat_sensor(4, 512));
  ASSERT_EQ(img.valid_count(), 1u);
  const int u = azimuth_column(3, 4, 2 * std::numbers::pi / 512, 512);
  EXPECT_EQ(img.range[img.index(0, u)], 5.0);
  EXPECT_EQ(img.intensity[img.index(0, u)], 0.5);
}

TEST(Project, ForwardAxisLandsOnMiddleColumn) {
  // (pi - atan2(0, 1)) / (2 pi / 512) = 256
  EXPECT_EQ(azimuth_column(1, 0, 2 * std::numbers::pi / 512, 512), 256);
  const auto img = project({{1, 0, 0, 0, 2}}, flat_sensor(4, 512));
  EXPECT_TRUE(img.valid[img.index(2, 256)]);
}

TEST(Project, EmptyCloudGivesInvalidImage) {
  const auto img = project({}, flat_sensor(8, 64));
  EXPECT_EQ(img.rows, 8);
  EXPECT_EQ(img.cols, 64);
  EXPECT_EQ(img.valid_count(), 0u);
  for (double r : img.range) EXPECT_EQ(r, 0.0);
}

TEST(Project, NearestReturnWins) {
  ProjectionStats st;
  const auto img = project({{10, 0.01, 0, 0.1, 1}, {4, 0.004, 0, 0.9, 1}, {12, 0.012, 0, 0.2, 1}}, flat_sensor(2, 64), &st);
  ASSERT_EQ(img.valid_count(), 1u);
  const int u = azimuth_column(10, 0.01, 2 * std::numbers::pi / 64, 64);
  EXPECT_NEAR(img.range[img.index(1, u)], std::hypot(4.0, 0.004), 1e-12);
  EXPECT_EQ(img.intensity[img.index(1, u)], 0.9);
  EXPECT_EQ(st.collisions, 2u);
}

TEST(Project, RejectsBadLaserIdsWithCount) {
  ProjectionStats st;
  const auto img = project({{1, 0, 0, 0, 5}, {1, 0, 0, 0, -1}, {2, 0, 0, 0, 0}}, flat_sensor(4, 64), &st);
  EXPECT_EQ(st.rejected_laser_id, 2u);
  EXPECT_EQ(st.projected, 1u);
  EXPECT_EQ(img.valid_count(), 1u);
}

TEST(Project, ColumnAlwaysInRange) {
  Rng rng = make_rng(11);
  for (int cols : {8, 64, 512, 1000}) {
    const double dh = 2 * std::numbers::pi / cols;
    for (int k = 0; k < 20000; ++k) {
      const double x = uniform(rng, -50, 50), y = uniform(rng, -50, 50);
      const int u = azimuth_column(x, y, dh, cols);
      ASSERT_GE(u, 0);
      ASSERT_LT(u, cols);
    }
    // exact axis directions including atan2 = -pi and +pi branches
    for (auto [x, y] : {std::pair{1.0, 0.0}, {-1.0, 0.0}, {-1.0, -0.0}, {0.0, 1.0}, {0.0, -1.0}}) {
      const int u = azimuth_column(x, y, dh, cols);
      EXPECT_GE(u, 0);
      EXPECT_LT(u, cols);
    }
  }
}

TEST(Unproject, AllInvalidGivesEmptyCloud) {
  const auto cfg = SensorConfig::spinning32(64);
  EXPECT_TRUE(unproject(RangeImage::empty_for(cfg), cfg).empty());
}

TEST(Unproject, SinglePixelRoundTrip) {
  const auto cfg = flat_sensor(1, 512);
  RangeImage img = RangeImage::empty_for(cfg);
  img.set(0, 256, 5.0);
  std::vector<std::size_t> pix;
  const auto cloud = unproject(img, cfg, &pix);
  ASSERT_EQ(cloud.size(), 1u);
  EXPECT_EQ(pix[0], img.index(0, 256));
  EXPECT_NEAR(range_of(cloud[0]), 5.0, 1e-12);
  EXPECT_NEAR(cloud[0].z, 0.0, 1e-12);
  EXPECT_EQ(project(cloud, cfg), [&] {
    RangeImage want = img;
    want.intensity.assign(want.size(), 0.0);
    want.range[want.index(0, 256)] = range_of(cloud[0]);
    return want;
  }());
}

TEST(Unproject, RejectsShapeMismatch) {
  const auto cfg = SensorConfig::spinning32(64);
  EXPECT_THROW((void)unproject(RangeImage(31, 64), cfg), std::invalid_argument);
}

TEST(RoundTrip, RandomImagesReproduceRangesAndMask) {
  const auto cfg = SensorConfig::spinning32(512, 80);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed, 3);
    RangeImage img = RangeImage::empty_for(cfg);
    for (std::size_t i = 0; i < img.size(); ++i)
      if (uniform01(rng) < 0.7) {
        img.range[i] = uniform(rng, 0.5, 80.0);
        img.valid[i] = 1;
      }
    const auto back = project(unproject(img, cfg), cfg);
    ASSERT_EQ(back.valid, img.valid);
    for (std::size_t i = 0; i < img.size(); ++i)
      if (img.valid[i]) ASSERT_NEAR(back.range[i], img.range[i], 1e-5 * img.range[i]);
  }
}

TEST(Flip, IsAnInvolutionAndMirrorsColumns) {
  RangeImage img(2, 5);
  img.labels.assign(img.size(), Label::Invalid);
  img.set(0, 0, 3.0);
  img.labels[img.index(0, 0)] = Label::Noise;
  img.set(1, 3, 7.0);
  const auto f = flip_horizontal(img);
  EXPECT_EQ(f.range[f.index(0, 4)], 3.0);
  EXPECT_EQ(f.labels[f.index(0, 4)], Label::Noise);
  EXPECT_EQ(f.range[f.index(1, 1)], 7.0);
  EXPECT_EQ(flip_horizontal(f), img);
}

TEST(SensorConfig, Validation) {
  SensorConfig cfg;
  EXPECT_EQ(cfg.n_cols(), 512);
  cfg.delta_h = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = SensorConfig::spinning32();
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_NEAR(cfg.elevation.front() * 180 / std::numbers::pi, 10.67, 1e-12);
  EXPECT_NEAR(cfg.elevation.back() * 180 / std::numbers::pi, -30.67, 1e-12);
  cfg.elevation.pop_back();
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(LabelMap, CleanForMatchesValidity) {
  RangeImage img(1, 3);
  img.set(0, 1, 2.0);
  const auto m = LabelMap::clean_for(img);
  EXPECT_EQ(m[0], Label::Invalid);
  EXPECT_EQ(m[1], Label::Clean);
  EXPECT_EQ(m.count(Label::Clean), 1u);
}
