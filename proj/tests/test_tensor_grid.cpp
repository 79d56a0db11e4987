#include <gtest/gtest.h>

#include "bfstvsr/grid.hpp"
#include "bfstvsr/rng.hpp"

using namespace bfstvsr;

TEST(FeatureGrid, ChannelMajorLayout) {
  FeatureGrid<float> g(2, 3, 4);
  EXPECT_EQ(g.size(), 24u);
  EXPECT_EQ(g.index(1, 2, 3), (1u * 3 + 2) * 4 + 3);
  g(1, 2, 3) = 7.0f;
  EXPECT_EQ(g.data()[23], 7.0f);
}

TEST(FeatureGrid, RejectsBadShape) {
  EXPECT_THROW(FeatureGrid<float>(0, 2, 2), std::invalid_argument);
  EXPECT_THROW(FeatureGrid<float>(1, 2, 2, std::vector<float>(3)), std::invalid_argument);
}

TEST(QueryGrid, IdentityScaleHitsCellCentres) {
  const auto q = make_query_grid(4, 4, 1.0);
  ASSERT_EQ(q.size(), 16u);
  EXPECT_EQ(q[0].x, 0.0);
  EXPECT_EQ(q[0].y, 0.0);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      EXPECT_EQ(q[i * 4 + j].x, j);
      EXPECT_EQ(q[i * 4 + j].y, i);
    }
  }
}

TEST(QueryGrid, HalfPixelOffsetAtScaleTwo) {
  const auto q = make_query_grid(2, 2, 2.0);
  EXPECT_DOUBLE_EQ(q[0].x, -0.25);
  EXPECT_DOUBLE_EQ(q[0].y, -0.25);
}

TEST(QueryGrid, SizeIsCeilOfScaledExtent) {
  EXPECT_EQ(make_query_grid(4, 4, 4.0).size(), 256u);
  EXPECT_EQ(make_query_grid(3, 5, 1.5).size(), 5u * 8u);
}

TEST(QueryGrid, RejectsInvalidArguments) {
  EXPECT_THROW(make_query_grid(1, 4, 2.0), std::invalid_argument);
  EXPECT_THROW(make_query_grid(4, 4, 0.5), std::invalid_argument);
}

TEST(NearestCell, RoundsToNearest) {
  const auto lk = nearest_cell(QueryPoint{1.3, 2.0, 0.0}, 4, 4);
  EXPECT_EQ(lk.cell_x, 1);
  EXPECT_EQ(lk.cell_y, 2);
  EXPECT_NEAR(lk.delta_x, 0.3, 1e-12);
  EXPECT_EQ(lk.delta_y, 0.0);
}

TEST(NearestCell, ClampsAtEdge) {
  const auto lk = nearest_cell(QueryPoint{-0.25, 0.0, 0.0}, 2, 2);
  EXPECT_EQ(lk.cell_x, 0);
  EXPECT_EQ(lk.cell_y, 0);
  EXPECT_DOUBLE_EQ(lk.delta_x, -0.25);
  EXPECT_EQ(lk.delta_y, 0.0);
}

TEST(NearestCell, HalfRoundsUp) {
  const auto lk = nearest_cell(QueryPoint{1.5, 1.5, 0.0}, 4, 4);
  EXPECT_EQ(lk.cell_x, 2);
  EXPECT_EQ(lk.cell_y, 2);
  EXPECT_DOUBLE_EQ(lk.delta_x, -0.5);
  EXPECT_DOUBLE_EQ(lk.delta_y, -0.5);
}

TEST(NearestCell, DeltaBoundedForRandomQueries) {
  Rng rng(3);
  for (int k = 0; k < 2000; ++k) {
    const auto q = make_query(rng.uniform(-1.0, 7.0), rng.uniform(-1.0, 5.0), 0.0, 5, 7);
    const auto lk = nearest_cell(q, 5, 7);
    EXPECT_LE(std::abs(lk.delta_x), 0.5);
    EXPECT_LE(std::abs(lk.delta_y), 0.5);
    EXPECT_GE(lk.cell_x, 0);
    EXPECT_LT(lk.cell_x, 7);
    EXPECT_GE(lk.cell_y, 0);
    EXPECT_LT(lk.cell_y, 5);
  }
}

TEST(BilinearSample, ExactAtCellCentre) {
  FeatureGrid<double> g(2, 3, 3);
  Rng rng(1);
  for (auto& v : g.data()) v = rng.uniform();
  const auto s = bilinear_sample(g, QueryPoint{2.0, 1.0, 0.0});
  EXPECT_EQ(s[0], g(0, 1, 2));
  EXPECT_EQ(s[1], g(1, 1, 2));
}

TEST(BilinearSample, ConstantGrid) {
  FeatureGrid<double> g(1, 4, 4, 0.37);
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const auto s = bilinear_sample(g, make_query(rng.uniform(-0.5, 3.5), rng.uniform(-0.5, 3.5), 0.0, 4, 4));
    EXPECT_NEAR(s[0], 0.37, 1e-15);
  }
}

TEST(BilinearSample, Midpoint) {
  FeatureGrid<double> g(1, 1, 2, std::vector<double>{0.0, 1.0});
  EXPECT_DOUBLE_EQ(bilinear_sample(g, QueryPoint{0.5, 0.0, 0.0})[0], 0.5);
}

TEST(BilinearSample, LinearInGridValues) {
  FeatureGrid<double> a(1, 3, 3);
  FeatureGrid<double> b(1, 3, 3);
  FeatureGrid<double> sum(1, 3, 3);
  Rng rng(4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.data()[i] = rng.uniform();
    b.data()[i] = rng.uniform();
    sum.data()[i] = 2.0 * a.data()[i] + 3.0 * b.data()[i];
  }
  const QueryPoint q{0.7, 1.2, 0.0};
  EXPECT_NEAR(bilinear_sample(sum, q)[0], 2.0 * bilinear_sample(a, q)[0] + 3.0 * bilinear_sample(b, q)[0], 1e-14);
}

TEST(NearestUpsample, IdentityAtScaleOne) {
  FeatureGrid<float> g(2, 3, 4);
  Rng rng(5);
  for (auto& v : g.data()) v = static_cast<float>(rng.uniform());
  EXPECT_EQ(nearest_upsample(g, 1.0), g);
}

TEST(NearestUpsample, SinglePixelBroadcast) {
  FeatureGrid<float> g(1, 1, 1, 0.25f);
  const auto up = nearest_upsample(g, 4.0);
  ASSERT_EQ(up.height(), 4);
  ASSERT_EQ(up.width(), 4);
  for (float v : up.data()) EXPECT_EQ(v, 0.25f);
}

TEST(NearestUpsample, DuplicatesColumns) {
  FeatureGrid<float> g(1, 1, 2, std::vector<float>{1.0f, 2.0f});
  const auto up = nearest_upsample(g, 2.0);
  ASSERT_EQ(up.height(), 2);
  ASSERT_EQ(up.width(), 4);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(up(0, i, 0), 1.0f);
    EXPECT_EQ(up(0, i, 1), 1.0f);
    EXPECT_EQ(up(0, i, 2), 2.0f);
    EXPECT_EQ(up(0, i, 3), 2.0f);
  }
}

TEST(NearestUpsample, StrideSubsamplingRecoversSource) {
  FeatureGrid<float> g(2, 3, 5);
  Rng rng(6);
  for (auto& v : g.data()) v = static_cast<float>(rng.uniform());
  for (int s : {2, 3}) {
    const auto up = nearest_upsample(g, s);
    for (int c = 0; c < 2; ++c) {
      for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 5; ++x) EXPECT_EQ(up(c, y * s, x * s), g(c, y, x));
      }
    }
  }
}

TEST(NearestUpsample, RejectsScaleBelowOne) {
  EXPECT_THROW(nearest_upsample(FeatureGrid<float>(1, 2, 2), 0.9), std::invalid_argument);
}
