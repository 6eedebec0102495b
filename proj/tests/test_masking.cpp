#include "mmwfm/masking.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace mmwfm;

TEST(Mask, Counts) {
  EXPECT_EQ(visible_count(196, 0.7), 59);
  EXPECT_EQ(visible_count(256, 0.7), 77);
  EXPECT_EQ(masked_count(100, 0.29), 29);
  const auto p = sample_mask(196, 0.7, 1);
  EXPECT_EQ(p.kept.size(), 59u);
  EXPECT_EQ(p.masked.size(), 137u);
}

TEST(Mask, ZeroRatioKeepsAll) {
  const auto p = sample_mask(10, 0.0, 5);
  EXPECT_TRUE(p.masked.empty());
  EXPECT_EQ(p.kept.size(), 10u);
  const Mat<double> x = Mat<double>::Random(10, 3);
  EXPECT_TRUE(apply_mask(x, p) == x);
}

TEST(Mask, PartitionAndDeterminism) {
  const auto a = sample_mask(50, 0.6, 42), b = sample_mask(50, 0.6, 42);
  EXPECT_EQ(a.masked, b.masked);
  std::set<int> all(a.kept.begin(), a.kept.end());
  all.insert(a.masked.begin(), a.masked.end());
  EXPECT_EQ(all.size(), 50u);
  EXPECT_TRUE(std::is_sorted(a.kept.begin(), a.kept.end()));
  EXPECT_NE(sample_mask(50, 0.6, 43).masked, a.masked);
}

TEST(Mask, RatioValidation) {
  EXPECT_THROW(sample_mask(10, 1.0, 0), ConfigError);
  EXPECT_THROW(sample_mask(10, -0.1, 0), ConfigError);
  EXPECT_THROW(sample_mask(0, 0.5, 0), ConfigError);
}

TEST(Mask, UniformMarginals) {
  std::vector<int> hits(10, 0);
  for (std::uint64_t s = 0; s < 10000; ++s)
    for (int i : sample_mask(10, 0.5, s).masked) ++hits[std::size_t(i)];
  for (int h : hits) EXPECT_NEAR(h / 10000.0, 0.5, 0.02);
}

TEST(Mask, ApplyKeepsRowsInOrder) {
  Mat<double> x(4, 2);
  x << 1, 1, 2, 2, 3, 3, 4, 4;
  const auto plan = plan_from_masked(4, {1, 3});
  const auto v = apply_mask(x, plan);
  ASSERT_EQ(v.rows(), 2);
  EXPECT_EQ(v(0, 0), 1);
  EXPECT_EQ(v(1, 0), 3);
  EXPECT_THROW(apply_mask(Mat<double>(3, 2), plan), ShapeError);
}

TEST(Restore, PlacesFeaturesAndMaskToken) {
  Param<double> token(1, 2);
  token.value << 10, 20;
  const auto plan = plan_from_masked(4, {0, 2});
  Mat<double> vis(2, 2);
  vis << 1, 2, 3, 4;
  Mat<double> pos(4, 2);
  pos << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8;
  const auto full = restore(vis, plan, token, pos);
  EXPECT_TRUE(full.row(0).isApprox(token.value + pos.row(0)));
  EXPECT_TRUE(full.row(1).isApprox(vis.row(0) + pos.row(1)));
  EXPECT_TRUE(full.row(2).isApprox(token.value + pos.row(2)));
  EXPECT_TRUE(full.row(3).isApprox(vis.row(1) + pos.row(3)));
  // empty mask: features + pos
  const auto all = full_plan(2);
  EXPECT_TRUE(restore<double>(vis, all, token, pos.topRows(2)).isApprox(vis + pos.topRows(2)));
  EXPECT_THROW(restore<double>(vis, plan, token, pos.topRows(3)), ShapeError);
}

TEST(Restore, InverseOnKeptSet) {
  const Mat<double> x = Mat<double>::Random(6, 3);
  const auto plan = sample_mask(6, 0.5, 9);
  Param<double> token(1, 3);
  const auto full = restore<double>(apply_mask(x, plan), plan, token, Mat<double>::Zero(6, 3));
  for (int i : plan.kept) EXPECT_TRUE(full.row(i) == x.row(i));
}

TEST(Restore, BackwardAccumulatesMaskToken) {
  Param<double> token(1, 2);
  const auto plan = plan_from_masked(3, {0, 2});
  Mat<double> d(3, 2);
  d << 1, 2, 3, 4, 5, 6;
  const auto dv = restore_backward(d, plan, token);
  EXPECT_TRUE(dv.row(0) == d.row(1));
  EXPECT_DOUBLE_EQ(token.grad(0, 0), 6.0);
  EXPECT_DOUBLE_EQ(token.grad(0, 1), 8.0);
}
