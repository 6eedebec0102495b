#include "mmwfm/embedding.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mmwfm;

TEST(Sinusoid1D, RowZero) {
  const auto t = sinusoidal_1d<double>(5, 8);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(t(0, 2 * i), 0.0);
    EXPECT_EQ(t(0, 2 * i + 1), 1.0);
  }
  EXPECT_LE(t.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Sinusoid1D, SpotValues) {
  const auto t = sinusoidal_1d<double>(4, 8);
  EXPECT_NEAR(t(1, 0), 0.8414709848078965, 1e-15);
  EXPECT_NEAR(t(1, 1), 0.5403023058681398, 1e-15);
  // i = 1: frequency 10000^(-2/8) = 0.1
  EXPECT_NEAR(t(3, 2), std::sin(0.3), 1e-15);
  EXPECT_THROW(sinusoidal_1d<double>(3, 7), ConfigError);
}

TEST(Sinusoid2D, Layout) {
  const auto t = sinusoidal_2d<double>(14, 14, 256);
  EXPECT_EQ(t.rows(), 196);
  EXPECT_EQ(t.cols(), 256);
  EXPECT_NEAR(t(14, 0), std::sin(1.0), 1e-15);  // grid position (1,0)
  EXPECT_EQ(t(14, 128), 0.0);                    // column coordinate 0
  EXPECT_TRUE(t.row(0).head(128) == t.row(0).tail(128));
  EXPECT_TRUE(t.row(3 * 14 + 2).head(128) == t.row(3 * 14 + 9).head(128));
  EXPECT_TRUE(t.row(2 * 14 + 5).tail(128) == t.row(7 * 14 + 5).tail(128));
  EXPECT_THROW(sinusoidal_2d<double>(2, 2, 6), ConfigError);
}

TEST(Embed, IdentityAffineIsPlainProjection) {
  std::mt19937_64 rng(1);
  ModalityEmbedder<double> e(4, 4, 2, 8);
  e.init(rng);
  PatchSequence<double> p{Mat<double>::Random(3, 4), 1, 3, 2};
  ImageEmbedCache<double> c;
  const Mat<double> zero = Mat<double>::Zero(3, 8);
  const auto z = e.embed_image(p, zero, c);
  EXPECT_TRUE(z.isApprox(e.image.proj.forward(p.patches), 1e-15));
}

TEST(Embed, HandComputedAffine) {
  ModalityEmbedder<double> e(2, 2, 1, 4);
  e.image = AffineProjection<double>(2, 2);
  e.image.proj.weight.value << 1, 2, 3, 4;
  e.image.proj.bias.value << 0.5, -0.5;
  e.image.gamma.value << 2, 3;
  e.image.beta.value << 1, -1;
  PatchSequence<double> p{Mat<double>(2, 2), 1, 2, 1};
  p.patches << 1, 0, 1, 1;
  ImageEmbedCache<double> c;
  const auto z = e.embed_image(p, Mat<double>::Zero(2, 2), c);
  // row 0: [1,2]+b = [1.5,1.5] -> [4, 3.5]; row 1: [4,6]+b = [4.5,5.5] -> [10, 15.5]
  EXPECT_DOUBLE_EQ(z(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(z(0, 1), 3.5);
  EXPECT_DOUBLE_EQ(z(1, 0), 10.0);
  EXPECT_DOUBLE_EQ(z(1, 1), 15.5);
}

TEST(Embed, BetaBroadcastAtZeroInput) {
  ModalityEmbedder<double> e(3, 2, 1, 4);
  e.image.beta.value.setConstant(0.7);
  e.image.gamma.value.setConstant(5.0);
  PatchSequence<double> p{Mat<double>::Zero(2, 3), 1, 2, 1};
  ImageEmbedCache<double> c;
  const auto z = e.embed_image(p, Mat<double>::Zero(2, 4), c);
  EXPECT_TRUE(z.isApproxToConstant(0.7));
}

TEST(Embed, IqAdditiveStructure) {
  std::mt19937_64 rng(2);
  ModalityEmbedder<double> e(4, 2, 2, 8);
  e.init(rng);
  e.iq.proj.bias.value.setZero();
  SegmentSequence<double> s{Mat<double>::Zero(4, 2), {0, 0, 1, 1}, 2};
  const auto pos = sinusoidal_1d<double>(4, 8);
  IQEmbedCache<double> c;
  const auto z = e.embed_iq(s, pos, c);
  for (int k = 0; k < 4; ++k)
    EXPECT_TRUE(z.row(k).isApprox(pos.row(k) + e.antenna.table.value.row(s.antenna_of[std::size_t(k)]), 1e-15));
  const RowVec<double> diff = z.row(0) - z.row(2);
  const RowVec<double> oracle =
      (pos.row(0) - pos.row(2)) + (e.antenna.table.value.row(0) - e.antenna.table.value.row(1));
  EXPECT_TRUE(diff.isApprox(oracle, 1e-14));
}

TEST(Embed, AntennaShiftTouchesOnlyItsTokens) {
  std::mt19937_64 rng(3);
  ModalityEmbedder<double> e(4, 2, 3, 8);
  e.init(rng);
  SegmentSequence<double> s{Mat<double>::Random(6, 2), {0, 0, 1, 1, 2, 2}, 2};
  const auto pos = sinusoidal_1d<double>(6, 8);
  IQEmbedCache<double> c;
  const auto before = e.embed_iq(s, pos, c);
  RowVec<double> v = RowVec<double>::LinSpaced(8, 1, 8);
  e.antenna.table.value.row(1) += v;
  const auto after = e.embed_iq(s, pos, c);
  for (int k = 0; k < 6; ++k) {
    const RowVec<double> d = after.row(k) - before.row(k);
    if (s.antenna_of[std::size_t(k)] == 1) EXPECT_TRUE(d.isApprox(v, 1e-12));
    else EXPECT_TRUE(d.isZero(0));
  }
}

TEST(Embed, Errors) {
  ModalityEmbedder<double> e(4, 2, 2, 8);
  SegmentSequence<double> s{Mat<double>::Zero(2, 2), {0, 2}, 2};
  IQEmbedCache<double> c;
  EXPECT_THROW(e.embed_iq(s, Mat<double>::Zero(2, 8), c), ShapeError);
  PatchSequence<double> p{Mat<double>::Zero(2, 3), 1, 2, 1};
  ImageEmbedCache<double> ic;
  EXPECT_THROW(e.embed_image(p, Mat<double>::Zero(2, 8), ic), ShapeError);
}

TEST(Embed, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  ModalityEmbedder<double> e(3, 2, 2, 4);
  e.init(rng);
  e.image.gamma.value.setRandom();
  e.iq.beta.value.setRandom();
  PatchSequence<double> p{Mat<double>::Random(2, 3), 1, 2, 1};
  SegmentSequence<double> s{Mat<double>::Random(2, 2), {0, 1}, 2};
  const Mat<double> pos = Mat<double>::Random(2, 4);
  const Mat<double> w = Mat<double>::Random(2, 4);  // loss = sum(w .* z)^2-ish
  auto loss = [&] {
    ImageEmbedCache<double> a;
    IQEmbedCache<double> b;
    const Mat<double> zi = e.embed_image(p, pos, a), zq = e.embed_iq(s, pos, b);
    return (zi.cwiseProduct(w)).array().square().sum() + (zq.cwiseProduct(w)).array().cube().sum();
  };
  e.visit("", [](const std::string&, Param<double>& q) { q.zero_grad(); });
  ImageEmbedCache<double> a;
  IQEmbedCache<double> b;
  const Mat<double> zi = e.embed_image(p, pos, a), zq = e.embed_iq(s, pos, b);
  e.backward_image(a, Mat<double>(2.0 * zi.cwiseProduct(w).cwiseProduct(w)));
  e.backward_iq(b, Mat<double>(3.0 * zq.cwiseProduct(w).array().square().matrix().cwiseProduct(w)));
  e.visit("", [&](const std::string& name, Param<double>& q) {
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      double& v = q.value.data()[i];
      const double saved = v, h = 1e-6;
      v = saved + h;
      const double up = loss();
      v = saved - h;
      const double dn = loss();
      v = saved;
      const double fd = (up - dn) / (2 * h), an = q.grad.data()[i];
      EXPECT_LE(std::abs(fd - an), 1e-4 * std::max(1.0, std::abs(fd))) << name << "[" << i << "]";
    }
  });
}
