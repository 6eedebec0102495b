#include "mmwfm/pretrainer.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace mmwfm;

namespace {

// 2 blocks, D=8, 2 heads; 4 image tokens (4x4 image, P=2) and 4 IQ tokens
// (2 antennas x 8 scalars, S=4).
ModelConfig toy_config() {
  ModelConfig c;
  c.image_channels = 1;
  c.image_height = 4;
  c.image_width = 4;
  c.antennas = 2;
  c.iq_length = 8;
  c.backbone = BackboneConfig{2, 8, 16, 2, 2, 8, 16, 2, 2, 4};
  return c;
}

struct Toy {
  MaskedAutoencoder<double> model{toy_config(), 3};
  std::vector<PatchSequence<double>> images;
  std::vector<SegmentSequence<double>> iq;
  PairedBatch<double> batch;

  Toy() {
    std::mt19937_64 rng(9);
    // move every parameter off its structured init (unit gamma, zero biases)
    model.visit([&](const std::string&, Param<double>& p) {
      Mat<double> noise(p.value.rows(), p.value.cols());
      fill_normal(noise, rng, 0.3);
      p.value += noise;
    });
    for (int i = 0; i < 2; ++i) {
      ImageSample<double> x(1, 4, 4);
      for (auto& v : x.data) v = std::normal_distribution<double>()(rng);
      images.push_back(model.tokenize(x));
      IQSample<double> q{Mat<double>(2, 8)};
      fill_normal(q.data, rng, 1.0);
      iq.push_back(model.tokenize(q));
    }
    for (int i = 0; i < 2; ++i) {
      batch.images.push_back(&images[std::size_t(i)]);
      batch.image_plans.push_back(sample_mask(4, 0.5, 100 + i));
      batch.iq.push_back(&iq[std::size_t(i)]);
      batch.iq_plans.push_back(sample_mask(4, 0.5, 200 + i));
    }
  }

  double combined_loss() {
    double sum = 0;
    for (std::size_t i = 0; i < 2; ++i) {
      sum += model.image_pass(images[i], batch.image_plans[i]).loss;
      sum += model.iq_pass(iq[i], batch.iq_plans[i]).loss;
    }
    return sum / 4.0;
  }
};

}  // namespace

TEST(ModelGradient, CombinedLossMatchesFiniteDifferences) {
  Toy toy;
  const auto rep = accumulate_paired_gradients(toy.model, toy.batch);
  EXPECT_NEAR(rep.combined, toy.combined_loss(), 1e-12);
  std::set<std::string> classes;
  double worst = 0;
  toy.model.visit([&](const std::string& name, Param<double>& p) {
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      double& v = p.value.data()[i];
      const double saved = v, h = 1e-4;
      v = saved + h;
      const double up = toy.combined_loss();
      v = saved - h;
      const double dn = toy.combined_loss();
      v = saved;
      const double fd = (up - dn) / (2 * h), an = p.grad.data()[i];
      // gradients that vanish identically (key biases under softmax) are
      // compared against the finite-difference noise floor
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
      worst = std::max(worst, rel);
      EXPECT_LE(rel, 1e-4) << name << "[" << i << "] fd=" << fd << " analytic=" << an;
    }
    classes.insert(name.substr(0, name.find('.')));
  });
  EXPECT_EQ(classes, (std::set<std::string>{"embed", "encoder", "decoder_embed", "mask_token", "decoder", "heads"}));
  RecordProperty("max_relative_error", std::to_string(worst));
  std::printf("max relative error %.3g\n", worst);
}

TEST(ModelGradient, VisibleReconstructionsAreInert) {
  Toy toy;
  const auto& plan = toy.batch.image_plans[0];
  const auto pass = toy.model.image_pass(toy.images[0], plan);
  Mat<double> recon = pass.recon;
  const double base = masked_mse<double>(toy.images[0].patches, recon, plan.masked);
  EXPECT_EQ(base, pass.loss);
  for (int i : plan.kept) {
    recon.row(i).array() += 123.0;
    EXPECT_EQ(masked_mse<double>(toy.images[0].patches, recon, plan.masked), base);
    EXPECT_TRUE(masked_mse_grad<double>(toy.images[0].patches, recon, plan.masked).row(i).isZero(0));
  }
}

TEST(ModelGradient, SharedMaskTokenForBothModalities) {
  Toy toy;
  toy.model.zero_grad();
  const auto& pi = toy.batch.image_plans[0];
  toy.model.image_pass(toy.images[0], pi, 1.0);
  const Mat<double> g_image = toy.model.mask_token.grad;
  toy.model.iq_pass(toy.iq[0], toy.batch.iq_plans[0], 1.0);
  // the single token receives gradient from both modalities
  EXPECT_FALSE(g_image.isZero(0));
  EXPECT_FALSE(toy.model.mask_token.grad.isApprox(g_image));
  int tokens = 0;
  toy.model.visit([&](const std::string& name, Param<double>&) { tokens += name == "mask_token"; });
  EXPECT_EQ(tokens, 1);
}

TEST(ModelGradient, AntennaEmbeddingsStayOutOfDecoder) {
  // With every IQ token masked except one, changing the antenna embedding of a
  // masked-only antenna cannot change the reconstruction.
  Toy toy;
  const auto plan = plan_from_masked(4, {2, 3});  // antenna 1 fully masked
  const auto before = toy.model.iq_pass(toy.iq[0], plan).recon;
  toy.model.embedder.antenna.table.value.row(1).array() += 5.0;
  const auto after = toy.model.iq_pass(toy.iq[0], plan).recon;
  EXPECT_TRUE(before == after);
}

TEST(ModelGradient, PositionalTablesAreNotParameters) {
  Toy toy;
  const auto pos = toy.model.enc_pos.grid;
  accumulate_paired_gradients(toy.model, toy.batch);
  Adam<double> opt;
  apply_update(toy.model, opt, 1e-2);
  EXPECT_TRUE(toy.model.enc_pos.grid == pos);
  EXPECT_TRUE(toy.model.enc_pos.grid == sinusoidal_2d<double>(2, 2, 8));
  EXPECT_TRUE(toy.model.dec_pos.sequence == sinusoidal_1d<double>(4, 8));
}
