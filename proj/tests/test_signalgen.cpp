#include "mmwfm/signalgen.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace mmwfm;

namespace {

IQSceneConfig single_antenna_qpsk() {
  IQSceneConfig cfg;
  cfg.modulations = {Modulation::QPSK};
  cfg.antennas = 1;
  cfg.length = 128;
  cfg.segment_size = 16;
  cfg.snr_db = std::numeric_limits<double>::infinity();
  cfg.paths = {AntennaPath{{1.0, 0.0}, 0}};
  return cfg;
}

}  // namespace

TEST(IQScene, NoiselessQpskIsPulseShapedConstellation) {
  const auto cfg = single_antenna_qpsk();
  const auto x = gen_iq_scene(cfg, 3);
  ASSERT_EQ(x.antennas(), 1);
  ASSERT_EQ(x.length(), 128);
  const int sps = cfg.samples_per_symbol;
  const double a = 1.0 / std::sqrt(2.0);
  for (int t = 0; t < 64; ++t) {
    const double p = std::sin(std::numbers::pi * (t % sps + 0.5) / sps);
    const double i = x.data(0, 2 * t) / p, q = x.data(0, 2 * t + 1) / p;
    EXPECT_NEAR(std::abs(i), a, 1e-12);
    EXPECT_NEAR(std::abs(q), a, 1e-12);
    // one symbol per sps samples
    const int first = (t / sps) * sps;
    const double p0 = std::sin(std::numbers::pi * 0.5 / sps);
    EXPECT_NEAR(i, x.data(0, 2 * first) / p0, 1e-12);
    EXPECT_NEAR(q, x.data(0, 2 * first + 1) / p0, 1e-12);
  }
}

TEST(IQScene, DelayShiftsTheStream) {
  auto cfg = single_antenna_qpsk();
  cfg.antennas = 2;
  cfg.paths = {AntennaPath{{1.0, 0.0}, 0}, AntennaPath{{1.0, 0.0}, 3}};
  const auto x = gen_iq_scene(cfg, 11);
  // antenna 1 lags antenna 0 by 3 complex samples
  for (int t = 3; t < 64; ++t) {
    EXPECT_DOUBLE_EQ(x.data(1, 2 * t), x.data(0, 2 * (t - 3)));
    EXPECT_DOUBLE_EQ(x.data(1, 2 * t + 1), x.data(0, 2 * (t - 3) + 1));
  }
}

TEST(IQScene, DeterministicGivenSeed) {
  IQSceneConfig cfg;
  cfg.modulations = {Modulation::BPSK, Modulation::QAM16};
  const auto a = gen_iq_scene(cfg, 7), b = gen_iq_scene(cfg, 7);
  EXPECT_TRUE(a.data == b.data);
  EXPECT_FALSE(a.data == gen_iq_scene(cfg, 8).data);
}

TEST(IQScene, EmpiricalPowerMatchesSnr) {
  IQSceneConfig cfg;
  cfg.modulations = {Modulation::QPSK};
  cfg.antennas = 4;
  cfg.length = 1024;
  cfg.snr_db = 0.0;
  // oracle: half-sine pulse power is the mean of sin^2 over a symbol
  double ps = 0;
  for (int j = 0; j < cfg.samples_per_symbol; ++j) {
    const double s = std::sin(std::numbers::pi * (j + 0.5) / cfg.samples_per_symbol);
    ps += s * s / cfg.samples_per_symbol;
  }
  const double expected = ps * 1.0 /*mean |g|^2*/ + ps / std::pow(10.0, 0.0 / 10.0);
  double acc = 0;
  long n = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    cfg.channel_seed = seed;
    const auto x = gen_iq_scene(cfg, seed);
    for (int m = 0; m < 4; ++m)
      for (int t = 0; t < 512; ++t) {
        acc += x.data(m, 2 * t) * x.data(m, 2 * t) + x.data(m, 2 * t + 1) * x.data(m, 2 * t + 1);
        ++n;
      }
  }
  EXPECT_NEAR(acc / n, expected, 0.1 * expected);
}

TEST(IQScene, ChannelGainsHaveUnitMeanSquare) {
  const auto paths = channel_from_seed(5, 6, 8);
  double e = 0;
  for (const auto& p : paths) {
    e += std::norm(p.gain);
    EXPECT_GE(p.delay, 0);
    EXPECT_LE(p.delay, 8);
  }
  EXPECT_NEAR(e / 6, 1.0, 1e-12);
}

TEST(IQScene, RejectsInvalidDims) {
  IQSceneConfig cfg;
  cfg.length = 15;
  EXPECT_THROW(gen_iq_scene(cfg, 0), ConfigError);
  cfg.length = 16;  // fewer than two segments of 16
  EXPECT_THROW(gen_iq_scene(cfg, 0), ConfigError);
  cfg.length = 64;
  cfg.antennas = 0;
  EXPECT_THROW(gen_iq_scene(cfg, 0), ConfigError);
}

TEST(IQScene, ModulationNamesRoundTrip) {
  for (auto m : {Modulation::BPSK, Modulation::QPSK, Modulation::QAM16})
    EXPECT_EQ(parse_modulation(modulation_name(m)), m);
  EXPECT_THROW(parse_modulation("ook"), ConfigError);
}

TEST(SpectrogramScene, NoiselessToneOccupiesOneRow) {
  SpectrogramSceneConfig cfg;
  cfg.bins = 32;
  cfg.frames = 20;
  cfg.noise = false;
  cfg.floor = 0.01;
  cfg.primitives = {Tone{5, 3.0}};
  const auto s = gen_spectrogram_scene(cfg, 1);
  for (int f = 0; f < 32; ++f)
    for (int l = 0; l < 20; ++l) EXPECT_DOUBLE_EQ(s.power(f, l), f == 5 ? 3.01 : 0.01);
}

TEST(SpectrogramScene, ChirpArgmaxIsMonotone) {
  SpectrogramSceneConfig cfg;
  cfg.bins = 64;
  cfg.frames = 40;
  cfg.noise = false;
  cfg.primitives = {Chirp{10, 50, 1.0}};
  const auto s = gen_spectrogram_scene(cfg, 0);
  int prev = -1;
  for (int l = 0; l < 40; ++l) {
    Eigen::Index arg;
    s.power.col(l).maxCoeff(&arg);
    EXPECT_GE(int(arg), prev);
    prev = int(arg);
    if (l == 0) {
      EXPECT_EQ(arg, 10);
    }
    if (l == 39) {
      EXPECT_EQ(arg, 50);
    }
  }
}

TEST(SpectrogramScene, NoisyIsPositiveAndDeterministic) {
  const auto cfg = random_spectrogram_scene(SpectrogramClass::Mixed, 32, 32, 4);
  const auto a = gen_spectrogram_scene(cfg, 9), b = gen_spectrogram_scene(cfg, 9);
  EXPECT_TRUE(a.power == b.power);
  EXPECT_GT(a.power.minCoeff(), 0.0);
}

TEST(SpectrogramScene, Errors) {
  SpectrogramSceneConfig cfg;
  EXPECT_THROW(gen_spectrogram_scene(cfg, 0), ConfigError);  // no primitives
  cfg.primitives = {Tone{0, 1.0}};
  cfg.bins = 8;
  EXPECT_THROW(gen_spectrogram_scene(cfg, 0), ConfigError);
}

TEST(Preprocess, HandComputedTwoByTwo) {
  RawSpectrogram raw{Mat<double>(2, 2), 0, 0};
  const double e = std::exp(1.0);
  raw.power << 1.0, e, e * e, 1.0;
  DatasetStats st{0.5, 0.25, 0.0, 2.0};
  const auto out = preprocess_spectrogram<double>(raw, st, 2, 2);
  // log -> {0,1,2,0}; /2 -> {0,.5,1,0}; standardize -> {-2,0,2,-2}
  EXPECT_NEAR(out.at(0, 0, 0), -2.0, 1e-9);
  EXPECT_NEAR(out.at(0, 0, 1), 0.0, 1e-9);
  EXPECT_NEAR(out.at(0, 1, 0), 2.0, 1e-9);
  EXPECT_NEAR(out.at(0, 1, 1), -2.0, 1e-9);
}

TEST(Preprocess, MeanInputMapsToZero) {
  // a unit-grid value of 0.5 corresponds to log power (min+max)/2
  RawSpectrogram raw{Mat<double>::Constant(8, 8, std::exp(1.0) - kLogEpsilon), 0, 0};
  DatasetStats st{0.5, 0.1, 0.0, 2.0};
  const auto out = preprocess_spectrogram<double>(raw, st, 4, 4);
  for (double v : out.data) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(Preprocess, ResizeIdentityAtSameShape) {
  Mat<double> m = Mat<double>::Random(6, 5);
  EXPECT_TRUE(resize_bilinear(m, 6, 5) == m);
}

TEST(Preprocess, ResizeOrderingIsPreserved) {
  Mat<double> a = Mat<double>::Random(10, 13).cwiseAbs();
  Mat<double> b = a.array() + 0.1;
  const auto ra = resize_bilinear(a, 7, 17), rb = resize_bilinear(b, 7, 17);
  EXPECT_TRUE((rb.array() >= ra.array()).all());
}

TEST(Preprocess, UnitGridIsClamped) {
  RawSpectrogram raw{Mat<double>(1, 3), 0, 0};
  raw.power << 1e-20, 1.0, 1e20;
  const auto g = spectrogram_to_unit_grid(raw, -5.0, 5.0, 1, 3);
  EXPECT_EQ(g(0, 0), 0.0);
  EXPECT_NEAR(g(0, 1), 0.5, 1e-9);
  EXPECT_EQ(g(0, 2), 1.0);
}

TEST(Preprocess, IqDirectFormula) {
  IQSample<double> raw{Mat<double>::Constant(1, 2, 4.0)};
  const auto out = preprocess_iq<double>(raw, DatasetStats{0.0, 2.0, -1, 1});
  EXPECT_DOUBLE_EQ(out.data(0, 0), 2.0);
  const auto z = preprocess_iq<double>(raw, DatasetStats{4.0, 3.0, -1, 1});
  EXPECT_DOUBLE_EQ(z.data(0, 1), 0.0);
}

TEST(Preprocess, IqCorpusIsStandardized) {
  std::vector<IQSample<double>> corpus;
  IQSceneConfig cfg;
  cfg.antennas = 4;
  cfg.length = 64;
  for (int i = 0; i < 100; ++i) corpus.push_back(gen_iq_scene(cfg, std::uint64_t(i)));
  const auto st = compute_stats(corpus);
  double sum = 0, sq = 0;
  long n = 0;
  std::vector<IQSample<double>> out;
  for (const auto& s : corpus) out.push_back(preprocess_iq<double>(s, st));
  for (const auto& s : out) {
    sum += s.data.sum();
    n += s.data.size();
  }
  const double mean = sum / n;
  for (const auto& s : out) sq += (s.data.array() - mean).square().sum();
  EXPECT_NEAR(mean, 0.0, 1e-6);
  EXPECT_NEAR(std::sqrt(sq / n), 1.0, 1e-6);
}

TEST(Preprocess, DegenerateStatsThrow) {
  IQSample<double> raw{Mat<double>::Zero(1, 2)};
  EXPECT_THROW(preprocess_iq<double>(raw, DatasetStats{0, 0, 0, 1}), DegenerateStatsError);
  RawSpectrogram s{Mat<double>::Ones(2, 2), 0, 0};
  EXPECT_THROW(preprocess_spectrogram<double>(s, DatasetStats{0, 0, 0, 1}, 2, 2), DegenerateStatsError);
}

TEST(Stats, ClosedFormPopulationStd) {
  std::vector<IQSample<double>> corpus{{Mat<double>::Zero(3, 4)}, {Mat<double>::Ones(3, 4)}};
  const auto st = compute_stats(corpus);
  EXPECT_DOUBLE_EQ(st.mean, 0.5);
  EXPECT_DOUBLE_EQ(st.std, 0.5);
  EXPECT_DOUBLE_EQ(st.min, 0.0);
  EXPECT_DOUBLE_EQ(st.max, 1.0);
  std::swap(corpus[0], corpus[1]);
  const auto st2 = compute_stats(corpus);
  EXPECT_DOUBLE_EQ(st2.mean, st.mean);
  EXPECT_DOUBLE_EQ(st2.std, st.std);
}

TEST(Stats, AllZeroIsDegenerate) {
  std::vector<IQSample<double>> corpus{{Mat<double>::Zero(2, 4)}};
  const auto st = compute_stats(corpus);
  EXPECT_EQ(st.mean, 0.0);
  EXPECT_EQ(st.min, 0.0);
  EXPECT_EQ(st.max, 0.0);
  EXPECT_TRUE(st.degenerate());
}

TEST(Stats, EmptyCorpusThrows) {
  EXPECT_THROW(compute_stats(std::span<const IQSample<double>>{}), ConfigError);
  EXPECT_THROW(compute_spectrogram_stats(std::span<const RawSpectrogram>{}, 4, 4), ConfigError);
}

TEST(Stats, SpectrogramStatsAtConsumingStage) {
  std::vector<RawSpectrogram> corpus;
  for (int i = 0; i < 3; ++i)
    corpus.push_back(gen_spectrogram_scene(random_spectrogram_scene(SpectrogramClass(i), 16, 24, i), i));
  const auto st = compute_spectrogram_stats(corpus, 8, 8);
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : corpus)
    for (Eigen::Index k = 0; k < r.power.size(); ++k) {
      lo = std::min(lo, std::log(r.power.data()[k] + 1e-12));
      hi = std::max(hi, std::log(r.power.data()[k] + 1e-12));
    }
  EXPECT_DOUBLE_EQ(st.min, lo);
  EXPECT_DOUBLE_EQ(st.max, hi);
  // standardized corpus has zero mean, unit std
  double sum = 0, sq = 0;
  int n = 0;
  for (const auto& r : corpus) {
    const auto img = preprocess_spectrogram<double>(r, st, 8, 8);
    for (double v : img.data) {
      sum += v;
      sq += v * v;
      ++n;
    }
  }
  EXPECT_NEAR(sum / n, 0.0, 1e-9);
  EXPECT_NEAR(sq / n, 1.0, 1e-9);
}
