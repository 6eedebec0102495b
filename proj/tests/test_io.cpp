#include "mmwfm.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace mmwfm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mmwfm_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST(Config, ParseCommentsAndOverrides) {
  auto kv = KeyValueConfig::parse("# c\n a = 1 \n\nb=x y\nc=2.5\nd=true\n");
  EXPECT_EQ(kv.get_int("a", 0), 1);
  EXPECT_EQ(kv.get_string("b", ""), "x y");
  EXPECT_DOUBLE_EQ(kv.get_double("c", 0), 2.5);
  EXPECT_TRUE(kv.get_bool("d", false));
  EXPECT_EQ(kv.get_int("missing", 7), 7);
  kv.set_assignment("a=3");
  EXPECT_EQ(kv.get_int("a", 0), 3);
  EXPECT_THROW(kv.set_assignment("novalue"), ConfigError);
  EXPECT_THROW(kv.get_int("b", 0), ConfigError);
  EXPECT_THROW(kv.get_double("b", 0), ConfigError);
  EXPECT_THROW(kv.get_bool("c", false), ConfigError);
  EXPECT_EQ(KeyValueConfig::parse(kv.to_text()).values(), kv.values());
}

TEST(Config, IncludesResolveRelativeAndLaterWins) {
  const auto dir = scratch("cfg");
  fs::create_directories(dir / "sub");
  write_text(dir / "sub" / "base.cfg", "x=1\ny=2\n");
  write_text(dir / "top.cfg", "include sub/base.cfg\ny=5\n");
  const auto kv = KeyValueConfig::load(dir / "top.cfg");
  EXPECT_EQ(kv.get_int("x", 0), 1);
  EXPECT_EQ(kv.get_int("y", 0), 5);
  write_text(dir / "loop.cfg", "include loop.cfg\n");
  EXPECT_THROW(KeyValueConfig::load(dir / "loop.cfg"), ConfigError);
  EXPECT_THROW(KeyValueConfig::load(dir / "absent.cfg"), IoError);
}

TEST(Config, ModelConfigRoundTrip) {
  ModelConfig c;
  c.antennas = 3;
  c.backbone.enc_blocks = 5;
  const auto back = ModelConfig::from_kv(c.to_kv());
  EXPECT_EQ(back.antennas, 3);
  EXPECT_EQ(back.backbone.enc_blocks, 5);
  EXPECT_EQ(back.to_kv().values(), c.to_kv().values());
}

TEST(Dataset, WriteReadRoundTrip) {
  const auto dir = scratch("ds");
  DatasetWriter w(dir);
  IQSample<double> q{Mat<double>(2, 8)};
  for (int i = 0; i < 16; ++i) q.data.data()[i] = -1.0 + i / 7.5;
  RawSpectrogram s{Mat<double>::Constant(3, 4, 0.5), 0.0, 0.0};
  s.power(2, 3) = 1.25;
  w.add(q, 3);
  w.add(s);
  w.finish();
  const auto m = read_manifest(dir);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].file, "000000.f32");
  EXPECT_EQ(m[0].label, 3);
  EXPECT_FALSE(m[1].label.has_value());
  const auto d = load_dataset(dir);
  ASSERT_EQ(d.iq.size(), 1u);
  ASSERT_EQ(d.spectrograms.size(), 1u);
  EXPECT_TRUE(d.iq[0].data.isApprox(q.data, 1e-7));
  EXPECT_EQ(d.spectrograms[0].power(2, 3), 1.25);
  EXPECT_EQ(d.iq_labels[0], 3);
  EXPECT_EQ(d.spectrogram_labels[0], -1);
}

TEST(Dataset, CorruptInputsRejected) {
  const auto dir = scratch("bad");
  EXPECT_THROW(read_manifest(dir), IoError);
  write_text(dir / "manifest.txt", "a.f32 iq 2x4 -\n");
  write_text(dir / "a.f32", "short");
  EXPECT_THROW(load_dataset(dir), IoError);
  write_text(dir / "manifest.txt", "a.f32 iq 2by4 -\n");
  EXPECT_THROW(read_manifest(dir), IoError);
  write_text(dir / "manifest.txt", "a.f32 audio 2x4 -\n");
  EXPECT_THROW(read_manifest(dir), ConfigError);
}

TEST(Stats, RoundTripAndErrors) {
  const auto dir = scratch("stats");
  const DatasetStats s{0.1, 2.0 / 3.0, -4.0, 9.5};
  write_stats(dir / "s.txt", s);
  const auto r = read_stats(dir / "s.txt");
  EXPECT_EQ(r.mean, s.mean);
  EXPECT_EQ(r.std, s.std);
  EXPECT_EQ(r.min, s.min);
  EXPECT_EQ(r.max, s.max);
  write_text(dir / "t.txt", "mean=1 std=2 min=0\n");
  EXPECT_THROW(read_stats(dir / "t.txt"), IoError);
  write_text(dir / "u.txt", "mean=1 std=2 min=0 max=x\n");
  EXPECT_THROW(read_stats(dir / "u.txt"), IoError);
  EXPECT_THROW(read_stats(dir / "none.txt"), IoError);
}

TEST(Render, ImageTriptychGeometryAndZeroMask) {
  ImageSample<double> img(1, 8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) img.at(0, y, x) = x + 8 * y;
  const auto seq = patchify(img, 4);
  Mat<double> recon = seq.patches;
  recon.row(3).setConstant(-100.0);  // clamps to black
  const auto none = image_triptych<double>(seq, recon, full_plan(4), 1);
  EXPECT_EQ(none.height, 128);
  EXPECT_EQ(none.width, 3 * 128 + 2 * 4);
  // nothing masked: the middle pane is the original, the right pane the full decoder output
  for (int y = 0; y < 128; y += 7)
    for (int x = 0; x < 128; x += 5) {
      EXPECT_EQ(*none.at(x, y), *none.at(x + 132, y));
      if (x < 64 || y < 64) EXPECT_EQ(*none.at(x, y), *none.at(x + 264, y));
      else EXPECT_EQ(*none.at(x + 264, y), 0);
    }
  recon.setZero();
  const auto some = image_triptych<double>(seq, recon, plan_from_masked(4, {1}), 1);
  EXPECT_EQ(*some.at(132 + 100, 10), 128);           // masked patch grayed
  EXPECT_EQ(*some.at(132 + 10, 10), *some.at(10, 10));  // visible patch kept
}

TEST(Render, IqTriptychAndNetpbm) {
  IQSample<double> q{Mat<double>::Ones(2, 16)};
  const auto seq = segment(q, 4);
  const auto r = iq_triptych<double>(seq, seq.segments, plan_from_masked(seq.count(), {0}), 2, 16, 20);
  EXPECT_EQ(r.depth, 3);
  EXPECT_EQ(r.height, 40);
  EXPECT_EQ(r.width, 3 * 8 + 8);
  const auto dir = scratch("ppm");
  write_netpbm(dir / "x.ppm", r);
  std::ifstream in(dir / "x.ppm", std::ios::binary);
  std::string magic;
  int w, h, maxv;
  in >> magic >> w >> h >> maxv;
  EXPECT_EQ(magic, "P6");
  EXPECT_EQ(w, r.width);
  EXPECT_EQ(fs::file_size(dir / "x.ppm"), std::uintmax_t(r.pixels.size()) + 3 + std::to_string(w).size() + 1 +
                                                std::to_string(h).size() + 1 + 4);
}
