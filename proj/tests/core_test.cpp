#include <gtest/gtest.h>
#include <torch/torch.h>

#include <cstdlib>
#include <filesystem>

#include "lps/core/check.hpp"
#include "lps/core/config.hpp"
#include "lps/core/fs_util.hpp"
#include "lps/core/half.hpp"
#include "lps/core/hash.hpp"
#include "lps/core/image.hpp"
#include "lps/core/png_io.hpp"
#include "lps/core/rng.hpp"
#include "lps/core/svg_plot.hpp"
#include "lps/core/symlog.hpp"
#include "lps/core/tensor_io.hpp"

namespace lps {
namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("lps_core_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(Check, ThrowsWithMessage) {
  EXPECT_NO_THROW(LPS_CHECK(1 + 1 == 2, "fine"));
  try {
    LPS_CHECK(false, "value was " << 42);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("value was 42"), std::string::npos);
  }
}

TEST(Config, ParseAndTypedGetters) {
  auto cfg = Config::from_string(
      "# comment line\n"
      "task = push\n"
      "lps.horizon = 16\n"
      "lps.gamma = 0.99\n"
      "value.symlog_targets = true\n"
      "eval.seeds = 1, 2, 3\n"
      "eval.variants = bc, lps\n");
  EXPECT_EQ(cfg.str("task"), "push");
  EXPECT_EQ(cfg.integer("lps.horizon"), 16);
  EXPECT_DOUBLE_EQ(cfg.real("lps.gamma"), 0.99);
  EXPECT_TRUE(cfg.boolean("value.symlog_targets"));
  EXPECT_EQ(cfg.int_list("eval.seeds"), (std::vector<int64_t>{1, 2, 3}));
  EXPECT_EQ(cfg.str_list("eval.variants"), (std::vector<std::string>{"bc", "lps"}));
  EXPECT_EQ(cfg.integer("missing", 7), 7);
  EXPECT_THROW(cfg.integer("missing"), Error);
  EXPECT_THROW(cfg.integer("task"), Error);  // non-numeric
}

TEST(Config, SaveLoadRoundTrip) {
  auto dir = temp_dir("config");
  Config cfg;
  cfg.set("a.b", int64_t{3});
  cfg.set("a.c", 2.5);
  cfg.set("name", std::string("hello world"));
  cfg.set("flag", true);
  cfg.save(dir / "cfg.txt");
  auto back = Config::from_file(dir / "cfg.txt");
  EXPECT_EQ(back.integer("a.b"), 3);
  EXPECT_DOUBLE_EQ(back.real("a.c"), 2.5);
  EXPECT_EQ(back.str("name"), "hello world");
  EXPECT_TRUE(back.boolean("flag"));
  EXPECT_EQ(back.hash(), cfg.hash());
}

TEST(Config, HashIsOrderInvariantAndKeySensitive) {
  Config a;
  a.set("x", int64_t{1});
  a.set("y", int64_t{2});
  Config b;
  b.set("y", int64_t{2});
  b.set("x", int64_t{1});
  EXPECT_EQ(a.hash(), b.hash());
  b.set("y", int64_t{3});
  EXPECT_NE(a.hash(), b.hash());
  Config c = a;
  c.set("z", int64_t{0});
  EXPECT_NE(a.hash(), c.hash());
}

TEST(Config, SectionAndMerge) {
  auto cfg = Config::from_string("lps.horizon = 8\nlps.gamma = 0.9\nother = 1\n");
  auto sec = cfg.section("lps");
  EXPECT_EQ(sec.integer("horizon"), 8);
  EXPECT_FALSE(sec.has("other"));
  Config over;
  over.set("lps.horizon", int64_t{4});
  cfg.merge_from(over);
  EXPECT_EQ(cfg.integer("lps.horizon"), 4);
  EXPECT_DOUBLE_EQ(cfg.real("lps.gamma"), 0.9);
}

TEST(Hash, DeriveSeedIsDeterministicAndSpread) {
  EXPECT_EQ(derive_seed(1, "demos"), derive_seed(1, "demos"));
  EXPECT_NE(derive_seed(1, "demos"), derive_seed(2, "demos"));
  EXPECT_NE(derive_seed(1, "demos"), derive_seed(1, "flow"));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
  EXPECT_EQ(hex64(0).size(), 16u);
  EXPECT_EQ(hex64(0xabcdef), "0000000000abcdef");
}

TEST(Rng, DeterministicStreamsAndBounds) {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff_seed = false;
  for (int i = 0; i < 1000; ++i) {
    double ua = a.uniform(), ub = b.uniform(), uc = c.uniform();
    all_equal &= ua == ub;
    any_diff_seed |= ua != uc;
    EXPECT_GE(ua, 0.0);
    EXPECT_LT(ua, 1.0);
  }
  EXPECT_TRUE(all_equal);
  EXPECT_TRUE(any_diff_seed);
  Rng d(7);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_LT(d.uniform_int(10), 10u);
    double x = d.uniform(-2.0, 5.0);
    EXPECT_GE(x, -2.0);
    EXPECT_LT(x, 5.0);
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(42);
  const int n = 20000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sum2 / n, 1.0, 0.05);
}

TEST(Symlog, InverseRoundTrip) {
  for (double x : {-100.0, -1.0, -1e-8, 0.0, 1e-8, 0.5, 10.0, 1e6}) {
    EXPECT_NEAR(symexp(symlog(x)), x, 1e-6 * std::max(1.0, std::abs(x)));
  }
  EXPECT_DOUBLE_EQ(symlog(0.0), 0.0);
  auto t = torch::linspace(-50, 50, 101, torch::kFloat64);
  EXPECT_TRUE(torch::allclose(symexp(symlog(t)), t, 1e-9, 1e-9));
}

TEST(Half, RoundTripPrecision) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    float x = static_cast<float>(rng.uniform(-8.0, 8.0));
    float back = float_from_half(half_from_float(x));
    EXPECT_NEAR(back, x, 8.0f / 1024.0f + 1e-4f);
  }
  EXPECT_EQ(float_from_half(half_from_float(0.0f)), 0.0f);
}

TEST(FsUtil, AtomicWriteReadRoundTrip) {
  auto dir = temp_dir("fs");
  atomic_write_text(dir / "a.txt", "hello\nworld");
  auto bytes = read_bytes(dir / "a.txt");
  EXPECT_EQ(std::string(bytes.begin(), bytes.end()), "hello\nworld");
  EXPECT_THROW(read_bytes(dir / "missing.txt"), Error);
}

TEST(Image, ToGrayKnownValues) {
  Image img(1, 2);
  img.at(0, 0, 0) = 255;  // pure red
  img.at(0, 1, 0) = 255;  // white
  img.at(0, 1, 1) = 255;
  img.at(0, 1, 2) = 255;
  auto gray = to_gray(img);
  ASSERT_EQ(gray.size(), 2u);
  EXPECT_NEAR(gray[1], 1.0f, 1e-4);
  EXPECT_GT(gray[1], gray[0]);
  EXPECT_GT(gray[0], 0.0f);
}

TEST(Png, EncodeDecodeRoundTrip) {
  Rng rng(5);
  Image img(48, 64);
  for (auto& b : img.data) b = static_cast<uint8_t>(rng.uniform_int(256));
  auto bytes = png_encode(img);
  auto back = png_decode(bytes.data(), bytes.size());
  ASSERT_TRUE(back.same_shape(img));
  EXPECT_EQ(back.data, img.data);

  auto dir = temp_dir("png");
  png_save(dir / "img.png", img);
  auto loaded = png_load(dir / "img.png");
  EXPECT_EQ(loaded.data, img.data);
}

TEST(Png, EncodingIsDeterministic) {
  Rng rng(9);
  Image img(16, 16);
  for (auto& b : img.data) b = static_cast<uint8_t>(rng.uniform_int(256));
  EXPECT_EQ(png_encode(img), png_encode(img));
}

TEST(TensorIo, CheckpointRoundTrip) {
  auto dir = temp_dir("ckpt");
  Checkpoint ckpt;
  ckpt.tensors["w"] = torch::randn({3, 4});
  ckpt.tensors["b"] = torch::arange(5, torch::kFloat32);
  ckpt.tensors["h"] = torch::randn({2, 2}).to(torch::kHalf);
  ckpt.manifest["kind"] = "test";
  ckpt.manifest["step"] = "12";
  save_checkpoint(dir / "m.ckpt", ckpt);
  auto back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.manifest.at("kind"), "test");
  EXPECT_EQ(back.manifest.at("step"), "12");
  ASSERT_EQ(back.tensors.size(), 3u);
  EXPECT_TRUE(torch::equal(back.tensors.at("w"), ckpt.tensors.at("w")));
  EXPECT_TRUE(torch::equal(back.tensors.at("b"), ckpt.tensors.at("b")));
  EXPECT_TRUE(torch::equal(back.tensors.at("h"), ckpt.tensors.at("h")));
}

TEST(TensorIo, NamedTensorsRoundTripThroughModule) {
  torch::manual_seed(0);
  torch::nn::Linear a(4, 3), b(4, 3);
  EXPECT_NE(parameter_hash(*a), parameter_hash(*b));
  load_named_tensors(*b, named_tensors(*a));
  EXPECT_EQ(parameter_hash(*a), parameter_hash(*b));
  auto x = torch::randn({2, 4});
  EXPECT_TRUE(torch::allclose(a(x), b(x)));
}

TEST(TensorIo, ParameterHashTracksValues) {
  torch::manual_seed(1);
  torch::nn::Linear m(2, 2);
  auto h0 = parameter_hash(*m);
  auto saved = m->weight.detach().clone();
  {
    torch::NoGradGuard g;
    m->weight += 1.0;
  }
  EXPECT_NE(parameter_hash(*m), h0);
  {
    torch::NoGradGuard g;
    m->weight.copy_(saved);
  }
  EXPECT_EQ(parameter_hash(*m), h0);
}

TEST(SvgPlot, WritesSeriesAndMetadata) {
  auto dir = temp_dir("svg");
  PlotSpec spec;
  spec.title = "success vs horizon";
  spec.x_label = "h";
  spec.y_label = "success";
  spec.series.push_back({"lps", {2, 4, 8}, {0.5, 0.7, 0.6}});
  spec.metadata["horizons"] = "2,4,8";
  write_svg_plot(dir / "p.svg", spec);
  auto bytes = read_bytes(dir / "p.svg");
  std::string text(bytes.begin(), bytes.end());
  EXPECT_NE(text.find("<svg"), std::string::npos);
  EXPECT_NE(text.find("lps"), std::string::npos);
  EXPECT_NE(text.find("horizons"), std::string::npos);
  write_svg_plot(dir / "p2.svg", spec);
  EXPECT_EQ(read_bytes(dir / "p.svg"), read_bytes(dir / "p2.svg"));
}

}  // namespace
}  // namespace lps
