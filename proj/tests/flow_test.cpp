#include <gtest/gtest.h>
#include <torch/torch.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <vector>

#include "lps/core/check.hpp"
#include "lps/core/config.hpp"
#include "lps/core/fs_util.hpp"
#include "lps/core/half.hpp"
#include "lps/core/hash.hpp"
#include "lps/core/image.hpp"
#include "lps/core/png_io.hpp"
#include "lps/envs/demo_gen.hpp"
#include "lps/envs/embodiment.hpp"
#include "lps/envs/pointmass_env.hpp"
#include "lps/envs/shard.hpp"
#include "lps/flow/estimator.hpp"
#include "lps/flow/flow_cache.hpp"
#include "lps/flow/flow_encoder.hpp"
#include "lps/flow/lk_flow.hpp"

namespace lps::flow {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("lps_flow_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Smooth multi-frequency texture evaluated on the continuous plane, so a
// shifted render is an exact translation with no border wrap artifacts.
double texture(double x, double y) {
  return 0.5 + 0.22 * std::sin(0.33 * x + 1.1 * std::sin(0.19 * y)) +
         0.18 * std::cos(0.21 * y + 0.7 * std::cos(0.27 * x)) +
         0.08 * std::sin(0.11 * (x + y));
}

Image render_texture(int h, int w, double shift_x, double shift_y) {
  Image img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = texture(x - shift_x, y - shift_y);
      const auto v = static_cast<uint8_t>(std::lround(std::clamp(g, 0.0, 1.0) * 255.0));
      img.at(y, x, 0) = v;
      img.at(y, x, 1) = v;
      img.at(y, x, 2) = v;
    }
  }
  return img;
}

// Mean flow over the interior (margin trimmed), where LK support is complete.
std::pair<double, double> interior_mean(const FlowField& f, int margin) {
  double su = 0.0, sv = 0.0;
  int n = 0;
  for (int y = margin; y < f.height - margin; ++y) {
    for (int x = margin; x < f.width - margin; ++x) {
      su += f.u_at(y, x);
      sv += f.v_at(y, x);
      ++n;
    }
  }
  return {su / n, sv / n};
}

TEST(LkFlow, RecoversKnownTranslation) {
  const int hw = 64;
  const Image a = render_texture(hw, hw, 0.0, 0.0);
  const struct { double dx, dy; } cases[] = {{2.0, 1.0}, {-3.0, 2.0}, {1.0, -2.0}};
  for (const auto& c : cases) {
    const Image b = render_texture(hw, hw, c.dx, c.dy);
    const FlowField f = lk_pyramid_flow(a, b);
    const auto [mu, mv] = interior_mean(f, 10);
    EXPECT_NEAR(mu, c.dx, 0.5) << "dx=" << c.dx << " dy=" << c.dy;
    EXPECT_NEAR(mv, c.dy, 0.5) << "dx=" << c.dx << " dy=" << c.dy;
  }
}

TEST(LkFlow, ResolvesSubpixelTranslation) {
  const Image a = render_texture(64, 64, 0.0, 0.0);
  const Image b = render_texture(64, 64, 0.5, -0.25);
  const auto [mu, mv] = interior_mean(lk_pyramid_flow(a, b), 10);
  EXPECT_NEAR(mu, 0.5, 0.25);
  EXPECT_NEAR(mv, -0.25, 0.25);
}

TEST(LkFlow, ZeroOnIdenticalFrames) {
  const Image a = render_texture(64, 64, 0.0, 0.0);
  const FlowField f = lk_pyramid_flow(a, a);
  float max_abs = 0.0f;
  for (size_t i = 0; i < f.u.size(); ++i) {
    max_abs = std::max({max_abs, std::abs(f.u[i]), std::abs(f.v[i])});
  }
  EXPECT_LT(max_abs, 0.05f);
}

TEST(LkFlow, TexturelessIsZero) {
  Image a(32, 32);
  std::fill(a.data.begin(), a.data.end(), uint8_t{90});
  Image b = a;
  const FlowField f = lk_pyramid_flow(a, b);
  for (size_t i = 0; i < f.u.size(); ++i) {
    ASSERT_NEAR(f.u[i], 0.0f, 1e-4f);
    ASSERT_NEAR(f.v[i], 0.0f, 1e-4f);
  }
}

TEST(Estimator, CheckFlowFieldRejects) {
  FlowField ok(4, 4);
  EXPECT_NO_THROW(check_flow_field(ok));

  FlowField nan_field(4, 4);
  nan_field.u_at(1, 2) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(check_flow_field(nan_field), Error);

  FlowField huge(4, 4);
  huge.v_at(0, 0) = 5.0f;  // exceeds width=4 bound
  EXPECT_THROW(check_flow_field(huge), Error);

  FlowField ragged(4, 4);
  ragged.u.pop_back();
  EXPECT_THROW(check_flow_field(ragged), Error);

  EXPECT_THROW(check_flow_field(FlowField{}), Error);
}

TEST(Estimator, RegistryDispatchAndValidation) {
  const auto names = flow_estimator_names();
  EXPECT_NE(std::find(names.begin(), names.end(), "lk_pyramid"), names.end());

  register_flow_estimator("const_two", [](const Image& a, const Image&) {
    FlowField f(a.height, a.width);
    std::fill(f.u.begin(), f.u.end(), 2.0f);
    return f;
  });
  const Image img = render_texture(16, 16, 0.0, 0.0);
  const FlowField f = compute_flow(img, img, "const_two");
  EXPECT_FLOAT_EQ(f.u_at(3, 3), 2.0f);
  EXPECT_FLOAT_EQ(f.v_at(3, 3), 0.0f);

  EXPECT_THROW(compute_flow(img, img, "no_such_estimator"), Error);

  Image other(8, 16);
  EXPECT_THROW(compute_flow(img, other, "const_two"), Error);  // shape mismatch

  register_flow_estimator("mis_shaped",
                          [](const Image&, const Image&) { return FlowField(2, 2); });
  EXPECT_THROW(compute_flow(img, img, "mis_shaped"), Error);

  register_flow_estimator("nan_flow", [](const Image& a, const Image&) {
    FlowField f(a.height, a.width);
    f.u[0] = std::numeric_limits<float>::quiet_NaN();
    return f;
  });
  EXPECT_THROW(compute_flow(img, img, "nan_flow"), Error);
}

TEST(Estimator, MeanFlowVector) {
  FlowField f(2, 2);
  f.u = {1.0f, 2.0f, 3.0f, 4.0f};
  f.v = {-1.0f, 0.0f, 1.0f, 2.0f};
  const auto [mu, mv] = mean_flow_vector(f);
  EXPECT_DOUBLE_EQ(mu, 2.5);
  EXPECT_DOUBLE_EQ(mv, 0.5);
}

// The same start state and the same world-frame trajectory, executed under
// different bodies (own gains, rotations, sprites), must produce per-step
// mean flow vectors that agree in direction: visual motion is the shared
// language across embodiments. The commanded speed stays inside every stock
// body's reachable disc so each body realizes the plan exactly.
TEST(Flow, CrossEmbodimentDirectionAgreement) {
  const std::vector<std::string> ids = {"identity", "gain2x", "rot90", "barbot", "heldout"};
  const double vcap = 0.9 * 0.04;  // inside min gain over all stock embodiments

  for (uint64_t seed : {11u, 12u, 13u}) {
    std::vector<envs::PointmassEnv> envs_by_id;
    std::vector<std::vector<Image>> frames(ids.size());
    for (size_t j = 0; j < ids.size(); ++j) {
      envs_by_id.push_back(
          envs::make_env(envs::stock_embodiment(ids[j]), "reach", seed));
      frames[j].push_back(envs_by_id[j].reset());
    }
    // Shared proportional plan computed from the reference body's state.
    for (int t = 0; t < 40 && !envs_by_id[0].done(); ++t) {
      const envs::Vec2 v =
          ((envs_by_id[0].goal() - envs_by_id[0].agent()) * 3.0).clamped_norm(vcap);
      for (size_t j = 0; j < ids.size(); ++j) {
        const envs::Vec2 act = envs_by_id[j].config().action_from_world_velocity(v);
        frames[j].push_back(envs_by_id[j].step(act).obs);
      }
    }
    ASSERT_GE(frames[0].size(), 6u) << "trajectory too short to compare";

    std::vector<std::vector<std::pair<double, double>>> mean_flows(ids.size());
    for (size_t j = 0; j < ids.size(); ++j) {
      for (size_t t = 0; t + 1 < frames[j].size(); ++t) {
        mean_flows[j].push_back(mean_flow_vector(compute_flow(frames[j][t], frames[j][t + 1])));
      }
    }
    for (size_t j = 1; j < ids.size(); ++j) {
      double cos_sum = 0.0;
      int n = 0;
      for (size_t t = 0; t < mean_flows[0].size(); ++t) {
        const auto [au, av] = mean_flows[0][t];
        const auto [bu, bv] = mean_flows[j][t];
        const double na = std::hypot(au, av), nb = std::hypot(bu, bv);
        if (na < 1e-3 || nb < 1e-3) continue;  // no visible motion to compare
        cos_sum += (au * bu + av * bv) / (na * nb);
        ++n;
      }
      ASSERT_GE(n, 5) << "identity vs " << ids[j] << " seed " << seed;
      EXPECT_GT(cos_sum / n, 0.8) << "identity vs " << ids[j] << " seed " << seed;
    }
  }
}

TEST(FlowEncoder, ShapesAndNormalization) {
  FlowEncoderParams p;
  p.channels = {4, 8};
  p.projection_width = 16;
  p.output_dim = 3;
  p.input_height = 16;
  p.input_width = 16;
  FlowEncoder enc(p);
  const torch::Tensor out = enc->forward(torch::randn({5, 2, 16, 16}));
  EXPECT_EQ(out.sizes(), (std::vector<int64_t>{5, 3}));
  EXPECT_TRUE(out.isfinite().all().item<bool>());

  EXPECT_THROW(enc->forward(torch::randn({5, 2, 32, 32})), Error);
  EXPECT_THROW(enc->forward(torch::randn({5, 3, 16, 16})), Error);

  FlowField f(16, 16);
  f.u_at(2, 3) = 8.0f;   // width 16 -> normalized 0.5
  f.v_at(2, 3) = -4.0f;  // -> -0.25
  const torch::Tensor t = flow_to_tensor(f);
  EXPECT_EQ(t.sizes(), (std::vector<int64_t>{2, 16, 16}));
  EXPECT_FLOAT_EQ(t[0][2][3].item<float>(), 0.5f);
  EXPECT_FLOAT_EQ(t[1][2][3].item<float>(), -0.25f);

  f.u_at(0, 0) = std::numeric_limits<float>::infinity();
  EXPECT_THROW(flow_to_tensor(f), Error);

  const torch::Tensor single = encode_flow_action(enc, FlowField(16, 16));
  EXPECT_EQ(single.sizes(), (std::vector<int64_t>{3}));

  FlowEncoderParams bad = p;
  bad.input_height = 15;  // not divisible by 2^stages
  EXPECT_THROW(FlowEncoder{bad}, Error);
}

TEST(FlowEncoder, GradientsReachEveryParameter) {
  torch::manual_seed(7);
  FlowEncoderParams p;
  p.channels = {4, 8};
  p.projection_width = 16;
  p.input_height = 16;
  p.input_width = 16;
  FlowEncoder enc(p);
  const torch::Tensor loss = enc->forward(torch::randn({3, 2, 16, 16})).square().sum();
  loss.backward();
  for (const auto& named : enc->named_parameters()) {
    ASSERT_TRUE(named.value().grad().defined()) << named.key();
    EXPECT_TRUE(named.value().grad().isfinite().all().item<bool>()) << named.key();
    EXPECT_GT(named.value().grad().abs().sum().item<double>(), 0.0) << named.key();
  }
}

TEST(FlowEncoder, MatchesFiniteDifferenceGradient) {
  torch::manual_seed(11);
  FlowEncoderParams p;
  p.channels = {4};
  p.projection_width = 8;
  p.input_height = 8;
  p.input_width = 8;
  FlowEncoder enc(p);
  const torch::Tensor x = 0.5 * torch::randn({2, 2, 8, 8});
  auto loss_fn = [&] { return enc->forward(x).square().sum(); };

  torch::Tensor loss = loss_fn();
  enc->zero_grad();
  loss.backward();

  auto params = enc->parameters();
  torch::NoGradGuard ng;
  std::mt19937 pick(3);
  for (int probe = 0; probe < 6; ++probe) {
    auto& w = params[pick() % params.size()];
    const int64_t idx = static_cast<int64_t>(pick() % w.numel());
    const double analytic = w.grad().flatten()[idx].item<double>();
    const double eps = 1e-3;
    const double orig = w.flatten()[idx].item<double>();
    w.flatten()[idx] = orig + eps;
    const double up = loss_fn().item<double>();
    w.flatten()[idx] = orig - eps;
    const double down = loss_fn().item<double>();
    w.flatten()[idx] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    EXPECT_NEAR(analytic, numeric, 2e-2 + 0.05 * std::abs(numeric))
        << "param index " << idx;
  }
}

Config tiny_shard(const fs::path& dir, int n_episodes, uint64_t seed) {
  const auto eps = envs::collect_demos(envs::stock_embodiment("identity"), "reach",
                                       n_episodes, seed);
  Config extra;
  extra.set("task", "reach");
  envs::write_shard(dir, eps, extra);
  return envs::read_shard_manifest(dir);
}

std::map<std::string, uint64_t> dir_file_hashes(const fs::path& dir) {
  std::map<std::string, uint64_t> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto bytes = read_bytes_u8(e.path().string());
    out[fs::relative(e.path(), dir).string()] = fnv1a64(bytes.data(), bytes.size());
  }
  return out;
}

TEST(FlowCache, PrecomputeHitsAndDeterminism) {
  const auto dir = temp_dir("cache");
  const Config manifest = tiny_shard(dir, 2, 21);

  const FlowCacheReport first = precompute_flow_shard(dir);
  EXPECT_EQ(first.episodes, 2);
  EXPECT_EQ(first.computed, 2);
  EXPECT_EQ(first.cache_hits, 0);
  EXPECT_TRUE(first.skipped.empty());

  const fs::path flow_dir = default_flow_dir(dir);
  const Config cache_manifest = Config::from_file((flow_dir / "manifest.txt").string());
  EXPECT_EQ(cache_manifest.str("schema"), "flow_cache_v1");
  EXPECT_EQ(cache_manifest.str("estimator"), "lk_pyramid");
  EXPECT_EQ(cache_manifest.integer("n_episodes"), 2);

  const FlowCacheReport second = precompute_flow_shard(dir);
  EXPECT_EQ(second.computed, 0);
  EXPECT_EQ(second.cache_hits, 2);

  // Decoded cache entries equal freshly computed flow up to half precision.
  const envs::Episode ep = envs::read_shard_episode(dir, 0, manifest);
  const auto fields = read_flow_episode(flow_dir, 0);
  ASSERT_EQ(static_cast<int>(fields.size()), ep.length());
  for (int t = 0; t < ep.length(); ++t) {
    const FlowField fresh = compute_flow(ep.observations[t], ep.observations[t + 1]);
    ASSERT_EQ(fields[t].height, fresh.height);
    for (size_t i = 0; i < fresh.u.size(); ++i) {
      ASSERT_NEAR(fields[t].u[i], fresh.u[i], 0.02f);
      ASSERT_NEAR(fields[t].v[i], fresh.v[i], 0.02f);
    }
  }

  // Byte-identical recompute after deleting the cache.
  const auto hashes_before = dir_file_hashes(flow_dir);
  fs::remove_all(flow_dir);
  precompute_flow_shard(dir);
  EXPECT_EQ(dir_file_hashes(flow_dir), hashes_before);
}

TEST(FlowCache, SkipsCorruptEpisodeAndRecordsIt) {
  const auto dir = temp_dir("corrupt");
  tiny_shard(dir, 3, 22);

  // Truncate one record's action file: lengths no longer reconcile.
  const fs::path victim = envs::episode_dir(dir, 1) / "actions.bin";
  const auto bytes = read_bytes_u8(victim.string());
  ASSERT_GT(bytes.size(), 8u);
  std::ofstream(victim, std::ios::binary | std::ios::trunc)
      .write(reinterpret_cast<const char*>(bytes.data()), 8);

  const FlowCacheReport report = precompute_flow_shard(dir);
  EXPECT_EQ(report.episodes, 3);
  EXPECT_EQ(report.computed, 2);
  ASSERT_EQ(report.skipped.size(), 1u);
  EXPECT_EQ(report.skipped[0], 1);

  const fs::path flow_dir = default_flow_dir(dir);
  const Config cache_manifest = Config::from_file((flow_dir / "manifest.txt").string());
  EXPECT_EQ(cache_manifest.integer("n_skipped"), 1);
  EXPECT_EQ(cache_manifest.str("skipped"), "1");

  EXPECT_NO_THROW(read_flow_episode(flow_dir, 0));
  EXPECT_NO_THROW(read_flow_episode(flow_dir, 2));
  EXPECT_THROW(read_flow_episode(flow_dir, 1), Error);
}

TEST(FlowCache, FrameEditInvalidatesExactlyThatEpisode) {
  const auto dir = temp_dir("invalidate");
  const Config manifest = tiny_shard(dir, 3, 23);
  precompute_flow_shard(dir);

  // Re-encode frame 0 of episode 2 with one pixel changed.
  const fs::path frame = envs::episode_dir(dir, 2) / "frame_00000.png";
  Image img = png_load(frame);
  img.at(0, 0, 0) = static_cast<uint8_t>(img.at(0, 0, 0) ^ 0x40);
  png_save(frame, img);

  const FlowCacheReport report = precompute_flow_shard(dir);
  EXPECT_EQ(report.computed, 1);
  EXPECT_EQ(report.cache_hits, 2);
  EXPECT_TRUE(report.skipped.empty());
  (void)manifest;
}

}  // namespace
}  // namespace lps::flow
