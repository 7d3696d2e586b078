#include "lps/envs/render.hpp"

#include <algorithm>
#include <cmath>

#include "lps/core/check.hpp"

namespace lps::envs {
namespace {

constexpr uint8_t kBackground = 235;
constexpr std::array<double, 3> kGoalColor = {40.0, 170.0, 60.0};
constexpr std::array<double, 3> kObjectColor = {200.0, 50.0, 40.0};
constexpr std::array<double, 3> kAgentColor = {40.0, 70.0, 200.0};

// Half-width of the soft edge, in pixels. Soft edges give sub-pixel motion a
// visible intensity change, which gradient-based flow needs.
constexpr double kAa = 1.0;

double alpha_from_sdf(double d) {
  return std::clamp((kAa - d) / (2.0 * kAa), 0.0, 1.0);
}

double box_sdf(double dx, double dy, double hx, double hy) {
  const double qx = std::abs(dx) - hx;
  const double qy = std::abs(dy) - hy;
  const double ox = std::max(qx, 0.0);
  const double oy = std::max(qy, 0.0);
  return std::sqrt(ox * ox + oy * oy) + std::min(std::max(qx, qy), 0.0);
}

struct PixelCenter {
  double x;
  double y;
};

// Signed distance of pixel p to the sprite footprint centred at the origin.
double sprite_sdf(Sprite sprite, double dx, double dy) {
  switch (sprite) {
    case Sprite::kDot:
      return std::sqrt(dx * dx + dy * dy) - 3.5;
    case Sprite::kCross:
      return std::min(box_sdf(dx, dy, 4.5, 1.5), box_sdf(dx, dy, 1.5, 4.5));
    case Sprite::kSquare:
      return box_sdf(dx, dy, 3.5, 3.5);
    case Sprite::kBar:
      return box_sdf(dx, dy, 6.0, 2.2);
  }
  LPS_FAIL("invalid sprite enum value");
}

double sprite_extent(Sprite sprite) {
  switch (sprite) {
    case Sprite::kDot: return 3.5;
    case Sprite::kCross: return 4.5;
    case Sprite::kSquare: return 3.5;
    case Sprite::kBar: return 6.0;
  }
  LPS_FAIL("invalid sprite enum value");
}

struct Canvas {
  int height;
  int width;
  std::vector<double> rgb;  // height*width*3, [0,255]

  void blend(int y, int x, const std::array<double, 3>& color, double alpha, double shade) {
    if (y < 0 || y >= height || x < 0 || x >= width || alpha <= 0.0) return;
    double* px = &rgb[(static_cast<size_t>(y) * width + x) * 3];
    for (int c = 0; c < 3; ++c) {
      px[c] = px[c] * (1.0 - alpha) + color[c] * shade * alpha;
    }
  }
};

PixelCenter to_pixels(const Vec2& p, int height, int width) {
  return {p.x * (width - 1), (1.0 - p.y) * (height - 1)};
}

template <typename SdfFn>
void draw_soft(Canvas& canvas, const PixelCenter& center, double extent,
               const std::array<double, 3>& color, double shade_scale, SdfFn sdf) {
  const int x0 = static_cast<int>(std::floor(center.x - extent - 2.0));
  const int x1 = static_cast<int>(std::ceil(center.x + extent + 2.0));
  const int y0 = static_cast<int>(std::floor(center.y - extent - 2.0));
  const int y1 = static_cast<int>(std::ceil(center.y + extent + 2.0));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d = sdf(x - center.x, y - center.y);
      const double alpha = alpha_from_sdf(d);
      if (alpha <= 0.0) continue;
      // Mild radial shade: darker toward the interior so the sprite body is
      // not a constant-intensity plateau.
      const double t = std::clamp(-d / shade_scale, 0.0, 1.0);
      canvas.blend(y, x, color, alpha, 1.0 - 0.30 * t);
    }
  }
}

}  // namespace

Image render_scene(const Scene& scene, int height, int width) {
  LPS_CHECK(height > 0 && width > 0, "render_scene: non-positive frame size");
  Canvas canvas{height, width,
                std::vector<double>(static_cast<size_t>(height) * width * 3,
                                    static_cast<double>(kBackground))};

  // Goal ring (drawn first, everything else occludes it).
  {
    const PixelCenter c = to_pixels(scene.goal, height, width);
    const double ring_radius = 5.5;
    const double half_thickness = 1.5;
    draw_soft(canvas, c, ring_radius + half_thickness, kGoalColor, half_thickness,
              [&](double dx, double dy) {
                return std::abs(std::sqrt(dx * dx + dy * dy) - ring_radius) - half_thickness;
              });
  }

  if (scene.object.has_value()) {
    const PixelCenter c = to_pixels(*scene.object, height, width);
    draw_soft(canvas, c, 3.5, kObjectColor, 3.5,
              [](double dx, double dy) { return box_sdf(dx, dy, 3.5, 3.5); });
  }

  {
    const PixelCenter c = to_pixels(scene.agent, height, width);
    const Sprite sprite = scene.agent_sprite;
    draw_soft(canvas, c, sprite_extent(sprite), kAgentColor, 3.0,
              [sprite](double dx, double dy) { return sprite_sdf(sprite, dx, dy); });
  }

  Image out(height, width);
  for (size_t i = 0; i < canvas.rgb.size(); ++i) {
    out.data[i] = static_cast<uint8_t>(std::lround(std::clamp(canvas.rgb[i], 0.0, 255.0)));
  }
  return out;
}

}  // namespace lps::envs
