#include "lps/flow/lk_flow.hpp"

#include <algorithm>
#include <cmath>

#include "lps/core/check.hpp"

namespace lps::flow {
namespace {

struct Plane {
  int h = 0;
  int w = 0;
  std::vector<float> v;

  Plane() = default;
  Plane(int height, int width) : h(height), w(width), v(static_cast<size_t>(height) * width) {}

  float at(int y, int x) const {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return v[static_cast<size_t>(y) * w + x];
  }
  float& ref(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }

  float bilinear(double y, double x) const {
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const double fy = y - y0;
    const double fx = x - x0;
    const double top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
    const double bot = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
    return static_cast<float>(top * (1.0 - fy) + bot * fy);
  }
};

Plane gray_plane(const Image& img) {
  const std::vector<float> g = to_gray(img);
  Plane p(img.height, img.width);
  p.v = g;
  return p;
}

// 3x3 binomial blur; softens aliasing before differentiation.
Plane blur3(const Plane& in) {
  static const float k[3] = {0.25f, 0.5f, 0.25f};
  Plane tmp(in.h, in.w), out(in.h, in.w);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      tmp.ref(y, x) = k[0] * in.at(y, x - 1) + k[1] * in.at(y, x) + k[2] * in.at(y, x + 1);
    }
  }
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      out.ref(y, x) = k[0] * tmp.at(y - 1, x) + k[1] * tmp.at(y, x) + k[2] * tmp.at(y + 1, x);
    }
  }
  return out;
}

Plane downsample2(const Plane& in) {
  Plane out((in.h + 1) / 2, (in.w + 1) / 2);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      const float s = in.at(2 * y, 2 * x) + in.at(2 * y, 2 * x + 1) + in.at(2 * y + 1, 2 * x) +
                      in.at(2 * y + 1, 2 * x + 1);
      out.ref(y, x) = 0.25f * s;
    }
  }
  return out;
}

std::vector<Plane> build_pyramid(Plane base, int levels) {
  std::vector<Plane> pyr;
  pyr.push_back(std::move(base));
  for (int l = 1; l < levels; ++l) {
    if (pyr.back().h < 8 || pyr.back().w < 8) break;
    pyr.push_back(downsample2(blur3(pyr.back())));
  }
  return pyr;
}

// Upsample a flow plane to (h, w), scaling displacement values by 2.
Plane upsample_flow(const Plane& in, int h, int w) {
  Plane out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sy = (h > 1) ? static_cast<double>(y) * (in.h - 1) / (h - 1) : 0.0;
      const double sx = (w > 1) ? static_cast<double>(x) * (in.w - 1) / (w - 1) : 0.0;
      out.ref(y, x) = 2.0f * in.bilinear(sy, sx);
    }
  }
  return out;
}

void refine_level(const Plane& a, const Plane& b, Plane& du, Plane& dv,
                  const LkOptions& opt) {
  Plane ix(a.h, a.w), iy(a.h, a.w);
  for (int y = 0; y < a.h; ++y) {
    for (int x = 0; x < a.w; ++x) {
      ix.ref(y, x) = 0.5f * (a.at(y, x + 1) - a.at(y, x - 1));
      iy.ref(y, x) = 0.5f * (a.at(y + 1, x) - a.at(y - 1, x));
    }
  }
  const int r = opt.window_radius;
  const double ridge = opt.ridge * (2 * r + 1) * (2 * r + 1);

  for (int iter = 0; iter < opt.iterations; ++iter) {
    Plane nu = du, nv = dv;
    for (int y = 0; y < a.h; ++y) {
      for (int x = 0; x < a.w; ++x) {
        const double cu = du.at(y, x);
        const double cv = dv.at(y, x);
        double gxx = 0.0, gxy = 0.0, gyy = 0.0, bx = 0.0, by = 0.0;
        for (int wy = -r; wy <= r; ++wy) {
          for (int wx = -r; wx <= r; ++wx) {
            const int py = y + wy;
            const int px = x + wx;
            const double gx = ix.at(py, px);
            const double gy = iy.at(py, px);
            const double it = b.bilinear(py + cv, px + cu) - a.at(py, px);
            gxx += gx * gx;
            gxy += gx * gy;
            gyy += gy * gy;
            bx -= gx * it;
            by -= gy * it;
          }
        }
        gxx += ridge;
        gyy += ridge;
        const double det = gxx * gyy - gxy * gxy;
        double sx = 0.0, sy = 0.0;
        if (det > 1e-12) {
          sx = (gyy * bx - gxy * by) / det;
          sy = (gxx * by - gxy * bx) / det;
        }
        nu.ref(y, x) = static_cast<float>(
            std::clamp(cu + sx, -opt.max_displacement, opt.max_displacement));
        nv.ref(y, x) = static_cast<float>(
            std::clamp(cv + sy, -opt.max_displacement, opt.max_displacement));
      }
    }
    du = std::move(nu);
    dv = std::move(nv);
  }
}

}  // namespace

FlowField lk_pyramid_flow(const Image& frame_a, const Image& frame_b, const LkOptions& options) {
  LPS_CHECK(frame_a.same_shape(frame_b), "flow frames must share a shape");
  LPS_CHECK(frame_a.height >= 8 && frame_a.width >= 8, "frames too small for pyramid flow");
  const std::vector<Plane> pa = build_pyramid(blur3(gray_plane(frame_a)), options.levels);
  const std::vector<Plane> pb = build_pyramid(blur3(gray_plane(frame_b)), options.levels);
  const int levels = static_cast<int>(std::min(pa.size(), pb.size()));

  Plane du(pa[levels - 1].h, pa[levels - 1].w);
  Plane dv(du.h, du.w);
  for (int level = levels - 1; level >= 0; --level) {
    if (level != levels - 1) {
      du = upsample_flow(du, pa[level].h, pa[level].w);
      dv = upsample_flow(dv, pa[level].h, pa[level].w);
    }
    refine_level(pa[level], pb[level], du, dv, options);
  }

  FlowField flow(frame_a.height, frame_a.width);
  flow.u = du.v;
  flow.v = dv.v;
  check_flow_field(flow);
  return flow;
}

}  // namespace lps::flow
