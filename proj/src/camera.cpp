#include "prunesim/camera.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "prunesim/errors.hpp"

namespace prunesim {

Pose CameraModel::make_mount(double height, double setback, double pitch_deg) {
  const double psi = deg_to_rad(pitch_deg);
  Pose mount = Pose::Identity();
  Mat3 rot;
  rot.col(0) = Vec3(-1.0, 0.0, 0.0);                         // x_cam
  rot.col(1) = Vec3(0.0, -std::cos(psi), -std::sin(psi));    // y_cam (image down)
  rot.col(2) = Vec3(0.0, -std::sin(psi), std::cos(psi));     // optical axis
  mount.linear() = rot;
  mount.translation() = Vec3(0.0, height, -setback);
  return mount;
}

double CameraModel::focal_px() const {
  return 0.5 * width / std::tan(0.5 * deg_to_rad(horizontal_fov_deg));
}

std::vector<std::pair<Pose, Vec3>> cutter_body_boxes(const CutterProfile& profile) {
  std::vector<std::pair<Pose, Vec3>> boxes;
  const double hx = profile.mouth_half_width_x;
  const double blade_thickness = 0.002;

  // One slab per blade-edge segment, material on the outer side of the edge.
  for (std::size_t side = 0; side < profile.blade_edges.size(); ++side) {
    const auto& chain = profile.blade_edges[side];
    const double sgn = side == 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
      const Vec2 a = chain[i];
      const Vec2 b = chain[i + 1];
      const Vec2 d2 = (b - a).normalized();
      Vec2 n2(d2.y(), -d2.x());
      if (n2.x() * sgn < 0.0) n2 = -n2;  // outward

      const Vec2 mid2 = 0.5 * (a + b) + 0.5 * blade_thickness * n2;
      const double seg_len = (b - a).norm();

      Pose pose = Pose::Identity();
      Mat3 rot;
      rot.col(0) = Vec3::UnitX();
      rot.col(1) = Vec3(0.0, d2.x(), d2.y());
      rot.col(2) = Vec3(0.0, n2.x(), n2.y());
      if (rot.determinant() < 0.0) rot.col(0) = -Vec3::UnitX();
      pose.linear() = rot;
      pose.translation() = Vec3(0.0, mid2.x(), mid2.y());
      boxes.emplace_back(pose, Vec3(hx, 0.5 * seg_len, 0.5 * blade_thickness));
    }
  }

  // Housing behind the pivot.
  Pose housing = Pose::Identity();
  housing.translation() = Vec3(0.0, 0.0, -0.05);
  boxes.emplace_back(housing, Vec3(0.018, 0.015, 0.045));
  return boxes;
}

namespace {

struct RenderPrim {
  enum class Kind { Capsule, Aabb, Box } kind;
  std::uint8_t cls = pixel_class::kBackground;
  Capsule capsule;
  Aabb aabb;
  Pose box_pose;  // world_from_box
  Vec3 box_half;
  Vec3 bound_center;
  double bound_radius = 0.0;
};

struct PrimGroup {
  Vec3 center;
  double radius = 0.0;
  std::vector<RenderPrim> prims;
};

RenderPrim make_capsule_prim(const Capsule& c, std::uint8_t cls) {
  RenderPrim p;
  p.kind = RenderPrim::Kind::Capsule;
  p.cls = cls;
  p.capsule = c;
  p.bound_center = 0.5 * (c.a + c.b);
  p.bound_radius = 0.5 * (c.b - c.a).norm() + c.radius;
  return p;
}

void finish_group(PrimGroup& g) {
  if (g.prims.empty()) return;
  Vec3 lo = g.prims.front().bound_center;
  Vec3 hi = lo;
  for (const RenderPrim& p : g.prims) {
    lo = lo.cwiseMin(p.bound_center - Vec3::Constant(p.bound_radius));
    hi = hi.cwiseMax(p.bound_center + Vec3::Constant(p.bound_radius));
  }
  g.center = 0.5 * (lo + hi);
  g.radius = 0.5 * (hi - lo).norm();
}

std::vector<PrimGroup> collect_groups(const SceneGraph& scene, const Pose& tool_pose) {
  std::vector<PrimGroup> groups;

  PrimGroup frame;
  for (const Aabb& box : scene.frame_boxes) {
    RenderPrim p;
    p.kind = RenderPrim::Kind::Aabb;
    p.cls = pixel_class::kFrame;
    p.aabb = box;
    p.bound_center = box.center();
    p.bound_radius = box.half().norm();
    frame.prims.push_back(p);
  }
  finish_group(frame);
  groups.push_back(std::move(frame));

  PrimGroup wires;
  for (const Capsule& w : scene.wires) {
    wires.prims.push_back(make_capsule_prim(w, pixel_class::kWire));
  }
  finish_group(wires);
  groups.push_back(std::move(wires));

  for (const TreeSpindle& spindle : scene.spindles) {
    PrimGroup g;
    for (const Capsule& seg : spindle.leader) {
      g.prims.push_back(make_capsule_prim(seg, pixel_class::kTree));
    }
    for (const auto& chain : spindle.side_branches) {
      for (const Capsule& seg : chain) {
        g.prims.push_back(make_capsule_prim(seg, pixel_class::kTree));
      }
    }
    finish_group(g);
    groups.push_back(std::move(g));
  }

  PrimGroup cutter;
  for (const auto& [pose, half] : cutter_body_boxes(scene.cutter)) {
    RenderPrim p;
    p.kind = RenderPrim::Kind::Box;
    p.cls = pixel_class::kCutter;
    p.box_pose = tool_pose * pose;
    p.box_half = half;
    p.bound_center = p.box_pose.translation();
    p.bound_radius = half.norm();
    cutter.prims.push_back(p);
  }
  finish_group(cutter);
  groups.push_back(std::move(cutter));
  return groups;
}

bool sphere_may_hit(const Vec3& origin, const Vec3& dir, const Vec3& center,
                    double radius, double t_best) {
  const Vec3 oc = center - origin;
  const double t_close = oc.dot(dir);
  if (t_close < -radius || t_close - radius > t_best) return false;
  return oc.squaredNorm() - t_close * t_close <= radius * radius;
}

// directional light, fixed; stored as the propagation direction
const Vec3 kLightDir = Vec3(-0.35, -0.9, -0.45).normalized();
constexpr double kAmbient = 60.0;
constexpr double kDiffuse = 160.0;
constexpr std::uint8_t kBackgroundV = 45;

void shade_pixel(const std::vector<PrimGroup>& groups, const Vec3& origin,
                 const Vec3& dir, std::uint8_t* h, std::uint8_t* s,
                 std::uint8_t* v) {
  double t_best = std::numeric_limits<double>::infinity();
  std::uint8_t cls = pixel_class::kBackground;
  Vec3 normal = Vec3::UnitY();

  for (const PrimGroup& g : groups) {
    if (g.prims.empty() || !sphere_may_hit(origin, dir, g.center, g.radius, t_best))
      continue;
    for (const RenderPrim& p : g.prims) {
      if (!sphere_may_hit(origin, dir, p.bound_center, p.bound_radius, t_best))
        continue;
      std::optional<RayHit> hit;
      switch (p.kind) {
        case RenderPrim::Kind::Capsule:
          hit = ray_capsule(origin, dir, p.capsule);
          break;
        case RenderPrim::Kind::Aabb:
          hit = ray_aabb(origin, dir, p.aabb);
          break;
        case RenderPrim::Kind::Box:
          hit = ray_box(origin, dir, p.box_pose, p.box_half);
          break;
      }
      if (hit && hit->t < t_best) {
        t_best = hit->t;
        cls = p.cls;
        normal = hit->normal;
      }
    }
  }

  *h = cls;
  *s = (cls == pixel_class::kTree) ? 255 : 0;
  if (cls == pixel_class::kBackground) {
    *v = kBackgroundV;
  } else {
    const double lambert = std::max(0.0, normal.dot(-kLightDir));
    *v = static_cast<std::uint8_t>(std::lround(kAmbient + kDiffuse * lambert));
  }
}

struct PinholeRays {
  Vec3 origin;
  Mat3 rot;  // world_from_camera rotation
  double fx, cx, cy;

  Vec3 dir_for(int col, int row) const {
    const Vec3 d_cam((col + 0.5 - cx) / fx, (row + 0.5 - cy) / fx, 1.0);
    return (rot * d_cam).normalized();
  }
};

PinholeRays make_rays(const Pose& tool_pose, const CameraModel& cam) {
  const Pose world_from_camera = tool_pose * cam.tool_from_camera;
  return {world_from_camera.translation(), world_from_camera.linear(),
          cam.focal_px(), 0.5 * cam.width, 0.5 * cam.height};
}

// endpoint-aligned nearest-neighbor source index
int nn_index(int dst, int dst_size, int src_size) {
  if (dst_size <= 1) return 0;
  return static_cast<int>(
      std::llround(static_cast<double>(dst) * (src_size - 1) / (dst_size - 1)));
}

constexpr int kCropCol = 64, kCropRow = 60;
constexpr int kCropW = 360, kCropH = 180;
constexpr int kObsW = 160, kObsH = 80;

}  // namespace

SegmentedImage render_segmented(const SceneGraph& scene, const Pose& tool_pose,
                                const CameraModel& cam) {
  SegmentedImage img(cam.width, cam.height);
  const auto groups = collect_groups(scene, tool_pose);
  const auto rays = make_rays(tool_pose, cam);
  for (int row = 0; row < cam.height; ++row) {
    for (int col = 0; col < cam.width; ++col) {
      const std::size_t i = img.index(col, row);
      shade_pixel(groups, rays.origin, rays.dir_for(col, row), &img.h[i],
                  &img.s[i], &img.v[i]);
    }
  }
  return img;
}

SegmentedImage rescale_nn(const SegmentedImage& img, int out_w, int out_h) {
  SegmentedImage out(out_w, out_h);
  for (int row = 0; row < out_h; ++row) {
    const int sr = nn_index(row, out_h, img.height);
    for (int col = 0; col < out_w; ++col) {
      const int sc = nn_index(col, out_w, img.width);
      const std::size_t di = out.index(col, row);
      const std::size_t si = img.index(sc, sr);
      out.h[di] = img.h[si];
      out.s[di] = img.s[si];
      out.v[di] = img.v[si];
    }
  }
  return out;
}

SegmentedImage downscale_class_pool(const SegmentedImage& img, int out_w,
                                    int out_h) {
  if (out_w <= 0 || out_h <= 0 || img.width % out_w != 0 ||
      img.height % out_h != 0) {
    throw ConfigError("downscale_class_pool requires integer block factors");
  }
  const int bx = img.width / out_w;
  const int by = img.height / out_h;
  const auto rank = [](std::uint8_t cls) {
    switch (cls) {
      case pixel_class::kTree: return 0;
      case pixel_class::kWire: return 1;
      case pixel_class::kCutter: return 2;
      case pixel_class::kFrame: return 3;
      default: return 4;
    }
  };
  SegmentedImage out(out_w, out_h);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      std::uint8_t best_cls = pixel_class::kBackground;
      int best_rank = 5;
      std::uint8_t best_v = 0;
      for (int dy = 0; dy < by; ++dy) {
        for (int dx = 0; dx < bx; ++dx) {
          const std::size_t si = img.index(c * bx + dx, r * by + dy);
          const int rk = rank(img.h[si]);
          if (rk < best_rank) {
            best_rank = rk;
            best_cls = img.h[si];
            best_v = img.v[si];
          } else if (rk == best_rank && img.v[si] > best_v) {
            best_v = img.v[si];
          }
        }
      }
      const std::size_t di = out.index(c, r);
      out.h[di] = best_cls;
      out.s[di] = best_cls == pixel_class::kTree ? 255 : 0;
      out.v[di] = best_v;
    }
  }
  return out;
}

SegmentedImage crop_rescale(const SegmentedImage& img) {
  if (img.width != 424 || img.height != 240) {
    throw ConfigError("crop_rescale expects a 424x240 image");
  }
  SegmentedImage cropped(kCropW, kCropH);
  for (int row = 0; row < kCropH; ++row) {
    for (int col = 0; col < kCropW; ++col) {
      const std::size_t di = cropped.index(col, row);
      const std::size_t si = img.index(col + kCropCol, row + kCropRow);
      cropped.h[di] = img.h[si];
      cropped.s[di] = img.s[si];
      cropped.v[di] = img.v[si];
    }
  }
  return rescale_nn(cropped, kObsW, kObsH);
}

SegmentedImage render_observation(const SceneGraph& scene, const Pose& tool_pose,
                                  const CameraModel& cam) {
  SegmentedImage out(kObsW, kObsH);
  const auto groups = collect_groups(scene, tool_pose);
  const auto rays = make_rays(tool_pose, cam);
  for (int row = 0; row < kObsH; ++row) {
    const int sr = kCropRow + nn_index(row, kObsH, kCropH);
    for (int col = 0; col < kObsW; ++col) {
      const int sc = kCropCol + nn_index(col, kObsW, kCropW);
      const std::size_t i = out.index(col, row);
      shade_pixel(groups, rays.origin, rays.dir_for(sc, sr), &out.h[i], &out.s[i],
                  &out.v[i]);
    }
  }
  return out;
}

void export_ppm(const SegmentedImage& img, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open for writing: " + path);
  file << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const std::size_t i = img.index(c, r);
      row[3 * c + 0] = img.h[i];
      row[3 * c + 1] = img.s[i];
      row[3 * c + 2] = img.v[i];
    }
    file.write(reinterpret_cast<const char*>(row.data()),
               static_cast<std::streamsize>(row.size()));
  }
  if (!file) throw std::runtime_error("write failed: " + path);
}

SegmentedImage import_ppm(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open for reading: " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  file >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0) {
    throw std::runtime_error("unsupported ppm: " + path);
  }
  file.get();  // single whitespace after maxval
  SegmentedImage img(w, h);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
  for (int r = 0; r < h; ++r) {
    file.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
    if (!file) throw std::runtime_error("truncated ppm: " + path);
    for (int c = 0; c < w; ++c) {
      const std::size_t i = img.index(c, r);
      img.h[i] = row[3 * c + 0];
      img.s[i] = row[3 * c + 1];
      img.v[i] = row[3 * c + 2];
    }
  }
  return img;
}

}  // namespace prunesim
