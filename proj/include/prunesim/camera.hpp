#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prunesim/scene.hpp"

namespace prunesim {

// Pixel class codes carried on the H plane. Fixed constants so golden images
// are bit-exact.
namespace pixel_class {
constexpr std::uint8_t kBackground = 0;
constexpr std::uint8_t kFrame = 30;
constexpr std::uint8_t kTree = 90;
constexpr std::uint8_t kWire = 150;
constexpr std::uint8_t kCutter = 200;
}  // namespace pixel_class

// 3-plane class-coded image: H = class code, S = tree mask (255/0),
// V = flat Lambertian shading.
struct SegmentedImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> h, s, v;  // row-major planes

  SegmentedImage() = default;
  SegmentedImage(int w, int ht)
      : width(w), height(ht), h(w * ht, 0), s(w * ht, 0), v(w * ht, 0) {}

  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * width + col;
  }
};

struct CameraModel {
  int width = 424;
  int height = 240;
  double horizontal_fov_deg = 69.0;
  // Camera sits above and behind the pivot, pitched down so both the cutter
  // top and the branch stay in view through the whole approach (OpenCV axes:
  // x right, y down, z forward).
  Pose tool_from_camera = make_mount(0.09, 0.08, 25.0);

  static Pose make_mount(double height, double setback, double pitch_deg);
  double focal_px() const;
};

// Boxes (tool frame) approximating the cutter body for rendering and for
// rigid proximity contact: two blade slabs per side plus the housing.
std::vector<std::pair<Pose, Vec3>> cutter_body_boxes(const CutterProfile& profile);

SegmentedImage render_segmented(const SceneGraph& scene, const Pose& tool_pose,
                                const CameraModel& cam);

// 424x240 -> crop bottom-right 360x180 -> nearest-neighbor 160x80.
SegmentedImage crop_rescale(const SegmentedImage& img);

// Endpoint-aligned nearest-neighbor rescale (corner pixels map to corners).
SegmentedImage rescale_nn(const SegmentedImage& img, int out_w, int out_h);

// Integer-block downscale that keeps thin structures alive: each block takes
// the rarest class present (tree > wire > cutter > frame > background) and
// the brightest V of that class. Used for the policy-input reduction.
SegmentedImage downscale_class_pool(const SegmentedImage& img, int out_w,
                                    int out_h);

// Fast path for rollouts: casts only the source pixels that survive
// crop_rescale, bit-identical to crop_rescale(render_segmented(...)).
SegmentedImage render_observation(const SceneGraph& scene, const Pose& tool_pose,
                                  const CameraModel& cam);

void export_ppm(const SegmentedImage& img, const std::string& path);
SegmentedImage import_ppm(const std::string& path);

}  // namespace prunesim
