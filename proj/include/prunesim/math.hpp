#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace prunesim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Pose = Eigen::Isometry3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// splitmix64 finalizer; used for seed derivation so that per-episode seeds
// are decorrelated regardless of how the inputs are enumerated.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> parts) {
  std::uint64_t s = mix64(master);
  for (std::uint64_t p : parts) {
    s = mix64(s ^ (mix64(p) + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2)));
  }
  return s;
}

// Seeded random stream with hand-rolled distributions. std::mt19937_64 output
// is pinned by the standard; the distributions here avoid the
// implementation-defined ones in <random> so streams are portable bit-exact.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // [0,1), 53-bit resolution
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive on both ends
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  // standard normal via Box-Muller (cos branch, no cached second value)
  double normal() {
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double normal(double mean, double std_dev) { return mean + std_dev * normal(); }

  // uniform on the unit sphere
  Vec3 unit_vector() {
    const double z = uniform(-1.0, 1.0);
    const double phi = uniform(0.0, 2.0 * kPi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace prunesim
