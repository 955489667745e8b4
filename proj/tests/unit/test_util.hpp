#pragma once

#include "ait/geometry.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace ait::test {

inline std::filesystem::path data_path(const std::string& rel) { return std::filesystem::path(AIT_DATA_DIR) / rel; }

inline Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

inline Pose random_pose(std::mt19937_64& rng, double scale = 1.0) { return {random_vec(rng, scale), random_quat(rng)}; }

inline double pose_distance(const Pose& a, const Pose& b) {
  return (a.position - b.position).norm() + angular_distance(a.orientation, b.orientation);
}

}  // namespace ait::test
