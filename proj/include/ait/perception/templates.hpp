#pragma once

#include "ait/model_library.hpp"
#include "ait/perception/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace ait::perception {

struct TemplateConfig {
  double canonical_distance = 1.0;
  double azimuth_step = deg2rad(30.0);
  std::vector<double> elevations{deg2rad(15.0), deg2rad(45.0)};
  double focal = 525.0;
  double support_band = 0.01;  // pixels this close to the resting plane are dropped, as plane removal would
};

/// One pre-rendered view of an object. Comparison uses range (distance along the
/// ray), which is unchanged when the camera rotates about its centre.
struct DepthTemplate {
  std::string object_id;
  double azimuth = 0.0;
  double elevation = 0.0;
  Pose object_in_camera;      // pose used to render the view
  DepthImage image;           // camera at origin looking along +z
  std::vector<float> range;   // per pixel, NaN where no return
  Eigen::Vector2d centroid;   // tangent-plane centroid of valid pixels (x/z, y/z)
  double mean_range = 0.0;
  std::size_t pixel_count = 0;

  double focal() const { return image.k.fx; }
};

struct TemplateSet {
  TemplateConfig cfg;
  std::vector<DepthTemplate> templates;
};

inline DepthTemplate render_template(const ObjectModel& obj, double azimuth, double elevation, const TemplateConfig& cfg) {
  const double r = bounding_radius(obj.shape);
  const double dist = cfg.canonical_distance;
  const int half = static_cast<int>(std::ceil(cfg.focal * r / (dist - r))) + 2;
  Intrinsics k;
  k.width = k.height = 2 * half + 1;
  k.fx = k.fy = cfg.focal;
  k.cx = k.cy = half;
  // virtual world: object at origin, camera on a sphere around it
  const Vec3 eye = dist * Vec3(std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
  const Camera cam = Camera::look_at(eye, Vec3::Zero(), k);
  DepthTemplate t;
  t.object_id = obj.id;
  t.azimuth = azimuth;
  t.elevation = elevation;
  t.object_in_camera = inverse(cam.pose);
  t.image = render_depth({RenderItem{obj.shape, Pose::identity(), obj.id}}, cam, std::nullopt);
  t.range.assign(t.image.data.size(), kNoReturn);
  const double floor_z = -resting_half_height(obj.shape) + cfg.support_band;
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  double sum = 0.0;
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      if (!t.image.valid(u, v)) continue;
      const double z = t.image.at(u, v);
      if (cam.back_project(u, v, z).z() < floor_z) {
        t.image.at(u, v) = kNoReturn;
        continue;
      }
      const Vec3 ray = cam.ray_camera(u, v);
      const double rg = z * ray.norm();
      t.range[static_cast<std::size_t>(v) * k.width + u] = static_cast<float>(rg);
      c += ray.head<2>();
      sum += rg;
      ++t.pixel_count;
    }
  if (t.pixel_count > 0) {
    t.centroid = c / static_cast<double>(t.pixel_count);
    t.mean_range = sum / static_cast<double>(t.pixel_count);
  }
  return t;
}

/// Templates for every non-fixture object over the azimuth/elevation grid.
inline TemplateSet build_templates(const ModelLibrary& lib, const TemplateConfig& cfg = {}) {
  TemplateSet set;
  set.cfg = cfg;
  const int n_az = static_cast<int>(std::lround(2.0 * kPi / cfg.azimuth_step));
  for (const auto& obj : lib.objects()) {
    if (obj.fixture) continue;
    for (double el : cfg.elevations)
      for (int i = 0; i < n_az; ++i) set.templates.push_back(render_template(obj, i * cfg.azimuth_step, el, cfg));
  }
  return set;
}

struct MatchConfig {
  double truncation = 0.05;      // per-pixel depth difference cap, m
  double mismatch_penalty = 0.01;  // per-pixel cost where only one of region/template has depth, m
  double score_scale = 0.02;     // mean difference at which the score is 0.5, m
  std::size_t min_overlap = 20;
};

/// Region summary in a virtual camera that shares the real camera's centre but
/// looks along the ray through the region centroid, with no roll about world up.
struct RegionStats {
  Mat3 virtual_rotation = Mat3::Identity();  // world from virtual camera
  std::vector<Eigen::Vector2d> tangent;      // per region pixel, virtual tangent-plane coordinates
  std::vector<double> range;                 // per region pixel
  Eigen::Vector2d tangent_centroid = Eigen::Vector2d::Zero();
  double mean_range = 0.0;
  Vec3 ray_world = Vec3::UnitZ();
};

inline Mat3 look_rotation(const Vec3& dir) {
  return Camera::look_at(Vec3::Zero(), dir, Intrinsics{}).pose.rotation_matrix();
}

inline RegionStats region_stats(const DepthImage& img, const Region& r, const Camera& cam) {
  RegionStats s;
  const Mat3 rc = cam.pose.rotation_matrix();
  Vec3 mean_dir = Vec3::Zero();
  std::vector<Vec3> rays;
  rays.reserve(r.pixels.size());
  for (int p : r.pixels) {
    const Vec3 ray = cam.ray_camera(p % img.width(), p / img.width());
    rays.push_back(ray);
    mean_dir += ray.normalized();
    s.range.push_back(img.data[p] * ray.norm());
    s.mean_range += s.range.back();
  }
  s.mean_range /= static_cast<double>(r.pixels.size());
  s.ray_world = (rc * mean_dir).normalized();
  s.virtual_rotation = look_rotation(s.ray_world);
  const Mat3 to_virtual = s.virtual_rotation.transpose() * rc;
  for (const auto& ray : rays) {
    const Vec3 rv = to_virtual * ray;
    s.tangent.emplace_back(rv.x() / rv.z(), rv.y() / rv.z());
  }
  // centre the tangent coordinates on their centroid
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& t : s.tangent) c += t;
  c /= static_cast<double>(s.tangent.size());
  for (auto& t : s.tangent) t -= c;
  s.tangent_centroid = c;
  return s;
}

struct TemplateScore {
  double score = 0.0;
  std::size_t overlap = 0;
};

/// Truncated mean absolute range difference after aligning centroids and mean
/// ranges, mapped to (0, 1]. Pixels covered by only one of region and template
/// cost a fixed mismatch penalty.
inline TemplateScore score_template(const RegionStats& st, const DepthTemplate& t, const MatchConfig& mc) {
  TemplateScore out;
  if (t.pixel_count == 0) return out;
  const double s = st.mean_range / t.mean_range;  // angular size shrinks with distance
  const double f = t.focal();
  double sum = 0.0;
  std::size_t miss = 0;
  for (std::size_t i = 0; i < st.tangent.size(); ++i) {
    const Eigen::Vector2d tp = t.centroid + st.tangent[i] * s;
    const int tu = static_cast<int>(std::lround(tp.x() * f + t.image.k.cx));
    const int tv = static_cast<int>(std::lround(tp.y() * f + t.image.k.cy));
    if (tu < 0 || tv < 0 || tu >= t.image.width() || tv >= t.image.height()) {
      ++miss;
      continue;
    }
    const float tr = t.range[static_cast<std::size_t>(tv) * t.image.width() + tu];
    if (!std::isfinite(tr)) {
      ++miss;
      continue;
    }
    const double d = std::abs((st.range[i] - st.mean_range) - (tr - t.mean_range));
    sum += std::min(d, mc.truncation);
    ++out.overlap;
  }
  // template pixels left uncovered, estimated from the area ratio
  const double t_area = static_cast<double>(t.pixel_count) / (s * s);
  const double uncovered = std::max(0.0, t_area - static_cast<double>(out.overlap));
  const double total = static_cast<double>(out.overlap + miss) + uncovered;
  const double mean = (sum + mc.mismatch_penalty * (static_cast<double>(miss) + uncovered)) / total;
  out.score = 1.0 / (1.0 + mean / mc.score_scale);
  return out;
}

struct TemplateMatch {
  std::string object_id;
  Pose coarse_pose;  // world frame
  double score = 0.0;
  std::size_t template_index = 0;
};

inline Pose coarse_pose_from(const DepthTemplate& t, const RegionStats& st, const Camera& cam) {
  const double s = st.mean_range / t.mean_range;
  const double dist = t.object_in_camera.position.norm();
  // object centre sits on the template's optical axis; region centroid matches template centroid
  const Eigen::Vector2d centre = st.tangent_centroid - t.centroid / s;
  const Vec3 dir = Vec3(centre.x(), centre.y(), 1.0).normalized();
  const double centre_range = st.mean_range + (dist - t.mean_range);
  const Vec3 position = cam.pose.position + st.virtual_rotation * (dir * centre_range);
  const Quat orientation(st.virtual_rotation * t.object_in_camera.rotation_matrix());
  return {position, orientation};
}

/// Ranks templates of the view elevation nearest the region's viewing ray.
inline std::vector<TemplateMatch> match_templates(const DepthImage& img, const Region& r, const Camera& cam,
                                                  const TemplateSet& set, const ModelLibrary& lib, const MatchConfig& mc = {}) {
  if (set.templates.empty()) throw PerceptionError("match_templates: empty template set");
  std::vector<TemplateMatch> out;
  if (r.pixels.size() < mc.min_overlap) return out;
  const RegionStats st = region_stats(img, r, cam);
  const double view_el = std::asin(std::clamp(-st.ray_world.z(), -1.0, 1.0));
  double el_pick = set.cfg.elevations.front();
  for (double el : set.cfg.elevations)
    if (std::abs(el - view_el) < std::abs(el_pick - view_el)) el_pick = el;
  // physical size of the region bounds which objects are plausible
  const auto pts = region_points(img, r, cam);
  Vec3 lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double extent = (hi - lo).norm();
  for (std::size_t i = 0; i < set.templates.size(); ++i) {
    const auto& t = set.templates[i];
    if (t.elevation != el_pick) continue;
    const double diameter = 2.0 * bounding_radius(lib.get(t.object_id).shape);
    if (extent > 2.0 * diameter || extent < 0.25 * diameter) continue;
    const TemplateScore s = score_template(st, t, mc);
    if (s.overlap < mc.min_overlap) continue;
    out.push_back({t.object_id, coarse_pose_from(t, st, cam), s.score, i});
  }
  std::stable_sort(out.begin(), out.end(), [](const TemplateMatch& a, const TemplateMatch& b) { return a.score > b.score; });
  return out;
}

}  // namespace ait::perception
