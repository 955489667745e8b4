#pragma once

#include "ait/perception/icp.hpp"
#include "ait/perception/templates.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ait::perception {

struct DetectedObject {
  std::string object_id;
  Pose pose;
  double match_score = 0.0;
  double icp_residual = 0.0;
  bool icp_diverged = false;
  bool under_constrained = false;
  std::size_t region = 0;
};

struct DetectionConfig {
  PlaneConfig plane;
  SegmentConfig segment;
  MatchConfig match;
  IcpConfig icp;
  double accept_score = 0.6;
  int arm_dilation_px = 3;
  std::size_t icp_candidates = 3;  // top templates refined; lowest residual wins
  std::size_t max_icp_points = 600;
};

struct RegionDiagnostic {
  std::size_t region = 0;
  std::string message;
};

struct DetectionReport {
  std::vector<DetectedObject> objects;
  std::vector<RegionDiagnostic> diagnostics;
  std::size_t regions = 0;
  bool plane_found = false;
};

struct ArmView {
  const arm::ArmModel* model = nullptr;
  arm::Vec7 q = arm::Vec7::Zero();
};

inline std::vector<Vec3> subsample(const std::vector<Vec3>& pts, std::size_t max_points) {
  if (pts.size() <= max_points) return pts;
  std::vector<Vec3> out;
  const double step = static_cast<double>(pts.size()) / static_cast<double>(max_points);
  for (std::size_t i = 0; i < max_points; ++i) out.push_back(pts[static_cast<std::size_t>(i * step)]);
  return out;
}

/// remove_plane -> mask_arm -> segment -> match_templates -> icp_refine. A region that
/// fails a stage is reported in the diagnostics and skipped.
inline DetectionReport detect_objects(const DepthImage& img, const ModelLibrary& lib, const TemplateSet& templates,
                                      const Camera& cam, const DetectionConfig& cfg = {},
                                      const std::optional<ArmView>& arm_view = std::nullopt) {
  DetectionReport rep;
  DepthImage work = img;
  if (work.valid_count() >= 3) {
    PlaneResult pr = remove_plane(work, cfg.plane);
    rep.plane_found = pr.found;
    work = std::move(pr.image);
  }
  if (arm_view && arm_view->model) work = mask_arm(work, *arm_view->model, arm_view->q, cam, cfg.arm_dilation_px);
  const auto regions = segment(work, cfg.segment);
  rep.regions = regions.size();
  for (std::size_t ri = 0; ri < regions.size(); ++ri) {
    try {
      const auto matches = match_templates(work, regions[ri], cam, templates, lib, cfg.match);
      if (matches.empty()) {
        rep.diagnostics.push_back({ri, "no template with sufficient overlap"});
        continue;
      }
      if (matches.front().score < cfg.accept_score) {
        rep.diagnostics.push_back({ri, "best score " + std::to_string(matches.front().score) + " below threshold"});
        continue;
      }
      const auto pts = subsample(region_points(work, regions[ri], cam), cfg.max_icp_points);
      if (pts.size() < 10) {
        rep.diagnostics.push_back({ri, "too few points for refinement"});
        continue;
      }
      std::optional<DetectedObject> best;
      for (std::size_t c = 0; c < std::min(cfg.icp_candidates, matches.size()); ++c) {
        const auto& m = matches[c];
        if (m.score < cfg.accept_score) break;
        const IcpResult icp = icp_refine(pts, lib.get(m.object_id).shape, m.coarse_pose, cfg.icp);
        if (!best || icp.residual < best->icp_residual)
          best = DetectedObject{m.object_id, icp.pose, m.score, icp.residual, icp.diverged, icp.under_constrained, ri};
      }
      rep.objects.push_back(*best);
    } catch (const std::exception& e) {
      rep.diagnostics.push_back({ri, e.what()});
    }
  }
  return rep;
}

}  // namespace ait::perception
