#pragma once

#include <json.hpp>

#include "ait/errors.hpp"
#include "ait/geometry.hpp"

#include <optional>
#include <string>

namespace ait {

using json = nlohmann::json;

/// Path-tracking accessors over a JSON document. Every failure throws a
/// ParseError that names the offending location, e.g. `objects[2].grasps[0].preshape`.
class JsonCursor {
 public:
  JsonCursor(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const json& value() const { return *j_; }
  const std::string& path() const { return path_; }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  JsonCursor at(const std::string& key) const {
    require_object();
    if (!j_->contains(key)) throw ParseError(child_path(key), "missing required field");
    return {(*j_)[key], child_path(key)};
  }

  std::optional<JsonCursor> maybe(const std::string& key) const {
    require_object();
    if (!j_->contains(key) || (*j_)[key].is_null()) return std::nullopt;
    return JsonCursor((*j_)[key], child_path(key));
  }

  JsonCursor operator[](std::size_t i) const {
    require_array();
    if (i >= j_->size()) throw ParseError(path_ + "[" + std::to_string(i) + "]", "index out of range");
    return {(*j_)[i], path_ + "[" + std::to_string(i) + "]"};
  }

  std::size_t size() const {
    require_array();
    return j_->size();
  }

  double number() const {
    if (!j_->is_number()) throw ParseError(path_, "expected a number");
    return j_->get<double>();
  }
  double number(const std::string& key, double fallback) const {
    auto c = maybe(key);
    return c ? c->number() : fallback;
  }
  double number(const std::string& key) const { return at(key).number(); }

  long long integer() const {
    if (!j_->is_number_integer()) throw ParseError(path_, "expected an integer");
    return j_->get<long long>();
  }

  bool boolean() const {
    if (!j_->is_boolean()) throw ParseError(path_, "expected a boolean");
    return j_->get<bool>();
  }
  bool boolean(const std::string& key, bool fallback) const {
    auto c = maybe(key);
    return c ? c->boolean() : fallback;
  }

  std::string string() const {
    if (!j_->is_string()) throw ParseError(path_, "expected a string");
    return j_->get<std::string>();
  }
  std::string string(const std::string& key) const { return at(key).string(); }
  std::string string(const std::string& key, const std::string& fallback) const {
    auto c = maybe(key);
    return c ? c->string() : fallback;
  }

  Vec3 vec3() const {
    if (!j_->is_array() || j_->size() != 3) throw ParseError(path_, "expected an array of 3 numbers");
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = (*this)[static_cast<std::size_t>(i)].number();
    return v;
  }

  /// Quaternion stored as [w, x, y, z]. Not normalized here.
  Quat quat() const {
    if (!j_->is_array() || j_->size() != 4) throw ParseError(path_, "expected an array [w,x,y,z]");
    double c[4];
    for (int i = 0; i < 4; ++i) c[i] = (*this)[static_cast<std::size_t>(i)].number();
    return Quat(c[0], c[1], c[2], c[3]);
  }

  void require_object() const {
    if (!j_->is_object()) throw ParseError(path_, "expected an object");
  }
  void require_array() const {
    if (!j_->is_array()) throw ParseError(path_, "expected an array");
  }

 private:
  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* j_;
  std::string path_;
};

/// Accepts a unit vector if within `tol` of unit length and renormalizes it.
inline Vec3 checked_unit(const Vec3& v, const std::string& what, double tol = 1e-3) {
  const double n = v.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > tol)
    throw ValidationError(what, "expected a unit vector (norm " + std::to_string(n) + ")");
  return v / n;
}

inline Quat checked_unit(const Quat& q, const std::string& what, double tol = 1e-3) {
  const double n = q.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > tol)
    throw ValidationError(what, "expected a unit quaternion (norm " + std::to_string(n) + ")");
  return q.normalized();
}

inline json to_json_vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
inline json to_json_quat(const Quat& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }
inline json to_json_pose(const Pose& p) {
  return json{{"position", to_json_vec(p.position)}, {"orientation", to_json_quat(p.orientation)}};
}

inline Pose pose_from(const JsonCursor& c, const std::string& subject) {
  Pose p;
  p.position = c.at("position").vec3();
  p.orientation = c.has("orientation") ? checked_unit(c.at("orientation").quat(), subject + " orientation")
                                       : Quat::Identity();
  return p;
}

}  // namespace ait
