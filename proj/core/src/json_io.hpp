#pragma once

// Internal helpers shared by the .cpp files that read/write JSON configs.
// Not installed; keeps nlohmann/json out of the public headers.

#include "dlokit/geom.hpp"

#include <json.hpp>

#include <array>
#include <fstream>
#include <stdexcept>
#include <string>

namespace dlokit::detail {

using nlohmann::json;

inline json pose_to_json(const Pose& p) {
  const auto a = p.to_array();
  return json(a);
}

inline Pose pose_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 7) {
    throw std::runtime_error(what + ": pose must be [px,py,pz,qw,qx,qy,qz]");
  }
  std::array<double, 7> a{};
  for (int i = 0; i < 7; ++i) a[i] = j[i].get<double>();
  return Pose::from_array(a);
}

inline json vec_to_json(const VecX& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline VecX vec_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::runtime_error(what + ": expected array");
  VecX v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

inline Vec3 vec3_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error(what + ": expected 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline const json& require(const json& j, const std::string& key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw std::runtime_error(ctx + ": missing key '" + key + "'");
  return *it;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return j;
}

inline void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace dlokit::detail
