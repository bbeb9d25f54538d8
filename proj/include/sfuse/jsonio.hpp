#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfuse/csv.hpp"
#include "sfuse/pose.hpp"

namespace sfuse {
namespace detail {

inline nlohmann::json pose_to_json(const Pose6D& p) {
  return nlohmann::json{{"position", {p.position.x(), p.position.y(), p.position.z()}},
                        {"quaternion", {p.orientation.w(), p.orientation.x(), p.orientation.y(),
                                        p.orientation.z()}}};
}

inline Pose6D pose_from_json(const nlohmann::json& j) {
  const auto pos = j.at("position");
  const auto q = j.at("quaternion");
  if (pos.size() != 3 || q.size() != 4)
    throw std::invalid_argument("pose: position needs 3 entries and quaternion 4");
  return Pose6D(Vec3(pos[0].get<double>(), pos[1].get<double>(), pos[2].get<double>()),
                Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>()));
}

/// Config files are versioned and strict: any key outside the allowed set is
/// an error, so typos fail loudly instead of silently using a default.
inline void require_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const std::string& what) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const auto& k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw std::invalid_argument(what + ": unknown key '" + item.key() + "'");
  }
}

inline nlohmann::json load_json_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + what + ": " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(what + ": malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

inline void dump_json_file(const std::string& path, const nlohmann::json& j,
                           const std::string& what) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + what + " for writing: " + path);
  out << j.dump(2) << "\n";
}

} // namespace detail
} // namespace sfuse
