#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bikebot/model.hpp"

namespace bikebot::io {

using json = nlohmann::json;

/// Strict view of one JSON object. Every accessor records its key; finish()
/// rejects keys nobody asked for. Errors carry the dotted path of the field.
class Reader {
 public:
  Reader(const json& j, std::string path);

  [[nodiscard]] bool has(const std::string& key) const;
  double number(const std::string& key, double fallback);
  double number(const std::string& key);
  std::optional<double> optional_number(const std::string& key);
  int integer(const std::string& key, int fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string string(const std::string& key, const std::string& fallback);
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback);
  std::vector<double> numbers(const std::string& key);
  std::vector<std::vector<double>> rows(const std::string& key);
  Reader child(const std::string& key);
  /// Raw access for polymorphic fields (string or object).
  const json& raw(const std::string& key);
  [[nodiscard]] const std::string& path() const { return path_; }
  [[nodiscard]] std::string field(const std::string& key) const;

  void finish() const;

 private:
  const json& get(const std::string& key);
  const json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

/// Robot description: lengths in m, masses in kg, angles in degrees.
///   {"bike": {...}, "links": [{...}], "mount": {...}, "bounds_deg": {...}, "home_deg": [...]}
/// Omitted sections fall back to the prototype values.
RobotModel robot_from_json(const json& j, const std::string& path = "robot");
json robot_to_json(const RobotModel& model);

/// "default", "platform_only" or "toy".
RobotModel named_robot(const std::string& name);

/// A string names a built-in robot, an object is a description.
RobotModel robot_from_config(const json& j, const std::string& path = "robot");

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace bikebot::io
