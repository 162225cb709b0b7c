#include "bikebot/io.hpp"

#include <cstdint>
#include <cstdio>

#include "bikebot/errors.hpp"
#include "bikebot/planner.hpp"
#include "bikebot/units.hpp"

namespace bikebot::io {

using units::deg;
using units::rad;

Reader::Reader(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
  if (!j.is_object()) throw ConfigError(path_ + ": expected an object");
}

std::string Reader::field(const std::string& key) const {
  return path_.empty() ? key : path_ + "." + key;
}

bool Reader::has(const std::string& key) const { return j_->contains(key); }

const json& Reader::get(const std::string& key) {
  seen_.insert(key);
  return j_->at(key);
}

double Reader::number(const std::string& key, double fallback) {
  if (!has(key)) return fallback;
  return number(key);
}

double Reader::number(const std::string& key) {
  if (!has(key)) throw ConfigError(field(key) + ": required field missing");
  const json& v = get(key);
  if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
  return v.get<double>();
}

std::optional<double> Reader::optional_number(const std::string& key) {
  if (!has(key)) return std::nullopt;
  if (j_->at(key).is_null()) {
    seen_.insert(key);
    return std::nullopt;
  }
  return number(key);
}

int Reader::integer(const std::string& key, int fallback) {
  if (!has(key)) return fallback;
  const json& v = get(key);
  if (!v.is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
  return v.get<int>();
}

bool Reader::boolean(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  const json& v = get(key);
  if (!v.is_boolean()) throw ConfigError(field(key) + ": expected true or false");
  return v.get<bool>();
}

std::string Reader::string(const std::string& key, const std::string& fallback) {
  if (!has(key)) return fallback;
  const json& v = get(key);
  if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> Reader::numbers(const std::string& key, const std::vector<double>& fallback) {
  if (!has(key)) return fallback;
  return numbers(key);
}

std::vector<double> Reader::numbers(const std::string& key) {
  if (!has(key)) throw ConfigError(field(key) + ": required field missing");
  const json& v = get(key);
  if (!v.is_array()) throw ConfigError(field(key) + ": expected an array of numbers");
  std::vector<double> out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      throw ConfigError(field(key) + "[" + std::to_string(i) + "]: expected a number");
    }
    out.push_back(v[i].get<double>());
  }
  return out;
}

std::vector<std::vector<double>> Reader::rows(const std::string& key) {
  if (!has(key)) throw ConfigError(field(key) + ": required field missing");
  const json& v = get(key);
  if (!v.is_array()) throw ConfigError(field(key) + ": expected an array of arrays");
  std::vector<std::vector<double>> out;
  for (size_t i = 0; i < v.size(); ++i) {
    const std::string p = field(key) + "[" + std::to_string(i) + "]";
    if (!v[i].is_array()) throw ConfigError(p + ": expected an array of numbers");
    std::vector<double> row;
    for (size_t k = 0; k < v[i].size(); ++k) {
      if (!v[i][k].is_number()) {
        throw ConfigError(p + "[" + std::to_string(k) + "]: expected a number");
      }
      row.push_back(v[i][k].get<double>());
    }
    out.push_back(std::move(row));
  }
  return out;
}

Reader Reader::child(const std::string& key) { return Reader(get(key), field(key)); }

const json& Reader::raw(const std::string& key) {
  if (!has(key)) throw ConfigError(field(key) + ": required field missing");
  return get(key);
}

void Reader::finish() const {
  for (auto it = j_->begin(); it != j_->end(); ++it) {
    if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown key");
  }
}

namespace {

Vec3 vec3(const std::vector<double>& v, const std::string& what) {
  if (v.size() != 3) throw ConfigError(what + ": expected 3 entries");
  return {v[0], v[1], v[2]};
}

Vec degrees_to_vec(const std::vector<double>& v) {
  Vec out(static_cast<int>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = rad(v[i]);
  return out;
}

std::vector<double> vec_to_degrees(const Vec& v) {
  std::vector<double> out;
  for (int i = 0; i < v.size(); ++i) out.push_back(deg(v[i]));
  return out;
}

}  // namespace

RobotModel robot_from_json(const json& j, const std::string& path) {
  Reader r(j, path);
  RobotModel model = default_model();
  if (r.has("bike")) {
    Reader b = r.child("bike");
    BikebotParams& p = model.bike;
    p.m_b = b.number("m_b", p.m_b);
    p.I_b = b.number("I_b", p.I_b);
    p.h_G = b.number("h_G", p.h_G);
    p.l = b.number("l", p.l);
    p.epsilon = rad(b.number("epsilon_deg", deg(p.epsilon)));
    p.R = b.number("R", p.R);
    p.g = b.number("g", p.g);
    b.finish();
  }
  if (r.has("links")) {
    const json& arr = r.raw("links");
    if (!arr.is_array()) throw ConfigError(r.field("links") + ": expected an array");
    model.links.clear();
    for (size_t i = 0; i < arr.size(); ++i) {
      Reader l(arr[i], r.field("links") + "[" + std::to_string(i) + "]");
      LinkParams link;
      link.theta_offset = rad(l.number("theta_offset_deg", 0.0));
      link.d = l.number("d");
      link.a = l.number("a");
      link.alpha = rad(l.number("alpha_deg"));
      link.mass = l.number("mass");
      if (l.has("com")) {
        link.com = vec3(l.numbers("com"), l.field("com"));
      } else {
        link.com = LinkParams::midpoint_com(link.d, link.a, link.alpha);
      }
      if (l.has("inertia_diag")) {
        link.inertia = vec3(l.numbers("inertia_diag"), l.field("inertia_diag")).asDiagonal();
      }
      l.finish();
      model.links.push_back(link);
    }
    // A new arm invalidates the default posture and bounds unless given below.
    const int n = model.num_links();
    model.home = Vec::Zero(n);
    model.bounds.lower = Vec::Constant(n + 1, -2.0 * units::kPi);
    model.bounds.upper = Vec::Constant(n + 1, 2.0 * units::kPi);
    model.bounds.lower[0] = rad(-20.0);
    model.bounds.upper[0] = rad(20.0);
  }
  if (r.has("mount")) {
    Reader m = r.child("mount");
    Pose p;
    p.position = vec3(m.numbers("position", {0.0, 0.0, model.bike.h_G + 0.1}), m.field("position"));
    const Vec3 o = vec3(m.numbers("orientation_deg", {0.0, 0.0, 0.0}), m.field("orientation_deg"));
    p.orientation = Vec3(rad(o[0]), rad(o[1]), rad(o[2]));
    model.mount = Transform::Identity();
    model.mount.linear() = p.rotation();
    model.mount.translation() = p.position;
    m.finish();
  }
  if (r.has("bounds_deg")) {
    Reader b = r.child("bounds_deg");
    model.bounds.lower = degrees_to_vec(b.numbers("lower"));
    model.bounds.upper = degrees_to_vec(b.numbers("upper"));
    b.finish();
  }
  if (r.has("home_deg")) model.home = degrees_to_vec(r.numbers("home_deg"));
  r.finish();
  model.validate();
  return model;
}

json robot_to_json(const RobotModel& model) {
  json j;
  const BikebotParams& p = model.bike;
  j["bike"] = {{"m_b", p.m_b}, {"I_b", p.I_b},           {"h_G", p.h_G}, {"l", p.l},
               {"epsilon_deg", deg(p.epsilon)}, {"R", p.R}, {"g", p.g}};
  j["links"] = json::array();
  for (const auto& l : model.links) {
    j["links"].push_back({{"theta_offset_deg", deg(l.theta_offset)},
                          {"d", l.d},
                          {"a", l.a},
                          {"alpha_deg", deg(l.alpha)},
                          {"mass", l.mass},
                          {"com", {l.com.x(), l.com.y(), l.com.z()}},
                          {"inertia_diag", {l.inertia(0, 0), l.inertia(1, 1), l.inertia(2, 2)}}});
  }
  const Pose mount = Pose::from_transform(model.mount);
  j["mount"] = {{"position", {mount.position.x(), mount.position.y(), mount.position.z()}},
                {"orientation_deg",
                 {deg(mount.orientation[0]), deg(mount.orientation[1]), deg(mount.orientation[2])}}};
  if (!model.bounds.empty()) {
    j["bounds_deg"] = {{"lower", vec_to_degrees(model.bounds.lower)},
                       {"upper", vec_to_degrees(model.bounds.upper)}};
  }
  j["home_deg"] = vec_to_degrees(model.home);
  return j;
}

RobotModel named_robot(const std::string& name) {
  if (name == "default") return default_model();
  if (name == "platform_only") return platform_only_model();
  if (name == "toy") return toy_model();
  throw ConfigError("unknown robot '" + name + "' (default | platform_only | toy)");
}

RobotModel robot_from_config(const json& j, const std::string& path) {
  if (j.is_string()) return named_robot(j.get<std::string>());
  return robot_from_json(j, path);
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace bikebot::io
