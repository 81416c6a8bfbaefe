#include "wmr/motion_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace wmr {

using nlohmann::json;

std::vector<int> subject_ids(const MotionFile& m) {
  std::set<int> ids;
  for (const auto& r : m.frames) ids.insert(r.subject_id);
  return {ids.begin(), ids.end()};
}

std::vector<const MotionRecord*> subject_records(const MotionFile& m, int subject_id) {
  std::vector<const MotionRecord*> out;
  for (const auto& r : m.frames) {
    if (r.subject_id == subject_id) out.push_back(&r);
  }
  return out;
}

void sort_records(MotionFile& m) {
  std::stable_sort(m.frames.begin(), m.frames.end(), [](const MotionRecord& a, const MotionRecord& b) {
    return std::pair(a.pred.frame_index, a.subject_id) < std::pair(b.pred.frame_index, b.subject_id);
  });
  std::stable_sort(m.robot_frames.begin(), m.robot_frames.end(),
                   [](const RobotRecord& a, const RobotRecord& b) {
                     return std::pair(a.frame_index, a.subject_id) < std::pair(b.frame_index, b.subject_id);
                   });
}

namespace {

json vec_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }
json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json mat3_json(const Mat3& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  }
  return a;
}

void check_finite(double x, const char* field) {
  if (!std::isfinite(x)) throw ValidationError(std::string("cannot serialize non-finite ") + field);
}

void check_finite(const Eigen::MatrixXd& m, const char* field) {
  if (!m.allFinite()) throw ValidationError(std::string("cannot serialize non-finite ") + field);
}

json header_json(const MotionHeader& h) {
  json j = {{"type", "header"},
            {"format_version", h.format_version},
            {"frame_rate", h.frame_rate},
            {"rig", h.rig},
            {"dims", {{"z_model", h.z_model_dim}, {"z_expr", h.z_expr_dim}, {"beta_shape", h.beta_shape_dim}}}};
  if (!h.robot.empty()) j["robot"] = {{"name", h.robot}, {"joints", h.robot_joints}};
  return j;
}

json frame_json(const MotionRecord& r) {
  const FramePrediction& p = r.pred;
  check_finite(p.z_model, "z_model");
  check_finite(p.z_expr, "z_expr");
  check_finite(p.beta_shape, "beta_shape");
  check_finite(p.gamma_scale, "gamma_scale");
  check_finite(p.cam_root_rotation, "cam_root_rotation");
  check_finite(p.cam_root_translation, "cam_root_translation");
  json j = {{"type", "frame"},
            {"frame_index", p.frame_index},
            {"subject_id", r.subject_id},
            {"z_model", vec_json(p.z_model)},
            {"z_expr", vec_json(p.z_expr)},
            {"beta_shape", vec_json(p.beta_shape)},
            {"gamma_scale", p.gamma_scale},
            {"cam_root_rotation", mat3_json(p.cam_root_rotation)},
            {"cam_root_translation", vec3_json(p.cam_root_translation)},
            {"bbox", json::array({p.bbox.x1, p.bbox.y1, p.bbox.x2, p.bbox.y2})}};
  if (r.world) {
    check_finite(r.world->translation, "world.root_translation");
    check_finite(r.world->rotation, "world.root_rotation");
    j["world"] = {{"root_translation", vec3_json(r.world->translation)},
                  {"root_rotation", mat3_json(r.world->rotation)},
                  {"ground_height", r.world->ground_height},
                  {"contact", json::array({r.world->contact[0], r.world->contact[1]})}};
  }
  return j;
}

json robot_json(const RobotRecord& r) {
  check_finite(r.joint_angles, "joint_angles");
  return {{"type", "robot_frame"},
          {"frame_index", r.frame_index},
          {"subject_id", r.subject_id},
          {"root_translation", vec3_json(r.root_translation)},
          {"root_rotation", mat3_json(r.root_rotation)},
          {"joint_angles", vec_json(r.joint_angles)}};
}

class Reader {
 public:
  explicit Reader(int line) : line_(line) {}

  [[noreturn]] void malformed(const std::string& msg) const {
    throw MalformedRecordError("motion file line " + std::to_string(line_) + ": " + msg);
  }

  const json& field(const json& j, const char* name) const {
    const auto it = j.find(name);
    if (it == j.end()) malformed(std::string("missing field '") + name + "'");
    return *it;
  }

  double number(const json& j, const char* name) const {
    const json& v = field(j, name);
    if (!v.is_number()) malformed(std::string("field '") + name + "' must be a number");
    return v.get<double>();
  }

  int integer(const json& j, const char* name) const {
    const json& v = field(j, name);
    if (!v.is_number_integer()) malformed(std::string("field '") + name + "' must be an integer");
    return v.get<int>();
  }

  std::vector<double> numbers(const json& j, const char* name) const {
    const json& v = field(j, name);
    if (!v.is_array()) malformed(std::string("field '") + name + "' must be an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) malformed(std::string("field '") + name + "' must contain only numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  Eigen::VectorXd vector(const json& j, const char* name, int expected, bool dimension_error) const {
    const std::vector<double> v = numbers(j, name);
    if (expected >= 0 && static_cast<int>(v.size()) != expected) {
      const std::string msg = "motion file line " + std::to_string(line_) + ": dimension mismatch in field '" +
                              name + "': expected " + std::to_string(expected) + ", found " +
                              std::to_string(v.size());
      if (dimension_error) throw DimensionMismatchError(msg);
      throw MalformedRecordError(msg);
    }
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  Vec3 vec3(const json& j, const char* name) const { return vector(j, name, 3, false); }

  Mat3 mat3(const json& j, const char* name) const {
    const Eigen::VectorXd v = vector(j, name, 9, false);
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m(r, c) = v[3 * r + c];
    }
    return m;
  }

 private:
  int line_;
};

MotionHeader parse_header(const json& j, const Reader& rd) {
  MotionHeader h;
  h.format_version = rd.integer(j, "format_version");
  if (h.format_version != kMotionFormatVersion) {
    throw FormatVersionError("motion file version mismatch: file has format_version " +
                             std::to_string(h.format_version) + ", this build reads " +
                             std::to_string(kMotionFormatVersion));
  }
  h.frame_rate = rd.number(j, "frame_rate");
  if (!(h.frame_rate > 0.0)) rd.malformed("frame_rate must be positive");
  const json& rig = rd.field(j, "rig");
  if (!rig.is_string()) rd.malformed("field 'rig' must be a string");
  h.rig = rig.get<std::string>();
  if (h.rig != kRigId) rd.malformed("unknown rig '" + h.rig + "'");
  const json& dims = rd.field(j, "dims");
  h.z_model_dim = rd.integer(dims, "z_model");
  h.z_expr_dim = rd.integer(dims, "z_expr");
  h.beta_shape_dim = rd.integer(dims, "beta_shape");
  const std::pair<const char*, std::pair<int, int>> checks[] = {
      {"z_model", {h.z_model_dim, kLatentDim}},
      {"z_expr", {h.z_expr_dim, kExprDim}},
      {"beta_shape", {h.beta_shape_dim, kShapeDim}}};
  for (const auto& [name, dims_pair] : checks) {
    if (dims_pair.first != dims_pair.second) {
      throw DimensionMismatchError("motion file dimension mismatch in header field 'dims." +
                                   std::string(name) + "': file has " + std::to_string(dims_pair.first) +
                                   ", the stand-in rig uses " + std::to_string(dims_pair.second));
    }
  }
  if (const auto it = j.find("robot"); it != j.end()) {
    const json& name = rd.field(*it, "name");
    const json& joints = rd.field(*it, "joints");
    if (!name.is_string() || !joints.is_array()) rd.malformed("robot header needs a name and a joint list");
    h.robot = name.get<std::string>();
    for (const auto& s : joints) {
      if (!s.is_string()) rd.malformed("robot joint names must be strings");
      h.robot_joints.push_back(s.get<std::string>());
    }
  }
  return h;
}

MotionRecord parse_frame(const json& j, const MotionHeader& h, const Reader& rd) {
  MotionRecord r;
  FramePrediction& p = r.pred;
  p.frame_index = rd.integer(j, "frame_index");
  r.subject_id = rd.integer(j, "subject_id");
  p.z_model = rd.vector(j, "z_model", h.z_model_dim, true);
  p.z_expr = rd.vector(j, "z_expr", h.z_expr_dim, true);
  p.beta_shape = rd.vector(j, "beta_shape", h.beta_shape_dim, true);
  p.gamma_scale = rd.number(j, "gamma_scale");
  if (!(p.gamma_scale > 0.0)) rd.malformed("gamma_scale must be positive");
  p.cam_root_rotation = rd.mat3(j, "cam_root_rotation");
  p.cam_root_translation = rd.vec3(j, "cam_root_translation");
  const Eigen::VectorXd b = rd.vector(j, "bbox", 4, false);
  p.bbox = {b[0], b[1], b[2], b[3]};
  if (!p.bbox.valid()) rd.malformed("bbox must satisfy x1 < x2 and y1 < y2");
  if (const auto it = j.find("world"); it != j.end()) {
    WorldRoot w;
    w.translation = rd.vec3(*it, "root_translation");
    w.rotation = rd.mat3(*it, "root_rotation");
    w.ground_height = rd.number(*it, "ground_height");
    const Eigen::VectorXd c = rd.vector(*it, "contact", 2, false);
    w.contact = {c[0], c[1]};
    r.world = w;
  }
  return r;
}

RobotRecord parse_robot(const json& j, const MotionHeader& h, const Reader& rd) {
  if (h.robot.empty()) rd.malformed("robot_frame record without a robot header");
  RobotRecord r;
  r.frame_index = rd.integer(j, "frame_index");
  r.subject_id = rd.integer(j, "subject_id");
  r.root_translation = rd.vec3(j, "root_translation");
  r.root_rotation = rd.mat3(j, "root_rotation");
  r.joint_angles = rd.vector(j, "joint_angles", static_cast<int>(h.robot_joints.size()), true);
  return r;
}

}  // namespace

void write_motion(std::ostream& out, const MotionFile& m) {
  out << header_json(m.header).dump() << '\n';
  for (const auto& r : m.frames) out << frame_json(r).dump() << '\n';
  for (const auto& r : m.robot_frames) out << robot_json(r).dump() << '\n';
}

MotionFile read_motion(std::istream& in) {
  MotionFile m;
  std::string raw;
  int line = 0;
  bool have_header = false;
  int last_frame = std::numeric_limits<int>::min();
  int last_robot = std::numeric_limits<int>::min();
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    const Reader rd(line);
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::parse_error& e) {
      rd.malformed(std::string("not a JSON record (") + e.what() + ")");
    }
    if (!j.is_object()) rd.malformed("record must be a JSON object");
    const json& type = rd.field(j, "type");
    if (!type.is_string()) rd.malformed("field 'type' must be a string");
    const std::string t = type.get<std::string>();
    if (!have_header) {
      if (t != "header") rd.malformed("the first record must be the header");
      m.header = parse_header(j, rd);
      have_header = true;
    } else if (t == "frame") {
      m.frames.push_back(parse_frame(j, m.header, rd));
      const int fi = m.frames.back().pred.frame_index;
      if (fi < last_frame) rd.malformed("frame_index decreases");
      last_frame = fi;
    } else if (t == "robot_frame") {
      m.robot_frames.push_back(parse_robot(j, m.header, rd));
      const int fi = m.robot_frames.back().frame_index;
      if (fi < last_robot) rd.malformed("robot frame_index decreases");
      last_robot = fi;
    } else if (t == "header") {
      rd.malformed("duplicate header record");
    } else {
      rd.malformed("unknown record type '" + t + "'");
    }
  }
  if (!have_header) throw MalformedRecordError("motion file has no header record");
  return m;
}

std::string motion_to_string(const MotionFile& m) {
  std::ostringstream ss;
  write_motion(ss, m);
  return ss.str();
}

MotionFile motion_from_string(const std::string& text) {
  std::istringstream ss(text);
  return read_motion(ss);
}

void save_motion(const std::string& path, const MotionFile& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write motion file '" + path + "'");
  write_motion(f, m);
  if (!f) throw ValidationError("error writing motion file '" + path + "'");
}

MotionFile load_motion(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open motion file '" + path + "'");
  return read_motion(f);
}

}  // namespace wmr
