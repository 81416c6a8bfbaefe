#include "wmr/robot.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "wmr/errors.hpp"

namespace wmr {

int RobotModel::dof_count() const {
  int n = 0;
  for (const auto& f : frames) n += f.revolute ? 1 : 0;
  return n;
}

int RobotModel::frame_index(std::string_view n) const {
  for (size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].name == n) return static_cast<int>(i);
  }
  throw ValidationError("robot model has no frame named '" + std::string(n) + "'");
}

int RobotModel::role_frame(std::string_view role) const {
  const auto it = roles.find(role);
  if (it == roles.end()) throw ValidationError("robot model has no role '" + std::string(role) + "'");
  return frame_index(it->second);
}

std::vector<std::string> RobotModel::dof_names() const {
  std::vector<std::string> out(dof_count());
  for (const auto& f : frames) {
    if (f.revolute) out[f.dof] = f.name;
  }
  return out;
}

Eigen::VectorXd RobotModel::seed_angles() const {
  Eigen::VectorXd q(dof_count());
  for (const auto& f : frames) {
    if (f.revolute) q[f.dof] = f.seed;
  }
  return q;
}

Eigen::VectorXd RobotModel::clamp(const Eigen::VectorXd& q) const {
  Eigen::VectorXd out = q;
  for (const auto& f : frames) {
    if (f.revolute) out[f.dof] = std::clamp(q[f.dof], f.lower, f.upper);
  }
  return out;
}

bool RobotModel::within_limits(const Eigen::VectorXd& q, double slack) const {
  for (const auto& f : frames) {
    if (f.revolute && (q[f.dof] < f.lower - slack || q[f.dof] > f.upper + slack)) return false;
  }
  return true;
}

void RobotModel::validate() const {
  if (frames.empty()) throw ValidationError("robot model has no frames");
  if (frames[0].parent != -1 || frames[0].revolute) {
    throw ValidationError("robot frame 0 must be the floating root");
  }
  for (size_t i = 1; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.parent < 0 || f.parent >= static_cast<int>(i)) {
      throw ValidationError("robot frame '" + f.name + "' is not topologically sorted");
    }
    if (f.revolute && !(f.lower < f.upper)) {
      throw ValidationError("robot joint '" + f.name + "' has min >= max");
    }
    if (f.revolute && std::abs(f.axis.norm() - 1.0) > 1e-9) {
      throw ValidationError("robot joint '" + f.name + "' axis is not a unit vector");
    }
  }
  for (const char* r : {"left_wrist", "right_wrist", "left_ankle", "right_ankle", "left_elbow",
                        "right_elbow", "left_knee", "right_knee", "torso"}) {
    role_frame(r);
  }
  if (!(standing_height > 0.0)) throw ValidationError("robot standing_height must be positive");
}

namespace {

[[noreturn]] void parse_fail(int line, const std::string& msg) {
  throw ValidationError("robot model line " + std::to_string(line) + ": " + msg);
}

}  // namespace

RobotModel parse_robot_model(std::string_view text) {
  RobotModel m;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  bool header = false;
  int next_dof = 0;
  auto parent_of = [&](const std::string& name) {
    for (size_t i = 0; i < m.frames.size(); ++i) {
      if (m.frames[i].name == name) return static_cast<int>(i);
    }
    parse_fail(line, "unknown parent frame '" + name + "'");
  };
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream ls(raw);
    std::string key;
    if (!(ls >> key)) continue;
    if (!header) {
      int version = 0;
      if (key != "wmr-robot" || !(ls >> version)) parse_fail(line, "expected 'wmr-robot <version>' header");
      if (version != 1) parse_fail(line, "unsupported robot format version " + std::to_string(version));
      header = true;
      continue;
    }
    if (key == "name") {
      if (!(ls >> m.name)) parse_fail(line, "name needs a value");
    } else if (key == "standing_height") {
      if (!(ls >> m.standing_height)) parse_fail(line, "standing_height needs a number");
    } else if (key == "root") {
      RobotFrame f;
      if (!(ls >> f.name)) parse_fail(line, "root needs a frame name");
      if (!m.frames.empty()) parse_fail(line, "root must be declared before other frames");
      m.frames.push_back(f);
    } else if (key == "joint" || key == "frame") {
      if (m.frames.empty()) parse_fail(line, "declare the root first");
      RobotFrame f;
      std::string parent;
      if (!(ls >> f.name >> parent >> f.offset.x() >> f.offset.y() >> f.offset.z())) {
        parse_fail(line, key + " needs <name> <parent> <ox> <oy> <oz>");
      }
      f.parent = parent_of(parent);
      if (key == "joint") {
        if (!(ls >> f.axis.x() >> f.axis.y() >> f.axis.z() >> f.lower >> f.upper)) {
          parse_fail(line, "joint needs <ax> <ay> <az> <min> <max>");
        }
        if (!(ls >> f.seed)) f.seed = 0.0;
        f.revolute = true;
        f.dof = next_dof++;
      }
      m.frames.push_back(f);
    } else if (key == "role") {
      std::string role, frame;
      if (!(ls >> role >> frame)) parse_fail(line, "role needs <role> <frame>");
      m.roles[role] = frame;
    } else {
      parse_fail(line, "unknown record '" + key + "'");
    }
  }
  if (!header) throw ValidationError("robot model: missing 'wmr-robot' header");
  m.validate();
  return m;
}

RobotModel load_robot_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open robot model '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_robot_model(ss.str());
}

std::string_view default_robot_model_text() {
  // Proportions are the stand-in human rig scaled by 1.32 / 1.78. Robot axes: x forward,
  // y left, z up.
  static constexpr std::string_view text = R"(wmr-robot 1
name g1_simplified
standing_height 1.32
root pelvis
# legs: spherical hip (pitch, roll, yaw) + knee; the ankle is the end effector
joint left_hip_pitch   pelvis          0  0.066742 -0.051910   0 1 0   -2.53 2.88
joint left_hip_roll    left_hip_pitch  0  0 0                  1 0 0   -0.52 2.97
joint left_hip_yaw     left_hip_roll   0  0 0                  0 0 1   -2.76 2.76
joint left_knee        left_hip_yaw    0  0 -0.323326          0 1 0   -0.087 2.88  0.2
frame left_ankle       left_knee       0  0 -0.324809
joint right_hip_pitch  pelvis          0 -0.066742 -0.051910   0 1 0   -2.53 2.88
joint right_hip_roll   right_hip_pitch 0  0 0                  1 0 0   -2.97 0.52
joint right_hip_yaw    right_hip_roll  0  0 0                  0 0 1   -2.76 2.76
joint right_knee       right_hip_yaw   0  0 -0.323326          0 1 0   -0.087 2.88  0.2
frame right_ankle      right_knee      0  0 -0.324809
# waist
joint waist_yaw        pelvis          0  0 0.074157           0 0 1   -2.62 2.62
joint waist_roll       waist_yaw       0  0 0                  1 0 0   -0.52 0.52
joint waist_pitch      waist_roll      0  0 0                  0 1 0   -0.52 0.52
frame torso            waist_pitch     0  0 0.177978
frame head             torso           0  0 0.229888
# arms: spherical shoulder (pitch, roll, yaw) + elbow; the wrist is the end effector
joint left_shoulder_pitch   torso                 0  0.170562 0.074157   0 1 0   -3.09 2.67
joint left_shoulder_roll    left_shoulder_pitch   0  0 0                 1 0 0   -1.59 2.25
joint left_shoulder_yaw     left_shoulder_roll    0  0 0                 0 0 1   -2.62 2.62
joint left_elbow            left_shoulder_yaw     0  0 -0.245461         0 -1 0  -1.05 2.09  0.3
frame left_wrist            left_elbow            0  0 -0.192809
joint right_shoulder_pitch  torso                 0 -0.170562 0.074157   0 1 0   -3.09 2.67
joint right_shoulder_roll   right_shoulder_pitch  0  0 0                 1 0 0   -2.25 1.59
joint right_shoulder_yaw    right_shoulder_roll   0  0 0                 0 0 1   -2.62 2.62
joint right_elbow           right_shoulder_yaw    0  0 -0.245461         0 -1 0  -1.05 2.09  0.3
frame right_wrist           right_elbow           0  0 -0.192809
role left_wrist  left_wrist
role right_wrist right_wrist
role left_ankle  left_ankle
role right_ankle right_ankle
role torso       torso
role left_elbow  left_elbow
role right_elbow right_elbow
role left_knee   left_knee
role right_knee  right_knee
)";
  return text;
}

const RobotModel& default_robot_model() {
  static const RobotModel m = parse_robot_model(default_robot_model_text());
  return m;
}

RobotState fk_robot(const RobotModel& model, const Eigen::VectorXd& q, const Mat3& root_rotation,
                    const Vec3& root_translation) {
  const size_t n = model.frames.size();
  RobotState s;
  s.positions.resize(n);
  s.rotations.resize(n);
  s.positions[0] = root_translation;
  s.rotations[0] = root_rotation;
  for (size_t i = 1; i < n; ++i) {
    const RobotFrame& f = model.frames[i];
    const int p = f.parent;
    s.positions[i] = s.positions[p] + s.rotations[p] * f.offset;
    s.rotations[i] = f.revolute
                         ? Mat3(s.rotations[p] * Eigen::AngleAxisd(q[f.dof], f.axis).toRotationMatrix())
                         : s.rotations[p];
  }
  return s;
}

std::vector<int> chain_dofs(const RobotModel& model, int frame, int stop_frame) {
  std::vector<int> out;
  for (int i = frame; i > 0 && i != stop_frame; i = model.frames[i].parent) {
    if (model.frames[i].revolute) out.push_back(model.frames[i].dof);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace wmr
