#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "wmr/so3.hpp"

namespace wmr {

/// One frame of a serial-chain robot. Revolute frames rotate about `axis` (parent
/// coordinates) by their joint angle after the fixed `offset`; fixed frames do not rotate.
struct RobotFrame {
  std::string name;
  int parent = -1;
  Vec3 offset = Vec3::Zero();
  bool revolute = false;
  Vec3 axis = Vec3::UnitZ();
  double lower = 0.0;
  double upper = 0.0;
  double seed = 0.0;  // cold-start angle
  int dof = -1;       // index into the joint-angle vector, -1 for fixed frames
};

/// Floating-base robot; frame 0 is the root. Roles name the end effectors
/// (left/right_wrist, left/right_ankle), the intermediate joints (left/right_elbow,
/// left/right_knee) and the torso frame.
struct RobotModel {
  std::string name;
  double standing_height = 0.0;
  std::vector<RobotFrame> frames;
  std::map<std::string, std::string, std::less<>> roles;

  int dof_count() const;
  int frame_index(std::string_view name) const;  // throws ValidationError
  int role_frame(std::string_view role) const;   // throws ValidationError
  std::vector<std::string> dof_names() const;
  Eigen::VectorXd seed_angles() const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& q) const;
  bool within_limits(const Eigen::VectorXd& q, double slack = 0.0) const;
  void validate() const;
};

/// Parses the `wmr-robot 1` text format:
///   wmr-robot 1
///   name <id>
///   standing_height <m>
///   root <frame>
///   joint <name> <parent> <ox oy oz> <ax ay az> <min> <max> [seed]
///   frame <name> <parent> <ox oy oz>
///   role <role> <frame>
/// Blank lines and '#' comments are ignored. Throws ValidationError with the line number.
RobotModel parse_robot_model(std::string_view text);
RobotModel load_robot_model(const std::string& path);

/// Text of the bundled simplified G1-like humanoid (1.32 m, 19 revolute joints: 4 per leg,
/// 3 waist, 4 per arm, fixed head).
std::string_view default_robot_model_text();
const RobotModel& default_robot_model();

struct RobotState {
  std::vector<Vec3> positions;
  std::vector<Mat3> rotations;
};

RobotState fk_robot(const RobotModel& model, const Eigen::VectorXd& q, const Mat3& root_rotation,
                    const Vec3& root_translation);

/// Revolute dofs on the path from `frame` up to (excluding) `stop_frame`, root-most first.
std::vector<int> chain_dofs(const RobotModel& model, int frame, int stop_frame);

}  // namespace wmr
