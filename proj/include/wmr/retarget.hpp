#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "wmr/rig.hpp"
#include "wmr/robot.hpp"

namespace wmr {

struct JointPair {
  std::string human;
  std::string robot;
  Mat3 offset = Mat3::Identity();
  bool offset_given = false;  // set by an `offset` record; calibration leaves it alone
};

/// Human-to-robot joint correspondences. `body_axes` holds the robot's x, y, z axes
/// (columns) expressed in the human body frame; calibration uses it to face the rest
/// robot the same way as the rest human.
struct JointMap {
  std::vector<JointPair> pairs;
  Mat3 body_axes = Mat3::Identity();

  // Both throw ValidationError when absent.
  const JointPair& by_human(std::string_view human) const;
  const JointPair& by_robot(std::string_view robot) const;
  void validate(const SkeletonRig& rig, const RobotModel& model) const;
};

inline constexpr int kJointMapPairs = 14;

/// Parses the `wmr-jointmap 1` text format:
///   wmr-jointmap 1
///   body_axes <9 numbers, row-major>
///   map <human joint> <robot frame>
///   offset <human joint> <9 numbers, row-major>
JointMap parse_joint_map(std::string_view text);
JointMap load_joint_map(const std::string& path);
std::string_view default_joint_map_text();

struct IkConfig {
  double damping = 1e-2;
  int max_iters = 100;
  double tol_pos = 5e-3;
  double tol_rot = 1e-3;
};

struct RetargetConfig {
  Mat3 flip = Mat3::Identity();  // F
  double height_ratio = 0.0;     // <= 0 selects robot height / (human height * gamma)
  IkConfig ik;
  double ee_weight = 10.0;
  double mid_weight = 1.0;

  void validate() const;
};

/// R_zup * F * R_MHR * R_offset.
Mat3 align_rotation(const Mat3& r_mhr, const Mat3& r_offset, const Mat3& flip = Mat3::Identity());

/// Root-relative offsets scaled about each frame's root; the roots scaled about the origin.
/// positions[t][j], root joint 0.
std::vector<std::vector<Vec3>> scale_targets(std::span<const std::vector<Vec3>> positions,
                                             double height_ratio);

/// Fills R_offset of every pair without an explicit offset so that the rest human (all
/// joint rotations identity in the world) maps onto the zero-angle robot.
void calibrate_offsets(JointMap& map, const RobotModel& model);

enum Limb { kLeftArm = 0, kRightArm = 1, kLeftLeg = 2, kRightLeg = 3 };
inline constexpr int kLimbCount = 4;

struct LimbChain {
  int ee_frame = -1;
  int mid_frame = -1;
  std::vector<int> dofs;
};

/// Frame indices and dof sets the solver works on, resolved once per model and map.
struct RobotChains {
  const RobotModel* model = nullptr;
  int torso_frame = -1;
  std::vector<int> torso_dofs;
  std::array<LimbChain, kLimbCount> limbs;
};

RobotChains resolve_chains(const RobotModel& model, const JointMap& map);

/// Robot-scale targets of one frame.
struct FrameTargets {
  Mat3 root_rotation = Mat3::Identity();
  Vec3 root_position = Vec3::Zero();
  Mat3 torso_rotation = Mat3::Identity();
  std::array<Vec3, kLimbCount> end_effector;  // wrist, wrist, ankle, ankle
  std::array<Vec3, kLimbCount> intermediate;  // elbow, elbow, knee, knee
};

struct IkResult {
  Eigen::VectorXd q;
  std::array<double, kLimbCount> ee_error{};
  std::array<double, kLimbCount> mid_error{};
  double torso_error = 0.0;
  int iterations = 0;
};

/// Root set exactly, waist solved for the torso orientation, then each limb driven to its
/// end-effector target by damped least squares with clamping after every step.
/// Unreachable targets end best-effort; the residual is in ee_error.
IkResult ik_stage1(const RobotChains& chains, const FrameTargets& targets,
                   const Eigen::VectorXd& q_init, const IkConfig& cfg);

/// Weighted least squares on each limb's dofs pulling knees and elbows to their targets
/// while holding the end effector, then an end-effector polish if it drifted past tol_pos.
IkResult ik_stage2(const RobotChains& chains, const FrameTargets& targets, const IkResult& stage1,
                   const IkConfig& cfg, double ee_weight, double mid_weight);

/// Human joint positions and world-aligned rotations of one grounded frame: the root sits at
/// world_root and the ground plane is moved to z = 0.
SkeletonState human_world_state(const SkeletonRig& rig, const LatentDecoder& decoder,
                                const FramePrediction& pred, const Vec3& world_root,
                                double ground_height, const Mat3& flip = Mat3::Identity());

struct RetargetedFrame {
  int frame_index = 0;
  Mat3 root_rotation = Mat3::Identity();
  Vec3 root_translation = Vec3::Zero();
  Eigen::VectorXd q;
  IkResult stage1;
  IkResult stage2;
};

struct RetargetedMotion {
  double height_ratio = 0.0;
  std::vector<std::string> dof_names;
  std::vector<RetargetedFrame> frames;
};

/// Per frame: root and torso rotation alignment, height-ratio scaling, then stage 1 and
/// stage 2 IK warm-started from the previous frame.
RetargetedMotion retarget_sequence(std::span<const FramePrediction> frames,
                                   std::span<const Vec3> world_root, double ground_height,
                                   const SkeletonRig& rig, const LatentDecoder& decoder,
                                   const RobotModel& model, const JointMap& map,
                                   const RetargetConfig& cfg);

/// Robot-scale targets of one grounded human frame.
FrameTargets frame_targets(const SkeletonRig& rig, const LatentDecoder& decoder,
                           const FramePrediction& pred, const Vec3& world_root,
                           double ground_height, const RobotChains& chains, const JointMap& map,
                           const Mat3& flip, double height_ratio);

/// robot height / (human rest height * mean gamma).
double auto_height_ratio(const SkeletonRig& rig, const RobotModel& model,
                         std::span<const FramePrediction> frames);

}  // namespace wmr
