#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wmr/errors.hpp"
#include "wmr/rig.hpp"

namespace wmr {

inline constexpr int kMotionFormatVersion = 1;
inline constexpr const char* kRigId = "wmr-standin-24";

class FormatVersionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class DimensionMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class MalformedRecordError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Grounded world state of one frame. The ground plane is z = ground_height.
struct WorldRoot {
  Vec3 translation = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  double ground_height = 0.0;
  std::array<double, 2> contact{};  // left, right
};

struct MotionRecord {
  int subject_id = -1;  // -1 until tracked
  FramePrediction pred;
  std::optional<WorldRoot> world;
};

struct RobotRecord {
  int frame_index = 0;
  int subject_id = 0;
  Mat3 root_rotation = Mat3::Identity();
  Vec3 root_translation = Vec3::Zero();
  Eigen::VectorXd joint_angles;
};

struct MotionHeader {
  int format_version = kMotionFormatVersion;
  double frame_rate = 30.0;
  std::string rig = kRigId;
  int z_model_dim = kLatentDim;
  int z_expr_dim = kExprDim;
  int beta_shape_dim = kShapeDim;
  std::string robot;                      // empty until retargeted
  std::vector<std::string> robot_joints;  // joint_angles order
};

struct MotionFile {
  MotionHeader header;
  std::vector<MotionRecord> frames;       // non-decreasing frame_index
  std::vector<RobotRecord> robot_frames;  // non-decreasing frame_index
};

/// Subject ids present, ascending.
std::vector<int> subject_ids(const MotionFile& m);
/// Records of one subject in file order.
std::vector<const MotionRecord*> subject_records(const MotionFile& m, int subject_id);
/// Stable sort of frames and robot frames by (frame_index, subject_id).
void sort_records(MotionFile& m);

void write_motion(std::ostream& out, const MotionFile& m);
MotionFile read_motion(std::istream& in);
std::string motion_to_string(const MotionFile& m);
MotionFile motion_from_string(const std::string& text);
void save_motion(const std::string& path, const MotionFile& m);
MotionFile load_motion(const std::string& path);

/// Converts a per-frame quantity to per-second units.
inline double per_second(double per_frame, double frame_rate, int order = 1) {
  double s = per_frame;
  for (int i = 0; i < order; ++i) s *= frame_rate;
  return s;
}

}  // namespace wmr
