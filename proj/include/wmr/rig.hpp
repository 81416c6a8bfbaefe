#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "wmr/parallel.hpp"
#include "wmr/so3.hpp"

namespace wmr {

inline constexpr int kLatentDim = 32;      // D_z
inline constexpr int kExprDim = 8;         // D_e
inline constexpr int kShapeDim = 10;       // D_s
inline constexpr int kRigJoints = 24;

/// Pixel box, (x1, y1, x2, y2).
struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  bool valid() const { return x2 > x1 && y2 > y1; }
  bool operator==(const BBox&) const = default;
};

/// One frame of backbone output for one person. Camera convention: x right, y down,
/// z forward.
struct FramePrediction {
  int frame_index = 0;
  Eigen::VectorXd z_model = Eigen::VectorXd::Zero(kLatentDim);
  Eigen::VectorXd z_expr = Eigen::VectorXd::Zero(kExprDim);
  /// Carried, averaged and serialized; the stand-in rig has no shape basis, so it never
  /// changes geometry.
  Eigen::VectorXd beta_shape = Eigen::VectorXd::Zero(kShapeDim);
  double gamma_scale = 1.0;
  Mat3 cam_root_rotation = Mat3::Identity();
  Vec3 cam_root_translation = Vec3::Zero();
  BBox bbox;
};

/// Joint hierarchy with rest offsets. Parents precede children; joint 0 is the root.
struct SkeletonRig {
  std::vector<int> parent;
  std::vector<Vec3> bone_offset;
  std::vector<std::string> joint_names;
  /// Rest-pose height (soles to top of head) at gamma_scale = 1, meters.
  double standing_height = 0.0;

  int joint_count() const { return static_cast<int>(parent.size()); }
  /// Throws ValidationError if the name is unknown.
  int index_of(std::string_view name) const;
  /// Throws ValidationError on a broken hierarchy.
  void validate() const;
};

/// The 24-joint stand-in body: pelvis root, three spine joints, neck, head, and per side
/// hip/knee/ankle/foot and collar/shoulder/elbow/wrist/hand. Body frame: x right,
/// y forward, z up; the foot joints sit 1.013 m below the pelvis.
const SkeletonRig& standard_rig();

/// Linear map from the model latent to the stacked local axis-angles of the non-root
/// joints. Columns are orthonormal, so encode (basis^T) exactly inverts decode on the
/// column span.
struct LatentDecoder {
  Eigen::MatrixXd basis;  // (3 (J-1)) x D_z

  int latent_dim() const { return static_cast<int>(basis.cols()); }
  int pose_dim() const { return static_cast<int>(basis.rows()); }

  std::vector<Vec3> decode(const Eigen::VectorXd& z_model) const;
  Eigen::VectorXd encode(std::span<const Vec3> joint_rotations) const;
};

/// Seed of the random part of the standard decoder.
inline constexpr std::uint64_t kDecoderSeed = 42;

/// Pose coordinates (joint index, axis) that the standard decoder spans exactly; the
/// synthetic gait moves only these. The remaining columns are random directions,
/// orthonormalized against them.
struct PoseCoordinate {
  std::string_view joint;
  int axis;
};
std::span<const PoseCoordinate> decoder_anchor_coordinates();

const LatentDecoder& standard_decoder();
LatentDecoder make_decoder(const SkeletonRig& rig, int latent_dim, std::uint64_t seed);

struct FramePose {
  Mat3 root_rotation = Mat3::Identity();
  Vec3 root_translation = Vec3::Zero();
  std::vector<Vec3> joint_rotations;  // J - 1 local axis-angles, joint k+1 at index k
};

/// World joint positions and rotations.
struct SkeletonState {
  std::vector<Vec3> positions;
  std::vector<Mat3> rotations;
};

SkeletonState forward_kinematics(const SkeletonRig& rig, const FramePose& pose,
                                 double gamma_scale);

/// Frame-parallel FK over a sequence.
std::vector<SkeletonState> forward_kinematics_batch(const SkeletonRig& rig,
                                                    std::span<const FramePose> poses,
                                                    std::span<const double> gamma_scale,
                                                    Exec exec = Exec::Parallel);

/// Parent-child distance of every non-root joint.
Eigen::VectorXd bone_lengths(const SkeletonRig& rig, std::span<const Vec3> positions);

/// Pose of a prediction in its own (camera) frame.
FramePose pose_from_prediction(const LatentDecoder& decoder, const FramePrediction& pred);

}  // namespace wmr
