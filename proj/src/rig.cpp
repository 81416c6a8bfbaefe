#include "wmr/rig.hpp"

#include <cmath>
#include <random>

#include "wmr/errors.hpp"

namespace wmr {

int SkeletonRig::index_of(std::string_view name) const {
  for (int j = 0; j < joint_count(); ++j) {
    if (joint_names[j] == name) return j;
  }
  throw ValidationError("rig has no joint named '" + std::string(name) + "'");
}

void SkeletonRig::validate() const {
  const int n = joint_count();
  if (n == 0) throw ValidationError("rig has no joints");
  if (static_cast<int>(bone_offset.size()) != n || static_cast<int>(joint_names.size()) != n) {
    throw ValidationError("rig arrays have inconsistent lengths");
  }
  if (parent[0] != -1) throw ValidationError("rig joint 0 must be the root");
  if (!bone_offset[0].isZero(0.0)) throw ValidationError("rig root offset must be zero");
  for (int j = 1; j < n; ++j) {
    if (parent[j] < 0 || parent[j] >= j) {
      throw ValidationError("rig joint '" + joint_names[j] + "' is not topologically sorted");
    }
  }
}

namespace {

SkeletonRig build_standard_rig() {
  // Segment lengths follow Winter's anthropometric ratios for a 1.78 m adult
  // (thigh 0.245 H, shank 0.246 H, upper arm 0.186 H, forearm 0.146 H, hip 0.530 H,
  // shoulder 0.818 H).
  struct Row {
    const char* name;
    int parent;
    double x, y, z;
  };
  static constexpr Row rows[] = {
      {"pelvis", -1, 0.0, 0.0, 0.0},
      {"spine1", 0, 0.0, 0.0, 0.10},
      {"spine2", 1, 0.0, 0.0, 0.12},
      {"spine3", 2, 0.0, 0.0, 0.12},
      {"neck", 3, 0.0, 0.0, 0.19},
      {"head", 4, 0.0, 0.0, 0.12},
      {"left_hip", 0, -0.09, 0.0, -0.07},
      {"left_knee", 6, 0.0, 0.0, -0.436},
      {"left_ankle", 7, 0.0, 0.0, -0.438},
      {"left_foot", 8, 0.0, 0.14, -0.069},
      {"right_hip", 0, 0.09, 0.0, -0.07},
      {"right_knee", 10, 0.0, 0.0, -0.436},
      {"right_ankle", 11, 0.0, 0.0, -0.438},
      {"right_foot", 12, 0.0, 0.14, -0.069},
      {"left_collar", 3, -0.07, 0.0, 0.10},
      {"left_shoulder", 14, -0.16, 0.0, 0.0},
      {"left_elbow", 15, 0.0, 0.0, -0.331},
      {"left_wrist", 16, 0.0, 0.0, -0.260},
      {"left_hand", 17, 0.0, 0.0, -0.08},
      {"right_collar", 3, 0.07, 0.0, 0.10},
      {"right_shoulder", 19, 0.16, 0.0, 0.0},
      {"right_elbow", 20, 0.0, 0.0, -0.331},
      {"right_wrist", 21, 0.0, 0.0, -0.260},
      {"right_hand", 22, 0.0, 0.0, -0.08},
  };
  SkeletonRig rig;
  for (const Row& r : rows) {
    rig.joint_names.emplace_back(r.name);
    rig.parent.push_back(r.parent);
    rig.bone_offset.emplace_back(r.x, r.y, r.z);
  }
  rig.standing_height = 1.78;
  rig.validate();
  return rig;
}

constexpr PoseCoordinate kAnchors[] = {
    {"left_hip", 0},      {"left_knee", 0},      {"left_ankle", 0},
    {"right_hip", 0},     {"right_knee", 0},     {"right_ankle", 0},
    {"left_shoulder", 0}, {"left_elbow", 0},     {"right_shoulder", 0},
    {"right_elbow", 0},
};

}  // namespace

const SkeletonRig& standard_rig() {
  static const SkeletonRig rig = build_standard_rig();
  return rig;
}

std::span<const PoseCoordinate> decoder_anchor_coordinates() { return kAnchors; }

LatentDecoder make_decoder(const SkeletonRig& rig, int latent_dim, std::uint64_t seed) {
  const int rows = 3 * (rig.joint_count() - 1);
  if (latent_dim < static_cast<int>(std::size(kAnchors)) || latent_dim > rows) {
    throw ValidationError("latent dimension out of range for rig");
  }
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(rows, latent_dim);
  int col = 0;
  for (const PoseCoordinate& a : kAnchors) {
    basis(3 * (rig.index_of(a.joint) - 1) + a.axis, col++) = 1.0;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  while (col < latent_dim) {
    Eigen::VectorXd v(rows);
    for (int i = 0; i < rows; ++i) v[i] = normal(rng);
    // Modified Gram-Schmidt, applied twice for orthogonality to machine precision.
    for (int pass = 0; pass < 2; ++pass) {
      for (int k = 0; k < col; ++k) v -= basis.col(k).dot(v) * basis.col(k);
    }
    const double n = v.norm();
    if (n < 1e-8) continue;
    basis.col(col++) = v / n;
  }
  return LatentDecoder{std::move(basis)};
}

const LatentDecoder& standard_decoder() {
  static const LatentDecoder dec = make_decoder(standard_rig(), kLatentDim, kDecoderSeed);
  return dec;
}

std::vector<Vec3> LatentDecoder::decode(const Eigen::VectorXd& z_model) const {
  if (z_model.size() != latent_dim()) {
    throw ValidationError("z_model has dimension " + std::to_string(z_model.size()) +
                          ", decoder expects " + std::to_string(latent_dim()));
  }
  const Eigen::VectorXd flat = basis * z_model;
  std::vector<Vec3> out(pose_dim() / 3);
  for (size_t k = 0; k < out.size(); ++k) out[k] = flat.segment<3>(3 * k);
  return out;
}

Eigen::VectorXd LatentDecoder::encode(std::span<const Vec3> joint_rotations) const {
  if (static_cast<int>(3 * joint_rotations.size()) != pose_dim()) {
    throw ValidationError("joint rotation count does not match decoder");
  }
  Eigen::VectorXd flat(pose_dim());
  for (size_t k = 0; k < joint_rotations.size(); ++k) flat.segment<3>(3 * k) = joint_rotations[k];
  return basis.transpose() * flat;
}

SkeletonState forward_kinematics(const SkeletonRig& rig, const FramePose& pose,
                                 double gamma_scale) {
  const int n = rig.joint_count();
  SkeletonState s;
  s.positions.resize(n);
  s.rotations.resize(n);
  s.positions[0] = pose.root_translation;
  s.rotations[0] = pose.root_rotation;
  for (int j = 1; j < n; ++j) {
    const int p = rig.parent[j];
    s.positions[j] = s.positions[p] + s.rotations[p] * (gamma_scale * rig.bone_offset[j]);
    s.rotations[j] = s.rotations[p] * so3::exp(pose.joint_rotations[j - 1]);
  }
  return s;
}

std::vector<SkeletonState> forward_kinematics_batch(const SkeletonRig& rig,
                                                    std::span<const FramePose> poses,
                                                    std::span<const double> gamma_scale,
                                                    Exec exec) {
  const auto n = static_cast<std::ptrdiff_t>(poses.size());
  std::vector<SkeletonState> out(poses.size());
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < n; ++t) {
      out[t] = forward_kinematics(rig, poses[t], gamma_scale[t]);
    }
  } else {
    for (std::ptrdiff_t t = 0; t < n; ++t) {
      out[t] = forward_kinematics(rig, poses[t], gamma_scale[t]);
    }
  }
  return out;
}

Eigen::VectorXd bone_lengths(const SkeletonRig& rig, std::span<const Vec3> positions) {
  Eigen::VectorXd out(rig.joint_count() - 1);
  for (int j = 1; j < rig.joint_count(); ++j) {
    out[j - 1] = (positions[j] - positions[rig.parent[j]]).norm();
  }
  return out;
}

FramePose pose_from_prediction(const LatentDecoder& decoder, const FramePrediction& pred) {
  FramePose pose;
  pose.root_rotation = pred.cam_root_rotation;
  pose.root_translation = pred.cam_root_translation;
  pose.joint_rotations = decoder.decode(pred.z_model);
  return pose;
}

}  // namespace wmr
