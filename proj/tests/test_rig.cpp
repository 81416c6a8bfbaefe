#include <doctest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"
#include "wmr/errors.hpp"
#include "wmr/rig.hpp"

using namespace wmr;
using doctest::Approx;

namespace {

double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

// Chain of unit offsets along x.
SkeletonRig unit_chain(int n) {
  SkeletonRig rig;
  for (int j = 0; j < n; ++j) {
    rig.parent.push_back(j - 1);
    rig.bone_offset.push_back(j == 0 ? Vec3(Vec3::Zero()) : Vec3(Vec3::UnitX()));
    rig.joint_names.push_back("j" + std::to_string(j));
  }
  return rig;
}

}  // namespace

TEST_CASE("exp of zero is the identity") {
  CHECK(max_abs(so3::exp(Vec3::Zero()) - Mat3::Identity()) == 0.0);
}

TEST_CASE("quarter turn about z maps x to y") {
  const Vec3 y = so3::exp(Vec3(0, 0, std::numbers::pi / 2)) * Vec3::UnitX();
  CHECK((y - Vec3::UnitY()).norm() < 1e-15);
}

TEST_CASE("unit rotation vector has trace 1 + 2 cos 1") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const Vec3 v = test::random_vec(rng).normalized();
    CHECK(so3::exp(v).trace() == Approx(1.0 + 2.0 * std::cos(1.0)).epsilon(1e-14));
  }
}

TEST_CASE("log of identity and round trip") {
  CHECK(so3::log(Mat3::Identity()).norm() == 0.0);
  const Vec3 v(0.1, 0.2, 0.3);
  CHECK((so3::log(so3::exp(v)) - v).norm() < 1e-9);
}

TEST_CASE("log of a half turn about x") {
  const Mat3 r = Vec3(1, -1, -1).asDiagonal();
  const Vec3 v = so3::log(r);
  CHECK(std::abs(std::abs(v.x()) - std::numbers::pi) < 1e-12);
  CHECK(std::abs(v.y()) < 1e-12);
  CHECK(std::abs(v.z()) < 1e-12);
}

TEST_CASE("log near pi recovers the axis") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const Vec3 axis = test::random_vec(rng).normalized();
    const Vec3 v = axis * (std::numbers::pi - 1e-9);
    const Vec3 w = so3::log(so3::exp(v));
    CHECK(w.norm() <= std::numbers::pi + 1e-12);
    CHECK(max_abs(so3::exp(w) - so3::exp(v)) < 1e-7);
  }
}

TEST_CASE("log inverts exp below pi") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi - 1e-6);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 v = test::random_vec(rng).normalized() * angle(rng);
    CHECK((so3::log(so3::exp(v)) - v).norm() < 1e-8);
  }
  for (double a : {1e-12, 1e-8, 5e-7, 2e-6}) {
    const Vec3 v = Vec3(0.3, -0.5, 0.8).normalized() * a;
    CHECK((so3::log(so3::exp(v)) - v).norm() < 1e-15);
  }
}

TEST_CASE("exp produces rotations") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) CHECK(so3::is_rotation(so3::exp(test::random_vec(rng, 2.0)), 1e-12));
}

TEST_CASE("standard rig is valid and names the feet and retarget joints") {
  const SkeletonRig& rig = standard_rig();
  CHECK(rig.joint_count() == kRigJoints);
  CHECK_NOTHROW(rig.validate());
  for (const char* n : {"left_foot", "right_foot", "pelvis", "spine3", "left_shoulder",
                        "left_elbow", "left_wrist", "right_shoulder", "right_elbow",
                        "right_wrist", "left_hip", "left_knee", "left_ankle", "right_hip",
                        "right_knee", "right_ankle"}) {
    CHECK_NOTHROW(rig.index_of(n));
  }
  CHECK_THROWS_AS(rig.index_of("tail"), ValidationError);
}

TEST_CASE("broken hierarchies are rejected") {
  SkeletonRig rig = unit_chain(3);
  rig.parent[2] = 2;
  CHECK_THROWS_AS(rig.validate(), ValidationError);
  rig = unit_chain(3);
  rig.bone_offset[0] = Vec3(0, 0, 1);
  CHECK_THROWS_AS(rig.validate(), ValidationError);
}

TEST_CASE("decoder columns are orthonormal") {
  const LatentDecoder& d = standard_decoder();
  CHECK(d.latent_dim() == kLatentDim);
  CHECK(d.pose_dim() == 3 * (kRigJoints - 1));
  const Eigen::MatrixXd g = d.basis.transpose() * d.basis;
  CHECK((g - Eigen::MatrixXd::Identity(kLatentDim, kLatentDim)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("decoder is deterministic for a seed") {
  const LatentDecoder a = make_decoder(standard_rig(), kLatentDim, kDecoderSeed);
  CHECK(a.basis == standard_decoder().basis);
  const LatentDecoder b = make_decoder(standard_rig(), kLatentDim, kDecoderSeed + 1);
  CHECK(a.basis != b.basis);
}

TEST_CASE("decode of zero is the rest pose") {
  for (const Vec3& r : standard_decoder().decode(Eigen::VectorXd::Zero(kLatentDim))) {
    CHECK(r.norm() == 0.0);
  }
}

TEST_CASE("encode inverts decode") {
  std::mt19937_64 rng(17);
  const LatentDecoder& d = standard_decoder();
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd z = test::random_vector(rng, kLatentDim);
    const auto rot = d.decode(z);
    CHECK((d.encode(rot) - z).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("unit latent decodes to its column") {
  const LatentDecoder& d = standard_decoder();
  for (int k : {0, 7, 31}) {
    const auto rot = d.decode(Eigen::VectorXd::Unit(kLatentDim, k));
    for (size_t j = 0; j < rot.size(); ++j) {
      for (int a = 0; a < 3; ++a) CHECK(rot[j][a] == d.basis(3 * static_cast<int>(j) + a, k));
    }
  }
}

TEST_CASE("decode is linear") {
  std::mt19937_64 rng(19);
  const LatentDecoder& d = standard_decoder();
  const Eigen::VectorXd z1 = test::random_vector(rng, kLatentDim);
  const Eigen::VectorXd z2 = test::random_vector(rng, kLatentDim);
  const double a = 0.7, b = -1.3;
  const auto lhs = d.decode(a * z1 + b * z2);
  const auto r1 = d.decode(z1);
  const auto r2 = d.decode(z2);
  for (size_t j = 0; j < lhs.size(); ++j) CHECK((lhs[j] - (a * r1[j] + b * r2[j])).norm() < 1e-12);
}

TEST_CASE("decode rejects a wrong latent dimension") {
  CHECK_THROWS_AS(standard_decoder().decode(Eigen::VectorXd::Zero(kLatentDim + 1)), ValidationError);
}

TEST_CASE("rest pose FK gives cumulative offsets") {
  const SkeletonRig& rig = standard_rig();
  FramePose pose;
  pose.joint_rotations.assign(rig.joint_count() - 1, Vec3::Zero());
  const SkeletonState st = forward_kinematics(rig, pose, 1.0);
  for (int j = 0; j < rig.joint_count(); ++j) {
    Vec3 sum = Vec3::Zero();
    for (int k = j; k > 0; k = rig.parent[k]) sum += rig.bone_offset[k];
    CHECK((st.positions[j] - sum).norm() < 1e-15);
  }
}

TEST_CASE("scale doubles bones and keeps angles") {
  std::mt19937_64 rng(23);
  const SkeletonRig& rig = standard_rig();
  const FramePose pose = test::random_pose(rng, rig.joint_count());
  const SkeletonState a = forward_kinematics(rig, pose, 1.0);
  const SkeletonState b = forward_kinematics(rig, pose, 2.0);
  for (int j = 1; j < rig.joint_count(); ++j) {
    const Vec3 da = a.positions[j] - a.positions[rig.parent[j]];
    const Vec3 db = b.positions[j] - b.positions[rig.parent[j]];
    CHECK((db - 2.0 * da).norm() < 1e-12);
    CHECK(max_abs(a.rotations[j] - b.rotations[j]) == 0.0);
  }
}

TEST_CASE("bone lengths equal scaled offsets") {
  std::mt19937_64 rng(29);
  const SkeletonRig& rig = standard_rig();
  for (double gamma : {1.0, 1.8, 0.93}) {
    const SkeletonState st = forward_kinematics(rig, test::random_pose(rng, rig.joint_count()), gamma);
    const Eigen::VectorXd len = bone_lengths(rig, st.positions);
    for (int j = 1; j < rig.joint_count(); ++j) {
      CHECK(len[j - 1] == Approx(gamma * rig.bone_offset[j].norm()).epsilon(1e-12));
    }
  }
}

TEST_CASE("unit chain bone lengths") {
  const SkeletonRig rig = unit_chain(5);
  std::mt19937_64 rng(31);
  for (double gamma : {1.0, 1.8}) {
    const SkeletonState st = forward_kinematics(rig, test::random_pose(rng, 5), gamma);
    const Eigen::VectorXd len = bone_lengths(rig, st.positions);
    for (int k = 0; k < 4; ++k) CHECK(len[k] == Approx(gamma).epsilon(1e-13));
  }
}

TEST_CASE("bone lengths do not depend on joint rotations") {
  std::mt19937_64 rng(37);
  const SkeletonRig& rig = standard_rig();
  FramePose rest;
  rest.joint_rotations.assign(rig.joint_count() - 1, Vec3::Zero());
  const Eigen::VectorXd ref = bone_lengths(rig, forward_kinematics(rig, rest, 1.3).positions);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto st = forward_kinematics(rig, test::random_pose(rng, rig.joint_count()), 1.3);
    worst = std::max(worst, (bone_lengths(rig, st.positions) - ref).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("FK is equivariant to a root pre-rotation") {
  std::mt19937_64 rng(41);
  const SkeletonRig& rig = standard_rig();
  FramePose pose = test::random_pose(rng, rig.joint_count());
  const Mat3 q = test::random_rotation(rng);
  const SkeletonState a = forward_kinematics(rig, pose, 1.1);
  pose.root_rotation = q * pose.root_rotation;
  const SkeletonState b = forward_kinematics(rig, pose, 1.1);
  for (int j = 0; j < rig.joint_count(); ++j) {
    const Vec3 expect = pose.root_translation + q * (a.positions[j] - pose.root_translation);
    CHECK((b.positions[j] - expect).norm() < 1e-12);
  }
}

TEST_CASE("batch FK matches single FK on both paths") {
  std::mt19937_64 rng(43);
  const SkeletonRig& rig = standard_rig();
  std::vector<FramePose> poses;
  std::vector<double> gamma;
  for (int i = 0; i < 40; ++i) {
    poses.push_back(test::random_pose(rng, rig.joint_count()));
    gamma.push_back(1.0 + 0.01 * i);
  }
  const auto ser = forward_kinematics_batch(rig, poses, gamma, Exec::Serial);
  const auto par = forward_kinematics_batch(rig, poses, gamma, Exec::Parallel);
  for (size_t i = 0; i < poses.size(); ++i) {
    const SkeletonState one = forward_kinematics(rig, poses[i], gamma[i]);
    for (int j = 0; j < rig.joint_count(); ++j) {
      CHECK(ser[i].positions[j] == one.positions[j]);
      CHECK(par[i].positions[j] == one.positions[j]);
    }
  }
}
