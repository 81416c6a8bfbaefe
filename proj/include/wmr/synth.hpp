#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "wmr/motion_io.hpp"
#include "wmr/rig.hpp"

namespace wmr {

struct GaitParams {
  double stride = 0.6;      // m advanced per step
  double cadence = 1.5;     // steps / s
  double clearance = 0.05;  // swing ankle lift at mid-swing, m
  double arm_swing = 0.5;   // shoulder angle / opposite hip angle
};

struct NoiseLevels {
  double latent = 0.05;  // on z_model and z_expr
  double root = 0.05;    // m, camera-frame root translation
  double bbox = 2.0;     // px, per box coordinate
  double scale = 0.02;   // on gamma_scale
  double shape = 0.05;   // on beta_shape
};

struct SyntheticScenario {
  int frames = 300;
  double frame_rate = 30.0;
  GaitParams gait;
  NoiseLevels noise;
  int subjects = 2;
  double spacing = 1.2;          // m between neighbouring walkers
  double camera_distance = 4.0;  // m behind the start line
  double camera_height = 1.0;    // m above the ground
  double focal = 1000.0;         // px
  double cx = 960.0, cy = 540.0;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Walk of one subject in its world frame (x right, y forward, z up; ground at z = 0).
struct GaitSample {
  FramePose pose;                      // world root and local joint rotations
  std::array<bool, 2> contact{};       // scripted flat-foot contact, left/right
};

/// Procedural walk: the stance leg sweeps linearly with a straight knee and a flat foot
/// pinned to the ground; the swing ankle follows a lifted path solved with two-link IK.
/// `start` is the root's horizontal start and `phase` the step phase at t = 0.
std::vector<GaitSample> generate_gait(const SkeletonRig& rig, const GaitParams& gait, double gamma,
                                      int frames, double frame_rate, const Vec3& start,
                                      double phase);

struct SynthOutput {
  MotionFile truth;      // subject ids assigned, world fields hold the oracle root and contacts
  MotionFile corrupted;  // subject_id = -1, per-frame order shuffled, no world fields
};

SynthOutput synth_generate(const SyntheticScenario& scenario);

/// Two boxes crossing horizontally in opposite directions, one nearer the camera.
struct CrossingDetection {
  int subject = 0;
  BBox box;
};
std::vector<std::vector<CrossingDetection>> synth_crossing_boxes(int frames, double noise_px,
                                                                 std::uint64_t seed);

}  // namespace wmr
