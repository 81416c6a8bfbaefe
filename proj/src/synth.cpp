#include "wmr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "wmr/errors.hpp"
#include "wmr/ground.hpp"

namespace wmr {

void SyntheticScenario::validate() const {
  if (frames < 1) throw ValidationError("synth.frames must be positive");
  if (!(frame_rate > 0.0)) throw ValidationError("synth.frame_rate must be positive");
  if (!(gait.stride > 0.0) || !(gait.cadence > 0.0) || !(gait.clearance > 0.0)) {
    throw ValidationError("synth gait parameters must be positive");
  }
  for (double s : {noise.latent, noise.root, noise.bbox, noise.scale, noise.shape}) {
    if (!(s >= 0.0)) throw ValidationError("synth noise levels must be >= 0");
  }
  if (subjects < 0) throw ValidationError("synth.subjects must be >= 0");
  if (!(camera_distance > 0.0) || !(focal > 0.0)) throw ValidationError("synth camera settings invalid");
}

namespace {

struct LegIndices {
  int hip, knee, ankle, foot;
};

}  // namespace

std::vector<GaitSample> generate_gait(const SkeletonRig& rig, const GaitParams& gait, double gamma,
                                      int frames, double frame_rate, const Vec3& start,
                                      double phase) {
  const std::array<LegIndices, 2> legs{{
      {rig.index_of("left_hip"), rig.index_of("left_knee"), rig.index_of("left_ankle"), rig.index_of("left_foot")},
      {rig.index_of("right_hip"), rig.index_of("right_knee"), rig.index_of("right_ankle"), rig.index_of("right_foot")},
  }};
  const std::array<int, 2> shoulder{rig.index_of("left_shoulder"), rig.index_of("right_shoulder")};
  const std::array<int, 2> elbow{rig.index_of("left_elbow"), rig.index_of("right_elbow")};
  const double thigh = gamma * rig.bone_offset[legs[0].knee].norm();
  const double shin = gamma * rig.bone_offset[legs[0].ankle].norm();
  const double leg = thigh + shin;
  if (gait.stride >= 2.0 * leg * std::sin(1.0)) throw ValidationError("synth stride too long for the leg");
  if (gait.clearance >= shin) throw ValidationError("synth clearance too large for the shin");
  const double A = std::asin(gait.stride / (2.0 * leg));
  const double pi = std::numbers::pi;

  // Leg angles about the body x axis; positive hip flexion swings the foot forward.
  struct LegAngles {
    double hip, knee;
  };
  auto stance_depth = [&](double phi) { return leg * std::cos(A * (1.0 - 2.0 * phi)); };
  auto stance = [&](double phi) { return LegAngles{A * (1.0 - 2.0 * phi), 0.0}; };
  // Swing ankle relative to the hip: leaves and lands along the straight leg with zero
  // relative velocity, lifted by a non-negative bump that equals the clearance mid-swing.
  const double lift_rate = 2.0 * A * leg * std::sin(A);
  auto swing = [&](double phi) {
    const double s = std::sin(pi * phi);
    const double bump = lift_rate * s / pi + (gait.clearance - lift_rate / pi) * s * s;
    const double dy = -leg * std::sin(A) * std::cos(pi * phi);
    const double dz = -stance_depth(phi) + bump;
    const double d = std::min(std::hypot(dy, dz), leg);
    const double cos_knee = (d * d - thigh * thigh - shin * shin) / (2.0 * thigh * shin);
    const double cos_hip = (thigh * thigh + d * d - shin * shin) / (2.0 * thigh * d);
    const double dir = std::atan2(dy, -dz);
    return LegAngles{dir + std::acos(std::clamp(cos_hip, -1.0, 1.0)),
                     -std::acos(std::clamp(cos_knee, -1.0, 1.0))};
  };
  auto pose_at = [&](double steps) {
    const double k = std::floor(steps);
    // Eased phase: joint velocities vanish at step boundaries so the walk has no kinks.
    const double u = steps - k;
    const double phi = u - std::sin(2.0 * pi * u) / (2.0 * pi);
    const int stance_leg = static_cast<long long>(k) % 2 == 0 ? 0 : 1;
    FramePose p;
    p.joint_rotations.assign(rig.joint_count() - 1, Vec3::Zero());
    std::array<double, 2> hips{};
    for (int l = 0; l < 2; ++l) {
      const LegAngles a = l == stance_leg ? stance(phi) : swing(phi);
      hips[l] = a.hip;
      p.joint_rotations[legs[l].hip - 1] = Vec3(a.hip, 0, 0);
      p.joint_rotations[legs[l].knee - 1] = Vec3(a.knee, 0, 0);
      p.joint_rotations[legs[l].ankle - 1] = Vec3(-(a.hip + a.knee), 0, 0);
    }
    for (int l = 0; l < 2; ++l) {
      const double sh = -gait.arm_swing * hips[l];
      p.joint_rotations[shoulder[l] - 1] = Vec3(sh, 0, 0);
      p.joint_rotations[elbow[l] - 1] = Vec3(0.35 + 0.25 * sh, 0, 0);
    }
    return std::pair(p, stance_leg);
  };
  auto rel_foot = [&](const FramePose& p, int l) {
    return forward_kinematics(rig, p, gamma).positions[legs[l].foot];
  };

  // Planted foot of every step: the swing foot's landing spot becomes the next anchor.
  const double steps_per_frame = gait.cadence / frame_rate;
  const int last_step = static_cast<int>(std::floor(phase + steps_per_frame * (frames - 1))) + 1;
  std::vector<Vec3> planted(last_step + 1);
  {
    const auto [p0, l0] = pose_at(phase);
    const Vec3 f0 = rel_foot(p0, l0);
    planted[static_cast<int>(std::floor(phase))] = Vec3(start.x() + f0.x(), start.y() + f0.y(), 0.0);
    for (int k = static_cast<int>(std::floor(phase)); k < last_step; ++k) {
      const int stance_leg = k % 2 == 0 ? 0 : 1;
      FramePose at_end;
      at_end.joint_rotations.assign(rig.joint_count() - 1, Vec3::Zero());
      for (int l = 0; l < 2; ++l) {
        const LegAngles a = l == stance_leg ? stance(1.0) : swing(1.0);
        at_end.joint_rotations[legs[l].hip - 1] = Vec3(a.hip, 0, 0);
        at_end.joint_rotations[legs[l].knee - 1] = Vec3(a.knee, 0, 0);
        at_end.joint_rotations[legs[l].ankle - 1] = Vec3(-(a.hip + a.knee), 0, 0);
      }
      const Vec3 root_end = planted[k] - rel_foot(at_end, stance_leg);
      planted[k + 1] = root_end + rel_foot(at_end, 1 - stance_leg);
      planted[k + 1].z() = 0.0;
    }
  }

  std::vector<GaitSample> out(frames);
  for (int t = 0; t < frames; ++t) {
    const double steps = phase + steps_per_frame * t;
    auto [p, stance_leg] = pose_at(steps);
    const int k = static_cast<int>(std::floor(steps));
    p.root_rotation = Mat3::Identity();
    p.root_translation = planted[k] - rel_foot(p, stance_leg);
    out[t].pose = p;
    out[t].contact[stance_leg] = true;
  }
  return out;
}

namespace {

BBox project_box(const SkeletonState& cam_state, const SyntheticScenario& sc) {
  double x1 = 1e300, y1 = 1e300, x2 = -1e300, y2 = -1e300;
  for (const Vec3& p : cam_state.positions) {
    if (!(p.z() > 1e-3)) throw ValidationError("synth subject is behind the camera");
    const double u = sc.focal * p.x() / p.z() + sc.cx;
    const double v = sc.focal * p.y() / p.z() + sc.cy;
    x1 = std::min(x1, u);
    x2 = std::max(x2, u);
    y1 = std::min(y1, v);
    y2 = std::max(y2, v);
  }
  const double pw = 0.08 * (x2 - x1), ph = 0.08 * (y2 - y1);
  return {x1 - pw, y1 - ph, x2 + pw, y2 + ph};
}

}  // namespace

SynthOutput synth_generate(const SyntheticScenario& sc) {
  sc.validate();
  const SkeletonRig& rig = standard_rig();
  const LatentDecoder& dec = standard_decoder();
  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SynthOutput out;
  out.truth.header.frame_rate = sc.frame_rate;
  out.corrupted.header.frame_rate = sc.frame_rate;
  const Vec3 camera(0.0, -sc.camera_distance, sc.camera_height);
  const Mat3 cam_from_world = zup_from_camera().transpose();

  // Ground truth, subject-major.
  std::vector<std::vector<MotionRecord>> truth(sc.subjects);
  for (int i = 0; i < sc.subjects; ++i) {
    const double gamma = 1.0 + 0.04 * (i - 0.5 * (sc.subjects - 1));
    Eigen::VectorXd beta(kShapeDim);
    for (int k = 0; k < kShapeDim; ++k) beta[k] = 0.3 * normal(rng);
    const Vec3 start(sc.spacing * (i - 0.5 * (sc.subjects - 1)), 0.0, 0.0);
    const auto gait = generate_gait(rig, sc.gait, gamma, sc.frames, sc.frame_rate, start, 0.37 * i);
    const Vec3 root0 = gait[0].pose.root_translation;
    for (int t = 0; t < sc.frames; ++t) {
      const FramePose& wp = gait[t].pose;
      MotionRecord r;
      r.subject_id = i;
      FramePrediction& p = r.pred;
      p.frame_index = t;
      p.z_model = dec.encode(wp.joint_rotations);
      p.z_expr = Eigen::VectorXd::Zero(kExprDim);
      p.beta_shape = beta;
      p.gamma_scale = gamma;
      p.cam_root_rotation = cam_from_world * wp.root_rotation;
      p.cam_root_translation = cam_from_world * (wp.root_translation - camera);
      FramePose cam_pose = pose_from_prediction(dec, p);
      cam_pose.root_translation = p.cam_root_translation;
      p.bbox = project_box(forward_kinematics(rig, cam_pose, gamma), sc);
      WorldRoot w;
      w.translation = wp.root_translation - root0;
      w.rotation = wp.root_rotation;
      w.ground_height = -root0.z();
      w.contact = {gait[t].contact[0] ? 1.0 : 0.0, gait[t].contact[1] ? 1.0 : 0.0};
      r.world = w;
      truth[i].push_back(r);
    }
  }

  // Corrupted copy: noise drawn subject-major, frame-major within a subject.
  std::vector<std::vector<MotionRecord>> noisy = truth;
  for (int i = 0; i < sc.subjects; ++i) {
    for (auto& r : noisy[i]) {
      FramePrediction& p = r.pred;
      for (int k = 0; k < kLatentDim; ++k) p.z_model[k] += sc.noise.latent * normal(rng);
      for (int k = 0; k < kExprDim; ++k) p.z_expr[k] += sc.noise.latent * normal(rng);
      for (int k = 0; k < kShapeDim; ++k) p.beta_shape[k] += sc.noise.shape * normal(rng);
      p.gamma_scale *= std::exp(sc.noise.scale * normal(rng));
      for (int k = 0; k < 3; ++k) p.cam_root_translation[k] += sc.noise.root * normal(rng);
      BBox& b = p.bbox;
      b.x1 += sc.noise.bbox * normal(rng);
      b.y1 += sc.noise.bbox * normal(rng);
      b.x2 += sc.noise.bbox * normal(rng);
      b.y2 += sc.noise.bbox * normal(rng);
      if (b.x2 - b.x1 < 1.0) b.x2 = b.x1 + 1.0;
      if (b.y2 - b.y1 < 1.0) b.y2 = b.y1 + 1.0;
      r.subject_id = -1;
      r.world.reset();
    }
  }

  for (int t = 0; t < sc.frames; ++t) {
    std::vector<int> order(sc.subjects);
    for (int i = 0; i < sc.subjects; ++i) {
      order[i] = i;
      out.truth.frames.push_back(truth[i][t]);
    }
    std::shuffle(order.begin(), order.end(), rng);
    for (int i : order) out.corrupted.frames.push_back(noisy[i][t]);
  }
  return out;
}

std::vector<std::vector<CrossingDetection>> synth_crossing_boxes(int frames, double noise_px,
                                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<CrossingDetection>> out(frames);
  const double mid = 0.5 * (frames - 1);
  for (int t = 0; t < frames; ++t) {
    // Subject 0 walks right and is nearer (larger); subject 1 walks left.
    const double u0 = 960.0 + 9.0 * (t - mid);
    const double u1 = 960.0 - 9.0 * (t - mid);
    const BBox b0{u0 - 60.0, 300.0, u0 + 60.0, 660.0};
    const BBox b1{u1 - 45.0, 330.0, u1 + 45.0, 600.0};
    for (int i = 0; i < 2; ++i) {
      BBox b = i == 0 ? b0 : b1;
      b.x1 += noise_px * normal(rng);
      b.y1 += noise_px * normal(rng);
      b.x2 += noise_px * normal(rng);
      b.y2 += noise_px * normal(rng);
      out[t].push_back({i, b});
    }
    if (std::uniform_int_distribution<int>(0, 1)(rng) == 1) std::swap(out[t][0], out[t][1]);
  }
  return out;
}

}  // namespace wmr
