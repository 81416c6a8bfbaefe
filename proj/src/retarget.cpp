#include "wmr/retarget.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Cholesky>

#include "wmr/errors.hpp"
#include "wmr/ground.hpp"

namespace wmr {

const JointPair& JointMap::by_human(std::string_view human) const {
  for (const auto& p : pairs) {
    if (p.human == human) return p;
  }
  throw ValidationError("joint map has no entry for human joint '" + std::string(human) + "'");
}

const JointPair& JointMap::by_robot(std::string_view robot) const {
  for (const auto& p : pairs) {
    if (p.robot == robot) return p;
  }
  throw ValidationError("joint map has no entry for robot frame '" + std::string(robot) + "'");
}

void JointMap::validate(const SkeletonRig& rig, const RobotModel& model) const {
  if (static_cast<int>(pairs.size()) != kJointMapPairs) {
    throw ValidationError("joint map needs exactly " + std::to_string(kJointMapPairs) +
                          " pairs, found " + std::to_string(pairs.size()));
  }
  std::set<std::string> humans, robots;
  for (const auto& p : pairs) {
    rig.index_of(p.human);
    model.frame_index(p.robot);
    if (!humans.insert(p.human).second || !robots.insert(p.robot).second) {
      throw ValidationError("joint map pair '" + p.human + " -> " + p.robot + "' is duplicated");
    }
    if (!so3::is_rotation(p.offset, 1e-9)) {
      throw ValidationError("joint map offset of '" + p.human + "' is not a rotation");
    }
  }
  if (!so3::is_rotation(body_axes, 1e-9)) throw ValidationError("joint map body_axes is not a rotation");
}

namespace {

bool read_matrix(std::istringstream& ls, Mat3& m) {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (!(ls >> m(r, c))) return false;
    }
  }
  return true;
}

}  // namespace

JointMap parse_joint_map(std::string_view text) {
  JointMap map;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  bool header = false;
  std::vector<std::pair<std::string, Mat3>> offsets;
  auto fail = [&](const std::string& msg) {
    throw ValidationError("joint map line " + std::to_string(line) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream ls(raw);
    std::string key;
    if (!(ls >> key)) continue;
    if (!header) {
      int version = 0;
      if (key != "wmr-jointmap" || !(ls >> version)) fail("expected 'wmr-jointmap <version>' header");
      if (version != 1) fail("unsupported joint map version " + std::to_string(version));
      header = true;
    } else if (key == "body_axes") {
      if (!read_matrix(ls, map.body_axes)) fail("body_axes needs 9 numbers");
    } else if (key == "map") {
      JointPair p;
      if (!(ls >> p.human >> p.robot)) fail("map needs <human> <robot>");
      map.pairs.push_back(p);
    } else if (key == "offset") {
      std::string human;
      Mat3 m;
      if (!(ls >> human) || !read_matrix(ls, m)) fail("offset needs <human> and 9 numbers");
      offsets.emplace_back(human, m);
    } else {
      fail("unknown record '" + key + "'");
    }
  }
  if (!header) throw ValidationError("joint map: missing 'wmr-jointmap' header");
  for (const auto& [human, m] : offsets) {
    auto it = std::find_if(map.pairs.begin(), map.pairs.end(),
                           [&](const JointPair& p) { return p.human == human; });
    if (it == map.pairs.end()) throw ValidationError("joint map offset for unmapped joint '" + human + "'");
    it->offset = m;
    it->offset_given = true;
  }
  return map;
}

JointMap load_joint_map(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open joint map '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_joint_map(ss.str());
}

std::string_view default_joint_map_text() {
  static constexpr std::string_view text = R"(wmr-jointmap 1
# robot x (forward), y (left), z (up) in the human body frame (x right, y forward, z up)
body_axes 0 -1 0  1 0 0  0 0 1
map pelvis         pelvis
map spine3         torso
map left_shoulder  left_shoulder_pitch
map left_elbow     left_elbow
map left_wrist     left_wrist
map right_shoulder right_shoulder_pitch
map right_elbow    right_elbow
map right_wrist    right_wrist
map left_hip       left_hip_pitch
map left_knee      left_knee
map left_ankle     left_ankle
map right_hip      right_hip_pitch
map right_knee     right_knee
map right_ankle    right_ankle
)";
  return text;
}

void RetargetConfig::validate() const {
  if (!so3::is_rotation(flip, 1e-9)) throw ValidationError("retarget.flip is not a rotation");
  if (!std::isfinite(height_ratio)) throw ValidationError("retarget.height_ratio must be finite");
  if (!(ik.damping > 0.0) || ik.max_iters < 1 || !(ik.tol_pos > 0.0) || !(ik.tol_rot > 0.0)) {
    throw ValidationError("retarget ik settings must be positive");
  }
  if (!(ee_weight > 0.0) || !(mid_weight >= 0.0)) {
    throw ValidationError("retarget.ee_weight must be > 0 and mid_weight >= 0");
  }
}

Mat3 align_rotation(const Mat3& r_mhr, const Mat3& r_offset, const Mat3& flip) {
  return zup_from_camera() * flip * r_mhr * r_offset;
}

std::vector<std::vector<Vec3>> scale_targets(std::span<const std::vector<Vec3>> positions,
                                             double height_ratio) {
  if (!(height_ratio > 0.0)) throw ValidationError("height_ratio must be positive");
  std::vector<std::vector<Vec3>> out(positions.size());
  for (size_t t = 0; t < positions.size(); ++t) {
    const auto& p = positions[t];
    if (p.empty()) continue;
    const Vec3 root = height_ratio * p[0];
    out[t].resize(p.size());
    out[t][0] = root;
    for (size_t j = 1; j < p.size(); ++j) out[t][j] = root + height_ratio * (p[j] - p[0]);
  }
  return out;
}

void calibrate_offsets(JointMap& map, const RobotModel& model) {
  const RobotState rest =
      fk_robot(model, Eigen::VectorXd::Zero(model.dof_count()), map.body_axes, Vec3::Zero());
  for (auto& p : map.pairs) {
    if (!p.offset_given) p.offset = rest.rotations[model.frame_index(p.robot)];
  }
}

RobotChains resolve_chains(const RobotModel& model, const JointMap& map) {
  RobotChains c;
  c.model = &model;
  c.torso_frame = model.role_frame("torso");
  c.torso_dofs = chain_dofs(model, c.torso_frame, 0);
  const std::array<std::pair<const char*, const char*>, kLimbCount> roles{{
      {"left_wrist", "left_elbow"},
      {"right_wrist", "right_elbow"},
      {"left_ankle", "left_knee"},
      {"right_ankle", "right_knee"},
  }};
  for (int l = 0; l < kLimbCount; ++l) {
    LimbChain& limb = c.limbs[l];
    limb.ee_frame = model.role_frame(roles[l].first);
    limb.mid_frame = model.role_frame(roles[l].second);
    limb.dofs = chain_dofs(model, limb.ee_frame, l < 2 ? c.torso_frame : 0);
    if (limb.dofs.empty()) throw ValidationError(std::string("robot limb '") + roles[l].first + "' has no joints");
  }
  for (int f : {0, c.torso_frame}) map.by_robot(model.frames[f].name);
  for (const auto& limb : c.limbs) {
    map.by_robot(model.frames[limb.ee_frame].name);
    map.by_robot(model.frames[limb.mid_frame].name);
  }
  return c;
}

namespace {

constexpr double kMaxStep = 0.5;  // rad, per iteration

int dof_frame(const RobotModel& m, int dof) {
  for (size_t i = 0; i < m.frames.size(); ++i) {
    if (m.frames[i].dof == dof) return static_cast<int>(i);
  }
  return -1;
}

bool is_ancestor_or_self(const RobotModel& m, int a, int f) {
  for (int i = f; i >= 0; i = m.frames[i].parent) {
    if (i == a) return true;
  }
  return false;
}

Vec3 world_axis(const RobotModel& m, const RobotState& st, int frame) {
  return st.rotations[m.frames[frame].parent] * m.frames[frame].axis;
}

/// Position Jacobian of `point_frame` w.r.t. `dofs` (zero columns for non-ancestors).
Eigen::MatrixXd position_jacobian(const RobotModel& m, const RobotState& st,
                                  const std::vector<int>& dofs, int point_frame) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3, static_cast<int>(dofs.size()));
  for (size_t k = 0; k < dofs.size(); ++k) {
    const int f = dof_frame(m, dofs[k]);
    if (!is_ancestor_or_self(m, f, point_frame)) continue;
    J.col(static_cast<int>(k)) = world_axis(m, st, f).cross(st.positions[point_frame] - st.positions[f]);
  }
  return J;
}

/// Applies dq to the listed dofs with a step-norm cap and clamping; returns the applied norm.
double apply_step(const RobotModel& m, const std::vector<int>& dofs, Eigen::VectorXd dq,
                  Eigen::VectorXd& q) {
  if (!dq.allFinite()) throw NumericalError("retarget IK produced a non-finite step");
  const double n = dq.norm();
  if (n > kMaxStep) dq *= kMaxStep / n;
  Eigen::VectorXd before = q;
  for (size_t k = 0; k < dofs.size(); ++k) q[dofs[k]] += dq[static_cast<int>(k)];
  q = m.clamp(q);
  return (q - before).norm();
}

Eigen::VectorXd dls(const Eigen::MatrixXd& J, const Eigen::VectorXd& e, double damping) {
  Eigen::MatrixXd A = J * J.transpose();
  A.diagonal().array() += damping * damping;
  return J.transpose() * A.ldlt().solve(e);
}

constexpr double kStall = 1e-12;
constexpr double kMaxDamping = 1e3;

int solve_torso(const RobotChains& c, const Mat3& root_r, const Vec3& root_p, const Mat3& target,
                Eigen::VectorXd& q, const IkConfig& cfg, double& err) {
  const RobotModel& m = *c.model;
  int it = 0;
  for (;;) {
    const RobotState st = fk_robot(m, q, root_r, root_p);
    const Vec3 e = so3::log(target * st.rotations[c.torso_frame].transpose());
    err = e.norm();
    if (err < cfg.tol_rot || it >= cfg.max_iters || c.torso_dofs.empty()) break;
    Eigen::MatrixXd J(3, static_cast<int>(c.torso_dofs.size()));
    for (size_t k = 0; k < c.torso_dofs.size(); ++k) {
      J.col(static_cast<int>(k)) = world_axis(m, st, dof_frame(m, c.torso_dofs[k]));
    }
    ++it;
    if (apply_step(m, c.torso_dofs, dls(J, e, cfg.damping), q) < kStall) break;
  }
  return it;
}

double limb_error(const RobotModel& m, const LimbChain& limb, const Mat3& root_r, const Vec3& root_p,
                  const Vec3& target, const Eigen::VectorXd& q) {
  return (target - fk_robot(m, q, root_r, root_p).positions[limb.ee_frame]).norm();
}

// Damping grows on rejected steps, so the error never increases.
int descend_limb(const RobotChains& c, const LimbChain& limb, const Mat3& root_r, const Vec3& root_p,
                 const Vec3& target, Eigen::VectorXd& q, const IkConfig& cfg) {
  const RobotModel& m = *c.model;
  double lambda = cfg.damping;
  int it = 0;
  RobotState st = fk_robot(m, q, root_r, root_p);
  double err = (target - st.positions[limb.ee_frame]).norm();
  while (it < cfg.max_iters && err >= cfg.tol_pos && lambda < kMaxDamping) {
    ++it;
    const Vec3 e = target - st.positions[limb.ee_frame];
    const Eigen::MatrixXd J = position_jacobian(m, st, limb.dofs, limb.ee_frame);
    Eigen::VectorXd trial = q;
    if (apply_step(m, limb.dofs, dls(J, e, lambda), trial) < kStall) break;
    const RobotState st_t = fk_robot(m, trial, root_r, root_p);
    const double err_t = (target - st_t.positions[limb.ee_frame]).norm();
    if (err_t < err) {
      q = std::move(trial);
      st = st_t;
      err = err_t;
      lambda = std::max(cfg.damping, 0.5 * lambda);
    } else {
      lambda *= 4.0;
    }
  }
  return it;
}

int solve_limb(const RobotChains& c, const LimbChain& limb, const Mat3& root_r, const Vec3& root_p,
               const Vec3& target, Eigen::VectorXd& q, const IkConfig& cfg) {
  const RobotModel& m = *c.model;
  int it = descend_limb(c, limb, root_r, root_p, target, q, cfg);
  if (limb_error(m, limb, root_r, root_p, target, q) < cfg.tol_pos) return it;
  Eigen::VectorXd alt = q;
  const Eigen::VectorXd seed = m.seed_angles();
  for (int d : limb.dofs) alt[d] = seed[d];
  it += descend_limb(c, limb, root_r, root_p, target, alt, cfg);
  if (limb_error(m, limb, root_r, root_p, target, alt) < limb_error(m, limb, root_r, root_p, target, q)) {
    q = std::move(alt);
  }
  return it;
}

void measure(const RobotChains& c, const FrameTargets& t, IkResult& r) {
  const RobotState st = fk_robot(*c.model, r.q, t.root_rotation, t.root_position);
  for (int l = 0; l < kLimbCount; ++l) {
    r.ee_error[l] = (st.positions[c.limbs[l].ee_frame] - t.end_effector[l]).norm();
    r.mid_error[l] = (st.positions[c.limbs[l].mid_frame] - t.intermediate[l]).norm();
  }
  r.torso_error = so3::log(t.torso_rotation * st.rotations[c.torso_frame].transpose()).norm();
}

}  // namespace

IkResult ik_stage1(const RobotChains& chains, const FrameTargets& targets,
                   const Eigen::VectorXd& q_init, const IkConfig& cfg) {
  const RobotModel& m = *chains.model;
  if (q_init.size() != m.dof_count()) throw ValidationError("ik_stage1: joint vector size mismatch");
  if (!targets.root_position.allFinite()) throw ValidationError("ik_stage1: non-finite root target");
  IkResult r;
  r.q = m.clamp(q_init);
  double torso_err = 0.0;
  r.iterations += solve_torso(chains, targets.root_rotation, targets.root_position,
                              targets.torso_rotation, r.q, cfg, torso_err);
  for (int l = 0; l < kLimbCount; ++l) {
    r.iterations += solve_limb(chains, chains.limbs[l], targets.root_rotation,
                               targets.root_position, targets.end_effector[l], r.q, cfg);
  }
  measure(chains, targets, r);
  return r;
}

IkResult ik_stage2(const RobotChains& chains, const FrameTargets& targets, const IkResult& stage1,
                   const IkConfig& cfg, double ee_weight, double mid_weight) {
  if (mid_weight == 0.0) return stage1;
  const RobotModel& m = *chains.model;
  IkResult r;
  r.q = stage1.q;
  for (int l = 0; l < kLimbCount; ++l) {
    const LimbChain& limb = chains.limbs[l];
    const int n = static_cast<int>(limb.dofs.size());
    auto cost = [&](const RobotState& st) {
      return ee_weight * (targets.end_effector[l] - st.positions[limb.ee_frame]).squaredNorm() +
             mid_weight * (targets.intermediate[l] - st.positions[limb.mid_frame]).squaredNorm();
    };
    RobotState st = fk_robot(m, r.q, targets.root_rotation, targets.root_position);
    double f = cost(st);
    double lambda = cfg.damping;
    for (int it = 0; it < cfg.max_iters && n > 0 && lambda < kMaxDamping; ++it) {
      const Vec3 e_ee = targets.end_effector[l] - st.positions[limb.ee_frame];
      const Vec3 e_mid = targets.intermediate[l] - st.positions[limb.mid_frame];
      const Eigen::MatrixXd J_ee = position_jacobian(m, st, limb.dofs, limb.ee_frame);
      const Eigen::MatrixXd J_mid = position_jacobian(m, st, limb.dofs, limb.mid_frame);
      Eigen::MatrixXd H = ee_weight * J_ee.transpose() * J_ee + mid_weight * J_mid.transpose() * J_mid;
      H.diagonal().array() += lambda * lambda;
      const Eigen::VectorXd g = ee_weight * J_ee.transpose() * e_ee + mid_weight * J_mid.transpose() * e_mid;
      ++r.iterations;
      Eigen::VectorXd trial = r.q;
      if (apply_step(m, limb.dofs, H.ldlt().solve(g), trial) < 1e-10) break;
      const RobotState st_t = fk_robot(m, trial, targets.root_rotation, targets.root_position);
      const double f_t = cost(st_t);
      if (f_t < f) {
        const bool converged = f - f_t < 1e-14;
        r.q = std::move(trial);
        st = st_t;
        f = f_t;
        lambda = std::max(cfg.damping, 0.5 * lambda);
        if (converged) break;
      } else {
        lambda *= 4.0;
      }
    }
    r.iterations += solve_limb(chains, limb, targets.root_rotation, targets.root_position,
                               targets.end_effector[l], r.q, cfg);
  }
  measure(chains, targets, r);
  return r;
}

SkeletonState human_world_state(const SkeletonRig& rig, const LatentDecoder& decoder,
                                const FramePrediction& pred, const Vec3& world_root,
                                double ground_height, const Mat3& flip) {
  FramePose pose = pose_from_prediction(decoder, pred);
  pose.root_rotation = zup_from_camera() * flip * pred.cam_root_rotation;
  pose.root_translation = world_root - Vec3(0.0, 0.0, ground_height);
  return forward_kinematics(rig, pose, pred.gamma_scale);
}

double auto_height_ratio(const SkeletonRig& rig, const RobotModel& model,
                         std::span<const FramePrediction> frames) {
  double gamma = 0.0;
  for (const auto& f : frames) gamma += f.gamma_scale;
  gamma = frames.empty() ? 1.0 : gamma / static_cast<double>(frames.size());
  return model.standing_height / (rig.standing_height * gamma);
}

FrameTargets frame_targets(const SkeletonRig& rig, const LatentDecoder& decoder,
                           const FramePrediction& pred, const Vec3& world_root,
                           double ground_height, const RobotChains& chains, const JointMap& map,
                           const Mat3& flip, double height_ratio) {
  const RobotModel& m = *chains.model;
  FramePose cam = pose_from_prediction(decoder, pred);
  cam.root_translation.setZero();
  const SkeletonState mhr = forward_kinematics(rig, cam, pred.gamma_scale);
  const SkeletonState world = human_world_state(rig, decoder, pred, world_root, ground_height, flip);
  const std::vector<Vec3> scaled = scale_targets(std::span(&world.positions, 1), height_ratio)[0];

  auto human_of = [&](int robot_frame) -> const JointPair& { return map.by_robot(m.frames[robot_frame].name); };
  FrameTargets t;
  const JointPair& root = human_of(0);
  const JointPair& torso = human_of(chains.torso_frame);
  const int root_j = rig.index_of(root.human);
  t.root_rotation = align_rotation(mhr.rotations[root_j], root.offset, flip);
  t.root_position = scaled[root_j];
  t.torso_rotation = align_rotation(mhr.rotations[rig.index_of(torso.human)], torso.offset, flip);
  for (int l = 0; l < kLimbCount; ++l) {
    t.end_effector[l] = scaled[rig.index_of(human_of(chains.limbs[l].ee_frame).human)];
    t.intermediate[l] = scaled[rig.index_of(human_of(chains.limbs[l].mid_frame).human)];
  }
  return t;
}

RetargetedMotion retarget_sequence(std::span<const FramePrediction> frames,
                                   std::span<const Vec3> world_root, double ground_height,
                                   const SkeletonRig& rig, const LatentDecoder& decoder,
                                   const RobotModel& model, const JointMap& map,
                                   const RetargetConfig& cfg) {
  cfg.validate();
  model.validate();
  map.validate(rig, model);
  if (frames.size() != world_root.size()) throw ValidationError("retarget: world root length mismatch");
  JointMap calibrated = map;
  calibrate_offsets(calibrated, model);
  const RobotChains chains = resolve_chains(model, calibrated);

  RetargetedMotion out;
  out.height_ratio = cfg.height_ratio > 0.0 ? cfg.height_ratio : auto_height_ratio(rig, model, frames);
  out.dof_names = model.dof_names();
  out.frames.reserve(frames.size());
  Eigen::VectorXd q = model.seed_angles();
  for (size_t t = 0; t < frames.size(); ++t) {
    const FrameTargets tg = frame_targets(rig, decoder, frames[t], world_root[t], ground_height,
                                          chains, calibrated, cfg.flip, out.height_ratio);
    RetargetedFrame f;
    f.frame_index = frames[t].frame_index;
    f.root_rotation = tg.root_rotation;
    f.root_translation = tg.root_position;
    f.stage1 = ik_stage1(chains, tg, q, cfg.ik);
    f.stage2 = ik_stage2(chains, tg, f.stage1, cfg.ik, cfg.ee_weight, cfg.mid_weight);
    f.q = f.stage2.q;
    q = f.q;
    out.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace wmr
