#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "wmr/config.hpp"
#include "wmr/errors.hpp"
#include "wmr/retarget.hpp"

using namespace wmr;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

const JointMap& calibrated_map() {
  static const JointMap m = resolve_joint_map(PipelineConfig::defaults());
  return m;
}

const RobotChains& chains() {
  static const RobotChains c = resolve_chains(default_robot_model(), calibrated_map());
  return c;
}

FrameTargets targets_from(const Eigen::VectorXd& q, const Mat3& root_r = Mat3::Identity(),
                          const Vec3& root_p = Vec3(0, 0, 0.8)) {
  const RobotModel& m = default_robot_model();
  const RobotState st = fk_robot(m, q, root_r, root_p);
  FrameTargets t;
  t.root_rotation = root_r;
  t.root_position = root_p;
  t.torso_rotation = st.rotations[chains().torso_frame];
  for (int l = 0; l < kLimbCount; ++l) {
    t.end_effector[l] = st.positions[chains().limbs[l].ee_frame];
    t.intermediate[l] = st.positions[chains().limbs[l].mid_frame];
  }
  return t;
}

// Angles well inside the limits, knees and elbows bent away from the straight singularity.
Eigen::VectorXd random_angles(std::mt19937_64& rng) {
  const RobotModel& m = default_robot_model();
  std::uniform_real_distribution<double> u(0.25, 0.75);
  Eigen::VectorXd q(m.dof_count());
  for (const auto& f : m.frames) {
    if (f.dof < 0) continue;
    const double mid = 0.5 * (f.lower + f.upper);
    const double half = 0.35 * (f.upper - f.lower) * (u(rng) - 0.5);
    q[f.dof] = std::clamp(mid + half, f.lower, f.upper);
  }
  for (int l = 0; l < kLimbCount; ++l) {
    const auto& dofs = chains().limbs[l].dofs;
    q[dofs.back()] = u(rng);
  }
  return q;
}

// Two unit links rotating about z.
RobotModel planar_arm() {
  RobotModel m;
  m.name = "planar";
  m.frames.push_back({"base", -1, Vec3::Zero()});
  m.frames.push_back({"j1", 0, Vec3::Zero(), true, Vec3::UnitZ(), -3.0, 3.0, 0.0, 0});
  m.frames.push_back({"j2", 1, Vec3::UnitX(), true, Vec3::UnitZ(), -3.0, 3.0, 0.0, 1});
  m.frames.push_back({"tip", 2, Vec3::UnitX()});
  return m;
}

}  // namespace

TEST_CASE("align rotation") {
  CHECK((align_rotation(Mat3::Identity(), Mat3::Identity()) - zup_from_camera()).norm() == 0.0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Mat3 a = test::random_rotation(rng), b = test::random_rotation(rng), f = test::random_rotation(rng);
    const Mat3 r = align_rotation(a, b, f);
    Mat3 expect = Mat3::Zero();
    const Mat3 zf = zup_from_camera() * f;
    const Mat3 ab = a * b;
    for (int i2 = 0; i2 < 3; ++i2) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) expect(i2, j) += zf(i2, k) * ab(k, j);
      }
    }
    CHECK((r - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
    CHECK(r.determinant() == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("target scaling") {
  std::mt19937_64 rng(2);
  std::vector<std::vector<Vec3>> pos(3);
  for (auto& f : pos) {
    for (int j = 0; j < 5; ++j) f.push_back(test::random_vec(rng));
  }
  const auto same = scale_targets(pos, 1.0);
  for (size_t t = 0; t < pos.size(); ++t) {
    for (int j = 0; j < 5; ++j) CHECK((same[t][j] - pos[t][j]).norm() < 1e-15);
  }
  const auto half = scale_targets(pos, 0.5);
  for (size_t t = 0; t < pos.size(); ++t) {
    CHECK((half[t][0] - 0.5 * pos[t][0]).norm() < 1e-15);
    for (int j = 1; j < 5; ++j) {
      CHECK((half[t][j] - half[t][0] - 0.5 * (pos[t][j] - pos[t][0])).norm() < 1e-14);
      CHECK((half[t][j] - half[t][1]).norm() == Approx(0.5 * (pos[t][j] - pos[t][1]).norm()).epsilon(1e-12));
    }
  }
}

TEST_CASE("automatic height ratio") {
  std::vector<FramePrediction> frames(4);
  for (auto& f : frames) f.gamma_scale = 1.8 / 1.78;
  const double r = auto_height_ratio(standard_rig(), default_robot_model(), frames);
  CHECK(r == Approx(1.32 / 1.8).epsilon(1e-12));
  CHECK(r == Approx(0.733).epsilon(1e-3));

  FramePrediction rest;
  rest.gamma_scale = frames[0].gamma_scale;
  const SkeletonState s = human_world_state(standard_rig(), standard_decoder(), rest, Vec3(0, 0, 1), 0.0);
  const auto scaled = scale_targets(std::vector<std::vector<Vec3>>{s.positions}, r);
  const int lw = standard_rig().index_of("left_wrist"), rw = standard_rig().index_of("right_wrist");
  CHECK((scaled[0][lw] - scaled[0][rw]).norm() == Approx(r * (s.positions[lw] - s.positions[rw]).norm()).epsilon(1e-12));
}

TEST_CASE("robot forward kinematics") {
  const RobotModel& m = default_robot_model();
  const RobotState rest = fk_robot(m, Eigen::VectorXd::Zero(m.dof_count()), Mat3::Identity(), Vec3::Zero());
  for (size_t i = 1; i < m.frames.size(); ++i) {
    const auto& f = m.frames[i];
    CHECK((rest.positions[i] - rest.positions[f.parent] - f.offset).norm() < 1e-15);
  }

  const RobotModel planar = planar_arm();
  const int tip = 3;
  CHECK((fk_robot(planar, Eigen::Vector2d(kPi / 2, 0), Mat3::Identity(), Vec3::Zero()).positions[tip] - Vec3(0, 2, 0)).norm() < 1e-15);
  CHECK((fk_robot(planar, Eigen::Vector2d(kPi / 2, kPi / 2), Mat3::Identity(), Vec3::Zero()).positions[tip] - Vec3(-1, 1, 0)).norm() < 1e-15);
  CHECK(fk_robot(planar, Eigen::Vector2d(0.7, 0.0), Mat3::Identity(), Vec3::Zero()).positions[tip].norm() == Approx(2.0).epsilon(1e-15));
}

TEST_CASE("link lengths are rigid") {
  const RobotModel& m = default_robot_model();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const RobotState st = fk_robot(m, random_angles(rng), test::random_rotation(rng), test::random_vec(rng));
    for (size_t k = 1; k < m.frames.size(); ++k) {
      const auto& f = m.frames[k];
      CHECK((st.positions[k] - st.positions[f.parent]).norm() == Approx(f.offset.norm()).epsilon(1e-12));
    }
  }
}

TEST_CASE("robot model text errors carry the line") {
  CHECK_THROWS_AS(parse_robot_model("wmr-robot 2\n"), ValidationError);
  try {
    parse_robot_model("wmr-robot 1\nname x\nstanding_height 1\nroot base\njoint a nowhere 0 0 0 0 0 1 -1 1\n");
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_robot_model("wmr-robot 1\nname x\nstanding_height 1\nroot base\njoint a base 0 0 0 0 0 1 1 -1\n"), ValidationError);
  CHECK_NOTHROW(default_robot_model().validate());
  CHECK(default_robot_model().dof_count() == 19);
}

TEST_CASE("joint map") {
  const JointMap m = parse_joint_map(default_joint_map_text());
  CHECK(m.pairs.size() == kJointMapPairs);
  CHECK(m.by_human("left_knee").robot == "left_knee");
  CHECK(m.by_robot("torso").human == "spine3");
  CHECK_THROWS_AS(m.by_human("tail"), ValidationError);
  CHECK_NOTHROW(m.validate(standard_rig(), default_robot_model()));

  JointMap short_map = m;
  short_map.pairs.pop_back();
  CHECK_THROWS_AS(short_map.validate(standard_rig(), default_robot_model()), ValidationError);
  JointMap bad = m;
  bad.pairs[0].robot = "no_such_frame";
  CHECK_THROWS_AS(bad.validate(standard_rig(), default_robot_model()), ValidationError);
  CHECK_THROWS_AS(parse_joint_map("wmr-jointmap 1\nmap pelvis\n"), ValidationError);
}

TEST_CASE("calibration maps the rest human onto the rest robot") {
  const JointMap& m = calibrated_map();
  for (const auto& p : m.pairs) CHECK(so3::is_rotation(p.offset, 1e-12));
  // An explicit offset is kept.
  JointMap given = parse_joint_map(std::string(default_joint_map_text()) + "offset left_knee 0 -1 0 1 0 0 0 0 1\n");
  calibrate_offsets(given, default_robot_model());
  CHECK((given.by_human("left_knee").offset - so3::exp(Vec3(0, 0, kPi / 2))).norm() < 1e-15);
}

TEST_CASE("stage one recovers reachable targets") {
  const RobotModel& m = default_robot_model();
  std::mt19937_64 rng(4);
  for (int i = 0; i < 30; ++i) {
    const Eigen::VectorXd q = random_angles(rng);
    const FrameTargets t = targets_from(q, test::random_rotation(rng), test::random_vec(rng));
    IkConfig cfg;
    cfg.tol_pos = 1e-4;
    const IkResult r = ik_stage1(chains(), t, m.seed_angles(), cfg);
    for (int l = 0; l < kLimbCount; ++l) CHECK(r.ee_error[l] < 1e-3);
    CHECK(m.within_limits(r.q));
  }
}

TEST_CASE("stage one leaves a satisfied rest pose alone") {
  const RobotModel& m = default_robot_model();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.dof_count());
  const IkResult r = ik_stage1(chains(), targets_from(zero), zero, IkConfig{});
  CHECK((r.q - zero).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("stage one straightens a limb toward an unreachable target") {
  const RobotModel& m = default_robot_model();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.dof_count());
  FrameTargets t = targets_from(zero);
  const RobotState rest = fk_robot(m, zero, t.root_rotation, t.root_position);
  const int shoulder = m.frame_index("left_shoulder_pitch");
  const int elbow = m.frame_index("left_elbow");
  const int wrist = m.frame_index("left_wrist");
  const double reach = m.frames[elbow].offset.norm() + m.frames[wrist].offset.norm();
  t.end_effector[kLeftArm] = rest.positions[shoulder] + Vec3(1.0, 0.3, 0.2);
  const IkResult r = ik_stage1(chains(), t, m.seed_angles(), IkConfig{});
  const RobotState st = fk_robot(m, r.q, t.root_rotation, t.root_position);
  const double dist = (t.end_effector[kLeftArm] - st.positions[shoulder]).norm();
  CHECK(r.ee_error[kLeftArm] == Approx(dist - reach).epsilon(1e-3).scale(1.0));
  CHECK(std::abs(r.q[m.frames[elbow].dof]) < 1e-2);
}

TEST_CASE("stage two keeps an already consistent elbow") {
  const RobotModel& m = default_robot_model();
  std::mt19937_64 rng(5);
  const Eigen::VectorXd q = random_angles(rng);
  const FrameTargets t = targets_from(q);
  IkResult s1;
  s1.q = q;
  const IkResult s2 = ik_stage2(chains(), t, s1, IkConfig{}, 10.0, 1.0);
  CHECK((s2.q - q).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(m.within_limits(s2.q));
}

TEST_CASE("stage two follows a swivelled elbow") {
  const RobotModel& m = default_robot_model();
  std::mt19937_64 rng(6);
  const IkConfig cfg;
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd q = random_angles(rng);
    FrameTargets t = targets_from(q);
    const RobotState st = fk_robot(m, q, t.root_rotation, t.root_position);
    for (int l : {kLeftArm, kRightArm}) {
      const Vec3 s = st.positions[m.frame_index(l == kLeftArm ? "left_shoulder_pitch" : "right_shoulder_pitch")];
      const Vec3 axis = (t.end_effector[l] - s).normalized();
      t.intermediate[l] = s + so3::exp(0.4 * axis) * (t.intermediate[l] - s);
    }
    const IkResult s1 = ik_stage1(chains(), t, q, cfg);
    const IkResult s2 = ik_stage2(chains(), t, s1, cfg, 10.0, 1.0);
    for (int l : {kLeftArm, kRightArm}) {
      CHECK(s2.mid_error[l] < s1.mid_error[l]);
      CHECK(s2.mid_error[l] < 1e-2);
      CHECK(s2.ee_error[l] < 2.0 * cfg.tol_pos);
    }
    CHECK(m.within_limits(s2.q));
  }
}

TEST_CASE("stage two without intermediate weight is stage one") {
  std::mt19937_64 rng(7);
  const FrameTargets t = targets_from(random_angles(rng));
  const IkResult s1 = ik_stage1(chains(), t, default_robot_model().seed_angles(), IkConfig{});
  const IkResult s2 = ik_stage2(chains(), t, s1, IkConfig{}, 10.0, 0.0);
  CHECK(s2.q == s1.q);
}

namespace {

struct Grounded {
  std::vector<FramePrediction> frames;
  std::vector<Vec3> roots;
  double ground = 0.0;
};

Grounded oracle_grounded(int frames) {
  SyntheticScenario s;
  s.frames = frames;
  s.subjects = 1;
  const MotionFile truth = synth_generate(s).truth;
  Grounded g;
  for (const auto* r : subject_records(truth, 0)) {
    g.frames.push_back(r->pred);
    g.roots.push_back(r->world->translation);
    g.ground = r->world->ground_height;
  }
  return g;
}

RetargetedMotion retarget(const Grounded& g) {
  return retarget_sequence(g.frames, g.roots, g.ground, standard_rig(), standard_decoder(),
                           default_robot_model(), calibrated_map(), RetargetConfig{});
}

}  // namespace

TEST_CASE("a standing human gives a still robot") {
  const Grounded walk = oracle_grounded(1);
  Grounded still;
  still.ground = walk.ground;
  for (int t = 0; t < 10; ++t) {
    still.frames.push_back(walk.frames[0]);
    still.frames.back().frame_index = t;
    still.roots.push_back(walk.roots[0]);
  }
  const RetargetedMotion r = retarget(still);
  for (size_t t = 2; t < r.frames.size(); ++t) {
    CHECK((r.frames[t].q - r.frames[t - 1].q).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("oracle walk retargets within limits and tolerance") {
  const Grounded g = oracle_grounded(90);
  const RetargetedMotion a = retarget(g);
  const RetargetedMotion b = retarget(g);
  REQUIRE(a.frames.size() == g.frames.size());
  const RobotModel& m = default_robot_model();
  for (size_t t = 0; t < a.frames.size(); ++t) {
    CHECK(m.within_limits(a.frames[t].q));
    for (int l = 0; l < kLimbCount; ++l) CHECK(a.frames[t].stage2.ee_error[l] < 0.02);
    CHECK(a.frames[t].q == b.frames[t].q);
    CHECK(a.frames[t].root_translation == b.frames[t].root_translation);
  }
  CHECK(a.dof_names == m.dof_names());
}

TEST_CASE("warm starts need no more iterations than cold starts") {
  const Grounded g = oracle_grounded(90);
  const RetargetedMotion warm = retarget(g);
  const RobotModel& m = default_robot_model();
  const double ratio = auto_height_ratio(standard_rig(), m, g.frames);
  int ok = 0;
  for (size_t t = 1; t < g.frames.size(); ++t) {
    const FrameTargets tg = frame_targets(standard_rig(), standard_decoder(), g.frames[t], g.roots[t],
                                          g.ground, chains(), calibrated_map(), Mat3::Identity(), ratio);
    const IkResult cold = ik_stage1(chains(), tg, m.seed_angles(), IkConfig{});
    ok += warm.frames[t].stage1.iterations <= cold.iterations;
  }
  CHECK(ok >= 0.9 * static_cast<double>(g.frames.size() - 1));
}

TEST_CASE("retarget input validation") {
  const Grounded g = oracle_grounded(3);
  std::vector<Vec3> short_roots(g.roots.begin(), g.roots.begin() + 2);
  CHECK_THROWS_AS(retarget_sequence(g.frames, short_roots, g.ground, standard_rig(), standard_decoder(),
                                    default_robot_model(), calibrated_map(), RetargetConfig{}),
                  ValidationError);
  RetargetConfig bad;
  bad.flip = 2.0 * Mat3::Identity();
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
