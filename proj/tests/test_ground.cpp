#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "wmr/errors.hpp"

using namespace wmr;
using doctest::Approx;

namespace {

std::vector<Vec3> random_traj(std::mt19937_64& rng, int n) {
  std::vector<Vec3> t(n);
  for (auto& p : t) p = test::random_vec(rng);
  return t;
}

GroundProblem walk_problem(const test::OracleWalk& w, const GroundConfig& cfg) {
  return make_ground_problem(w.noisy, standard_rig(), standard_decoder(), cfg);
}

}  // namespace

TEST_CASE("z-up axis mapping") {
  CHECK(to_zup(Vec3(0, -1, 0)) == Vec3(0, 0, 1));
  CHECK(to_zup(Vec3(0, 0, 1)) == Vec3(0, 1, 0));
  CHECK(to_zup(Vec3(1, 0, 0)) == Vec3(1, 0, 0));
  const Mat3& r = zup_from_camera();
  CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-15);
  CHECK(r.determinant() == Approx(1.0));
  std::mt19937_64 rng(1);
  const Mat3 c = test::random_rotation(rng);
  CHECK((to_zup(c) - r * c).norm() < 1e-15);
}

TEST_CASE("foot heights") {
  const SkeletonRig& rig = standard_rig();
  FramePose p;
  p.joint_rotations.assign(rig.joint_count() - 1, Vec3::Zero());
  SkeletonState s = forward_kinematics(rig, p, 1.0);
  const double lz = s.positions[rig.index_of("left_foot")].z();
  const double rz = s.positions[rig.index_of("right_foot")].z();
  auto h = foot_heights(rig, std::span(&s, 1), lz);
  CHECK(h[0][kLeft] == 0.0);
  CHECK(h[0][kRight] == Approx(rz - lz));
  const double ground = lz - 0.05;
  h = foot_heights(rig, std::span(&s, 1), ground);
  CHECK(h[0][kLeft] == Approx(0.05).epsilon(1e-12));
}

TEST_CASE("oracle feet touch the ground when scripted in contact") {
  const SkeletonRig& rig = standard_rig();
  const auto gait = generate_gait(rig, GaitParams{}, 1.0, 120, 30.0, Vec3::Zero(), 0.3);
  std::vector<SkeletonState> states;
  for (const auto& g : gait) states.push_back(forward_kinematics(rig, g.pose, 1.0));
  const auto h = foot_heights(rig, states, 0.0);
  int checked = 0;
  for (size_t t = 0; t < gait.size(); ++t) {
    for (int f = 0; f < 2; ++f) {
      if (!gait[t].contact[f]) continue;
      CHECK(std::abs(h[t][f]) < 5e-3);
      ++checked;
    }
  }
  CHECK(checked >= 120);
}

TEST_CASE("contact probability examples") {
  const ContactConfig cfg;
  FootContact c = contact_probability(0.0, 0.0, cfg);
  CHECK(c.w_base[kLeft] == 1.0);
  CHECK(c.w_base[kRight] == 1.0);
  CHECK(c.alpha[kLeft] == 0.5);
  CHECK(c.p_c[kLeft] == 0.5);
  CHECK(c.p_c[kRight] == 0.5);

  c = contact_probability(0.0, 10.0 * cfg.sigma_h, cfg);
  const double e10 = std::exp(10.0);
  CHECK(c.alpha[kLeft] == Approx(e10 / (e10 + 1.0)).epsilon(1e-12));
  CHECK(c.p_c[kLeft] == Approx(0.99995).epsilon(1e-5));
  CHECK(c.p_c[kRight] < 1e-4);

  c = contact_probability(cfg.sigma_h, 0.3, cfg);
  CHECK(c.w_base[kLeft] == Approx(std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("contact probability properties") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-0.3, 0.3);
  ContactConfig cfg;
  for (int i = 0; i < 10000; ++i) {
    const FootContact c = contact_probability(d(rng), d(rng), cfg);
    CHECK(std::abs(c.alpha[kLeft] + c.alpha[kRight] - 1.0) <= 1e-9);
    for (int f = 0; f < 2; ++f) {
      CHECK(c.p_c[f] >= 0.0);
      CHECK(c.p_c[f] <= c.w_base[f]);
      CHECK(c.w_base[f] <= 1.0);
    }
    const double s = d(rng);
    const FootContact sym = contact_probability(s, s, cfg);
    CHECK(sym.p_c[kLeft] == sym.p_c[kRight]);
  }
}

TEST_CASE("contact probability derivatives") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-0.1, 0.1);
  const ContactConfig cfg;
  const double h = 1e-6;
  for (int i = 0; i < 50; ++i) {
    const double l = d(rng), r = d(rng);
    const FootContact c = contact_probability(l, r, cfg);
    for (int f = 0; f < 2; ++f) {
      const double dl = (contact_probability(l + h, r, cfg).p_c[f] - contact_probability(l - h, r, cfg).p_c[f]) / (2 * h);
      const double dr = (contact_probability(l, r + h, cfg).p_c[f] - contact_probability(l, r - h, cfg).p_c[f]) / (2 * h);
      CHECK(c.dp_dd[f][kLeft] == Approx(dl).epsilon(1e-6).scale(1.0));
      CHECK(c.dp_dd[f][kRight] == Approx(dr).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("slide loss") {
  std::vector<FootPositions> feet(3, FootPositions{Vec3(0, 0, 0), Vec3(1, 0, 0)});
  std::vector<std::array<double, 2>> pc(3, {1.0, 1.0});
  CHECK(loss_slide(feet, pc) == 0.0);

  std::mt19937_64 rng(4);
  for (auto& f : feet) f = {test::random_vec(rng), test::random_vec(rng)};
  std::vector<std::array<double, 2>> airborne(3, {0.0, 0.0});
  CHECK(loss_slide(feet, airborne) == 0.0);

  std::vector<FootPositions> step{{Vec3(0, 0, 0), Vec3(5, 5, 5)}, {Vec3(0.1, 0, 0.3), Vec3(5, 5, 5)}};
  std::vector<std::array<double, 2>> left{{1.0, 0.0}, {1.0, 0.0}};
  CHECK(loss_slide(step, left) == Approx(0.01).epsilon(1e-12));
}

TEST_CASE("penetration loss") {
  std::vector<std::array<double, 2>> h{{0.01, 0.2}, {0.1, 0.05}};
  CHECK(loss_pen(h) == 0.0);
  h[1][0] = -0.1;
  CHECK(loss_pen(h) == Approx(0.01).epsilon(1e-12));

  // Finite-difference sign check: only the penetrating sample moves the loss.
  const double step = 1e-6;
  for (int t = 0; t < 2; ++t) {
    for (int f = 0; f < 2; ++f) {
      auto up = h, down = h;
      up[t][f] += step;
      down[t][f] -= step;
      const double g = (loss_pen(up) - loss_pen(down)) / (2 * step);
      if (t == 1 && f == 0) {
        CHECK(g < 0.0);
      } else {
        CHECK(g == 0.0);
      }
    }
  }
}

TEST_CASE("contact loss") {
  std::vector<std::array<double, 2>> h{{0.0, 0.0}, {0.0, 0.0}};
  std::vector<std::array<double, 2>> pc{{1.0, 1.0}, {1.0, 1.0}};
  CHECK(loss_contact(h, pc) == 0.0);
  h[0][1] = 0.02;
  CHECK(loss_contact(h, pc) == Approx(4e-4).epsilon(1e-12));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& x : h) x = {u(rng), u(rng)};
  for (auto& x : pc) x = {u(rng), u(rng)};
  auto half = pc;
  for (auto& x : half) x = {0.5 * x[0], 0.5 * x[1]};
  CHECK(loss_contact(h, half) == Approx(0.5 * loss_contact(h, pc)).epsilon(1e-14));
}

TEST_CASE("root smoothness loss") {
  CHECK(loss_root_smooth(std::vector<Vec3>(5, Vec3(1, 2, 3)), 1.0, 4.0) == 0.0);

  const Vec3 step(0.1, -0.2, 0.05);
  std::vector<Vec3> line;
  for (int t = 0; t < 6; ++t) line.push_back(Vec3(1, 1, 1) + t * step);
  CHECK(loss_root_smooth(line, 0.0, 4.0) == Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(loss_root_smooth(line, 2.0, 0.0) == Approx(5 * step.squaredNorm() * 2.0).epsilon(1e-12));

  std::mt19937_64 rng(6);
  const auto tr = random_traj(rng, 7);
  double v = 0.0, a = 0.0;
  for (size_t t = 1; t < tr.size(); ++t) v += (tr[t] - tr[t - 1]).squaredNorm();
  for (size_t t = 1; t + 1 < tr.size(); ++t) a += (tr[t + 1] - 2 * tr[t] + tr[t - 1]).squaredNorm();
  CHECK(loss_root_smooth(tr, 1.5, 4.0) == Approx(1.5 * v + 4.0 * a).epsilon(1e-12));
}

TEST_CASE("camera prior loss") {
  std::mt19937_64 rng(7);
  const auto tr = random_traj(rng, 4);
  const Vec3 w(0.5, 1.0, 0.25);
  CHECK(loss_camera_prior(tr, tr, std::vector<double>(4, 0.0), w) == 0.0);

  const auto other = random_traj(rng, 4);
  CHECK(loss_camera_prior(tr, other, std::vector<double>(4, 1.0), w) == 0.0);

  const std::vector<Vec3> root{Vec3(1, 2, 3)}, cam{Vec3::Zero()};
  CHECK(loss_camera_prior(root, cam, std::vector<double>{0.0}, Vec3(0, 1, 0)) == 4.0);
  CHECK(loss_camera_prior(root, cam, std::vector<double>{1.7}, Vec3(0, 1, 0)) == 0.0);
  CHECK(loss_camera_prior(root, cam, std::vector<double>{-1.0}, Vec3(0, 1, 0)) == 4.0);
  CHECK_THROWS_AS(loss_camera_prior(root, tr, std::vector<double>{0.0}, w), ValidationError);
}

TEST_CASE("ground height estimate") {
  CHECK(estimate_ground_height(std::vector<double>(10, 0.3)) == 0.3);
  std::vector<double> ramp;
  for (int i = 0; i < 100; ++i) ramp.push_back(i / 99.0);
  CHECK(estimate_ground_height(ramp) == Approx(0.05).epsilon(1e-12));
  CHECK_THROWS_AS(estimate_ground_height(std::vector<double>{}), ValidationError);

  // Scripted contact feet sit on the ground in the problem's shifted frame.
  const auto walk = test::oracle_walk(90, NoiseLevels{0, 0, 0, 0, 0}, 8);
  const GroundProblem pb = walk_problem(walk, GroundConfig{});
  for (int t = 0; t < 60; ++t) {
    for (int f = 0; f < 2; ++f) {
      if (walk.contacts[t][f] < 0.5) continue;
      CHECK(std::abs(pb.camera_prior[t].z() + pb.foot_offsets[t][f].z() - pb.ground_height) < 0.01);
    }
  }
}

TEST_CASE("energy terms are non-negative and match the reference") {
  const GroundConfig cfg;
  const auto walk = test::oracle_walk(40, NoiseLevels{0.05, 0.05, 0, 0, 0}, 9);
  const GroundProblem pb = walk_problem(walk, cfg);
  std::mt19937_64 rng(9);
  auto traj = pb.camera_prior;
  for (auto& p : traj) p += test::random_vec(rng, 0.03);

  std::vector<Vec3> gs, gp;
  const GroundEnergy s = ground_energy(pb, traj, cfg, &gs, Exec::Serial);
  const GroundEnergy p = ground_energy(pb, traj, cfg, &gp, Exec::Parallel);
  const GroundEnergy r = ground_energy_reference(pb, traj, cfg);
  for (double x : {s.slide, s.pen, s.contact, s.smooth, s.aux}) CHECK(x >= 0.0);
  CHECK(s.total == p.total);
  CHECK(gs == gp);
  CHECK(s.total == Approx(r.total).epsilon(1e-12));
  CHECK(s.slide == Approx(r.slide).epsilon(1e-12));
  CHECK(s.aux == Approx(r.aux).epsilon(1e-12));
  CHECK(s.total == Approx(cfg.lambda_phy * (s.slide + s.pen + s.contact) + s.smooth + cfg.lambda_aux * s.aux).epsilon(1e-12));
}

TEST_CASE("ground energy gradient matches finite differences") {
  const GroundConfig cfg;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto walk = test::oracle_walk(20, NoiseLevels{0.05, 0.05, 0, 0, 0}, 20 + seed);
    const GroundProblem pb = walk_problem(walk, cfg);
    std::mt19937_64 rng(seed);
    auto traj = pb.camera_prior;
    for (auto& p : traj) p += test::random_vec(rng, 0.02);
    std::vector<Vec3> grad;
    ground_energy(pb, traj, cfg, &grad);
    Eigen::VectorXd x(3 * traj.size()), g(3 * traj.size());
    for (size_t t = 0; t < traj.size(); ++t) {
      x.segment<3>(3 * t) = traj[t];
      g.segment<3>(3 * t) = grad[t];
    }
    const double worst = test::worst_gradient_error(x, g, [&](const Eigen::VectorXd& y) {
      std::vector<Vec3> tr(traj.size());
      for (size_t t = 0; t < tr.size(); ++t) tr[t] = y.segment<3>(3 * t);
      return ground_energy(pb, tr, cfg).total;
    });
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("a non-finite trajectory names the diverging term") {
  const GroundConfig cfg;
  const auto walk = test::oracle_walk(10, NoiseLevels{0, 0, 0, 0, 0}, 10);
  const GroundProblem pb = walk_problem(walk, cfg);
  auto traj = pb.camera_prior;
  traj[4].x() = std::numeric_limits<double>::infinity();
  try {
    ground_energy(pb, traj, cfg);
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("diverged in") != std::string::npos);
  }
}

TEST_CASE("optimization pins the first frame and lowers the energy") {
  const GroundConfig cfg;
  const auto walk = test::oracle_walk(90, NoiseLevels{0, 0.05, 0, 0, 0}, 11);
  const GroundResult r = optimize_root(walk.noisy, standard_rig(), standard_decoder(), cfg);
  CHECK(r.trajectory[0] == Vec3::Zero());
  CHECK(r.final_energy.total < r.initial_energy.total);
  CHECK(r.energy_history.size() == static_cast<size_t>(cfg.adam.iters) + 1);

  const GroundProblem pb = walk_problem(walk, cfg);
  std::vector<FootPositions> before, after;
  for (int t = 0; t < pb.frames(); ++t) {
    before.push_back({pb.camera_prior[t] + pb.foot_offsets[t][0], pb.camera_prior[t] + pb.foot_offsets[t][1]});
    after.push_back({r.trajectory[t] + pb.foot_offsets[t][0], r.trajectory[t] + pb.foot_offsets[t][1]});
  }
  auto track = [](const std::vector<FootPositions>& f) {
    JointTrack j;
    for (const auto& x : f) j.push_back({x[0], x[1]});
    return j;
  };
  CHECK(foot_slide(track(after), walk.contacts, 0, 1) <= 0.5 * foot_slide(track(before), walk.contacts, 0, 1));
}

TEST_CASE("camera prior alone reproduces the camera trajectory") {
  GroundConfig cfg;
  cfg.lambda_phy = 0.0;
  cfg.w_vel = cfg.w_acc = 0.0;
  cfg.lambda_aux = 1.0;
  cfg.aniso_w = Vec3(1, 1, 1);
  cfg.contact.sigma_h = 1e-4;  // feet are far from the ground in units of sigma, so p_c vanishes
  cfg.adam.iters = 3000;
  cfg.adam.lr = 1e-3;
  const auto walk = test::oracle_walk(20, NoiseLevels{0, 0.05, 0, 0, 0}, 12);
  const GroundProblem pb = walk_problem(walk, cfg);
  const GroundResult r = optimize_root(walk.noisy, standard_rig(), standard_decoder(), cfg);
  double worst = 0.0;
  for (int t = 1; t < pb.frames(); ++t) worst = std::max(worst, (r.trajectory[t] - pb.camera_prior[t]).norm());
  CHECK(worst < 1e-4);
}

TEST_CASE("noiseless walk stays near its initialization") {
  const GroundConfig cfg;
  const auto walk = test::oracle_walk(90, NoiseLevels{0, 0, 0, 0, 0}, 13);
  const GroundProblem pb = walk_problem(walk, cfg);
  const GroundResult r = optimize_root(walk.noisy, standard_rig(), standard_decoder(), cfg);
  // The swing foot keeps some contact weight near the ground, so the slide and velocity
  // terms shorten the walk along its heading and the contact term lowers swing frames by
  // millimetres; sideways it stays put.
  Vec3 worst = Vec3::Zero();
  for (int t = 0; t < pb.frames(); ++t) {
    worst = worst.cwiseMax((r.trajectory[t] - pb.camera_prior[t]).cwiseAbs());
  }
  CHECK(worst.x() < 1e-3);
  CHECK(worst.z() < 0.01);
  CHECK(worst.y() < 0.25);
}

TEST_CASE("grounding is deterministic across execution paths") {
  const GroundConfig cfg;
  const auto walk = test::oracle_walk(40, NoiseLevels{0, 0.05, 0, 0, 0}, 14);
  const GroundResult a = optimize_root(walk.noisy, standard_rig(), standard_decoder(), cfg, Exec::Serial);
  const GroundResult b = optimize_root(walk.noisy, standard_rig(), standard_decoder(), cfg, Exec::Parallel);
  CHECK(a.trajectory == b.trajectory);
  CHECK(a.energy_history == b.energy_history);
}
