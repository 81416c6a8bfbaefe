#include "wmr/ground.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wmr/errors.hpp"

namespace wmr {

const Mat3& zup_from_camera() {
  static const Mat3 r = [] {
    Mat3 m;
    m << 1.0, 0.0, 0.0,
         0.0, 0.0, 1.0,
         0.0, -1.0, 0.0;
    return m;
  }();
  return r;
}

Vec3 to_zup(const Vec3& cam) { return zup_from_camera() * cam; }
Mat3 to_zup(const Mat3& cam_rotation) { return zup_from_camera() * cam_rotation; }

FootContact contact_probability(double d_left, double d_right, const ContactConfig& cfg) {
  FootContact c;
  const double s2 = cfg.sigma_h * cfg.sigma_h;
  const std::array<double, 2> d{d_left, d_right};
  std::array<double, 2> dw_dd{};
  for (int f = 0; f < 2; ++f) {
    c.w_base[f] = std::exp(-d[f] * d[f] / (2.0 * s2));
    dw_dd[f] = -d[f] / s2 * c.w_base[f];
  }
  // Two-way softmax written as logistic functions so equal inputs give exactly 1/2.
  const double k = cfg.k_contact;
  c.alpha[kLeft] = 1.0 / (1.0 + std::exp(k * (c.w_base[kRight] - c.w_base[kLeft])));
  c.alpha[kRight] = 1.0 / (1.0 + std::exp(k * (c.w_base[kLeft] - c.w_base[kRight])));
  for (int f = 0; f < 2; ++f) c.p_c[f] = c.w_base[f] * c.alpha[f];

  for (int f = 0; f < 2; ++f) {
    for (int g = 0; g < 2; ++g) {
      const double delta = f == g ? 1.0 : 0.0;
      const double dalpha_dw = k * c.alpha[f] * (delta - c.alpha[g]);
      const double dp_dw = delta * c.alpha[f] + c.w_base[f] * dalpha_dw;
      c.dp_dd[f][g] = dp_dw * dw_dd[g];
    }
  }
  return c;
}

std::vector<std::array<double, 2>> foot_heights(const SkeletonRig& rig,
                                                std::span<const SkeletonState> world_states,
                                                double ground_height) {
  const int lf = rig.index_of("left_foot");
  const int rf = rig.index_of("right_foot");
  std::vector<std::array<double, 2>> out(world_states.size());
  for (size_t t = 0; t < world_states.size(); ++t) {
    out[t] = {world_states[t].positions[lf].z() - ground_height,
              world_states[t].positions[rf].z() - ground_height};
  }
  return out;
}

double loss_slide(std::span<const FootPositions> feet, std::span<const std::array<double, 2>> p_c) {
  double s = 0.0;
  for (size_t t = 0; t + 1 < feet.size(); ++t) {
    for (int f = 0; f < 2; ++f) {
      s += p_c[t][f] * (feet[t + 1][f] - feet[t][f]).head<2>().squaredNorm();
    }
  }
  return s;
}

double loss_pen(std::span<const std::array<double, 2>> heights) {
  double s = 0.0;
  for (const auto& h : heights) {
    for (double d : h) {
      const double pen = std::max(0.0, -d);
      s += pen * pen;
    }
  }
  return s;
}

double loss_contact(std::span<const std::array<double, 2>> heights,
                    std::span<const std::array<double, 2>> p_c) {
  double s = 0.0;
  for (size_t t = 0; t < heights.size(); ++t) {
    for (int f = 0; f < 2; ++f) s += p_c[t][f] * heights[t][f] * heights[t][f];
  }
  return s;
}

double loss_root_smooth(std::span<const Vec3> traj, double w_vel, double w_acc) {
  double sv = 0.0, sa = 0.0;
  for (size_t t = 0; t + 1 < traj.size(); ++t) sv += (traj[t + 1] - traj[t]).squaredNorm();
  for (size_t t = 0; t + 2 < traj.size(); ++t) {
    sa += (traj[t + 2] - 2.0 * traj[t + 1] + traj[t]).squaredNorm();
  }
  return w_vel * sv + w_acc * sa;
}

double loss_camera_prior(std::span<const Vec3> traj, std::span<const Vec3> camera_prior,
                         std::span<const double> p_c_total, const Vec3& aniso_w) {
  if (traj.size() != camera_prior.size() || traj.size() != p_c_total.size()) {
    throw ValidationError("loss_camera_prior: length mismatch");
  }
  double s = 0.0;
  for (size_t t = 0; t < traj.size(); ++t) {
    const Vec3 dev = traj[t] - camera_prior[t];
    s += (1.0 - std::clamp(p_c_total[t], 0.0, 1.0)) * aniso_w.dot(dev.cwiseAbs2());
  }
  return s;
}

double estimate_ground_height(std::span<const double> foot_z, double quantile) {
  if (foot_z.empty()) throw ValidationError("estimate_ground_height: no samples");
  std::vector<double> v(foot_z.begin(), foot_z.end());
  std::sort(v.begin(), v.end());
  const double pos = quantile * static_cast<double>(v.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

void GroundConfig::validate() const {
  if (!(contact.sigma_h > 0.0)) throw ValidationError("ground.sigma_h must be positive");
  if (!(contact.k_contact > 0.0)) throw ValidationError("ground.k_contact must be positive");
  for (double x : {lambda_phy, lambda_aux, w_vel, w_acc, aniso_w.x(), aniso_w.y(), aniso_w.z()}) {
    if (!std::isfinite(x) || x < 0.0) throw ValidationError("ground weights must be finite and >= 0");
  }
  if (!std::isfinite(contact.ground_height)) throw ValidationError("ground.ground_height must be finite");
  if (adam.iters < 0 || !(adam.lr > 0.0)) throw ValidationError("ground.adam settings invalid");
  if (ground_window < 1) throw ValidationError("ground.ground_window must be positive");
  if (!(ground_quantile >= 0.0 && ground_quantile <= 1.0)) {
    throw ValidationError("ground.ground_quantile must be in [0, 1]");
  }
}

namespace {

template <typename F>
void for_each_index(std::ptrdiff_t n, Exec exec, F&& body) {
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
  }
}

void check_finite(const GroundEnergy& e) {
  const std::pair<const char*, double> terms[] = {{"L_slide", e.slide},   {"L_pen", e.pen},
                                                  {"L_contact", e.contact}, {"L_smooth", e.smooth},
                                                  {"L_aux", e.aux}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) {
      throw NumericalError(std::string("ground energy diverged in ") + name);
    }
  }
}

}  // namespace

GroundEnergy ground_energy(const GroundProblem& pb, std::span<const Vec3> traj,
                           const GroundConfig& cfg, std::vector<Vec3>* grad, Exec exec) {
  const int T = pb.frames();
  if (static_cast<int>(traj.size()) != T || static_cast<int>(pb.foot_offsets.size()) != T) {
    throw ValidationError("ground_energy: trajectory length mismatch");
  }
  const double g0 = pb.ground_height;

  // Per frame: feet, heights, contact model, and the frame-local energy terms.
  std::vector<FootPositions> feet(T);
  std::vector<FootContact> con(T);
  std::vector<std::array<double, 2>> d(T);
  for_each_index(T, exec, [&](std::ptrdiff_t t) {
    for (int f = 0; f < 2; ++f) {
      feet[t][f] = traj[t] + pb.foot_offsets[t][f];
      d[t][f] = feet[t][f].z() - g0;
    }
    con[t] = contact_probability(d[t][0], d[t][1], cfg.contact);
  });

  std::vector<double> e_slide(T, 0.0), e_pen(T, 0.0), e_con(T, 0.0), e_sm(T, 0.0), e_aux(T, 0.0);
  std::vector<std::array<double, 2>> dE_dp(T);  // dE / d p_c[f] at frame t
  std::vector<std::array<Eigen::Vector2d, 2>> slide_g(T);  // dE / d foot_xy(t+1) from step t
  std::vector<Vec3> vel_g(T, Vec3::Zero()), acc_g(T, Vec3::Zero());
  for_each_index(T, exec, [&](std::ptrdiff_t t) {
    const Vec3 dev = traj[t] - pb.camera_prior[t];
    const double aux_dev = cfg.aniso_w.dot(dev.cwiseAbs2());
    const double pc_sum = con[t].p_c[0] + con[t].p_c[1];
    const double pc_tot = std::clamp(pc_sum, 0.0, 1.0);
    const double dclamp = (pc_sum > 0.0 && pc_sum < 1.0) ? 1.0 : 0.0;
    e_aux[t] = (1.0 - pc_tot) * aux_dev;
    for (int f = 0; f < 2; ++f) {
      const double pen = std::max(0.0, -d[t][f]);
      e_pen[t] += pen * pen;
      e_con[t] += con[t].p_c[f] * d[t][f] * d[t][f];
      double dp = cfg.lambda_phy * d[t][f] * d[t][f] - cfg.lambda_aux * dclamp * aux_dev;
      if (t + 1 < T) {
        const Eigen::Vector2d step = (feet[t + 1][f] - feet[t][f]).head<2>();
        e_slide[t] += con[t].p_c[f] * step.squaredNorm();
        dp += cfg.lambda_phy * step.squaredNorm();
        slide_g[t][f] = 2.0 * cfg.lambda_phy * con[t].p_c[f] * step;
      } else {
        slide_g[t][f].setZero();
      }
      dE_dp[t][f] = dp;
    }
    if (t + 1 < T) {
      const Vec3 v = traj[t + 1] - traj[t];
      e_sm[t] += cfg.w_vel * v.squaredNorm();
      vel_g[t] = 2.0 * cfg.w_vel * v;
    }
    if (t + 2 < T) {
      const Vec3 a = traj[t + 2] - 2.0 * traj[t + 1] + traj[t];
      e_sm[t] += cfg.w_acc * a.squaredNorm();
      acc_g[t] = 2.0 * cfg.w_acc * a;
    }
  });

  GroundEnergy e;
  for (int t = 0; t < T; ++t) {
    e.slide += e_slide[t];
    e.pen += e_pen[t];
    e.contact += e_con[t];
    e.smooth += e_sm[t];
    e.aux += e_aux[t];
  }
  e.total = cfg.lambda_phy * (e.slide + e.pen + e.contact) + e.smooth + cfg.lambda_aux * e.aux;
  check_finite(e);

  if (grad != nullptr) {
    grad->assign(T, Vec3::Zero());
    for_each_index(T, exec, [&](std::ptrdiff_t t) {
      Vec3 g = Vec3::Zero();
      // Height-dependent terms act on the z component only.
      double gz = 0.0;
      for (int h = 0; h < 2; ++h) {
        double dE_dd = 0.0;
        for (int f = 0; f < 2; ++f) dE_dd += dE_dp[t][f] * con[t].dp_dd[f][h];
        dE_dd += cfg.lambda_phy * (-2.0 * std::max(0.0, -d[t][h]) + 2.0 * con[t].p_c[h] * d[t][h]);
        gz += dE_dd;
      }
      g.z() += gz;
      for (int f = 0; f < 2; ++f) {
        if (t + 1 < T) g.head<2>() -= slide_g[t][f];
        if (t >= 1) g.head<2>() += slide_g[t - 1][f];
      }
      if (t + 1 < T) g -= vel_g[t];
      if (t >= 1) g += vel_g[t - 1];
      if (t + 2 < T) g += acc_g[t];
      if (t >= 1 && t - 1 + 2 < T) g -= 2.0 * acc_g[t - 1];
      if (t >= 2) g += acc_g[t - 2];
      const Vec3 dev = traj[t] - pb.camera_prior[t];
      const double pc_tot = std::clamp(con[t].p_c[0] + con[t].p_c[1], 0.0, 1.0);
      g += (2.0 * cfg.lambda_aux * (1.0 - pc_tot)) * cfg.aniso_w.cwiseProduct(dev);
      (*grad)[t] = g;
    });
  }
  return e;
}

GroundEnergy ground_energy_reference(const GroundProblem& pb, std::span<const Vec3> traj,
                                     const GroundConfig& cfg) {
  const int T = pb.frames();
  std::vector<FootPositions> feet(T);
  std::vector<std::array<double, 2>> d(T), pc(T);
  std::vector<double> pc_total(T);
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < 2; ++f) {
      feet[t][f] = traj[t] + pb.foot_offsets[t][f];
      d[t][f] = feet[t][f].z() - pb.ground_height;
    }
    const FootContact c = contact_probability(d[t][0], d[t][1], cfg.contact);
    pc[t] = c.p_c;
    pc_total[t] = c.p_c[0] + c.p_c[1];
  }
  GroundEnergy e;
  e.slide = loss_slide(feet, pc);
  e.pen = loss_pen(d);
  e.contact = loss_contact(d, pc);
  e.smooth = loss_root_smooth(traj, cfg.w_vel, cfg.w_acc);
  e.aux = loss_camera_prior(traj, pb.camera_prior, pc_total, cfg.aniso_w);
  e.total = cfg.lambda_phy * (e.slide + e.pen + e.contact) + e.smooth + cfg.lambda_aux * e.aux;
  return e;
}

GroundProblem make_ground_problem(std::span<const FramePrediction> frames, const SkeletonRig& rig,
                                  const LatentDecoder& decoder, const GroundConfig& cfg) {
  cfg.validate();
  const int T = static_cast<int>(frames.size());
  if (T < 3) throw ValidationError("ground optimization needs at least 3 frames");
  const int lf = rig.index_of("left_foot");
  const int rf = rig.index_of("right_foot");

  GroundProblem pb;
  pb.foot_offsets.resize(T);
  pb.camera_prior.resize(T);
  const Vec3 origin = to_zup(frames[0].cam_root_translation);
  for (int t = 0; t < T; ++t) {
    FramePose pose;
    pose.root_rotation = to_zup(frames[t].cam_root_rotation);
    pose.root_translation = Vec3::Zero();
    pose.joint_rotations = decoder.decode(frames[t].z_model);
    const SkeletonState s = forward_kinematics(rig, pose, frames[t].gamma_scale);
    pb.foot_offsets[t] = {s.positions[lf], s.positions[rf]};
    pb.camera_prior[t] = to_zup(frames[t].cam_root_translation) - origin;
  }
  if (cfg.estimate_ground) {
    std::vector<double> z;
    const int n = std::min(T, cfg.ground_window);
    for (int t = 0; t < n; ++t) {
      for (int f = 0; f < 2; ++f) z.push_back(pb.camera_prior[t].z() + pb.foot_offsets[t][f].z());
    }
    pb.ground_height = estimate_ground_height(z, cfg.ground_quantile);
  } else {
    pb.ground_height = cfg.contact.ground_height;
  }
  return pb;
}

GroundResult optimize_root(std::span<const FramePrediction> frames, const SkeletonRig& rig,
                           const LatentDecoder& decoder, const GroundConfig& cfg, Exec exec) {
  const GroundProblem pb = make_ground_problem(frames, rig, decoder, cfg);
  const int T = pb.frames();

  std::vector<Vec3> traj = pb.camera_prior;
  traj[0].setZero();
  Eigen::VectorXd params(3 * (T - 1));
  for (int t = 1; t < T; ++t) params.segment<3>(3 * (t - 1)) = traj[t];

  GroundResult res;
  std::vector<Vec3> grad;
  Eigen::VectorXd flat_grad(params.size());
  AdamMoments mom = AdamMoments::zeros(params.size());
  for (int it = 1; it <= cfg.adam.iters; ++it) {
    const GroundEnergy e = ground_energy(pb, traj, cfg, &grad, exec);
    if (it == 1) res.initial_energy = e;
    res.energy_history.push_back(e.total);
    for (int t = 1; t < T; ++t) flat_grad.segment<3>(3 * (t - 1)) = grad[t];
    adam_update(params, flat_grad, mom, it, cfg.adam);
    for (int t = 1; t < T; ++t) traj[t] = params.segment<3>(3 * (t - 1));
  }
  res.final_energy = ground_energy(pb, traj, cfg, nullptr, exec);
  if (cfg.adam.iters == 0) res.initial_energy = res.final_energy;
  res.energy_history.push_back(res.final_energy.total);

  res.trajectory = traj;
  res.ground_height = pb.ground_height;
  res.root_rotation.resize(T);
  res.contacts.resize(T);
  for (int t = 0; t < T; ++t) {
    res.root_rotation[t] = to_zup(frames[t].cam_root_rotation);
    const double dl = traj[t].z() + pb.foot_offsets[t][0].z() - pb.ground_height;
    const double dr = traj[t].z() + pb.foot_offsets[t][1].z() - pb.ground_height;
    res.contacts[t] = contact_probability(dl, dr, cfg.contact);
  }
  return res;
}

}  // namespace wmr
