#include "wmr/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wmr/errors.hpp"

namespace wmr {

std::vector<double> SmootherConfig::default_joint_weights(const SkeletonRig& rig) {
  std::vector<double> w(rig.joint_count(), 1.0);
  for (int j = 0; j < rig.joint_count(); ++j) {
    const std::string& n = rig.joint_names[j];
    auto has = [&](const char* s) { return n.find(s) != std::string::npos; };
    if (has("hip") || has("shoulder")) {
      w[j] = 0.8;
    } else if (has("knee") || has("elbow") || has("ankle") || has("wrist")) {
      w[j] = 0.5;
    } else if (has("foot") || has("hand") || n == "head") {
      w[j] = 0.2;
    }
  }
  return w;
}

SmootherConfig SmootherConfig::defaults(const SkeletonRig& rig) {
  SmootherConfig cfg;
  cfg.joint_weights = default_joint_weights(rig);
  return cfg;
}

void SmootherConfig::validate(const SkeletonRig& rig) const {
  if (window_len < 3) throw ValidationError("smoother.window_len must be at least 3");
  if (overlap < 0 || overlap >= window_len) {
    throw ValidationError("smoother.overlap must satisfy 0 <= overlap < window_len");
  }
  for (double x : {lambda_latent, lambda_root, lambda_bound, lambda_v, lambda_a, lambda_omega,
                   lambda_alpha}) {
    if (!std::isfinite(x) || x < 0.0) throw ValidationError("smoother weights must be finite and >= 0");
  }
  if (!(charbonnier_beta > 0.0) || !(charbonnier_eps > 0.0)) {
    throw ValidationError("smoother.charbonnier_beta and charbonnier_eps must be positive");
  }
  if (static_cast<int>(joint_weights.size()) != rig.joint_count()) {
    throw ValidationError("smoother.joint_weights needs one entry per rig joint (" +
                          std::to_string(rig.joint_count()) + ")");
  }
  for (double w : joint_weights) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("smoother.joint_weights must be >= 0");
  }
  if (adam.iters < 0 || !(adam.lr > 0.0)) throw ValidationError("smoother.adam settings invalid");
}

double charbonnier(double x, double beta, double eps) { return std::sqrt(beta * x * x + eps); }

KinematicDerivatives kinematic_derivatives(std::span<const SkeletonState> states) {
  const int T = static_cast<int>(states.size());
  if (T < 3) throw ValidationError("kinematic_derivatives needs at least 3 frames");
  const int J = static_cast<int>(states.front().positions.size());
  KinematicDerivatives d;
  d.v.assign(T - 1, std::vector<Vec3>(J));
  d.omega.assign(T - 1, std::vector<Vec3>(J));
  d.a.assign(T - 2, std::vector<Vec3>(J));
  d.alpha.assign(T - 2, std::vector<Vec3>(J));
  for (int t = 0; t + 1 < T; ++t) {
    for (int j = 0; j < J; ++j) {
      d.v[t][j] = states[t + 1].positions[j] - states[t].positions[j];
      d.omega[t][j] = so3::log(states[t + 1].rotations[j] * states[t].rotations[j].transpose());
    }
  }
  for (int t = 0; t + 2 < T; ++t) {
    for (int j = 0; j < J; ++j) {
      d.a[t][j] = states[t + 2].positions[j] - 2.0 * states[t + 1].positions[j] +
                  states[t].positions[j];
      d.alpha[t][j] = d.omega[t + 1][j] - d.omega[t][j];
    }
  }
  return d;
}

FrameVars WindowVariables::frame(int t) const {
  FrameVars f;
  f.z_model = z_model(t);
  f.z_expr = z_expr(t);
  f.root_delta = root_delta(t);
  f.root_translation = root_translation(t);
  return f;
}

void WindowVariables::set_frame(int t, const FrameVars& v) {
  z_model(t) = v.z_model;
  z_expr(t) = v.z_expr;
  root_delta(t) = v.root_delta;
  root_translation(t) = v.root_translation;
}

WindowVariables WindowVariables::from_predictions(std::span<const FramePrediction> frames) {
  WindowVariables w;
  w.flat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(frames.size()) * kVarsPerFrame);
  for (int t = 0; t < static_cast<int>(frames.size()); ++t) {
    if (frames[t].z_model.size() != kLatentDim || frames[t].z_expr.size() != kExprDim) {
      throw ValidationError("frame " + std::to_string(frames[t].frame_index) +
                            ": latent dimensions do not match the smoother");
    }
    w.z_model(t) = frames[t].z_model;
    w.z_expr(t) = frames[t].z_expr;
    w.root_translation(t) = frames[t].cam_root_translation;
  }
  return w;
}

double loss_latent(const WindowVariables& vars, std::span<const FramePrediction> initial) {
  const int T = vars.frames();
  if (T == 0) return 0.0;
  double sum = 0.0;
  for (int t = 0; t < T; ++t) {
    sum += (vars.z_model(t) - initial[t].z_model).squaredNorm() +
           (vars.z_expr(t) - initial[t].z_expr).squaredNorm();
  }
  return sum / T;
}

double loss_root(const WindowVariables& vars, std::span<const FramePrediction> initial) {
  const int T = vars.frames();
  if (T == 0) return 0.0;
  double sum = 0.0;
  for (int t = 0; t < T; ++t) {
    sum += (vars.root_translation(t) - initial[t].cam_root_translation).squaredNorm() +
           vars.root_delta(t).squaredNorm();
  }
  return sum / T;
}

double loss_smooth(const KinematicDerivatives& d, const SmootherConfig& cfg) {
  const double b = cfg.charbonnier_beta;
  const double e = cfg.charbonnier_eps;
  const int J = static_cast<int>(cfg.joint_weights.size());
  double total = 0.0;
  for (int j = 0; j < J; ++j) {
    double sv = 0, sa = 0, so = 0, sal = 0;
    for (const auto& f : d.v) sv += charbonnier(f[j].norm(), b, e);
    for (const auto& f : d.a) sa += charbonnier(f[j].norm(), b, e);
    for (const auto& f : d.omega) so += charbonnier(f[j].norm(), b, e);
    for (const auto& f : d.alpha) sal += charbonnier(f[j].norm(), b, e);
    total += cfg.joint_weights[j] *
             (cfg.lambda_v * sv + cfg.lambda_a * sa + cfg.lambda_omega * so + cfg.lambda_alpha * sal);
  }
  return total;
}

double loss_boundary(const WindowVariables& vars, std::span<const FrameVars> previous_tail) {
  const int k = std::min<int>(static_cast<int>(previous_tail.size()), vars.frames());
  if (k == 0) return 0.0;
  double sum = 0.0;
  for (int t = 0; t < k; ++t) {
    const FrameVars& p = previous_tail[t];
    sum += (vars.z_model(t) - p.z_model).squaredNorm() + (vars.z_expr(t) - p.z_expr).squaredNorm() +
           (vars.root_translation(t) - p.root_translation).squaredNorm() +
           (vars.root_delta(t) - p.root_delta).squaredNorm();
  }
  return sum / k;
}

namespace {

FramePose window_pose(const WindowProblem& pb, const WindowVariables& vars, int t) {
  FramePose pose;
  pose.root_rotation = so3::exp(vars.root_delta(t)) * pb.initial[t].cam_root_rotation;
  pose.root_translation = vars.root_translation(t);
  pose.joint_rotations = pb.decoder->decode(vars.z_model(t));
  return pose;
}

void check_problem(const WindowProblem& pb, const WindowVariables& vars) {
  if (pb.rig == nullptr || pb.decoder == nullptr) throw ValidationError("window problem has no rig/decoder");
  if (vars.frames() != static_cast<int>(pb.initial.size())) {
    throw ValidationError("window variables and initial estimates differ in length");
  }
}

}  // namespace

std::vector<SkeletonState> window_states(const WindowProblem& problem,
                                         const WindowVariables& vars, Exec exec) {
  check_problem(problem, vars);
  const std::ptrdiff_t T = vars.frames();
  std::vector<SkeletonState> states(T);
  auto body = [&](std::ptrdiff_t t) {
    states[t] = forward_kinematics(*problem.rig, window_pose(problem, vars, static_cast<int>(t)),
                                   problem.initial[t].gamma_scale);
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < T; ++t) body(t);
  } else {
    for (std::ptrdiff_t t = 0; t < T; ++t) body(t);
  }
  return states;
}

SmootherLoss total_loss(const WindowProblem& problem, const WindowVariables& vars,
                        const SmootherConfig& cfg, Exec exec) {
  const auto states = window_states(problem, vars, exec);
  SmootherLoss l;
  l.latent = loss_latent(vars, problem.initial);
  l.root = loss_root(vars, problem.initial);
  l.smooth = loss_smooth(kinematic_derivatives(states), cfg);
  l.boundary = loss_boundary(vars, problem.previous_tail);
  l.total = cfg.lambda_latent * l.latent + cfg.lambda_root * l.root + l.smooth +
            cfg.lambda_bound * l.boundary;
  return l;
}

namespace {

// Runs `body(i)` for i in [0, n) with the requested execution policy. Bodies only write
// slot i of their outputs.
template <typename F>
void for_each_index(std::ptrdiff_t n, Exec exec, F&& body) {
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
  }
}

using JointVecs = std::vector<Vec3>;

}  // namespace

SmootherLoss loss_and_gradient(const WindowProblem& problem, const WindowVariables& vars,
                               const SmootherConfig& cfg, Eigen::VectorXd& grad, Exec exec) {
  check_problem(problem, vars);
  const SkeletonRig& rig = *problem.rig;
  const LatentDecoder& dec = *problem.decoder;
  const int T = vars.frames();
  const int J = rig.joint_count();
  if (T < 3) throw ValidationError("smoother window needs at least 3 frames");
  const double beta = cfg.charbonnier_beta;
  const double eps = cfg.charbonnier_eps;
  const auto& w = cfg.joint_weights;

  // Forward: decode + FK per frame.
  std::vector<JointVecs> theta(T);
  std::vector<Mat3> root_exp(T);
  std::vector<SkeletonState> st(T);
  for_each_index(T, exec, [&](std::ptrdiff_t t) {
    FramePose pose;
    root_exp[t] = so3::exp(vars.root_delta(t));
    pose.root_rotation = root_exp[t] * problem.initial[t].cam_root_rotation;
    pose.root_translation = vars.root_translation(t);
    pose.joint_rotations = dec.decode(vars.z_model(t));
    st[t] = forward_kinematics(rig, pose, problem.initial[t].gamma_scale);
    theta[t] = std::move(pose.joint_rotations);
  });

  // Velocities and angular velocities.
  std::vector<JointVecs> v(T - 1, JointVecs(J)), om(T - 1, JointVecs(J));
  std::vector<std::vector<Mat3>> jinv(T - 1, std::vector<Mat3>(J));
  for_each_index(T - 1, exec, [&](std::ptrdiff_t t) {
    for (int j = 0; j < J; ++j) {
      v[t][j] = st[t + 1].positions[j] - st[t].positions[j];
      om[t][j] = so3::log(st[t + 1].rotations[j] * st[t].rotations[j].transpose());
      jinv[t][j] = so3::left_jacobian_inverse(om[t][j]);
    }
  });

  // Per-term Charbonnier values and their gradients with respect to v, a, omega, alpha.
  std::vector<JointVecs> gv(T - 1, JointVecs(J)), ga(T - 2, JointVecs(J));
  std::vector<JointVecs> gom(T - 1, JointVecs(J)), gal(T - 2, JointVecs(J));
  std::vector<double> smooth_t(T - 1, 0.0);
  for_each_index(T - 1, exec, [&](std::ptrdiff_t t) {
    double s = 0.0;
    for (int j = 0; j < J; ++j) {
      const double rv = charbonnier(v[t][j].norm(), beta, eps);
      const double ro = charbonnier(om[t][j].norm(), beta, eps);
      s += w[j] * (cfg.lambda_v * rv + cfg.lambda_omega * ro);
      gv[t][j] = (w[j] * cfg.lambda_v * beta / rv) * v[t][j];
      gom[t][j] = (w[j] * cfg.lambda_omega * beta / ro) * om[t][j];
      if (t + 2 < T) {
        const Vec3 a = st[t + 2].positions[j] - 2.0 * st[t + 1].positions[j] + st[t].positions[j];
        const Vec3 al = om[t + 1][j] - om[t][j];
        const double ra = charbonnier(a.norm(), beta, eps);
        const double ral = charbonnier(al.norm(), beta, eps);
        s += w[j] * (cfg.lambda_a * ra + cfg.lambda_alpha * ral);
        ga[t][j] = (w[j] * cfg.lambda_a * beta / ra) * a;
        gal[t][j] = (w[j] * cfg.lambda_alpha * beta / ral) * al;
      }
    }
    smooth_t[t] = s;
  });

  // omega_t feeds alpha_{t-1} (+) and alpha_t (-).
  std::vector<JointVecs> gom_total(T - 1, JointVecs(J));
  for_each_index(T - 1, exec, [&](std::ptrdiff_t t) {
    for (int j = 0; j < J; ++j) {
      Vec3 g = gom[t][j];
      if (t >= 1 && t - 1 < T - 2) g += gal[t - 1][j];
      if (t < T - 2) g -= gal[t][j];
      gom_total[t][j] = g;
    }
  });

  // Gather adjoints of world positions and (left-tangent) world rotations per frame,
  // then back-propagate through the joint tree.
  grad = Eigen::VectorXd::Zero(vars.flat.size());
  const int K = std::min<int>(static_cast<int>(problem.previous_tail.size()), T);
  std::vector<double> fid_t(T, 0.0), root_t(T, 0.0), bound_t(T, 0.0);
  for_each_index(T, exec, [&](std::ptrdiff_t tt) {
    const int t = static_cast<int>(tt);
    JointVecs gp(J, Vec3::Zero()), ar(J, Vec3::Zero());
    for (int j = 0; j < J; ++j) {
      Vec3 p = Vec3::Zero();
      if (t >= 1) p += gv[t - 1][j];
      if (t < T - 1) p -= gv[t][j];
      if (t < T - 2) p += ga[t][j];
      if (t >= 1 && t - 1 < T - 2) p -= 2.0 * ga[t - 1][j];
      if (t >= 2) p += ga[t - 2][j];
      gp[j] = p;
      Vec3 r = Vec3::Zero();
      if (t < T - 1) r -= jinv[t][j] * gom_total[t][j];
      if (t >= 1) r += jinv[t - 1][j].transpose() * gom_total[t - 1][j];
      ar[j] = r;
    }

    Eigen::VectorXd gtheta(dec.pose_dim());
    const auto& pos = st[t].positions;
    const auto& rot = st[t].rotations;
    for (int j = J - 1; j >= 1; --j) {
      const int p = rig.parent[j];
      gtheta.segment<3>(3 * (j - 1)) =
          so3::left_jacobian(theta[t][j - 1]).transpose() * (rot[p].transpose() * ar[j]);
      ar[p] += ar[j] + (pos[j] - pos[p]).cross(gp[j]);
      gp[p] += gp[j];
    }

    const Eigen::Index base = static_cast<Eigen::Index>(t) * kVarsPerFrame;
    auto g_z = grad.segment<kLatentDim>(base);
    auto g_e = grad.segment<kExprDim>(base + kLatentDim);
    auto g_d = grad.segment<3>(base + kLatentDim + kExprDim);
    auto g_tr = grad.segment<3>(base + kLatentDim + kExprDim + 3);
    g_z = dec.basis.transpose() * gtheta;
    g_d = so3::left_jacobian(vars.root_delta(t)).transpose() * ar[0];
    g_tr = gp[0];

    const FramePrediction& init = problem.initial[t];
    const Eigen::VectorXd dz = vars.z_model(t) - init.z_model;
    const Eigen::VectorXd de = vars.z_expr(t) - init.z_expr;
    const Vec3 dtr = vars.root_translation(t) - init.cam_root_translation;
    const Vec3 dd = vars.root_delta(t);
    fid_t[t] = dz.squaredNorm() + de.squaredNorm();
    root_t[t] = dtr.squaredNorm() + dd.squaredNorm();
    const double cl = 2.0 * cfg.lambda_latent / T;
    const double cr = 2.0 * cfg.lambda_root / T;
    g_z += cl * dz;
    g_e += cl * de;
    g_tr += cr * dtr;
    g_d += cr * dd;

    if (t < K) {
      const FrameVars& pv = problem.previous_tail[t];
      const Eigen::VectorXd bz = vars.z_model(t) - pv.z_model;
      const Eigen::VectorXd be = vars.z_expr(t) - pv.z_expr;
      const Vec3 btr = vars.root_translation(t) - pv.root_translation;
      const Vec3 bd = vars.root_delta(t) - pv.root_delta;
      bound_t[t] = bz.squaredNorm() + be.squaredNorm() + btr.squaredNorm() + bd.squaredNorm();
      const double cb = 2.0 * cfg.lambda_bound / K;
      g_z += cb * bz;
      g_e += cb * be;
      g_tr += cb * btr;
      g_d += cb * bd;
    }
  });

  SmootherLoss l;
  for (int t = 0; t < T; ++t) {
    l.latent += fid_t[t];
    l.root += root_t[t];
    l.boundary += bound_t[t];
  }
  for (int t = 0; t + 1 < T; ++t) l.smooth += smooth_t[t];
  l.latent /= T;
  l.root /= T;
  l.boundary = K > 0 ? l.boundary / K : 0.0;
  l.total = cfg.lambda_latent * l.latent + cfg.lambda_root * l.root + l.smooth +
            cfg.lambda_bound * l.boundary;
  if (!std::isfinite(l.total) || !grad.allFinite()) {
    throw NumericalError("smoother: non-finite loss or gradient (latent=" + std::to_string(l.latent) +
                         ", smooth=" + std::to_string(l.smooth) +
                         ", boundary=" + std::to_string(l.boundary) + ")");
  }
  return l;
}

std::vector<WindowSpan> window_schedule(int frames, int window_len, int overlap) {
  std::vector<WindowSpan> out;
  if (frames <= 0) return out;
  if (frames <= window_len) {
    out.push_back({0, frames});
    return out;
  }
  const int stride = window_len - overlap;
  int start = 0;
  while (true) {
    if (start + window_len >= frames) {
      out.push_back({std::max(0, frames - window_len), frames});
      break;
    }
    out.push_back({start, start + window_len});
    start += stride;
  }
  return out;
}

std::vector<FramePrediction> smooth_track(std::span<const FramePrediction> frames,
                                          const SkeletonRig& rig, const LatentDecoder& decoder,
                                          const SmootherConfig& cfg, SmoothReport* report,
                                          Exec exec) {
  cfg.validate(rig);
  const int T = static_cast<int>(frames.size());
  if (T < 3) throw ValidationError("smooth_track needs at least 3 frames");

  std::vector<FrameVars> result(T);
  const WindowVariables input = WindowVariables::from_predictions(frames);
  for (int t = 0; t < T; ++t) result[t] = input.frame(t);

  int prev_end = 0;
  for (const WindowSpan& span : window_schedule(T, cfg.window_len, cfg.overlap)) {
    WindowProblem pb;
    pb.rig = &rig;
    pb.decoder = &decoder;
    pb.initial.assign(frames.begin() + span.start, frames.begin() + span.end);
    const int k = std::max(0, prev_end - span.start);
    pb.previous_tail.assign(result.begin() + span.start, result.begin() + span.start + k);

    WindowVariables vars = WindowVariables::from_predictions(pb.initial);
    for (int t = 0; t < k; ++t) vars.set_frame(t, pb.previous_tail[t]);

    WindowReport wr;
    wr.span = span;
    AdamMoments mom = AdamMoments::zeros(vars.flat.size());
    Eigen::VectorXd grad;
    for (int it = 1; it <= cfg.adam.iters; ++it) {
      const SmootherLoss l = loss_and_gradient(pb, vars, cfg, grad, exec);
      wr.loss_history.push_back(l.total);
      adam_update(vars.flat, grad, mom, it, cfg.adam);
    }
    wr.loss_history.push_back(loss_and_gradient(pb, vars, cfg, grad, exec).total);

    for (int t = 0; t < span.end - span.start; ++t) result[span.start + t] = vars.frame(t);
    prev_end = span.end;
    if (report != nullptr) report->windows.push_back(std::move(wr));
  }

  std::vector<FramePrediction> out(frames.begin(), frames.end());
  for (int t = 0; t < T; ++t) {
    out[t].z_model = result[t].z_model;
    out[t].z_expr = result[t].z_expr;
    out[t].cam_root_rotation = so3::exp(result[t].root_delta) * frames[t].cam_root_rotation;
    out[t].cam_root_translation = result[t].root_translation;
  }
  return out;
}

}  // namespace wmr
