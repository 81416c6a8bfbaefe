#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "test_util.hpp"
#include "wmr/ground.hpp"
#include "wmr/metrics.hpp"
#include "wmr/smoother.hpp"
#include "wmr/synth.hpp"

namespace wmr::test {

/// |fd - an| / max(|fd|, |an|, 1e-6), per coordinate.
inline double relative_error(double fd, double an) {
  return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
}

/// Worst per-coordinate relative error of `grad` against five-point central differences
/// of `f`.
inline double worst_gradient_error(const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                                   const std::function<double(const Eigen::VectorXd&)>& f,
                                   double h = 1e-5) {
  double worst = 0.0;
  Eigen::VectorXd y = x;
  auto at = [&](Eigen::Index i, double step) {
    y[i] = x[i] + step;
    const double v = f(y);
    y[i] = x[i];
    return v;
  };
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double fd = (8.0 * (at(i, h) - at(i, -h)) - (at(i, 2.0 * h) - at(i, -2.0 * h))) / (12.0 * h);
    worst = std::max(worst, relative_error(fd, grad[i]));
  }
  return worst;
}

inline WindowProblem random_window(std::mt19937_64& rng, int frames, int tail) {
  WindowProblem pb;
  pb.rig = &standard_rig();
  pb.decoder = &standard_decoder();
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < frames; ++t) {
    FramePrediction f;
    f.frame_index = t;
    f.z_model = random_vector(rng, kLatentDim, 0.3);
    f.z_expr = random_vector(rng, kExprDim, 0.3);
    f.cam_root_rotation = so3::exp(random_vec(rng, 0.5));
    f.cam_root_translation = Vec3(n(rng), n(rng), 3.0 + n(rng));
    f.gamma_scale = 1.1;
    pb.initial.push_back(f);
  }
  WindowVariables v = WindowVariables::from_predictions(pb.initial);
  for (int t = 0; t < tail; ++t) {
    FrameVars fv = v.frame(t);
    fv.z_model += random_vector(rng, kLatentDim, 0.05);
    fv.root_delta += random_vec(rng, 0.02);
    fv.root_translation += random_vec(rng, 0.05);
    pb.previous_tail.push_back(fv);
  }
  return pb;
}

inline WindowVariables perturbed(std::mt19937_64& rng, const WindowProblem& pb, double sigma) {
  WindowVariables v = WindowVariables::from_predictions(pb.initial);
  v.flat += random_vector(rng, static_cast<int>(v.flat.size()), sigma);
  return v;
}

/// Camera-frame joint positions of a sequence of predictions.
inline JointTrack camera_joints(std::span<const FramePrediction> frames) {
  JointTrack out;
  for (const auto& f : frames) {
    out.push_back(forward_kinematics(standard_rig(), pose_from_prediction(standard_decoder(), f),
                                     f.gamma_scale)
                      .positions);
  }
  return out;
}

inline std::vector<FramePrediction> predictions(std::span<const MotionRecord* const> records) {
  std::vector<FramePrediction> out;
  for (const auto* r : records) out.push_back(r->pred);
  return out;
}

/// Oracle walk of one subject with the given noise; truth and corrupted copies share
/// frame indices.
struct OracleWalk {
  std::vector<FramePrediction> truth;
  std::vector<FramePrediction> noisy;
  std::vector<std::array<double, 2>> contacts;
};

inline OracleWalk oracle_walk(int frames, const NoiseLevels& noise, std::uint64_t seed) {
  SyntheticScenario s;
  s.frames = frames;
  s.subjects = 1;
  s.noise = noise;
  s.seed = seed;
  const SynthOutput out = synth_generate(s);
  OracleWalk w;
  for (const auto* r : subject_records(out.truth, 0)) {
    w.truth.push_back(r->pred);
    w.contacts.push_back(r->world->contact);
  }
  w.noisy = predictions(subject_records(out.corrupted, -1));
  return w;
}

}  // namespace wmr::test
