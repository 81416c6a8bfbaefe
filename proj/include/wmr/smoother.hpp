#pragma once

// Sliding-window latent-space smoothing. Each window minimizes
//   lambda_latent * L_latent + lambda_root * L_root + L_smooth + lambda_bound * L_bound
// over per-frame (z_model, z_expr, root rotation increment, root translation), with
// decode -> forward kinematics -> kinematic derivatives -> Charbonnier inside the
// objective. Gradients are analytic (reverse-mode through the joint tree).

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "wmr/adam.hpp"
#include "wmr/parallel.hpp"
#include "wmr/rig.hpp"

namespace wmr {

struct SmootherConfig {
  int window_len = 60;
  int overlap = 10;
  double lambda_latent = 1000.0;
  double lambda_root = 1000.0;
  double lambda_bound = 1e4;
  double lambda_v = 0.0;
  double lambda_a = 1.0;
  double lambda_omega = 0.0;
  double lambda_alpha = 1.0;
  double charbonnier_beta = 1.0;
  double charbonnier_eps = 1e-3;
  std::vector<double> joint_weights;  // one per rig joint
  AdamConfig adam{5e-4, 0.9, 0.999, 1e-8, 300};

  /// Trunk/root 1.0, hips and shoulders 0.8, knees/elbows/ankles/wrists 0.5,
  /// feet/hands/head 0.2; collars count as trunk.
  static std::vector<double> default_joint_weights(const SkeletonRig& rig);
  static SmootherConfig defaults(const SkeletonRig& rig);
  void validate(const SkeletonRig& rig) const;
};

double charbonnier(double x, double beta, double eps);

/// Finite differences of world joint positions and rotations over a window, indexed
/// [t][joint]. Sizes: v and omega T-1, a and alpha T-2.
struct KinematicDerivatives {
  std::vector<std::vector<Vec3>> v, a, omega, alpha;
};

/// Throws ValidationError for fewer than 3 frames.
KinematicDerivatives kinematic_derivatives(std::span<const SkeletonState> states);

/// Optimization variables of one frame.
struct FrameVars {
  Eigen::VectorXd z_model;
  Eigen::VectorXd z_expr;
  Vec3 root_delta = Vec3::Zero();  // axis-angle composed on the left of the initial root rotation
  Vec3 root_translation = Vec3::Zero();
};

inline constexpr int kVarsPerFrame = kLatentDim + kExprDim + 6;

/// Flat window variables: per frame [z_model | z_expr | root_delta | root_translation].
struct WindowVariables {
  Eigen::VectorXd flat;

  int frames() const { return static_cast<int>(flat.size() / kVarsPerFrame); }
  auto z_model(int t) { return flat.segment<kLatentDim>(t * kVarsPerFrame); }
  auto z_model(int t) const { return flat.segment<kLatentDim>(t * kVarsPerFrame); }
  auto z_expr(int t) { return flat.segment<kExprDim>(t * kVarsPerFrame + kLatentDim); }
  auto z_expr(int t) const { return flat.segment<kExprDim>(t * kVarsPerFrame + kLatentDim); }
  auto root_delta(int t) { return flat.segment<3>(t * kVarsPerFrame + kLatentDim + kExprDim); }
  auto root_delta(int t) const {
    return flat.segment<3>(t * kVarsPerFrame + kLatentDim + kExprDim);
  }
  auto root_translation(int t) {
    return flat.segment<3>(t * kVarsPerFrame + kLatentDim + kExprDim + 3);
  }
  auto root_translation(int t) const {
    return flat.segment<3>(t * kVarsPerFrame + kLatentDim + kExprDim + 3);
  }

  FrameVars frame(int t) const;
  void set_frame(int t, const FrameVars& v);
  static WindowVariables from_predictions(std::span<const FramePrediction> frames);
};

/// Fixed data of one window: the initial estimates being smoothed and, when the window
/// overlaps an optimized predecessor, that predecessor's values on the leading frames.
struct WindowProblem {
  const SkeletonRig* rig = nullptr;
  const LatentDecoder* decoder = nullptr;
  std::vector<FramePrediction> initial;
  std::vector<FrameVars> previous_tail;  // frames [0, previous_tail.size()) of this window
};

double loss_latent(const WindowVariables& vars, std::span<const FramePrediction> initial);
/// Mean over frames of |translation - initial|^2 + |root_delta|^2.
double loss_root(const WindowVariables& vars, std::span<const FramePrediction> initial);
double loss_smooth(const KinematicDerivatives& d, const SmootherConfig& cfg);
double loss_boundary(const WindowVariables& vars, std::span<const FrameVars> previous_tail);

struct SmootherLoss {
  double latent = 0, root = 0, smooth = 0, boundary = 0;
  double total = 0;
};

/// FK states of every frame in the window for the given variables.
std::vector<SkeletonState> window_states(const WindowProblem& problem,
                                         const WindowVariables& vars,
                                         Exec exec = Exec::Parallel);

SmootherLoss total_loss(const WindowProblem& problem, const WindowVariables& vars,
                        const SmootherConfig& cfg, Exec exec = Exec::Parallel);

/// Loss and its analytic gradient with respect to vars.flat. Throws NumericalError if the
/// loss is not finite.
SmootherLoss loss_and_gradient(const WindowProblem& problem, const WindowVariables& vars,
                               const SmootherConfig& cfg, Eigen::VectorXd& grad,
                               Exec exec = Exec::Parallel);

struct WindowSpan {
  int start = 0;
  int end = 0;  // exclusive
};

/// Windows of window_len advancing by window_len - overlap; the last window is pulled
/// back to end exactly at the sequence end.
std::vector<WindowSpan> window_schedule(int frames, int window_len, int overlap);

struct WindowReport {
  WindowSpan span;
  std::vector<double> loss_history;  // total loss before each Adam step, then final
};

struct SmoothReport {
  std::vector<WindowReport> windows;
};

/// Runs Adam window by window, left to right. Shape and scale are not variables.
std::vector<FramePrediction> smooth_track(std::span<const FramePrediction> frames,
                                          const SkeletonRig& rig, const LatentDecoder& decoder,
                                          const SmootherConfig& cfg,
                                          SmoothReport* report = nullptr,
                                          Exec exec = Exec::Parallel);

}  // namespace wmr
