#pragma once

// Contact-aware world root recovery. Root translations T(t), t >= 1, minimize
//   lambda_phy (L_slide + L_pen + L_contact) + L_smooth + lambda_aux L_aux
// with Adam while T(0) stays at the origin. Foot contact probabilities are recomputed
// from the current variables at every evaluation and differentiated through.

#include <array>
#include <span>
#include <vector>

#include "wmr/adam.hpp"
#include "wmr/parallel.hpp"
#include "wmr/rig.hpp"

namespace wmr {

/// Camera (x right, y down, z forward) to Z-up world (x right, y forward, z up).
const Mat3& zup_from_camera();
Vec3 to_zup(const Vec3& cam);
Mat3 to_zup(const Mat3& cam_rotation);

struct ContactConfig {
  double sigma_h = 0.03;
  double k_contact = 10.0;
  double ground_height = 0.0;
};

enum Foot { kLeft = 0, kRight = 1 };

/// Contact model of one frame, indexed by Foot.
struct FootContact {
  std::array<double, 2> w_base{};
  std::array<double, 2> alpha{};
  std::array<double, 2> p_c{};
  /// d p_c[f] / d d[g]
  std::array<std::array<double, 2>, 2> dp_dd{};
};

/// Gaussian height weight, softmax over the two feet, and their product.
FootContact contact_probability(double d_left, double d_right, const ContactConfig& cfg);

/// Signed foot heights above cfg.ground_height, [t][foot], for world FK states.
std::vector<std::array<double, 2>> foot_heights(const SkeletonRig& rig,
                                                std::span<const SkeletonState> world_states,
                                                double ground_height);

using FootPositions = std::array<Vec3, 2>;

double loss_slide(std::span<const FootPositions> feet,
                  std::span<const std::array<double, 2>> p_c);
double loss_pen(std::span<const std::array<double, 2>> heights);
double loss_contact(std::span<const std::array<double, 2>> heights,
                    std::span<const std::array<double, 2>> p_c);
double loss_root_smooth(std::span<const Vec3> traj, double w_vel, double w_acc);
/// p_c_total[t] is clamped to [0, 1] before use.
double loss_camera_prior(std::span<const Vec3> traj, std::span<const Vec3> camera_prior,
                         std::span<const double> p_c_total, const Vec3& aniso_w);

/// Linear-interpolated quantile of foot z samples.
double estimate_ground_height(std::span<const double> foot_z, double quantile = 0.05);

struct GroundConfig {
  ContactConfig contact;
  double lambda_phy = 10.0;
  double lambda_aux = 0.1;
  double w_vel = 1.0;
  double w_acc = 4.0;
  Vec3 aniso_w{0.5, 1.0, 0.25};  // lateral, forward, vertical
  AdamConfig adam{1e-2, 0.9, 0.999, 1e-8, 500};
  bool estimate_ground = true;
  int ground_window = 60;         // frames used by the ground-height estimate
  double ground_quantile = 0.05;  // of all foot heights in that window

  void validate() const;
};

/// Fixed inputs of the root optimization, all in the Z-up world frame.
struct GroundProblem {
  std::vector<FootPositions> foot_offsets;  // foot minus root, per frame
  std::vector<Vec3> camera_prior;           // camera root, shifted so frame 0 is the origin
  double ground_height = 0.0;

  int frames() const { return static_cast<int>(camera_prior.size()); }
};

struct GroundEnergy {
  double slide = 0, pen = 0, contact = 0, smooth = 0, aux = 0;
  double total = 0;
};

/// Energy of a full trajectory (frame 0 included). If grad is non-null it receives
/// dE/dT for every frame, frame 0 included. Throws NumericalError naming the first
/// non-finite term.
GroundEnergy ground_energy(const GroundProblem& pb, std::span<const Vec3> traj,
                           const GroundConfig& cfg, std::vector<Vec3>* grad = nullptr,
                           Exec exec = Exec::Parallel);

/// Same energy assembled from the individual loss functions (serial reference).
GroundEnergy ground_energy_reference(const GroundProblem& pb, std::span<const Vec3> traj,
                                     const GroundConfig& cfg);

/// World-frame inputs derived from camera-frame predictions.
GroundProblem make_ground_problem(std::span<const FramePrediction> frames, const SkeletonRig& rig,
                                  const LatentDecoder& decoder, const GroundConfig& cfg);

struct GroundResult {
  std::vector<Vec3> trajectory;       // T_global(t); trajectory[0] is exactly zero
  std::vector<Mat3> root_rotation;    // world root rotation per frame
  double ground_height = 0.0;
  std::vector<FootContact> contacts;  // at the final iterate
  GroundEnergy initial_energy;
  GroundEnergy final_energy;
  std::vector<double> energy_history;
};

GroundResult optimize_root(std::span<const FramePrediction> frames, const SkeletonRig& rig,
                           const LatentDecoder& decoder, const GroundConfig& cfg,
                           Exec exec = Exec::Parallel);

}  // namespace wmr
