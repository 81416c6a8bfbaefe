#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "wmr/rig.hpp"

namespace wmr {

/// Per-track shape and scale shared by every frame of the track.
struct LockedIdentity {
  Eigen::VectorXd beta_final;
  double gamma_final = 1.0;
};

enum class LockStatistic { Mean, Median };

/// Component-wise temporal mean (or median) of beta_shape and gamma_scale.
/// Throws ValidationError on an empty track.
LockedIdentity lock_identity(std::span<const FramePrediction> frames,
                             LockStatistic stat = LockStatistic::Mean);

/// Overwrites beta_shape and gamma_scale of every frame; nothing else changes.
std::vector<FramePrediction> apply_locked(std::span<const FramePrediction> frames,
                                          const LockedIdentity& id);

}  // namespace wmr
