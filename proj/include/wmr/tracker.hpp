#pragma once

// SORT-style detect-track association: constant-velocity Kalman filter over
// [u, v, s, r, du, dv, ds] and Hungarian assignment on 1 - IoU.

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wmr/rig.hpp"

namespace wmr {

struct BoxObservation {
  double u = 0;  // center x, px
  double v = 0;  // center y, px
  double s = 0;  // area, px^2
  double r = 0;  // width / height
};

/// Throws ValidationError for zero-width or zero-height boxes.
BoxObservation bbox_to_obs(const BBox& box);
BBox obs_to_bbox(const BoxObservation& obs);

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;

struct KalmanState {
  Vec7 mean = Vec7::Zero();
  Mat7 covariance = Mat7::Identity();
};

/// Noise model. The base Q and R follow the canonical SORT constants (velocity terms
/// down-weighted by 0.01, area/aspect observation noise x10); the scales multiply them.
struct KalmanNoise {
  double process_noise = 1.0;
  double observation_noise = 1.0;

  Mat7 process_covariance() const;
  Eigen::Matrix4d observation_covariance() const;
};

/// Floor applied to the predicted area when it would become non-positive.
inline constexpr double kMinBoxArea = 1e-6;

KalmanState kalman_init(const BoxObservation& obs);
KalmanState kalman_predict(const KalmanState& state, const KalmanNoise& noise = {});
/// Throws NumericalError when the innovation covariance is singular.
KalmanState kalman_update(const KalmanState& state, const BoxObservation& obs,
                          const KalmanNoise& noise = {});

double iou(const BBox& a, const BBox& b);

/// Minimum-cost one-to-one assignment. Rectangular inputs are padded internally; the
/// result holds min(rows, cols) (row, col) pairs sorted by row.
std::vector<std::pair<int, int>> hungarian_assign(const Eigen::MatrixXd& cost);

struct TrackerConfig {
  double iou_gate = 0.3;
  int max_age = 30;
  int min_hits = 3;
  KalmanNoise noise;

  void validate() const;
};

struct Track {
  int id = 0;
  KalmanState state;
  int hits = 0;
  int age_since_update = 0;
  bool confirmed = false;  // latched once hits >= min_hits
  std::vector<FramePrediction> frames;
};

/// One tracking session (one video). Ids are never reused.
struct TrackerSession {
  std::vector<Track> active;
  std::vector<Track> retired;
  int next_id = 0;
};

/// Track id per detection, in detection order.
std::vector<int> tracker_step(TrackerSession& session,
                              const std::vector<FramePrediction>& detections,
                              const TrackerConfig& cfg);

/// Retires every active track and returns the confirmed ones ordered by id.
std::vector<Track> tracker_finish(TrackerSession& session);

}  // namespace wmr
