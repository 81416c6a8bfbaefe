#include "wmr/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "wmr/errors.hpp"

namespace wmr {

BoxObservation bbox_to_obs(const BBox& box) {
  if (!box.valid()) throw ValidationError("degenerate bounding box (zero width or height)");
  const double w = box.width();
  const double h = box.height();
  return {box.x1 + 0.5 * w, box.y1 + 0.5 * h, w * h, w / h};
}

BBox obs_to_bbox(const BoxObservation& obs) {
  const double w = std::sqrt(obs.s * obs.r);
  const double h = obs.s / w;
  return {obs.u - 0.5 * w, obs.v - 0.5 * h, obs.u + 0.5 * w, obs.v + 0.5 * h};
}

Mat7 KalmanNoise::process_covariance() const {
  Vec7 d;
  d << 1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4;
  return (process_noise * d).asDiagonal();
}

Eigen::Matrix4d KalmanNoise::observation_covariance() const {
  Eigen::Vector4d d(1.0, 1.0, 10.0, 10.0);
  return (observation_noise * d).asDiagonal();
}

namespace {

Mat7 transition() {
  Mat7 f = Mat7::Identity();
  f(0, 4) = f(1, 5) = f(2, 6) = 1.0;
  return f;
}

}  // namespace

KalmanState kalman_init(const BoxObservation& obs) {
  KalmanState st;
  st.mean << obs.u, obs.v, obs.s, obs.r, 0.0, 0.0, 0.0;
  Vec7 p;
  p << 10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4;
  st.covariance = p.asDiagonal();
  return st;
}

KalmanState kalman_predict(const KalmanState& state, const KalmanNoise& noise) {
  static const Mat7 f = transition();
  KalmanState out;
  out.mean = f * state.mean;
  if (out.mean[2] <= 0.0) {
    out.mean[2] = kMinBoxArea;
    out.mean[6] = 0.0;
  }
  out.covariance = f * state.covariance * f.transpose() + noise.process_covariance();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

KalmanState kalman_update(const KalmanState& state, const BoxObservation& obs,
                          const KalmanNoise& noise) {
  Eigen::Matrix<double, 4, 7> h = Eigen::Matrix<double, 4, 7>::Zero();
  h.leftCols<4>().setIdentity();
  const Eigen::Vector4d z(obs.u, obs.v, obs.s, obs.r);
  const Eigen::Vector4d innovation = z - h * state.mean;
  const Eigen::Matrix4d s = h * state.covariance * h.transpose() + noise.observation_covariance();

  Eigen::LDLT<Eigen::Matrix4d> ldlt(s);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 0.0 || !s.allFinite()) {
    throw NumericalError("kalman_update: singular innovation covariance");
  }
  // K = P H^T S^-1
  const Eigen::Matrix<double, 7, 4> gain =
      ldlt.solve(h * state.covariance).transpose();

  KalmanState out;
  out.mean = state.mean + gain * innovation;
  // Joseph form keeps the posterior symmetric positive semi-definite.
  const Mat7 ikh = Mat7::Identity() - gain * h;
  out.covariance = ikh * state.covariance * ikh.transpose() +
                   gain * noise.observation_covariance() * gain.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.width() * a.height() + b.width() * b.height() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::pair<int, int>> hungarian_assign(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows == 0 || cols == 0) return {};
  if (!cost.allFinite()) throw ValidationError("hungarian_assign: non-finite cost");

  // Shortest augmenting path with row/column potentials (1-based, column 0 is the
  // virtual source). Rows are inserted in index order and ties pick the lowest column,
  // so equal-cost problems resolve deterministically.
  const int n = std::max(rows, cols);
  auto at = [&](int i, int j) { return (i < rows && j < cols) ? cost(i, j) : 0.0; };
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<std::pair<int, int>> out;
  for (int j = 1; j <= n; ++j) {
    const int i = match[j] - 1;
    if (i < rows && j - 1 < cols) out.emplace_back(i, j - 1);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void TrackerConfig::validate() const {
  if (!(iou_gate > 0.0 && iou_gate < 1.0)) throw ValidationError("tracker.iou_gate must be in (0,1)");
  if (max_age <= 0) throw ValidationError("tracker.max_age must be positive");
  if (min_hits <= 0) throw ValidationError("tracker.min_hits must be positive");
  if (!(noise.process_noise > 0.0)) throw ValidationError("tracker.process_noise must be positive");
  if (!(noise.observation_noise > 0.0)) {
    throw ValidationError("tracker.observation_noise must be positive");
  }
}

namespace {

BBox predicted_box(const KalmanState& st) {
  BoxObservation o{st.mean[0], st.mean[1], st.mean[2], st.mean[3]};
  if (!(o.s > 0.0) || !(o.r > 0.0)) return {};
  return obs_to_bbox(o);
}

}  // namespace

std::vector<int> tracker_step(TrackerSession& session,
                              const std::vector<FramePrediction>& detections,
                              const TrackerConfig& cfg) {
  for (Track& t : session.active) {
    t.state = kalman_predict(t.state, cfg.noise);
    ++t.age_since_update;
  }

  const int nt = static_cast<int>(session.active.size());
  const int nd = static_cast<int>(detections.size());
  std::vector<int> assigned(nd, -1);
  std::vector<char> track_matched(nt, 0);

  if (nt > 0 && nd > 0) {
    Eigen::MatrixXd overlap(nt, nd);
    for (int i = 0; i < nt; ++i) {
      const BBox pb = predicted_box(session.active[i].state);
      for (int j = 0; j < nd; ++j) {
        overlap(i, j) = pb.valid() ? iou(pb, detections[j].bbox) : 0.0;
      }
    }
    const Eigen::MatrixXd cost = Eigen::MatrixXd::Ones(nt, nd) - overlap;
    for (const auto& [i, j] : hungarian_assign(cost)) {
      if (overlap(i, j) < cfg.iou_gate) continue;
      Track& t = session.active[i];
      t.state = kalman_update(t.state, bbox_to_obs(detections[j].bbox), cfg.noise);
      ++t.hits;
      t.age_since_update = 0;
      if (t.hits >= cfg.min_hits) t.confirmed = true;
      t.frames.push_back(detections[j]);
      assigned[j] = t.id;
      track_matched[i] = 1;
    }
  }

  for (int j = 0; j < nd; ++j) {
    if (assigned[j] >= 0) continue;
    Track t;
    t.id = session.next_id++;
    t.state = kalman_init(bbox_to_obs(detections[j].bbox));
    t.hits = 1;
    t.confirmed = t.hits >= cfg.min_hits;
    t.frames.push_back(detections[j]);
    assigned[j] = t.id;
    session.active.push_back(std::move(t));
  }

  std::vector<Track> keep;
  keep.reserve(session.active.size());
  for (Track& t : session.active) {
    if (t.age_since_update > cfg.max_age) {
      session.retired.push_back(std::move(t));
    } else {
      keep.push_back(std::move(t));
    }
  }
  session.active = std::move(keep);
  return assigned;
}

std::vector<Track> tracker_finish(TrackerSession& session) {
  for (Track& t : session.active) session.retired.push_back(std::move(t));
  session.active.clear();
  std::vector<Track> out;
  for (Track& t : session.retired) {
    if (t.confirmed) out.push_back(t);
  }
  std::sort(out.begin(), out.end(), [](const Track& a, const Track& b) { return a.id < b.id; });
  return out;
}

}  // namespace wmr
