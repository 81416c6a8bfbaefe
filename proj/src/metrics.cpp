#include "wmr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "wmr/errors.hpp"
#include "wmr/ground.hpp"
#include "wmr/retarget.hpp"
#include "wmr/tracker.hpp"

namespace wmr {

std::vector<double> frame_accelerations(const JointTrack& p) {
  std::vector<double> out;
  for (size_t t = 1; t + 1 < p.size(); ++t) {
    double s = 0.0;
    for (size_t j = 0; j < p[t].size(); ++j) s += (p[t + 1][j] - 2.0 * p[t][j] + p[t - 1][j]).norm();
    out.push_back(p[t].empty() ? 0.0 : s / static_cast<double>(p[t].size()));
  }
  return out;
}

double mean_joint_acceleration(const JointTrack& p) {
  const std::vector<double> a = frame_accelerations(p);
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (double x : a) s += x;
  return s / static_cast<double>(a.size());
}

double joint_rmse(const JointTrack& a, const JointTrack& b) {
  if (a.size() != b.size()) throw ValidationError("metrics: length mismatch");
  double s = 0.0;
  size_t n = 0;
  for (size_t t = 0; t < a.size(); ++t) {
    if (a[t].size() != b[t].size()) throw ValidationError("metrics: joint count mismatch");
    for (size_t j = 0; j < a[t].size(); ++j) {
      s += (a[t][j] - b[t][j]).squaredNorm();
      ++n;
    }
  }
  return n == 0 ? 0.0 : std::sqrt(s / static_cast<double>(n));
}

double foot_slide(const JointTrack& p, std::span<const std::array<double, 2>> contacts,
                  int left_foot, int right_foot) {
  if (contacts.size() != p.size()) throw ValidationError("metrics: contact schedule length mismatch");
  const std::array<int, 2> feet{left_foot, right_foot};
  double s = 0.0;
  int n = 0;
  for (size_t t = 0; t + 1 < p.size(); ++t) {
    for (int f = 0; f < 2; ++f) {
      if (contacts[t][f] >= 0.5 && contacts[t + 1][f] >= 0.5) {
        s += (p[t + 1][feet[f]] - p[t][feet[f]]).head<2>().norm();
        ++n;
      }
    }
  }
  return n == 0 ? 0.0 : s / n;
}

double max_penetration(const JointTrack& p, int left_foot, int right_foot) {
  double m = 0.0;
  for (const auto& frame : p) {
    for (int f : {left_foot, right_foot}) m = std::max(m, -frame[f].z());
  }
  return m;
}

JointTrack grounded_joint_positions(std::span<const MotionRecord* const> records,
                                    std::span<const MotionRecord* const> truth,
                                    const SkeletonRig& rig, const LatentDecoder& decoder) {
  if (truth.empty() || !truth[0]->world) throw ValidationError("metrics: truth needs world fields");
  const Vec3 shift = -to_zup(truth[0]->pred.cam_root_translation) -
                     Vec3(0.0, 0.0, truth[0]->world->ground_height);
  JointTrack out(records.size());
  for (size_t t = 0; t < records.size(); ++t) {
    const MotionRecord& r = *records[t];
    if (r.world) {
      out[t] = human_world_state(rig, decoder, r.pred, r.world->translation, r.world->ground_height).positions;
    } else {
      FramePose pose = pose_from_prediction(decoder, r.pred);
      pose.root_rotation = to_zup(r.pred.cam_root_rotation);
      pose.root_translation = to_zup(r.pred.cam_root_translation) + shift;
      out[t] = forward_kinematics(rig, pose, r.pred.gamma_scale).positions;
    }
  }
  return out;
}

std::map<int, int> match_subjects(const MotionFile& result, const MotionFile& truth) {
  std::map<std::pair<int, int>, std::pair<double, int>> acc;  // (result, truth) -> (sum IoU, n)
  std::map<int, std::vector<const MotionRecord*>> truth_by_frame;
  for (const auto& r : truth.frames) truth_by_frame[r.pred.frame_index].push_back(&r);
  for (const auto& r : result.frames) {
    const auto it = truth_by_frame.find(r.pred.frame_index);
    if (it == truth_by_frame.end()) continue;
    for (const MotionRecord* g : it->second) {
      auto& a = acc[{r.subject_id, g->subject_id}];
      a.first += iou(r.pred.bbox, g->pred.bbox);
      a.second += 1;
    }
  }
  std::vector<std::tuple<double, int, int>> cand;
  for (const auto& [key, v] : acc) cand.emplace_back(v.first / v.second, key.first, key.second);
  std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
  });
  std::map<int, int> out;
  std::set<int> used;
  for (const auto& [score, rid, tid] : cand) {
    if (score <= 0.0 || out.count(rid) || used.count(tid)) continue;
    out[rid] = tid;
    used.insert(tid);
  }
  return out;
}

std::vector<MetricsReport> compute_metrics(const MotionFile& result, const MotionFile& truth,
                                           const SkeletonRig& rig, const LatentDecoder& decoder) {
  const int lf = rig.index_of("left_foot");
  const int rf = rig.index_of("right_foot");
  std::vector<MetricsReport> out;
  for (const auto& [rid, tid] : match_subjects(result, truth)) {
    const auto res = subject_records(result, rid);
    const auto gt = subject_records(truth, tid);
    if (res.size() != gt.size()) {
      throw ValidationError("metrics: length mismatch for subject " + std::to_string(rid) + ": " +
                            std::to_string(res.size()) + " frames vs " + std::to_string(gt.size()) +
                            " in the truth");
    }
    std::vector<std::array<double, 2>> contacts(gt.size());
    for (size_t t = 0; t < gt.size(); ++t) {
      if (res[t]->pred.frame_index != gt[t]->pred.frame_index) {
        throw ValidationError("metrics: frame indices of subject " + std::to_string(rid) + " do not align");
      }
      if (!gt[t]->world) throw ValidationError("metrics: truth needs world fields");
      contacts[t] = gt[t]->world->contact;
    }
    const JointTrack p = grounded_joint_positions(res, gt, rig, decoder);
    const JointTrack q = grounded_joint_positions(gt, gt, rig, decoder);
    MetricsReport m;
    m.subject = rid;
    m.truth_subject = tid;
    m.frames = static_cast<int>(res.size());
    m.mean_acceleration = mean_joint_acceleration(p);
    m.foot_slide = foot_slide(p, contacts, lf, rf);
    m.max_penetration = max_penetration(p, lf, rf);
    m.rmse = joint_rmse(p, q);
    out.push_back(m);
  }
  return out;
}

int count_identity_switches(std::span<const std::vector<std::pair<int, int>>> truth_and_track) {
  std::map<int, int> last;
  int switches = 0;
  for (const auto& frame : truth_and_track) {
    for (const auto& [truth, track] : frame) {
      const auto it = last.find(truth);
      if (it != last.end() && it->second != track) ++switches;
      last[truth] = track;
    }
  }
  return switches;
}

}  // namespace wmr
