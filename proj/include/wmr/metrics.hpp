#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wmr/motion_io.hpp"
#include "wmr/rig.hpp"

namespace wmr {

using JointTrack = std::vector<std::vector<Vec3>>;  // [t][joint]

/// Mean over frames and joints of |p(t+1) - 2 p(t) + p(t-1)|, m/frame^2.
double mean_joint_acceleration(const JointTrack& p);
/// Acceleration norm per interior frame (index t-1 for frame t), averaged over joints.
std::vector<double> frame_accelerations(const JointTrack& p);
double joint_rmse(const JointTrack& a, const JointTrack& b);
/// Mean horizontal displacement of a foot over frame pairs where it is in scripted contact
/// at both ends, m/frame. contacts[t] = {left, right} in [0, 1]; >= 0.5 counts as contact.
double foot_slide(const JointTrack& p, std::span<const std::array<double, 2>> contacts,
                  int left_foot, int right_foot);
/// max(0, -z) over both feet and all frames; the ground is z = 0.
double max_penetration(const JointTrack& p, int left_foot, int right_foot);

struct MetricsReport {
  int subject = -1;
  int truth_subject = -1;
  int frames = 0;
  double mean_acceleration = 0.0;
  double foot_slide = 0.0;
  double max_penetration = 0.0;
  double rmse = 0.0;
  std::map<std::string, double> runtimes;  // seconds per stage
};

/// Joint positions of one subject in the grounded frame of the truth: ground at z = 0 and
/// the truth root at frame 0 above the origin. Records with world fields use them; others
/// are camera-frame and are placed with the truth's camera pose.
JointTrack grounded_joint_positions(std::span<const MotionRecord* const> records,
                                    std::span<const MotionRecord* const> truth,
                                    const SkeletonRig& rig, const LatentDecoder& decoder);

/// Result subject id -> truth subject id, by best mean box IoU (greedy, descending).
std::map<int, int> match_subjects(const MotionFile& result, const MotionFile& truth);

/// One report per matched result subject. Throws ValidationError on length mismatch.
std::vector<MetricsReport> compute_metrics(const MotionFile& result, const MotionFile& truth,
                                           const SkeletonRig& rig, const LatentDecoder& decoder);

/// Frames where tracked ids disagree with the previous frame's id for the same truth subject.
int count_identity_switches(std::span<const std::vector<std::pair<int, int>>> truth_and_track);

}  // namespace wmr
